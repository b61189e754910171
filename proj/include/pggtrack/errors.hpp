#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pggtrack {

// Thrown when a caller violates a documented precondition (bad shape,
// mismatched sizes, unknown names). Maps to CLI exit code 1.
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown by the binary container reader on malformed files. Carries the
// byte offset of the first bad byte. Maps to CLI exit code 2.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& msg, std::uint64_t offset)
      : std::runtime_error(msg + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace pggtrack
