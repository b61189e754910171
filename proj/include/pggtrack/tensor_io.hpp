#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pggtrack/errors.hpp"

namespace pggtrack {

// Fixed little-endian tensor container:
//   "PGGT" | version u32 | count u32 | entries
//   entry: name_len u16 | name bytes | dtype u8 | rank u8 | dims u32 x rank | payload
// Payload is row-major raw values; dtype 0 = f32, 1 = u8.
inline constexpr std::uint32_t kContainerVersion = 1;

struct Tensor {
  enum class DType : std::uint8_t { kF32 = 0, kU8 = 1 };

  std::string name;
  DType dtype = DType::kF32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return n;
  }
  static std::size_t dtype_size(DType t) { return t == DType::kF32 ? 4 : 1; }

  static Tensor from_doubles(std::string name, std::vector<std::uint32_t> dims,
                             std::span<const double> values) {
    Tensor t;
    t.name = std::move(name);
    t.dims = std::move(dims);
    if (t.element_count() != values.size())
      throw InvalidInput("tensor dims do not match value count");
    t.payload.resize(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float f = static_cast<float>(values[i]);
      std::memcpy(&t.payload[i * 4], &f, 4);
    }
    return t;
  }

  static Tensor from_bytes(std::string name, std::vector<std::uint32_t> dims,
                           std::span<const std::uint8_t> values) {
    Tensor t;
    t.name = std::move(name);
    t.dtype = DType::kU8;
    t.dims = std::move(dims);
    if (t.element_count() != values.size())
      throw InvalidInput("tensor dims do not match value count");
    t.payload.assign(values.begin(), values.end());
    return t;
  }

  std::vector<double> to_doubles() const {
    if (dtype != DType::kF32) throw InvalidInput("tensor " + name + " is not f32");
    std::vector<double> out(element_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
      float f;
      std::memcpy(&f, &payload[i * 4], 4);
      out[i] = f;
    }
    return out;
  }
};

struct TensorContainer {
  std::vector<Tensor> tensors;

  const Tensor* find(const std::string& name) const {
    for (const Tensor& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
  const Tensor& require(const std::string& name) const {
    const Tensor* t = find(name);
    if (!t) throw InvalidInput("container is missing tensor: " + name);
    return *t;
  }
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& buf, std::uint16_t v) {
  buf.push_back(static_cast<std::uint8_t>(v & 0xff));
  buf.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint64_t offset() const { return offset_; }

  void need(std::size_t n, const char* what) const {
    if (offset_ + n > size_) throw FormatError(std::string("truncated ") + what, offset_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return data_[offset_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(data_[offset_]) |
                      static_cast<std::uint16_t>(data_[offset_ + 1]) << 8;
    offset_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[offset_ + i]) << (8 * i);
    offset_ += 4;
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t n, const char* what) {
    need(n, what);
    std::span<const std::uint8_t> s(data_ + offset_, n);
    offset_ += n;
    return s;
  }
  bool exhausted() const { return offset_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::uint64_t offset_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_container(const TensorContainer& container) {
  std::set<std::string> names;
  for (const Tensor& t : container.tensors) {
    if (!names.insert(t.name).second)
      throw InvalidInput("duplicate tensor name in container: " + t.name);
    if (t.name.size() > 0xffff) throw InvalidInput("tensor name too long");
    if (t.payload.size() != t.element_count() * Tensor::dtype_size(t.dtype))
      throw InvalidInput("tensor payload does not match its dims: " + t.name);
    if (t.dims.size() > 0xff) throw InvalidInput("tensor rank too large");
  }
  std::vector<std::uint8_t> buf;
  buf.push_back('P');
  buf.push_back('G');
  buf.push_back('G');
  buf.push_back('T');
  detail::put_u32(buf, kContainerVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(container.tensors.size()));
  for (const Tensor& t : container.tensors) {
    detail::put_u16(buf, static_cast<std::uint16_t>(t.name.size()));
    buf.insert(buf.end(), t.name.begin(), t.name.end());
    buf.push_back(static_cast<std::uint8_t>(t.dtype));
    buf.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) detail::put_u32(buf, d);
    buf.insert(buf.end(), t.payload.begin(), t.payload.end());
  }
  return buf;
}

inline TensorContainer parse_container(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes.data(), bytes.size());
  r.need(4, "magic");
  static const std::uint8_t magic[4] = {'P', 'G', 'G', 'T'};
  for (int i = 0; i < 4; ++i)
    if (bytes[i] != magic[i]) throw FormatError("bad container magic", i);
  r.bytes(4, "magic");
  const std::uint64_t version_offset = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kContainerVersion) throw FormatError("unsupported container version", version_offset);
  const std::uint32_t count = r.u32("entry count");
  TensorContainer container;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    const std::uint16_t name_len = r.u16("entry name length");
    const std::uint64_t name_offset = r.offset();
    auto name_bytes = r.bytes(name_len, "entry name");
    t.name.assign(name_bytes.begin(), name_bytes.end());
    if (!names.insert(t.name).second) throw FormatError("duplicate tensor name", name_offset);
    const std::uint64_t dtype_offset = r.offset();
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype > 1) throw FormatError("unknown dtype code", dtype_offset);
    t.dtype = static_cast<Tensor::DType>(dtype);
    const std::uint8_t rank = r.u8("rank");
    for (std::uint8_t d = 0; d < rank; ++d) t.dims.push_back(r.u32("dims"));
    const std::size_t payload_size = t.element_count() * Tensor::dtype_size(t.dtype);
    auto payload = r.bytes(payload_size, "payload");
    t.payload.assign(payload.begin(), payload.end());
    container.tensors.push_back(std::move(t));
  }
  if (!r.exhausted()) throw FormatError("trailing bytes after last entry", r.offset());
  return container;
}

// All writes go through a temp file and a rename, so readers never observe a
// partial container.
inline void write_container(const std::filesystem::path& path, const TensorContainer& container) {
  const std::vector<std::uint8_t> bytes = serialize_container(container);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot open for writing: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline TensorContainer read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open for reading: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_container(bytes);
}

// Atomic text write with the same temp-and-rename discipline.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot open for writing: " + tmp.string());
    out << text;
    if (!out) throw InvalidInput("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open for reading: " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace pggtrack
