#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pggtrack/errors.hpp"

namespace pggtrack {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }

  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
  double norm1() const { return std::abs(x) + std::abs(y); }
};

struct GridShape {
  int width = 0;
  int height = 0;

  bool operator==(const GridShape& o) const { return width == o.width && height == o.height; }
  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }

  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1;
  }
};

inline void check_shape(const GridShape& s) {
  if (s.width < 1 || s.height < 1) throw InvalidInput("grid shape must be at least 1x1");
}

// Nearest-pixel index of a continuous position; fields are sampled at
// integer centers, origin top-left, x rightward, y downward.
inline int nearest_index(const GridShape& s, double x, double y) {
  int xi = static_cast<int>(std::lround(x));
  int yi = static_cast<int>(std::lround(y));
  if (xi < 0) xi = 0;
  if (yi < 0) yi = 0;
  if (xi >= s.width) xi = s.width - 1;
  if (yi >= s.height) yi = s.height - 1;
  return yi * s.width + xi;
}

// Dense real field over the grid, row-major, one value per pixel.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(GridShape shape, double fill = 0.0)
      : shape_(shape), values_(shape.pixels(), fill) {
    check_shape(shape);
  }

  const GridShape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  double& at(int x, int y) { return values_[static_cast<std::size_t>(y) * shape_.width + x]; }
  double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * shape_.width + x]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double sample_nearest(double x, double y) const { return values_[nearest_index(shape_, x, y)]; }

  double sample_bilinear(double x, double y) const {
    double cx = std::min(std::max(x, 0.0), static_cast<double>(shape_.width - 1));
    double cy = std::min(std::max(y, 0.0), static_cast<double>(shape_.height - 1));
    int x0 = static_cast<int>(cx), y0 = static_cast<int>(cy);
    int x1 = std::min(x0 + 1, shape_.width - 1), y1 = std::min(y0 + 1, shape_.height - 1);
    double fx = cx - x0, fy = cy - y0;
    double top = at(x0, y0) * (1 - fx) + at(x1, y0) * fx;
    double bot = at(x0, y1) * (1 - fx) + at(x1, y1) * fx;
    return top * (1 - fy) + bot * fy;
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

 private:
  GridShape shape_;
  std::vector<double> values_;
};

// Dense field of 2-vectors (dx, dy) in pixels.
class VectorField2 {
 public:
  VectorField2() = default;
  explicit VectorField2(GridShape shape, Vec2 fill = {})
      : shape_(shape), values_(shape.pixels(), fill) {
    check_shape(shape);
  }

  const GridShape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  Vec2& at(int x, int y) { return values_[static_cast<std::size_t>(y) * shape_.width + x]; }
  Vec2 at(int x, int y) const { return values_[static_cast<std::size_t>(y) * shape_.width + x]; }
  Vec2& operator[](std::size_t i) { return values_[i]; }
  Vec2 operator[](std::size_t i) const { return values_[i]; }

  Vec2 sample_nearest(double x, double y) const { return values_[nearest_index(shape_, x, y)]; }

  std::vector<Vec2>& values() { return values_; }
  const std::vector<Vec2>& values() const { return values_; }

 private:
  GridShape shape_;
  std::vector<Vec2> values_;
};

// Field whose value at pixel (x, y) is (x, y); supplies the absolute
// coordinate term when vector fields are decoded to center predictions.
inline VectorField2 coordinate_grid(GridShape shape) {
  check_shape(shape);
  VectorField2 grid(shape);
  for (int y = 0; y < shape.height; ++y)
    for (int x = 0; x < shape.width; ++x)
      grid.at(x, y) = {static_cast<double>(x), static_cast<double>(y)};
  return grid;
}

}  // namespace pggtrack
