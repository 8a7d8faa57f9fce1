#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace overlay::num {

using Vec = std::vector<double>;

// Dense row-major matrix of 64-bit floats. Vectors are stored as n x 1 or
// 1 x n matrices where a shape is required.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rs);
  static Mat col_vec(const Vec& v);
  static Mat row_vec(const Vec& v);

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] bool is_vector() const { return rows == 1 || cols == 1; }
  [[nodiscard]] Vec row(std::size_t r) const;
  [[nodiscard]] Vec to_vec() const;

  bool operator==(const Mat&) const = default;
};

[[nodiscard]] bool all_finite(const Mat& m);
[[nodiscard]] bool all_finite(const Vec& v);

}  // namespace overlay::num
