#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace smooth {

/// Dense n-dimensional array of doubles in row-major order. The universal
/// value type for inputs, activations, parameters and gradients.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor filled(std::vector<std::size_t> s, double v);

  std::size_t numel() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }
  bool empty() const { return data.empty(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  // Row-major 2-d access; caller guarantees ndim()==2.
  double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  /// Same data, new shape; element count must match.
  Tensor reshaped(std::vector<std::size_t> s) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  std::string shape_str() const;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

/// Throws NumericError naming `where` if any entry is NaN/Inf.
void require_finite(const Tensor& t, const std::string& where);

}  // namespace smooth
