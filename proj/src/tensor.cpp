#include "smooth/tensor.hpp"

#include <cmath>
#include <sstream>

#include "smooth/error.hpp"

namespace smooth {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != data.size()) {
    throw ConfigError("tensor: shape " + shape_str() + " does not match data size " +
                      std::to_string(data.size()));
  }
}

Tensor Tensor::filled(std::vector<std::size_t> s, double v) {
  Tensor t(std::move(s));
  for (double& x : t.data) x = v;
  return t;
}

Tensor Tensor::reshaped(std::vector<std::size_t> s) const {
  if (shape_numel(s) != data.size()) {
    throw ConfigError("tensor: cannot reshape " + shape_str() + " to incompatible shape");
  }
  return Tensor(std::move(s), data);
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

void require_finite(const Tensor& t, const std::string& where) {
  if (!t.all_finite()) {
    throw NumericError("non-finite value in " + where);
  }
}

}  // namespace smooth
