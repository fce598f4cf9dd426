#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace convemo {

/// Dense row-major array of doubles. Most ops treat it as a matrix
/// [rows() x cols()] where cols() is the last extent and rows() is the
/// product of the remaining ones.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)), data(count(shape), fill) {}

  Tensor(std::initializer_list<std::size_t> s, std::vector<double> d)
      : shape(s), data(std::move(d)) {
    if (count(shape) != data.size())
      throw std::invalid_argument("Tensor: shape/data size mismatch");
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t e : s) {
      if (e == 0) throw std::invalid_argument("Tensor: zero extent");
      n *= e;
    }
    return n;
  }

  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> d) {
    Tensor t;
    t.shape = {r, c};
    t.data = std::move(d);
    if (r * c != t.data.size())
      throw std::invalid_argument("Tensor::matrix: size mismatch");
    return t;
  }

  static Tensor row(std::vector<double> d) {
    const std::size_t n = d.size();
    return matrix(1, n, std::move(d));
  }

  std::size_t size() const { return data.size(); }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t rows() const { return shape.empty() ? 1 : size() / cols(); }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
}

}  // namespace convemo
