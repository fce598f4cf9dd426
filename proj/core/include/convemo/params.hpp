#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "convemo/rng.hpp"
#include "convemo/tensor.hpp"

namespace convemo {

/// Named learnable tensors, each with a gradient accumulator of the same
/// shape. Iteration order is the lexicographic name order, which keeps
/// save/load and the optimizer step deterministic.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
  };

  Tensor& add(const std::string& name, Tensor init) {
    auto [it, inserted] = entries_.try_emplace(name);
    if (!inserted)
      throw std::invalid_argument("ParamStore: duplicate name '" + name + "'");
    it->second.grad = Tensor(init.shape, 0.0);
    it->second.value = std::move(init);
    return it->second.value;
  }

  bool contains(const std::string& name) const {
    return entries_.count(name) != 0;
  }

  Entry& entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw std::out_of_range("ParamStore: unknown name '" + name + "'");
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw std::out_of_range("ParamStore: unknown name '" + name + "'");
    return it->second;
  }

  Tensor& value(const std::string& name) { return entry(name).value; }
  const Tensor& value(const std::string& name) const {
    return entry(name).value;
  }
  Tensor& grad(const std::string& name) { return entry(name).grad; }

  void zero_grad() {
    for (auto& [name, e] : entries_) e.grad.zero();
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) n += e.value.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Gaussian init scaled by 1/sqrt(fan_in).
  Tensor& add_gaussian(const std::string& name, std::vector<std::size_t> shape,
                       std::size_t fan_in, RngState& rng) {
    Tensor t(shape);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in ? fan_in : 1));
    for (double& v : t.data) v = rng.next_normal() * scale;
    return add(name, std::move(t));
  }

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace convemo
