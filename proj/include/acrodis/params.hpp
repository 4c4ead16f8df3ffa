#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace acrodis {

// Flat named tensor, row-major.
struct Tensor {
  std::string name;
  std::vector<size_t> shape;
  std::vector<double> data;

  size_t size() const { return data.size(); }
  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }
};

// Ordered collection of named tensors. The registration order is the
// canonical order for checkpoints, optimizer state and gradient masking.
class ParameterSet {
 public:
  Tensor& add(const std::string& name, std::vector<size_t> shape) {
    if (index_.count(name)) throw std::runtime_error("duplicate tensor name: " + name);
    size_t n = 1;
    for (size_t s : shape) n *= s;
    index_[name] = tensors_.size();
    tensors_.push_back(Tensor{name, std::move(shape), std::vector<double>(n, 0.0)});
    return tensors_.back();
  }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("no tensor named: " + name);
    return tensors_[it->second];
  }
  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("no tensor named: " + name);
    return tensors_[it->second];
  }
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  size_t total_size() const {
    size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  // same names/shapes, all zeros — gradient and optimizer-moment buffers
  ParameterSet zeros_like() const {
    ParameterSet out;
    for (const auto& t : tensors_) out.add(t.name, t.shape);
    return out;
  }

  void fill(double value) {
    for (auto& t : tensors_)
      for (auto& x : t.data) x = value;
  }

  bool same_layout(const ParameterSet& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    for (size_t i = 0; i < tensors_.size(); ++i) {
      if (tensors_[i].name != other.tensors_[i].name) return false;
      if (tensors_[i].shape != other.tensors_[i].shape) return false;
    }
    return true;
  }

 private:
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, size_t> index_;
};

using GradientSet = ParameterSet;

}  // namespace acrodis
