#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace contextnav::nn {

// Row-major 32-bit float tensor with an optional gradient buffer.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> v;
  std::vector<float> g;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, float fill = 0.0f);

  int64_t size() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.empty() ? 0 : static_cast<int>(size() / shape[0]); }

  void ensure_grad();  // allocates and zeroes on first use
  void zero_grad();
  bool all_finite() const;
};

// Named parameter tensors in creation order.
class ParamStore {
 public:
  Tensor& create(const std::string& name, std::vector<int> shape);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::string>& names() const { return names_; }
  void zero_grads();
  int64_t param_count() const;
  bool all_finite() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Tensor> tensors_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace contextnav::nn
