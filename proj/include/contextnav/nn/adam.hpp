#pragma once

#include <unordered_map>

#include "contextnav/nn/tensor.hpp"

namespace contextnav::nn {

// Adam with global gradient-norm clipping. State is keyed by parameter name.
class Adam {
 public:
  struct Config {
    double lr = 2.5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_clip = 0.5;  // <= 0 disables
  };

  explicit Adam(Config cfg) : cfg_(cfg) {}

  // Applies one update from the accumulated gradients, then zeroes them.
  // Returns the pre-clip global gradient norm; skips the update (and reports
  // a quiet NaN) when the gradients are not finite.
  double step(ParamStore& params);

  const Config& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  struct State {
    std::vector<float> m, v;
  };
  Config cfg_;
  std::unordered_map<std::string, State> state_;
  int64_t t_ = 0;
};

}  // namespace contextnav::nn
