#include "contextnav/nn/adam.hpp"

#include <cmath>
#include <limits>

namespace contextnav::nn {

double Adam::step(ParamStore& params) {
  double norm_sq = 0.0;
  for (const auto& name : params.names()) {
    Tensor& p = params.at(name);
    if (p.g.empty()) continue;
    for (float g : p.g) norm_sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(norm_sq);
  if (!std::isfinite(norm)) {
    params.zero_grads();
    return std::numeric_limits<double>::quiet_NaN();
  }
  double scale = 1.0;
  if (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) scale = cfg_.grad_clip / norm;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double step_size = cfg_.lr / bc1;

  for (const auto& name : params.names()) {
    Tensor& p = params.at(name);
    if (p.g.empty()) continue;
    State& st = state_[name];
    if (st.m.size() != p.v.size()) {
      st.m.assign(p.v.size(), 0.0f);
      st.v.assign(p.v.size(), 0.0f);
    }
    for (size_t i = 0; i < p.v.size(); ++i) {
      const double g = static_cast<double>(p.g[i]) * scale;
      st.m[i] = static_cast<float>(cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g);
      st.v[i] = static_cast<float>(cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g * g);
      const double vhat = st.v[i] / bc2;
      p.v[i] -= static_cast<float>(step_size * st.m[i] / (std::sqrt(vhat) + cfg_.eps));
    }
    p.zero_grad();
  }
  return norm;
}

}  // namespace contextnav::nn
