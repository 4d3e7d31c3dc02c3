#include "contextnav/nn/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace contextnav::nn {

namespace {

double eval_loss(ParamStore& params, const std::function<Tape::Id(Tape&)>& build_loss) {
  Tape tape;
  const Tape::Id loss = build_loss(tape);
  return static_cast<double>(tape.val(loss).v[0]);
}

}  // namespace

double grad_check(ParamStore& params, const std::function<Tape::Id(Tape&)>& build_loss,
                  double eps) {
  if (params.param_count() >= 10000)
    throw std::invalid_argument("grad_check: fragment too large (>= 1e4 parameters)");

  params.zero_grads();
  {
    Tape tape;
    const Tape::Id loss = build_loss(tape);
    tape.backward(loss);
  }

  double worst = 0.0;
  for (const auto& name : params.names()) {
    Tensor& p = params.at(name);
    p.ensure_grad();
    std::vector<double> fd(p.v.size());
    for (size_t i = 0; i < p.v.size(); ++i) {
      const float saved = p.v[i];
      p.v[i] = saved + static_cast<float>(eps);
      const double up = eval_loss(params, build_loss);
      p.v[i] = saved - static_cast<float>(eps);
      const double down = eval_loss(params, build_loss);
      p.v[i] = saved;
      fd[i] = (up - down) / (2.0 * eps);
    }
    double scale = 0.0;
    for (size_t i = 0; i < p.v.size(); ++i)
      scale = std::max({scale, std::abs(fd[i]), std::abs(static_cast<double>(p.g[i]))});
    if (scale < 1e-12) continue;
    for (size_t i = 0; i < p.v.size(); ++i)
      worst = std::max(worst, std::abs(fd[i] - static_cast<double>(p.g[i])) / scale);
  }
  params.zero_grads();
  return worst;
}

}  // namespace contextnav::nn
