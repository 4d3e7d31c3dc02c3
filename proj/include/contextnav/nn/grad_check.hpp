#pragma once

#include <functional>

#include "contextnav/nn/tape.hpp"

namespace contextnav::nn {

// Central finite differences vs backprop over every parameter in the store.
// `build_loss` must construct a fresh graph ending in a 1x1 loss node each
// time it is called. Returns the largest relative error, with each tensor's
// errors normalized by its largest gradient magnitude.
double grad_check(ParamStore& params, const std::function<Tape::Id(Tape&)>& build_loss,
                  double eps = 1e-3);

}  // namespace contextnav::nn
