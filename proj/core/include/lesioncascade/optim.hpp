#pragma once

#include <cstdint>

#include "lesioncascade/nn.hpp"

namespace lc {

// Polynomial decay: base_lr * (1 - iteration / max_iterations)^power.
// iteration is 0-based and must be < max_iterations.
double poly_lr(std::int64_t iteration, std::int64_t max_iterations, double base_lr,
               double power = 0.9);

// Plain gradient descent over every parameter in creation order, followed by
// a gradient reset. Call after the per-sample backward passes of a batch have
// accumulated (already averaged) gradients.
void sgd_step(ParameterStore& params, double lr);

}  // namespace lc
