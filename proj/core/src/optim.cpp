#include "lesioncascade/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace lc {

double poly_lr(std::int64_t iteration, std::int64_t max_iterations, double base_lr,
               double power) {
  if (max_iterations <= 0) throw std::invalid_argument("poly_lr: max_iterations must be positive");
  if (iteration < 0 || iteration >= max_iterations) {
    throw std::invalid_argument("poly_lr: iteration " + std::to_string(iteration) +
                                " outside [0," + std::to_string(max_iterations) + ")");
  }
  const double frac = 1.0 - static_cast<double>(iteration) / static_cast<double>(max_iterations);
  return base_lr * std::pow(frac, power);
}

void sgd_step(ParameterStore& params, double lr) {
  for (auto& entry : params.entries()) {
    Tensor& p = entry.value;
    if (!p.has_grad()) {
      p.zero_grad();
      continue;
    }
    auto& v = p.values();
    const auto& g = p.grad();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    p.zero_grad();
  }
}

}  // namespace lc
