#include "lesioncascade/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace lc {

Tensor ParameterStore::create(const std::string& name, Shape shape) {
  if (index_.count(name)) {
    throw std::logic_error("parameter '" + name + "' already registered");
  }
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  t.zero_grad();
  index_[name] = entries_.size();
  entries_.push_back({name, t});
  return t;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::logic_error("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::logic_error("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

bool ParameterStore::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

std::int64_t ParameterStore::total_elements() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

void init_he_uniform(Tensor& t, std::int64_t fan_in, Rng& rng) {
  if (fan_in <= 0) throw std::logic_error("init_he_uniform: fan_in must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
}

void init_zero(Tensor& t) {
  for (double& v : t.values()) v = 0.0;
}

void init_identity_conv(Tensor& weight) {
  const Shape& s = weight.shape();
  if (s.size() != 4 || s[0] != s[1] || s[2] % 2 == 0 || s[3] % 2 == 0) {
    throw ShapeError("init_identity_conv: kernel " + shape_str(s) +
                     " must be [C,C,odd,odd]");
  }
  const std::int64_t C = s[0], KH = s[2], KW = s[3];
  init_zero(weight);
  for (std::int64_t c = 0; c < C; ++c) {
    const std::int64_t idx = ((c * C + c) * KH + KH / 2) * KW + KW / 2;
    weight.values()[static_cast<std::size_t>(idx)] = 1.0;
  }
}

}  // namespace lc
