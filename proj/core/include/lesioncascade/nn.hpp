#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lesioncascade/random.hpp"
#include "lesioncascade/tensor.hpp"

namespace lc {

struct Parameter {
  std::string name;
  Tensor value;  // leaf tensor with requires_grad, gradient allocated at creation
};

// Ordered, name-unique registry of learnable tensors. Creation order is the
// iteration order, which fixes the optimizer update order and the checkpoint
// layout.
class ParameterStore {
 public:
  Tensor create(const std::string& name, Shape shape);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Parameter>& entries() { return entries_; }
  const std::vector<Parameter>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::int64_t total_elements() const;

  void zero_grad();

 private:
  std::vector<Parameter> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// He-uniform fill: U(-b, b) with b = sqrt(6 / fan_in).
void init_he_uniform(Tensor& t, std::int64_t fan_in, Rng& rng);
void init_zero(Tensor& t);

// Makes a [C,C,KH,KW] conv kernel the identity map (centre-tap delta kernels);
// requires odd kernel sides and matching channel counts.
void init_identity_conv(Tensor& weight);

}  // namespace lc
