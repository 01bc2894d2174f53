#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dcv/tensor.hpp"

namespace dcv {

enum class OptimizerKind { adam, sgd_momentum };

OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;
};

// First-order optimizer over a fixed list of parameter tensors. State is
// created on the first step and must keep matching shapes afterwards.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  // params[i] -= update(grads[i]); undefined gradients leave the parameter alone.
  void step(std::span<Tensor> params, std::span<const Tensor> grads);

  const OptimizerConfig& config() const { return config_; }
  std::int64_t steps() const { return t_; }

 private:
  OptimizerConfig config_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace dcv
