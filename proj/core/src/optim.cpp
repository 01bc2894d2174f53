#include "dcv/optim.hpp"

#include <cmath>
#include <string>

#include "dcv/errors.hpp"

namespace dcv {

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd" || name == "sgd_momentum") return OptimizerKind::sgd_momentum;
  throw ParameterError("unknown optimizer '" + std::string(name) + "'");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.lr > 0) || !std::isfinite(config_.lr)) throw ParameterError("optimizer: lr must be positive");
  if (!(config_.beta1 >= 0 && config_.beta1 < 1 && config_.beta2 >= 0 && config_.beta2 < 1)) {
    throw ParameterError("optimizer: betas must be in [0, 1)");
  }
  if (!(config_.momentum >= 0 && config_.momentum < 1)) throw ParameterError("optimizer: momentum must be in [0, 1)");
}

void Optimizer::step(std::span<Tensor> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) throw ShapeError("optimizer: one gradient per parameter");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Tensor::full(p.shape(), 0.0, DType::f64));
      v_.push_back(Tensor::full(p.shape(), 0.0, DType::f64));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("optimizer: parameter count changed");
  ++t_;
  const auto& c = config_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].shape() != m_[k].shape()) throw ShapeError("optimizer: parameter shape changed");
    if (!grads[k].defined()) continue;
    if (grads[k].shape() != params[k].shape()) throw ShapeError("optimizer: gradient shape mismatch");
    Tensor& p = params[k];
    for (std::int64_t i = 0; i < p.numel(); ++i) {
      const double g = grads[k].at(i);
      double upd;
      if (c.kind == OptimizerKind::adam) {
        const double m = c.beta1 * m_[k].at(i) + (1 - c.beta1) * g;
        const double v = c.beta2 * v_[k].at(i) + (1 - c.beta2) * g * g;
        m_[k].set(i, m);
        v_[k].set(i, v);
        upd = c.lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps);
      } else {
        const double b = c.momentum * m_[k].at(i) + g;
        m_[k].set(i, b);
        upd = c.lr * b;
      }
      p.set(i, p.at(i) - upd);
    }
  }
}

}  // namespace dcv
