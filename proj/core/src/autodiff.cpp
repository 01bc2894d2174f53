#include "dcv/autodiff.hpp"

#include <algorithm>

namespace dcv {

namespace {

void accumulate(Tensor& dst, const Tensor& g) {
  if (!dst.defined()) {
    dst = g;
    return;
  }
  if (dst.shape() != g.shape()) {
    throw ShapeError("gradient shape mismatch " + to_string(dst.shape()) + " vs " +
                     to_string(g.shape()));
  }
  const Tensor src = g.to(dst.dtype());
  dispatch(dst.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto d = dst.mutable_values<T>();
    auto s = src.values<T>();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  });
}

}  // namespace

const Tensor& Gradients::operator[](const Var& v) const {
  auto it = grads_.find(v.id());
  if (it == grads_.end()) throw UsageError("no gradient recorded for this Var");
  return it->second;
}

Tape::Tape() : owner_(std::this_thread::get_id()) {}

void Tape::check_thread() const {
  if (std::this_thread::get_id() != owner_) {
    throw UsageError("tape used from a thread other than the one that created it");
  }
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  check_thread();
  if (!value.defined()) throw UsageError("leaf from undefined tensor");
  Node node;
  node.op = "leaf";
  node.shape = value.shape();
  node.dtype = value.dtype();
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  Var v(std::move(value));
  v.tape_ = this;
  v.id_ = static_cast<NodeId>(nodes_.size()) - 1;
  v.requires_grad_ = requires_grad;
  return v;
}

Var Tape::record(std::string_view op, Tensor value, const std::vector<const Var*>& inputs,
                 BackwardFn backward) {
  check_thread();
  Node node;
  node.op = std::string(op);
  node.shape = value.shape();
  node.dtype = value.dtype();
  for (const Var* in : inputs) {
    if (in->tape() == nullptr) {
      node.inputs.push_back(-1);
      node.input_requires_grad.push_back(false);
      continue;
    }
    node.inputs.push_back(in->id());
    node.input_requires_grad.push_back(in->requires_grad());
    node.requires_grad = node.requires_grad || in->requires_grad();
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  Var v(std::move(value));
  v.tape_ = this;
  v.id_ = static_cast<NodeId>(nodes_.size()) - 1;
  v.requires_grad_ = nodes_.back().requires_grad;
  return v;
}

Gradients Tape::backward(const Var& loss) {
  if (loss.tape() == nullptr) throw UsageError("backward on a Var that is not recorded on a tape");
  if (loss.tape() != this) throw UsageError("backward on a Var recorded on another tape");
  check_thread();
  if (loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
  }

  std::vector<Tensor> grads(nodes_.size());
  grads[static_cast<std::size_t>(loss.id())] = Tensor::full(loss.shape(), 1.0, loss.dtype());

  for (NodeId i = loss.id(); i >= 0; --i) {
    auto& node = nodes_[static_cast<std::size_t>(i)];
    Tensor& g = grads[static_cast<std::size_t>(i)];
    if (!g.defined() || !node.requires_grad || !node.backward) continue;
    std::vector<Tensor> in_grads = node.backward(g, node.input_requires_grad);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      if (!node.input_requires_grad[k] || k >= in_grads.size() || !in_grads[k].defined()) continue;
      accumulate(grads[static_cast<std::size_t>(node.inputs[k])], in_grads[k]);
    }
    // Interior gradients are no longer needed once propagated.
    g = Tensor();
  }

  Gradients out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    if (node.op != "leaf" || !node.requires_grad) continue;
    Tensor g = grads[i].defined() ? grads[i] : Tensor(node.shape, node.dtype);
    out.grads_.emplace(static_cast<NodeId>(i), std::move(g));
  }
  return out;
}

namespace detail {

Var make_result(std::string_view op, Tensor value, const std::vector<const Var*>& inputs,
                BackwardFn backward) {
  Tape* tape = nullptr;
  for (const Var* in : inputs) {
    if (in->tape() == nullptr) continue;
    if (tape != nullptr && in->tape() != tape) {
      throw UsageError(std::string(op) + ": inputs recorded on different tapes");
    }
    tape = in->tape();
  }
  if (tape == nullptr) return Var(std::move(value));
  return tape->record(op, std::move(value), inputs, std::move(backward));
}

Var make_result(std::string_view op, Tensor value, std::initializer_list<const Var*> inputs,
                BackwardFn backward) {
  return make_result(op, std::move(value), std::vector<const Var*>(inputs), std::move(backward));
}

}  // namespace detail

}  // namespace dcv
