#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "dcv/tensor.hpp"

namespace dcv {

using NodeId = std::int64_t;

class Tape;

// A tensor value, optionally recorded on a Tape.
//
// An untaped Var is a plain constant: ops on untaped inputs compute values
// without recording anything. As soon as one input lives on a tape, the
// result is recorded there too.
class Var {
 public:
  Var() = default;
  Var(Tensor value) : value_(std::move(value)) {}  // NOLINT: implicit constant

  const Tensor& value() const { return value_; }
  const Shape& shape() const { return value_.shape(); }
  DType dtype() const { return value_.dtype(); }
  std::int64_t numel() const { return value_.numel(); }
  int ndim() const { return value_.ndim(); }
  std::int64_t size(int d) const { return value_.size(d); }
  double item() const { return value_.item(); }

  Tape* tape() const { return tape_; }
  NodeId id() const { return id_; }
  bool requires_grad() const { return requires_grad_; }

 private:
  friend class Tape;
  Tensor value_;
  Tape* tape_ = nullptr;
  NodeId id_ = -1;
  bool requires_grad_ = false;
};

// Vector-Jacobian product of one recorded op. Receives the gradient of the
// op output and a mask of which inputs need a gradient; returns one tensor
// per input (undefined where not needed).
using BackwardFn =
    std::function<std::vector<Tensor>(const Tensor& grad_out, const std::vector<bool>& needs)>;

// Result of Tape::backward: gradient per requires-grad leaf.
class Gradients {
 public:
  bool contains(const Var& v) const { return grads_.count(v.id()) != 0; }
  const Tensor& operator[](const Var& v) const;
  std::size_t size() const { return grads_.size(); }
  bool empty() const { return grads_.empty(); }

 private:
  friend class Tape;
  std::unordered_map<NodeId, Tensor> grads_;
};

// Linear record of differentiable ops, replayed in reverse by backward().
// Confined to the thread that created it.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Gradients backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations; `inputs` must already live on this tape
  // (or be untaped constants, which are skipped).
  Var record(std::string_view op, Tensor value, const std::vector<const Var*>& inputs,
             BackwardFn backward);

 private:
  struct Node {
    std::string op;
    std::vector<NodeId> inputs;
    std::vector<bool> input_requires_grad;
    Shape shape;
    DType dtype = DType::f64;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_thread() const;

  std::vector<Node> nodes_;
  std::thread::id owner_;
};

namespace detail {

// Builds the result Var of an op: picks the common tape of the inputs,
// records the node there and attaches `backward` when any input needs a
// gradient. Throws UsageError when inputs come from different tapes.
Var make_result(std::string_view op, Tensor value, std::initializer_list<const Var*> inputs,
                BackwardFn backward);
Var make_result(std::string_view op, Tensor value, const std::vector<const Var*>& inputs,
                BackwardFn backward);

}  // namespace detail

// Untaped copy of the value.
inline Var detach(const Var& v) { return Var(v.value()); }

}  // namespace dcv
