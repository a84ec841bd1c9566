#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "diffpush/numerics/tensor.hpp"

namespace diffpush::numerics {

class Tape;

// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct NamedGradient {
  std::string name;
  Tensor grad;
};

// Gradients in parameter registration order.
class Gradients {
 public:
  std::vector<NamedGradient>& entries() { return entries_; }
  const std::vector<NamedGradient>& entries() const { return entries_; }
  // Throws UsageError for unknown names.
  const Tensor& at(const std::string& name) const;

 private:
  std::vector<NamedGradient> entries_;
};

// Reverse-mode tape over whole tensors. Nodes are appended in evaluation
// order, so reverse id order is a valid topological order for backward.
// A tape supports exactly one backward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that receives a gradient, reported under `name`.
  Var parameter(std::string name, const Tensor& value);
  // Leaf without gradient.
  Var constant(Tensor value);

  // y = x W + b, x: [rows x in], W: [in x out], b: [out]
  Var affine(Var x, Var weight, Var bias);
  // x * gate(x), elementwise.
  Var gated_linear(Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  // Scalar sum of all elements.
  Var sum(Var a);
  // Scalar sum of squares.
  Var sum_squares(Var a);
  // Scalar mean over rows of the squared L2 distance between rows.
  Var mean_row_sq_error(Var prediction, Var target);

  // Gradients of a scalar `loss` with respect to every parameter leaf.
  Gradients backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  friend class Var;

  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    std::function<void(Tape&, std::size_t)> backward;
    bool requires_grad = false;
    std::string name;  // non-empty for parameters
  };

  Var push(Tensor value, std::vector<std::size_t> inputs,
           std::function<void(Tape&, std::size_t)> backward);
  std::size_t check(Var v) const;
  Node& node(std::size_t id) { return nodes_[id]; }
  Tensor& grad_of(std::size_t id);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace diffpush::numerics
