#include "diffpush/numerics/autodiff.hpp"

#include <cmath>

#include "diffpush/errors.hpp"
#include "diffpush/numerics/kernels.hpp"

namespace diffpush::numerics {

const Tensor& Var::value() const {
  if (tape_ == nullptr) {
    throw UsageError("value() on a detached variable");
  }
  return tape_->nodes_[tape_->check(*this)].value;
}

const Tensor& Gradients::at(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) {
      return e.grad;
    }
  }
  throw UsageError("no gradient for parameter '" + name + "'");
}

std::size_t Tape::check(Var v) const {
  if (v.tape_ != this) {
    throw UsageError("variable is detached from this tape");
  }
  if (v.id_ >= nodes_.size()) {
    throw UsageError("variable id out of range");
  }
  return v.id_;
}

Tensor& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) {
    n.grad = Tensor(n.value.shape(), 0.0);
  }
  return n.grad;
}

Var Tape::push(Tensor value, std::vector<std::size_t> inputs,
               std::function<void(Tape&, std::size_t)> backward) {
  if (consumed_) {
    throw UsageError("tape already consumed by backward()");
  }
  Node n;
  n.value = std::move(value);
  for (std::size_t in : inputs) {
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  n.inputs = std::move(inputs);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(std::string name, const Tensor& value) {
  if (name.empty()) {
    throw UsageError("parameters need a name");
  }
  Var v = push(value, {}, nullptr);
  nodes_.back().requires_grad = true;
  nodes_.back().name = std::move(name);
  return v;
}

Var Tape::constant(Tensor value) { return push(std::move(value), {}, nullptr); }

Var Tape::affine(Var x, Var weight, Var bias) {
  const std::size_t ix = check(x);
  const std::size_t iw = check(weight);
  const std::size_t ib = check(bias);
  Tensor y;
  kernels::affine(nodes_[ix].value, nodes_[iw].value, nodes_[ib].value, y);
  return push(std::move(y), {ix, iw, ib}, [](Tape& t, std::size_t self) {
    const Node& n = t.node(self);
    const std::size_t ix = n.inputs[0];
    const std::size_t iw = n.inputs[1];
    const std::size_t ib = n.inputs[2];
    if (t.node(iw).requires_grad || t.node(ib).requires_grad) {
      kernels::affine_param_grad(t.node(ix).value, n.grad, t.grad_of(iw),
                                 t.grad_of(ib));
    }
    if (t.node(ix).requires_grad) {
      Tensor dx;
      kernels::affine_input_grad(n.grad, t.node(iw).value, dx);
      Tensor& g = t.grad_of(ix);
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += dx[i];
      }
    }
  });
}

Var Tape::gated_linear(Var x) {
  const std::size_t ix = check(x);
  Tensor y(nodes_[ix].value.shape());
  kernels::gated_linear(nodes_[ix].value.values(), y.values());
  return push(std::move(y), {ix}, [](Tape& t, std::size_t self) {
    const Node& n = t.node(self);
    const std::size_t ix = n.inputs[0];
    Tensor dx(n.value.shape());
    kernels::gated_linear_grad(t.node(ix).value.values(), n.grad.values(),
                               dx.values());
    Tensor& g = t.grad_of(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += dx[i];
    }
  });
}

Var Tape::add(Var a, Var b) {
  const std::size_t ia = check(a);
  const std::size_t ib = check(b);
  require_same_shape(nodes_[ia].value, nodes_[ib].value, "add");
  Tensor y = nodes_[ia].value;
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] += nodes_[ib].value[i];
  }
  return push(std::move(y), {ia, ib}, [](Tape& t, std::size_t self) {
    const Node& n = t.node(self);
    for (std::size_t in : n.inputs) {
      Tensor& g = t.grad_of(in);
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += n.grad[i];
      }
    }
  });
}

Var Tape::sub(Var a, Var b) {
  const std::size_t ia = check(a);
  const std::size_t ib = check(b);
  require_same_shape(nodes_[ia].value, nodes_[ib].value, "sub");
  Tensor y = nodes_[ia].value;
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] -= nodes_[ib].value[i];
  }
  return push(std::move(y), {ia, ib}, [](Tape& t, std::size_t self) {
    const Node& n = t.node(self);
    Tensor& ga = t.grad_of(n.inputs[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] += n.grad[i];
    }
    Tensor& gb = t.grad_of(n.inputs[1]);
    for (std::size_t i = 0; i < gb.size(); ++i) {
      gb[i] -= n.grad[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  const std::size_t ia = check(a);
  const std::size_t ib = check(b);
  require_same_shape(nodes_[ia].value, nodes_[ib].value, "mul");
  Tensor y = nodes_[ia].value;
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] *= nodes_[ib].value[i];
  }
  return push(std::move(y), {ia, ib}, [](Tape& t, std::size_t self) {
    const Node& n = t.node(self);
    const std::size_t ia = n.inputs[0];
    const std::size_t ib = n.inputs[1];
    Tensor& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] += n.grad[i] * t.node(ib).value[i];
    }
    Tensor& gb = t.grad_of(ib);
    for (std::size_t i = 0; i < gb.size(); ++i) {
      gb[i] += n.grad[i] * t.node(ia).value[i];
    }
  });
}

Var Tape::scale(Var a, double factor) {
  const std::size_t ia = check(a);
  Tensor y = nodes_[ia].value;
  for (double& v : y.values()) {
    v *= factor;
  }
  return push(std::move(y), {ia}, [factor](Tape& t, std::size_t self) {
    const Node& n = t.node(self);
    Tensor& g = t.grad_of(n.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += factor * n.grad[i];
    }
  });
}

Var Tape::sum(Var a) {
  const std::size_t ia = check(a);
  double total = 0.0;
  for (double v : nodes_[ia].value.values()) {
    total += v;
  }
  return push(Tensor::from({total}), {ia}, [](Tape& t, std::size_t self) {
    const double up = t.node(self).grad[0];
    Tensor& g = t.grad_of(t.node(self).inputs[0]);
    for (double& v : g.values()) {
      v += up;
    }
  });
}

Var Tape::sum_squares(Var a) {
  const std::size_t ia = check(a);
  double total = 0.0;
  for (double v : nodes_[ia].value.values()) {
    total += v * v;
  }
  return push(Tensor::from({total}), {ia}, [](Tape& t, std::size_t self) {
    const double up = t.node(self).grad[0];
    const std::size_t ia = t.node(self).inputs[0];
    Tensor& g = t.grad_of(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += 2.0 * up * t.node(ia).value[i];
    }
  });
}

Var Tape::mean_row_sq_error(Var prediction, Var target) {
  const std::size_t ip = check(prediction);
  const std::size_t it = check(target);
  const Tensor& p = nodes_[ip].value;
  const Tensor& q = nodes_[it].value;
  require_same_shape(p, q, "mean_row_sq_error");
  const double rows = static_cast<double>(p.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - q[i];
    total += d * d;
  }
  return push(Tensor::from({total / rows}), {ip, it},
              [rows](Tape& t, std::size_t self) {
                const double up = t.node(self).grad[0];
                const std::size_t ip = t.node(self).inputs[0];
                const std::size_t it = t.node(self).inputs[1];
                const Tensor& p = t.node(ip).value;
                const Tensor& q = t.node(it).value;
                const double c = 2.0 * up / rows;
                if (t.node(ip).requires_grad) {
                  Tensor& g = t.grad_of(ip);
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += c * (p[i] - q[i]);
                  }
                }
                if (t.node(it).requires_grad) {
                  Tensor& g = t.grad_of(it);
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] -= c * (p[i] - q[i]);
                  }
                }
              });
}

Gradients Tape::backward(Var loss) {
  if (consumed_) {
    throw UsageError("backward() called twice without a new forward pass");
  }
  const std::size_t root = check(loss);
  if (nodes_[root].value.size() != 1) {
    throw UsageError("backward() needs a scalar loss, got " +
                     nodes_[root].value.shape_string());
  }
  consumed_ = true;
  grad_of(root)[0] = 1.0;
  for (std::size_t id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || !n.requires_grad || n.grad.size() != n.value.size()) {
      continue;
    }
    n.backward(*this, id);
  }
  Gradients out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (n.name.empty()) {
      continue;
    }
    if (n.grad.size() != n.value.size()) {
      n.grad = Tensor(n.value.shape(), 0.0);
    }
    out.entries().push_back({n.name, std::move(n.grad)});
  }
  return out;
}

}  // namespace diffpush::numerics
