#include "gite/ag/tape.hpp"

#include <utility>

#include "gite/error.hpp"

namespace gite::ag {

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw UsageError("Var: use of an unbound variable");
  return tape_->value(id_);
}

Tape& Var::tape() const {
  if (tape_ == nullptr) throw UsageError("Var: use of an unbound variable");
  return *tape_;
}

Var Tape::push(std::string_view op, Tensor value, bool requires_grad,
               BackwardFn backward) {
  if (backward_done_) {
    throw UsageError(std::string(op) + ": recording on a tape after backward; call reset()");
  }
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite output of shape " +
                       shape_string(value));
  }
  Node node;
  node.op = std::string(op);
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push("constant", std::move(value), false, {}); }

Var Tape::leaf(Parameter& parameter) {
  if (auto it = leaves_.find(&parameter); it != leaves_.end()) {
    return Var(this, it->second);
  }
  Var v = push("parameter:" + parameter.name, parameter.value, true, {});
  leaves_.emplace(&parameter, v.id());
  return v;
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
                 BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw UsageError(std::string(op) + ": operand from another tape");
    needs = needs || requires_grad(p.id());
  }
  return push(op, std::move(value), needs, std::move(backward));
}

Var Tape::record(std::string_view op, Tensor value, const std::vector<Var>& parents,
                 BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw UsageError(std::string(op) + ": operand from another tape");
    needs = needs || requires_grad(p.id());
  }
  return push(op, std::move(value), needs, std::move(backward));
}

Tensor& Tape::grad_accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(n.value);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (backward_done_) throw UsageError("backward: already run on this tape; call reset()");
  if (&loss.tape() != this) throw UsageError("backward: loss belongs to another tape");
  const Tensor& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be [1, 1], got " + shape_string(lv));
  }
  backward_done_ = true;
  grad_accumulator(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, id);
  }
}

Tensor Tape::gradient(const Parameter& parameter) const {
  auto it = leaves_.find(&parameter);
  if (it == leaves_.end() || !nodes_[it->second].has_grad) {
    return Tensor::zeros_like(parameter.value);
  }
  return nodes_[it->second].grad;
}

void Tape::reset() {
  nodes_.clear();
  leaves_.clear();
  backward_done_ = false;
}

}  // namespace gite::ag
