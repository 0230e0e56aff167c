#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gite/ag/tensor.hpp"

namespace gite::ag {

/// A named trainable tensor. Tapes refer to parameters by address, so a
/// parameter must outlive every tape that reads it.
struct Parameter {
  std::string name;
  Tensor value;
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape& tape() const;
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run record of primitive operations. Nodes are appended in
/// forward order; backward() walks them in reverse exactly once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter. Repeated calls return the same node.
  Var leaf(Parameter& parameter);

  /// Appends an operation node. `backward` is dropped when no parent needs a
  /// gradient. Throws NumericError when `value` holds NaN or Inf.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
             BackwardFn backward);
  Var record(std::string_view op, Tensor value, const std::vector<Var>& parents,
             BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Incoming gradient of a node while its backward function runs.
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient buffer of a parent, zero-initialised on first use.
  Tensor& grad_accumulator(std::size_t id);

  void backward(const Var& loss);
  bool backward_done() const { return backward_done_; }

  /// Gradient of the loss with respect to `parameter`; zeros when the
  /// parameter never reached the loss.
  Tensor gradient(const Parameter& parameter) const;

  /// Drops every node so the tape can record a new pass.
  void reset();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(std::string_view op, Tensor value, bool requires_grad, BackwardFn backward);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> leaves_;
  bool backward_done_ = false;
};

}  // namespace gite::ag
