#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "posecast/nn/tensor.hpp"

namespace posecast::nn {

class Tape;

// Persistent trainable tensor. Lives outside any tape; a tape binds to it for
// the duration of one step.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad = Tensor(value.shape(), 0.0f); }
};

// Handle to a node on a Tape. Cheap to copy; valid while the tape is alive and
// not cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Maps the adjoint of a node's output to adjoints of its parents (same order as
// the parents). An invalid Var means "no gradient for that parent". The
// function must build its result from tape ops so that recording the backward
// pass yields a differentiable graph.
using BackwardFn = std::function<std::vector<Var>(const Var& grad_out)>;

// Records primitive ops in creation order, which is a topological order.
// Reverse-mode sweeps walk node ids downward from the loss and visit each node
// once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Differentiable input not bound to a parameter (e.g. gradient-penalty interpolates).
  Var leaf(Tensor value);
  // Leaf whose gradient backward() accumulates into p.grad.
  Var param(Parameter& p);
  // Parameter used as a constant: no gradient flows to it.
  Var frozen(const Parameter& p) { return constant(p.value); }

  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  // Accumulates d(loss)/d(p) into Parameter::grad for every parameter bound
  // with param(). loss must hold exactly one element.
  void backward(const Var& loss);

  // Gradients of loss w.r.t. arbitrary nodes. With create_graph the backward
  // ops are recorded so the returned Vars can be differentiated again.
  std::vector<Var> grad(const Var& loss, std::span<const Var> wrt, bool create_graph = false);

  bool recording() const { return recording_; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  std::size_t size() const { return nodes_.size(); }
  void clear();

  // Disables graph recording inside a scope; ops then produce constants.
  class NoGradGuard {
   public:
    explicit NoGradGuard(Tape& tape) : tape_(tape), saved_(tape.recording_) { tape_.recording_ = false; }
    ~NoGradGuard() { tape_.recording_ = saved_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    Tape& tape_;
    bool saved_;
  };

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    Parameter* param = nullptr;
  };

  std::vector<Var> adjoints(const Var& loss, bool create_graph);

  std::deque<Node> nodes_;
  bool recording_ = true;
};

}  // namespace posecast::nn
