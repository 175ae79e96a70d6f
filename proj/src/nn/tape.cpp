#include "posecast/nn/tape.hpp"

#include <algorithm>

#include "posecast/errors.hpp"
#include "posecast/nn/ops.hpp"

namespace posecast::nn {

const Tensor& Var::value() const { return tape_->value(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, recording_, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, true, &p});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  const bool needs =
      recording_ && std::any_of(parents.begin(), parents.end(), [](const Var& v) { return v.requires_grad(); });
  if (!needs) return constant(std::move(value));
  Node node;
  node.value = std::move(value);
  node.parents.reserve(parents.size());
  for (const auto& p : parents) {
    if (p.tape_ != this) throw ContractError("Tape::record: parent belongs to a different tape");
    node.parents.push_back(p.id_);
  }
  node.backward = std::move(backward);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::vector<Var> Tape::adjoints(const Var& loss, bool create_graph) {
  if (loss.tape_ != this) throw ContractError("backward: loss belongs to a different tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(loss.value().shape()));
  }
  const std::size_t n = loss.id_ + 1;
  std::vector<Var> adj(n);
  if (!nodes_[loss.id_].requires_grad) return adj;

  const bool saved = recording_;
  recording_ = create_graph;
  adj[loss.id_] = constant(Tensor(loss.value().shape(), 1.0f));
  for (std::size_t id = n; id-- > 0;) {
    if (!adj[id].valid()) continue;
    // deque references stay valid while backward functions append nodes
    const Node& node = nodes_[id];
    if (!node.backward) continue;
    std::vector<Var> grads = node.backward(adj[id]);
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      const std::size_t p = node.parents[i];
      if (!nodes_[p].requires_grad || i >= grads.size() || !grads[i].valid()) continue;
      adj[p] = adj[p].valid() ? add(adj[p], grads[i]) : grads[i];
    }
  }
  recording_ = saved;
  return adj;
}

void Tape::backward(const Var& loss) {
  auto adj = adjoints(loss, false);
  for (std::size_t id = 0; id < adj.size(); ++id) {
    Parameter* p = nodes_[id].param;
    if (!p || !adj[id].valid()) continue;
    const Tensor& g = adj[id].value();
    if (p->grad.shape() != p->value.shape()) p->zero_grad();
    auto dst = p->grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

std::vector<Var> Tape::grad(const Var& loss, std::span<const Var> wrt, bool create_graph) {
  auto adj = adjoints(loss, create_graph);
  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (w.id_ < adj.size() && adj[w.id_].valid()) {
      out.push_back(adj[w.id_]);
    } else {
      out.push_back(constant(Tensor(w.value().shape(), 0.0f)));
    }
  }
  return out;
}

void Tape::clear() {
  nodes_.clear();
  recording_ = true;
}

}  // namespace posecast::nn
