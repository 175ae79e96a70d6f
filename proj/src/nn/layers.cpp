#include "posecast/nn/layers.hpp"

#include <cmath>

#include "posecast/errors.hpp"

namespace posecast::nn {

Var Binder::operator()(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return it->second;
  Var v = trainable_ ? tape_.param(p) : tape_.frozen(p);
  bound_.emplace(&p, v);
  return v;
}

LinearLayer::LinearLayer(const std::string& name, std::size_t in, std::size_t out, Rng& rng, float slope) {
  if (in == 0 || out == 0) throw ContractError("LinearLayer " + name + ": zero width");
  const float stddev = std::sqrt(2.0f / ((1.0f + slope * slope) * static_cast<float>(in)));
  weight = Parameter{name + ".weight", rng.normal_tensor({out, in}, stddev), {}};
  bias = Parameter{name + ".bias", Tensor({out}, 0.0f), {}};
}

Var LinearLayer::forward(Binder& bind, const Var& x) {
  if (x.value().cols() != in()) {
    throw DimensionError("linear " + weight.name + ": input " + shape_string(x.shape()) + " vs weight " +
                         shape_string(weight.value.shape()));
  }
  return add_row(matmul(x, bind(weight), false, true), bind(bias));
}

void LinearLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

ResidualBlock::ResidualBlock(const std::string& name, std::size_t width, Rng& rng, float slope_)
    : first(name + ".fc1", width, width, rng, slope_), second(name + ".fc2", width, width, rng, slope_), slope(slope_) {}

Var ResidualBlock::forward(Binder& bind, const Var& x) {
  return add(x, second.forward(bind, leaky_relu(first.forward(bind, x), slope)));
}

void ResidualBlock::collect(std::vector<Parameter*>& out) {
  first.collect(out);
  second.collect(out);
}

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& widths, Rng& rng, bool activate_last_,
         float slope_)
    : activate_last(activate_last_), slope(slope_) {
  if (widths.size() < 2) throw ContractError("Mlp " + name + ": needs at least input and output width");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.emplace_back(name + ".fc" + std::to_string(i), widths[i], widths[i + 1], rng, slope);
  }
}

Var Mlp::forward(Binder& bind, const Var& x) {
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(bind, h);
    if (i + 1 < layers.size() || activate_last) h = leaky_relu(h, slope);
  }
  return h;
}

void Mlp::collect(std::vector<Parameter*>& out) {
  for (auto& l : layers) l.collect(out);
}

std::size_t parameter_count(const std::vector<Parameter*>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace posecast::nn
