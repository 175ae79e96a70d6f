#include "posecast/model/critic.hpp"
#include "posecast/json_float.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "posecast/errors.hpp"
#include "posecast/geometry/kinematics.hpp"
#include "posecast/nn/checkpoint.hpp"

namespace posecast::model {

Lipschitz Lipschitz::parse(const std::string& text) {
  Lipschitz l;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (kind == "gp") {
    l.kind = Kind::kGradientPenalty;
  } else if (kind == "clip") {
    l.kind = Kind::kClip;
    l.value = 0.01f;
  } else {
    throw ConfigError("lipschitz: unknown mode '" + text + "' (expected gp[:weight] or clip[:bound])");
  }
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      l.value = std::stof(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("lipschitz: bad number in '" + text + "'");
    }
  }
  if (!(l.value >= 0.0f)) throw ConfigError("lipschitz: value must be >= 0");
  return l;
}

std::string Lipschitz::to_string() const {
  std::ostringstream v;
  v << value;
  return (kind == Kind::kClip ? "clip:" : "gp:") + v.str();
}

void CriticConfig::validate() const {
  if (joint_widths.size() != 4) throw ConfigError("critic: joint branch needs 4 layer widths");
  if (kinematic_widths.size() != 3) throw ConfigError("critic: kinematic branch needs 3 layer widths");
  if (merge_widths.size() != 2 || merge_widths.back() != 1) {
    throw ConfigError("critic: merge needs 2 layer widths ending in 1");
  }
  for (auto w : joint_widths) if (!w) throw ConfigError("critic: zero width");
  for (auto w : kinematic_widths) if (!w) throw ConfigError("critic: zero width");
  if (!merge_widths[0]) throw ConfigError("critic: zero width");
  if (!(input_scale > 0.0f)) throw ConfigError("critic: input_scale must be > 0");
}

void to_json(nlohmann::json& j, const CriticConfig& c) {
  j = {{"joint_widths", c.joint_widths},
       {"kinematic_widths", c.kinematic_widths},
       {"merge_widths", c.merge_widths},
       {"lipschitz", c.lipschitz.to_string()},
       {"leaky_slope", json_float(c.leaky_slope)},
       {"input_scale", json_float(c.input_scale)}};
}

void from_json(const nlohmann::json& j, CriticConfig& c) {
  c.joint_widths = j.value("joint_widths", c.joint_widths);
  c.kinematic_widths = j.value("kinematic_widths", c.kinematic_widths);
  c.merge_widths = j.value("merge_widths", c.merge_widths);
  if (j.contains("lipschitz")) c.lipschitz = Lipschitz::parse(j.at("lipschitz").get<std::string>());
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  c.input_scale = j.value("input_scale", c.input_scale);
}

nn::Var wasserstein_critic_loss(const nn::Var& real_scores, const nn::Var& fake_scores) {
  if (real_scores.value().empty() || fake_scores.value().empty()) throw ContractError("critic: empty score batch");
  return nn::sub(nn::mean_all(fake_scores), nn::mean_all(real_scores));
}

nn::Var wasserstein_generator_term(const nn::Var& fake_scores) {
  if (fake_scores.value().empty()) throw ContractError("critic: empty fake batch");
  return nn::scale(nn::mean_all(fake_scores), -1.0f);
}

Critic::Critic(const CriticConfig& config, const pose::JointLayout& layout, std::uint64_t seed)
    : config_(config), layout_(layout) {
  config_.validate();
  nn::Rng rng(seed);
  const float s = config_.leaky_slope;
  std::vector<std::size_t> jw{3 * layout_.size()};
  jw.insert(jw.end(), config_.joint_widths.begin(), config_.joint_widths.end());
  joint_branch_ = nn::Mlp("critic.joints", jw, rng, true, s);
  std::vector<std::size_t> kw{geometry::psi_upper_size(layout_.bones().size())};
  kw.insert(kw.end(), config_.kinematic_widths.begin(), config_.kinematic_widths.end());
  kinematic_branch_ = nn::Mlp("critic.kinematic", kw, rng, true, s);
  merge_ = nn::Mlp("critic.merge",
                   {config_.joint_widths.back() + config_.kinematic_widths.back(), config_.merge_widths[0], 1}, rng,
                   false, s);
}

nn::Var Critic::score_normalized(nn::Binder& bind, const nn::Var& x) {
  const nn::Var parts[] = {joint_branch_.forward(bind, x),
                           kinematic_branch_.forward(bind, geometry::psi_upper_batch(x, layout_))};
  return merge_.forward(bind, nn::concat_cols(parts));
}

nn::Var Critic::score(nn::Binder& bind, const nn::Var& poses) {
  if (poses.value().cols() != 3 * layout_.size()) {
    throw DimensionError("critic: input " + nn::shape_string(poses.shape()) + ", expected " +
                         std::to_string(3 * layout_.size()) + " columns");
  }
  if (!poses.value().all_finite()) throw ValidationError("critic: non-finite pose");
  return score_normalized(bind, nn::scale(poses, config_.input_scale));
}

nn::Var Critic::gradient_penalty(nn::Binder& bind, const nn::Tensor& x_normalized) {
  nn::Tape& tape = bind.tape();
  nn::Var x = tape.leaf(x_normalized);
  nn::Var s = score_normalized(bind, x);
  nn::Var g = tape.grad(nn::sum_all(s), std::span<const nn::Var>(&x, 1), true)[0];
  // small epsilon keeps the norm differentiable at g = 0
  nn::Var norm = nn::sqrt(nn::add_scalar(nn::sum_cols(nn::mul(g, g)), 1e-12f));
  nn::Var dev = nn::add_scalar(norm, -1.0f);
  return nn::mean_all(nn::mul(dev, dev));
}

CriticLosses Critic::critic_losses(nn::Binder& bind, const nn::Tensor& real, const nn::Tensor& fake, nn::Rng& rng) {
  if (real.empty() || fake.empty() || real.rows() == 0 || fake.rows() == 0) {
    throw ContractError("critic: empty real or fake batch");
  }
  nn::Tape& tape = bind.tape();
  nn::Var sr = score(bind, tape.constant(real));
  nn::Var sf = score(bind, tape.constant(fake));
  CriticLosses out;
  out.mean_real = nn::mean_all(sr).value().item();
  out.mean_fake = nn::mean_all(sf).value().item();
  nn::Var loss = wasserstein_critic_loss(sr, sf);
  if (config_.lipschitz.kind == Lipschitz::Kind::kGradientPenalty) {
    if (real.shape() != fake.shape()) throw DimensionError("critic: penalty needs equally sized real and fake batches");
    nn::Tensor mixed(real.shape());
    const std::size_t cols = real.cols();
    for (std::size_t r = 0; r < real.rows(); ++r) {
      const float e = rng.uniform();
      for (std::size_t c = 0; c < cols; ++c) {
        mixed.at(r, c) = config_.input_scale * (e * real.at(r, c) + (1.0f - e) * fake.at(r, c));
      }
    }
    out.penalty = gradient_penalty(bind, mixed);
    loss = nn::add(loss, nn::scale(out.penalty, config_.lipschitz.value));
  } else {
    out.penalty = tape.constant(nn::Tensor::scalar(0.0f));
  }
  out.loss = loss;
  return out;
}

nn::Var Critic::generator_term(nn::Binder& bind, const nn::Var& fake) {
  if (fake.value().rows() == 0) throw ContractError("critic: empty fake batch");
  return wasserstein_generator_term(score(bind, fake));
}

void Critic::clip_parameters() {
  const float c = config_.lipschitz.value;
  for (auto* p : parameters())
    for (float& v : p->value.data()) v = std::clamp(v, -c, c);
}

std::vector<nn::Parameter*> Critic::parameters() {
  std::vector<nn::Parameter*> out;
  joint_branch_.collect(out);
  kinematic_branch_.collect(out);
  merge_.collect(out);
  return out;
}

void Critic::save(const std::string& path, nlohmann::json extra) {
  nlohmann::json meta = {{"kind", "critic"}, {"config", config_}, {"joints", layout_.size()}};
  meta.update(extra);
  nn::save_parameters(path, meta.dump(), parameters());
}

Critic Critic::load(const std::string& path, const pose::JointLayout& layout) {
  const auto data = nn::read_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(data.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": metadata is not JSON: " + e.what());
  }
  if (meta.value("kind", "") != "critic") throw VersionError(path + ": not a critic checkpoint");
  if (meta.value("joints", std::size_t{0}) != layout.size()) throw VersionError(path + ": joint count mismatch");
  Critic c(meta.at("config").get<CriticConfig>(), layout, 0);
  nn::assign_parameters(data, c.parameters());
  return c;
}

}  // namespace posecast::model
