#include "posecast/model/forecaster.hpp"
#include "posecast/json_float.hpp"

#include "posecast/errors.hpp"
#include "posecast/geometry/projection.hpp"
#include "posecast/nn/checkpoint.hpp"

namespace posecast::model {

namespace {

constexpr std::size_t kResidualBlocks = 3;

void require_positive(std::size_t v, const char* name) {
  if (v == 0) throw ConfigError(std::string("forecaster: ") + name + " must be > 0");
}

}  // namespace

void ForecasterConfig::validate() const {
  require_positive(history, "history");
  require_positive(joints, "joints");
  require_positive(num_actions, "num_actions");
  require_positive(latent_dim, "latent_dim");
  require_positive(hidden_dim, "hidden_dim");
  if (joints != pose::kNumJoints) {
    throw ConfigError("forecaster: joints = " + std::to_string(joints) + " but the layout has " +
                      std::to_string(pose::kNumJoints));
  }
  if (!(leaky_slope >= 0.0f && leaky_slope < 1.0f)) throw ConfigError("forecaster: leaky_slope outside [0, 1)");
  if (!(input_scale > 0.0f) || !(pose_scale_mm > 0.0f)) throw ConfigError("forecaster: scales must be > 0");
}

void to_json(nlohmann::json& j, const ForecasterConfig& c) {
  j = {{"history", c.history},
       {"joints", c.joints},
       {"num_actions", c.num_actions},
       {"num_objects", c.num_objects},
       {"latent_dim", c.latent_dim},
       {"hidden_dim", c.hidden_dim},
       {"noise_dim", c.noise_dim},
       {"leaky_slope", json_float(c.leaky_slope)},
       {"input_scale", json_float(c.input_scale)},
       {"pose_scale_mm", json_float(c.pose_scale_mm)}};
}

void from_json(const nlohmann::json& j, ForecasterConfig& c) {
  c.history = j.value("history", c.history);
  c.joints = j.value("joints", c.joints);
  c.num_actions = j.value("num_actions", c.num_actions);
  c.num_objects = j.value("num_objects", c.num_objects);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.noise_dim = j.value("noise_dim", c.noise_dim);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  c.input_scale = j.value("input_scale", c.input_scale);
  c.pose_scale_mm = j.value("pose_scale_mm", c.pose_scale_mm);
}

ForecastInputs make_inputs(const ForecasterConfig& config, std::span<const pose::SequenceSample> samples) {
  const std::size_t n = samples.size(), N = config.history, J = config.joints;
  if (n == 0) throw ContractError("forecaster input: empty batch");
  ForecastInputs in{nn::Tensor({n, N * J * 2}, 0.0f), nn::Tensor({n, N * config.num_actions}, 0.0f),
                    config.num_objects ? nn::Tensor({n, config.num_objects}, 0.0f) : nn::Tensor()};
  for (std::size_t r = 0; r < n; ++r) {
    const auto& s = samples[r];
    if (s.history.size() != N) {
      throw DimensionError("forecaster input: history of " + std::to_string(s.history.size()) + " steps, expected " +
                           std::to_string(N));
    }
    for (std::size_t t = 0; t < N; ++t) {
      const auto& p = s.history[t].pose;
      if (p.size() != J) throw DimensionError("forecaster input: pose with " + std::to_string(p.size()) + " joints");
      for (std::size_t j = 0; j < J; ++j) {
        in.poses.at(r, (t * J + j) * 2) = p.joints[j][0];
        in.poses.at(r, (t * J + j) * 2 + 1) = p.joints[j][1];
      }
      const std::size_t a = s.history[t].action;
      if (a >= config.num_actions) {
        throw VocabularyError("action id " + std::to_string(a) + " outside vocabulary of " +
                              std::to_string(config.num_actions));
      }
      in.actions.at(r, t * config.num_actions + a) = 1.0f;
    }
    if (config.num_objects) {
      const auto hot = pose::multi_hot(s.objects, config.num_objects);
      in.objects.set_row(r, hot);
    }
  }
  return in;
}

Forecaster::Forecaster(const ForecasterConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  nn::Rng rng(seed);
  const auto& c = config_;
  const float s = c.leaky_slope;
  pose_in_ = nn::LinearLayer("pose_encoder.in", c.history * c.joints * 2, c.hidden_dim, rng, s);
  for (std::size_t i = 0; i < kResidualBlocks; ++i) {
    pose_blocks_.emplace_back("pose_encoder.block" + std::to_string(i), c.hidden_dim, rng, s);
  }
  action_encoder_ = nn::Mlp("action_encoder", {c.history * c.num_actions, c.hidden_dim, c.hidden_dim}, rng, true, s);
  std::size_t fused = 2 * c.hidden_dim + c.noise_dim;
  if (c.num_objects) {
    object_encoder_ = nn::Mlp("object_encoder", {c.num_objects, c.hidden_dim, c.hidden_dim}, rng, true, s);
    fused += c.hidden_dim;
  }
  fusion_ = nn::Mlp("fusion", {fused, c.latent_dim, c.latent_dim}, rng, true, s);
  action_decoder_ = nn::Mlp("action_decoder", {c.latent_dim, c.hidden_dim, c.num_actions}, rng, false, s);
  pose_decoder_ = nn::Mlp("pose_decoder", {c.latent_dim, c.hidden_dim, 3 * c.joints}, rng, false, s);
}

nn::Var Forecaster::encode_pose_history(nn::Binder& bind, const nn::Var& poses) {
  const std::size_t want = config_.history * config_.joints * 2;
  if (poses.value().cols() != want) {
    throw DimensionError("pose encoder: input " + nn::shape_string(poses.shape()) + ", expected " +
                         std::to_string(want) + " columns");
  }
  nn::Var h = pose_in_.forward(bind, nn::scale(poses, config_.input_scale));
  for (auto& block : pose_blocks_) h = block.forward(bind, h);
  return nn::leaky_relu(h, config_.leaky_slope);
}

nn::Var Forecaster::encode_labels(nn::Binder& bind, const nn::Var& actions, const nn::Var& objects) {
  if (actions.value().cols() != config_.history * config_.num_actions) {
    throw DimensionError("label encoder: actions " + nn::shape_string(actions.shape()));
  }
  nn::Var a = action_encoder_.forward(bind, actions);
  if (!config_.num_objects) return a;
  if (objects.value().cols() != config_.num_objects || objects.value().rows() != actions.value().rows()) {
    throw DimensionError("label encoder: objects " + nn::shape_string(objects.shape()));
  }
  nn::Var o = object_encoder_.forward(bind, objects);
  const nn::Var parts[] = {a, o};
  return nn::concat_cols(parts);
}

nn::Var Forecaster::fuse(nn::Binder& bind, const ForecastInputs& inputs, const nn::Tensor& noise) {
  nn::Tape& tape = bind.tape();
  const std::size_t n = inputs.rows();
  nn::Var p = encode_pose_history(bind, tape.constant(inputs.poses));
  nn::Var l = encode_labels(bind, tape.constant(inputs.actions),
                            config_.num_objects ? tape.constant(inputs.objects) : nn::Var());
  std::vector<nn::Var> parts{p, l};
  if (config_.noise_dim) {
    if (noise.rows() != n || noise.cols() != config_.noise_dim) {
      throw DimensionError("fusion: noise " + nn::shape_string(noise.shape()) + " for a batch of " +
                           std::to_string(n));
    }
    parts.push_back(tape.constant(noise));
  }
  return fusion_.forward(bind, nn::concat_cols(parts));
}

ForecastVars Forecaster::forward(nn::Binder& bind, const ForecastInputs& inputs, const nn::Tensor& noise) {
  nn::Var z = fuse(bind, inputs, noise);
  nn::Var logits = action_decoder_.forward(bind, z);
  nn::Var raw = nn::scale(pose_decoder_.forward(bind, z), config_.pose_scale_mm);
  return {logits, geometry::center_batch(raw, 3, config_.joints)};
}

ForecasterOutput Forecaster::predict(const pose::SequenceSample& sample, const std::vector<float>& noise) {
  nn::Tape tape;
  nn::Binder bind(tape, false);
  const auto inputs = make_inputs(config_, std::span<const pose::SequenceSample>(&sample, 1));
  nn::Tensor z;
  if (config_.noise_dim) z = noise.empty() ? nn::Tensor({1, config_.noise_dim}, 0.0f) : nn::Tensor({1, config_.noise_dim}, noise);
  auto out = forward(bind, inputs, z);
  return {out.logits.value().vec(), pose::Skeleton3D::from_flat(out.pose3d.value().vec())};
}

std::vector<std::pair<std::string, std::vector<nn::Parameter*>>> Forecaster::parameter_groups() {
  std::vector<std::pair<std::string, std::vector<nn::Parameter*>>> groups(6);
  groups[0].first = "pose_encoder";
  pose_in_.collect(groups[0].second);
  for (auto& b : pose_blocks_) b.collect(groups[0].second);
  groups[1].first = "action_encoder";
  action_encoder_.collect(groups[1].second);
  groups[2].first = "object_encoder";
  if (config_.num_objects) object_encoder_.collect(groups[2].second);
  groups[3].first = "fusion";
  fusion_.collect(groups[3].second);
  groups[4].first = "action_decoder";
  action_decoder_.collect(groups[4].second);
  groups[5].first = "pose_decoder";
  pose_decoder_.collect(groups[5].second);
  if (!config_.num_objects) groups.erase(groups.begin() + 2);
  return groups;
}

std::vector<nn::Parameter*> Forecaster::parameters() {
  std::vector<nn::Parameter*> all;
  for (auto& [name, ps] : parameter_groups()) all.insert(all.end(), ps.begin(), ps.end());
  return all;
}

nlohmann::json Forecaster::metadata() const { return {{"kind", "forecaster"}, {"config", config_}}; }

void Forecaster::save(const std::string& path, nlohmann::json extra) {
  nlohmann::json meta = metadata();
  meta.update(extra);
  nn::save_parameters(path, meta.dump(), parameters());
}

Forecaster Forecaster::load(const std::string& path) {
  const auto data = nn::read_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(data.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": metadata is not JSON: " + e.what());
  }
  if (meta.value("kind", "") != "forecaster") throw VersionError(path + ": not a forecaster checkpoint");
  Forecaster f(meta.at("config").get<ForecasterConfig>(), 0);
  nn::assign_parameters(data, f.parameters());
  return f;
}

}  // namespace posecast::model
