#include "posecast/train/config.hpp"
#include "posecast/json_float.hpp"

#include <fstream>

#include "posecast/errors.hpp"

namespace posecast::train {

using nlohmann::json;

namespace {

// Every key of `given` must exist in `known` (objects are compared recursively).
void check_keys(const json& given, const json& known, const std::string& prefix) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!known.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    if (value.is_object() && known.at(key).is_object()) check_keys(value, known.at(key), path);
  }
}

}  // namespace

const std::vector<std::string>& ablation_rows() {
  static const std::vector<std::string> rows = {"action", "action+pose2d", "pose2d", "pose2d+adv3d", "full"};
  return rows;
}

LossWeights ablation_weights(const std::string& row) {
  const LossWeights paper;
  LossWeights w{0.0, 0.0, 0.0};
  if (row == "full") return paper;
  if (row == "action" || row == "action+pose2d") w.action = paper.action;
  if (row == "action+pose2d" || row == "pose2d" || row == "pose2d+adv3d") w.pose2d = paper.pose2d;
  if (row == "pose2d+adv3d") w.adv3d = paper.adv3d;
  if (w.action == 0.0 && w.pose2d == 0.0) throw ConfigError("unknown ablation row '" + row + "'");
  return w;
}

void TrainConfig::validate() const {
  if (!(weights.action >= 0.0 && weights.pose2d >= 0.0 && weights.adv3d >= 0.0)) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (batch == 0 || accumulate == 0) throw ConfigError("batch and accumulate must be > 0");
  if (!(lr > 0.0f) || !(critic_lr > 0.0f)) throw ConfigError("learning rates must be > 0");
  if (!(weight_decay >= 0.0f)) throw ConfigError("weight_decay must be >= 0");
  if (n_critic == 0) throw ConfigError("n_critic must be > 0");
  if (rollout_steps == 0) throw ConfigError("rollout_steps must be > 0");
  critic.validate();
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"loss", {{"action", c.weights.action}, {"pose2d", c.weights.pose2d}, {"adv3d", c.weights.adv3d}}},
       {"batch", c.batch},
       {"accumulate", c.accumulate},
       {"lr", json_float(c.lr)},
       {"weight_decay", json_float(c.weight_decay)},
       {"critic_lr", json_float(c.critic_lr)},
       {"critic_beta1", json_float(c.critic_beta1)},
       {"critic_beta2", json_float(c.critic_beta2)},
       {"n_critic", c.n_critic},
       {"epochs", c.epochs},
       {"patience", c.patience},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every},
       {"fake_pool_size", c.fake_pool_size},
       {"rollout_steps", c.rollout_steps},
       {"projection", geometry::to_string(c.projection)},
       {"soft_clamp", c.soft_clamp},
       {"model", c.model},
       {"critic", c.critic}};
}

void from_json(const json& j, TrainConfig& c) {
  check_keys(j, json(TrainConfig{}), "");
  try {
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      c.weights.action = l.value("action", c.weights.action);
      c.weights.pose2d = l.value("pose2d", c.weights.pose2d);
      c.weights.adv3d = l.value("adv3d", c.weights.adv3d);
    }
    c.batch = j.value("batch", c.batch);
    c.accumulate = j.value("accumulate", c.accumulate);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.critic_lr = j.value("critic_lr", c.critic_lr);
    c.critic_beta1 = j.value("critic_beta1", c.critic_beta1);
    c.critic_beta2 = j.value("critic_beta2", c.critic_beta2);
    c.n_critic = j.value("n_critic", c.n_critic);
    c.epochs = j.value("epochs", c.epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.fake_pool_size = j.value("fake_pool_size", c.fake_pool_size);
    c.rollout_steps = j.value("rollout_steps", c.rollout_steps);
    if (j.contains("projection")) c.projection = geometry::parse_projection_mode(j.at("projection").get<std::string>());
    c.soft_clamp = j.value("soft_clamp", c.soft_clamp);
    if (j.contains("model")) {
      json merged = c.model;
      merged.update(j.at("model"));
      c.model = merged.get<model::ForecasterConfig>();
    }
    if (j.contains("critic")) {
      json merged = c.critic;
      merged.update(j.at("critic"));
      c.critic = merged.get<model::CriticConfig>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json preset_overlay(const std::string& name) {
  if (name == "default") return json::object();
  if (name == "paper-cooking" || name == "paper-assembly") {
    return {{"loss", {{"action", 1e6}, {"pose2d", 1.0}, {"adv3d", 1.0}}},
            {"batch", 4096},
            {"lr", 1e-4},
            {"weight_decay", 1e-3},
            {"rollout_steps", name == "paper-cooking" ? 10 : 5}};
  }
  if (name == "synthetic") {
    // desk-scale widths and a larger step size for the puppet datasets
    return {{"batch", 128},
            {"lr", 1e-3},
            {"critic_lr", 1e-3},
            {"loss", {{"action", 1e3}, {"pose2d", 1.0}, {"adv3d", 10.0}}},
            {"model", {{"latent_dim", 128}, {"hidden_dim", 128}, {"noise_dim", 8}}},
            {"critic",
             {{"joint_widths", {128, 128, 128, 128}}, {"kinematic_widths", {64, 64, 64}}, {"merge_widths", {128, 1}}}}};
  }
  throw ConfigError("unknown preset '" + name + "' (expected default|synthetic|paper-cooking|paper-assembly)");
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  std::string pointer;
  std::size_t start = 0;
  while (start <= key.size()) {
    const auto dot = key.find('.', start);
    pointer += "/" + key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  j[json::json_pointer(pointer)] = value;
}

json merge_config(const std::optional<std::filesystem::path>& file, const std::optional<std::string>& preset,
                  const std::vector<std::string>& overrides) {
  json j = json::object();
  if (preset) j.merge_patch(preset_overlay(*preset));
  if (file) {
    std::ifstream in(*file);
    if (!in) throw FormatError("cannot open config " + file->string());
    try {
      j.merge_patch(json::parse(in));
    } catch (const json::exception& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(j, o);
  return j;
}

TrainConfig resolve_config(const std::optional<std::filesystem::path>& file, const std::optional<std::string>& preset,
                           const std::vector<std::string>& overrides) {
  TrainConfig c = merge_config(file, preset, overrides).get<TrainConfig>();
  c.validate();
  return c;
}

}  // namespace posecast::train
