#include "posecast/rollout/rollout.hpp"

#include <cmath>
#include <fstream>

#include "posecast/errors.hpp"

namespace posecast::rollout {

using nlohmann::json;

NoisePolicy parse_noise_policy(const std::string& name) {
  if (name == "zero") return NoisePolicy::kFixedZero;
  if (name == "resample") return NoisePolicy::kResample;
  throw ConfigError("unknown noise policy '" + name + "' (expected zero|resample)");
}

std::string to_string(NoisePolicy policy) { return policy == NoisePolicy::kFixedZero ? "zero" : "resample"; }

std::size_t argmax(std::span<const float> logits) {
  if (logits.empty()) throw ContractError("argmax: empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

namespace {

std::size_t sample_action(std::span<const float> logits, float temperature, nn::Rng& rng) {
  if (!(temperature > 0.0f)) throw ConfigError("sampling temperature must be > 0");
  const float top = logits[argmax(logits)];
  std::vector<double> cumulative(logits.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    acc += std::exp(static_cast<double>(logits[i] - top) / temperature);
    cumulative[i] = acc;
  }
  const double u = static_cast<double>(rng.uniform()) * acc;
  for (std::size_t i = 0; i < cumulative.size(); ++i)
    if (u < cumulative[i]) return i;
  return cumulative.size() - 1;
}

}  // namespace

RolloutRecord rollout(model::Forecaster& model, const pose::SequenceSample& initial, const RolloutOptions& options,
                      nn::Rng& rng) {
  if (options.steps == 0) throw ContractError("rollout: M must be >= 1");
  const auto& cfg = model.config();
  if (initial.history.size() != cfg.history) {
    throw DimensionError("rollout: history of " + std::to_string(initial.history.size()) + " steps, model expects " +
                         std::to_string(cfg.history));
  }
  RolloutRecord rec;
  rec.sequence_id = initial.sequence_id;
  rec.start_step = initial.step_index;
  pose::SequenceSample window = initial;
  std::vector<float> noise(cfg.noise_dim, 0.0f);
  for (std::size_t m = 0; m < options.steps; ++m) {
    if (options.noise == NoisePolicy::kResample)
      for (auto& v : noise) v = rng.normal();
    auto out = model.predict(window, noise);
    RolloutStep step;
    step.action = options.sample_actions ? sample_action(out.action_logits, options.temperature, rng)
                                         : argmax(out.action_logits);
    step.logits = std::move(out.action_logits);
    step.pose3d = std::move(out.pose3d);
    try {
      step.pose2d = pose::center_at_neck(geometry::project(step.pose3d, window.camera, options.projection));
    } catch (const ProjectionError& e) {
      rec.error = e.what();
      rec.error_step = m;
      break;
    }
    window.history.erase(window.history.begin());
    window.history.push_back({step.pose2d, step.action});
    rec.steps.push_back(std::move(step));
  }
  return rec;
}

std::vector<RolloutTask> rollout_tasks(const data::Sequence& sequence, std::size_t history, std::size_t steps) {
  std::vector<RolloutTask> tasks;
  const auto& s = sequence.steps;
  for (std::size_t start = history; start + steps <= s.size(); ++start) {
    RolloutTask t;
    for (std::size_t k = start - history; k < start; ++k) t.initial.history.push_back({s[k].pose, s[k].action});
    t.initial.objects = s.front().objects;
    t.initial.camera = sequence.camera;
    t.initial.sequence_id = sequence.id;
    t.initial.step_index = start;
    t.initial.target_action = s[start].action;
    t.initial.target_pose2d = s[start].pose;
    t.start_step = start;
    for (std::size_t k = start; k < start + steps; ++k) {
      t.gt_actions.push_back(s[k].action);
      t.gt_poses.push_back(s[k].pose);
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

RolloutRecord ground_truth_record(const RolloutTask& task, std::size_t num_actions) {
  RolloutRecord rec;
  rec.sequence_id = task.initial.sequence_id;
  rec.start_step = task.start_step;
  for (std::size_t m = 0; m < task.gt_actions.size(); ++m) {
    RolloutStep s;
    s.action = task.gt_actions[m];
    s.logits = pose::one_hot(s.action, num_actions);
    s.pose3d = pose::Skeleton3D(task.gt_poses[m].size());
    s.pose2d = task.gt_poses[m];
    rec.steps.push_back(std::move(s));
  }
  return rec;
}

json to_json(const RolloutFile& file) {
  json seqs = json::array();
  for (const auto& r : file.records) {
    json steps = json::array();
    for (const auto& s : r.steps) {
      json p3 = json::array(), p2 = json::array();
      for (const auto& j : s.pose3d.joints) p3.push_back({j[0], j[1], j[2]});
      for (const auto& j : s.pose2d.joints) p2.push_back({j[0], j[1]});
      const std::string name = s.action < file.action_names.size() ? file.action_names[s.action] : "";
      steps.push_back({{"action_id", s.action}, {"action_name", name}, {"logits", s.logits},
                       {"pose3d_mm", p3},       {"pose2d_px", p2}});
    }
    json rec = {{"sequence_id", r.sequence_id}, {"start_step", r.start_step}, {"steps", steps}};
    if (r.error) rec["error"] = {{"step", *r.error_step}, {"message", *r.error}};
    seqs.push_back(std::move(rec));
  }
  return {{"format_version", data::kFormatVersion}, {"split", file.split},      {"history", file.history},
          {"steps", file.steps},                    {"actions", file.action_names}, {"sequences", seqs}};
}

RolloutFile rollouts_from_json(const json& j) {
  if (j.value("format_version", -1) != data::kFormatVersion) throw VersionError("rollouts: unsupported format_version");
  RolloutFile f;
  try {
    f.split = j.value("split", std::string());
    f.history = j.at("history").get<std::size_t>();
    f.steps = j.at("steps").get<std::size_t>();
    f.action_names = j.value("actions", std::vector<std::string>{});
    for (const auto& r : j.at("sequences")) {
      RolloutRecord rec;
      rec.sequence_id = r.at("sequence_id").get<std::string>();
      rec.start_step = r.at("start_step").get<std::size_t>();
      for (const auto& s : r.at("steps")) {
        RolloutStep st;
        st.action = s.at("action_id").get<std::size_t>();
        st.logits = s.value("logits", std::vector<float>{});
        const auto& p3 = s.at("pose3d_mm");
        st.pose3d = pose::Skeleton3D(p3.size());
        for (std::size_t k = 0; k < p3.size(); ++k) st.pose3d.joints[k] = {p3[k][0], p3[k][1], p3[k][2]};
        const auto& p2 = s.at("pose2d_px");
        st.pose2d = pose::Skeleton2D(p2.size());
        for (std::size_t k = 0; k < p2.size(); ++k) st.pose2d.joints[k] = {p2[k][0], p2[k][1]};
        rec.steps.push_back(std::move(st));
      }
      if (r.contains("error")) {
        rec.error = r.at("error").at("message").get<std::string>();
        rec.error_step = r.at("error").at("step").get<std::size_t>();
      }
      f.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("rollouts: ") + e.what());
  }
  return f;
}

void write_rollouts(const std::filesystem::path& path, const RolloutFile& file) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << to_json(file).dump() << "\n";
}

RolloutFile read_rollouts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return rollouts_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace posecast::rollout
