#include "posecast/eval/metrics.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "posecast/errors.hpp"
#include "posecast/geometry/metrics.hpp"

namespace posecast::eval {

using nlohmann::json;

std::size_t rank_of(std::span<const float> scores, std::size_t target) {
  if (target >= scores.size()) {
    throw VocabularyError("label " + std::to_string(target) + " outside " + std::to_string(scores.size()) + " scores");
  }
  std::size_t rank = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > scores[target] || (scores[i] == scores[target] && i < target)) ++rank;
  }
  return rank;
}

namespace {

void check_aligned(const LogitSequences& logits, const LabelSequences& labels, std::size_t k) {
  if (logits.size() != labels.size()) throw ContractError("top-k: logits and labels cover different sequence counts");
  for (std::size_t s = 0; s < logits.size(); ++s) {
    if (logits[s].size() != labels[s].size()) throw ContractError("top-k: sequence " + std::to_string(s) + " misaligned");
    for (const auto& l : logits[s]) {
      if (k > l.size()) {
        throw ContractError("top-k: k = " + std::to_string(k) + " exceeds " + std::to_string(l.size()) + " classes");
      }
    }
  }
  if (k == 0) throw ContractError("top-k: k must be >= 1");
}

}  // namespace

double topk_accuracy(const LogitSequences& logits, const LabelSequences& labels, std::size_t k) {
  check_aligned(logits, labels, k);
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t s = 0; s < logits.size(); ++s) {
    if (logits[s].empty()) continue;
    std::size_t hits = 0;
    for (std::size_t t = 0; t < logits[s].size(); ++t) hits += rank_of(logits[s][t], labels[s][t]) < k;
    sum += static_cast<double>(hits) / static_cast<double>(logits[s].size());
    ++used;
  }
  if (used == 0) throw ContractError("top-k: no predicted steps");
  return sum / static_cast<double>(used);
}

std::vector<double> per_step_accuracy(const LogitSequences& logits, const LabelSequences& labels, std::size_t k) {
  check_aligned(logits, labels, k);
  std::vector<double> hits;
  std::vector<std::size_t> counts;
  for (std::size_t s = 0; s < logits.size(); ++s) {
    for (std::size_t t = 0; t < logits[s].size(); ++t) {
      if (t >= hits.size()) {
        hits.resize(t + 1, 0.0);
        counts.resize(t + 1, 0);
      }
      hits[t] += rank_of(logits[s][t], labels[s][t]) < k;
      ++counts[t];
    }
  }
  for (std::size_t t = 0; t < hits.size(); ++t) hits[t] /= static_cast<double>(counts[t]);
  return hits;
}

std::vector<pose::Skeleton2D> zero_velocity_baseline(const pose::Skeleton2D& last_observed, std::size_t steps) {
  return std::vector<pose::Skeleton2D>(steps, last_observed);
}

pose::Skeleton2D train_average_pose(std::span<const pose::SequenceSample> train) {
  if (train.empty()) throw ContractError("train-average baseline: empty training set");
  const std::size_t J = train.front().target_pose2d.size();
  std::vector<double> sx(J, 0.0), sy(J, 0.0);
  std::vector<std::size_t> n(J, 0);
  for (const auto& s : train) {
    for (std::size_t j = 0; j < J; ++j) {
      if (!s.target_pose2d.visible(j)) continue;
      sx[j] += s.target_pose2d.joints[j][0];
      sy[j] += s.target_pose2d.joints[j][1];
      ++n[j];
    }
  }
  pose::Skeleton2D mean(J);
  for (std::size_t j = 0; j < J; ++j) {
    if (n[j]) mean.joints[j] = {static_cast<float>(sx[j] / n[j]), static_cast<float>(sy[j] / n[j])};
  }
  return mean;
}

std::vector<float> repeat_last_scores(std::span<const std::size_t> history_actions, std::size_t num_actions) {
  if (history_actions.empty()) throw ContractError("repeat-last baseline: empty history");
  std::vector<float> scores(num_actions, 0.0f);
  float next = static_cast<float>(history_actions.size());
  for (auto it = history_actions.rbegin(); it != history_actions.rend(); ++it) {
    if (*it >= num_actions) throw VocabularyError("repeat-last baseline: label outside vocabulary");
    if (scores[*it] == 0.0f) scores[*it] = next--;
  }
  return scores;
}

std::vector<std::size_t> action_counts(const std::vector<data::Sequence>& train, std::size_t num_actions) {
  std::vector<std::size_t> counts(num_actions, 0);
  for (const auto& s : train)
    for (const auto& step : s.steps) ++counts.at(step.action);
  return counts;
}

std::vector<float> most_common_scores(std::span<const std::size_t> counts) {
  return std::vector<float>(counts.begin(), counts.end());
}

EvalInputs align(const rollout::RolloutFile& file, const std::vector<data::Sequence>& sequences,
                 const std::vector<data::Sequence>& train, std::size_t num_actions) {
  std::map<std::pair<std::string, std::size_t>, rollout::RolloutTask> by_key;
  for (const auto& s : sequences)
    for (auto& t : rollout::rollout_tasks(s, file.history, file.steps)) {
      auto key = std::make_pair(s.id, t.start_step);
      by_key.emplace(std::move(key), std::move(t));
    }
  EvalInputs in;
  in.num_actions = num_actions;
  for (const auto& r : file.records) {
    auto it = by_key.find({r.sequence_id, r.start_step});
    if (it == by_key.end()) {
      throw ValidationError("rollouts: no ground truth for " + r.sequence_id + " at step " +
                            std::to_string(r.start_step));
    }
    if (r.steps.size() > it->second.gt_actions.size()) throw ValidationError("rollouts: more steps than ground truth");
    in.tasks.push_back(it->second);
    in.records.push_back(r);
  }
  in.train_windows = data::window_samples(train, file.history);
  in.train_counts = action_counts(train, num_actions);
  return in;
}

EvalReport evaluate(const EvalInputs& in, const pose::JointLayout& layout) {
  if (in.records.empty()) throw ContractError("evaluate: no rollouts");
  EvalReport rep;
  rep.rollouts = in.records.size();
  // grouped by sequence id for the per-sequence mean of top-k
  std::map<std::string, std::size_t> seq_index;
  LogitSequences logits, rl_scores, mc_scores;
  LabelSequences labels;
  std::vector<pose::Skeleton2D> pred, gt, zero_vel, train_avg;
  const auto avg = in.train_windows.empty() ? pose::Skeleton2D() : train_average_pose(in.train_windows);
  const auto mc = most_common_scores(in.train_counts);
  LogitSequences curve_logits;
  LabelSequences curve_labels;
  double sym = 0.0;
  std::size_t sym_n = 0;
  for (std::size_t i = 0; i < in.records.size(); ++i) {
    const auto& r = in.records[i];
    const auto& t = in.tasks[i];
    if (r.error) ++rep.truncated;
    auto [it, fresh] = seq_index.emplace(r.sequence_id, logits.size());
    if (fresh) {
      logits.emplace_back();
      labels.emplace_back();
      rl_scores.emplace_back();
      mc_scores.emplace_back();
    }
    const std::size_t s = it->second;
    std::vector<std::size_t> hist;
    for (const auto& h : t.initial.history) hist.push_back(h.action);
    const auto rl = repeat_last_scores(hist, in.num_actions);
    curve_logits.emplace_back();
    curve_labels.emplace_back();
    for (std::size_t m = 0; m < r.steps.size(); ++m) {
      const auto& step = r.steps[m];
      if (step.logits.size() != in.num_actions) throw ValidationError("rollouts: logits do not match the vocabulary");
      logits[s].push_back(step.logits);
      labels[s].push_back(t.gt_actions[m]);
      curve_logits.back().push_back(step.logits);
      curve_labels.back().push_back(t.gt_actions[m]);
      pred.push_back(step.pose2d);
      gt.push_back(t.gt_poses[m]);
      sym += geometry::symmetry_error(step.pose3d, layout);
      ++sym_n;
    }
    // baselines are scored on the full horizon
    const auto zv = zero_velocity_baseline(t.initial.history.back().pose, t.gt_poses.size());
    for (std::size_t m = 0; m < t.gt_poses.size(); ++m) {
      rl_scores[s].push_back(rl);
      mc_scores[s].push_back(mc);
      zero_vel.push_back(zv[m]);
      if (!avg.joints.empty()) train_avg.push_back(avg);
    }
  }
  LabelSequences full_labels(labels.size());
  for (std::size_t i = 0; i < in.records.size(); ++i) {
    const auto& t = in.tasks[i];
    auto& dst = full_labels[seq_index.at(in.records[i].sequence_id)];
    dst.insert(dst.end(), t.gt_actions.begin(), t.gt_actions.end());
  }
  std::vector<pose::Skeleton2D> full_gt;
  for (const auto& t : in.tasks) full_gt.insert(full_gt.end(), t.gt_poses.begin(), t.gt_poses.end());

  if (pred.empty()) throw ContractError("evaluate: every rollout is empty");
  rep.mpjpe_px = geometry::mpjpe_2d(pred, gt);
  const std::size_t k3 = std::min<std::size_t>(3, in.num_actions);
  rep.top1 = topk_accuracy(logits, labels, 1);
  rep.top3 = topk_accuracy(logits, labels, k3);
  rep.symmetry_mm = sym_n ? sym / static_cast<double>(sym_n) : 0.0;
  rep.per_step_accuracy = per_step_accuracy(curve_logits, curve_labels, 1);
  rep.per_step_top3 = per_step_accuracy(curve_logits, curve_labels, k3);

  rep.baselines.zero_velocity_mpjpe = geometry::mpjpe_2d(zero_vel, full_gt);
  if (!train_avg.empty()) rep.baselines.train_average_mpjpe = geometry::mpjpe_2d(train_avg, full_gt);
  rep.baselines.repeat_last_top1 = topk_accuracy(rl_scores, full_labels, 1);
  rep.baselines.repeat_last_top3 = topk_accuracy(rl_scores, full_labels, k3);
  rep.baselines.most_common_top1 = topk_accuracy(mc_scores, full_labels, 1);
  rep.baselines.most_common_top3 = topk_accuracy(mc_scores, full_labels, k3);
  return rep;
}

json to_json(const EvalReport& r) {
  return {{"mpjpe_px", r.mpjpe_px},
          {"quality", r.quality ? json(*r.quality) : json(nullptr)},
          {"top1", r.top1},
          {"top3", r.top3},
          {"symmetry_mm", r.symmetry_mm},
          {"per_step_accuracy", r.per_step_accuracy},
          {"per_step_top3", r.per_step_top3},
          {"rollouts", r.rollouts},
          {"truncated", r.truncated},
          {"baselines",
           {{"zero_velocity_mpjpe_px", r.baselines.zero_velocity_mpjpe},
            {"train_average_mpjpe_px", r.baselines.train_average_mpjpe},
            {"repeat_last_top1", r.baselines.repeat_last_top1},
            {"repeat_last_top3", r.baselines.repeat_last_top3},
            {"most_common_top1", r.baselines.most_common_top1},
            {"most_common_top3", r.baselines.most_common_top3}}}};
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << to_json(report).dump(2) << "\n";
}

void write_accuracy_curve(const std::filesystem::path& path, const EvalReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "step,top1,top3\n";
  for (std::size_t t = 0; t < report.per_step_accuracy.size(); ++t) {
    out << t + 1 << "," << report.per_step_accuracy[t] << "," << report.per_step_top3[t] << "\n";
  }
}

}  // namespace posecast::eval
