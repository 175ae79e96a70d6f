#include "posecast/data/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include "posecast/data/posedb.hpp"
#include "posecast/errors.hpp"
#include "posecast/geometry/projection.hpp"
#include "posecast/nn/rng.hpp"

namespace posecast::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Body proportions in mm; both sides share them so canonical poses are symmetric.
constexpr float kHeadHeight = 220.0f;
constexpr float kShoulderHalfWidth = 180.0f;
constexpr float kShoulderDrop = 20.0f;
constexpr float kUpperArm = 290.0f;
constexpr float kForearm = 260.0f;
constexpr float kTorso = 520.0f;

std::array<float, 3> random_direction(nn::Rng& rng, float outward) {
  // rejection-sample a unit vector that stays roughly on its own side and in front of the body
  for (;;) {
    std::array<float, 3> d{rng.normal(), rng.normal(), rng.normal()};
    const float n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if (n < 1e-3f) continue;
    for (auto& c : d) c /= n;
    if (d[0] * outward < -0.3f || d[1] < -0.6f || d[2] > 0.3f) continue;
    return d;
  }
}

std::size_t pick(nn::Rng& rng, const std::vector<double>& cumulative) {
  const double u = rng.uniform() * cumulative.back();
  for (std::size_t i = 0; i < cumulative.size(); ++i)
    if (u < cumulative[i]) return i;
  return cumulative.size() - 1;
}

pose::Skeleton3D perturb(const std::vector<pose::Vec3>& canonical, double radius, nn::Rng& rng) {
  pose::Skeleton3D p(canonical.size());
  for (std::size_t j = 0; j < canonical.size(); ++j) {
    p.joints[j] = canonical[j];
    if (j == pose::kNeck || radius <= 0.0) continue;
    std::array<float, 3> d{rng.normal(), rng.normal(), rng.normal()};
    const float n = std::max(1e-6f, std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]));
    const float r = static_cast<float>(radius) * std::cbrt(rng.uniform());
    for (int c = 0; c < 3; ++c) p.joints[j][c] += r * d[c] / n;
  }
  return p;
}

std::string sequence_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%04zu", i);
  return buf;
}

}  // namespace

std::vector<pose::Vec3> procedural_pose(std::uint64_t seed, std::size_t action) {
  nn::Rng rng = nn::Rng(seed).fork(action);
  std::vector<pose::Vec3> p(pose::kNumJoints, pose::Vec3{0, 0, 0});
  const float tilt = rng.uniform(-0.25f, 0.25f);
  p[pose::kHead] = {kHeadHeight * std::sin(tilt), -kHeadHeight * std::cos(tilt), rng.uniform(-40.0f, 20.0f)};
  p[pose::kHip] = {0.0f, kTorso, 0.0f};
  const std::size_t chains[2][3] = {{pose::kRightShoulder, pose::kRightElbow, pose::kRightHand},
                                    {pose::kLeftShoulder, pose::kLeftElbow, pose::kLeftHand}};
  // the subject faces the camera, so its right side is on the image's left (negative x)
  const float side[2] = {-1.0f, 1.0f};
  for (int s = 0; s < 2; ++s) {
    const auto& c = chains[s];
    p[c[0]] = {side[s] * kShoulderHalfWidth, kShoulderDrop, 0.0f};
    const auto upper = random_direction(rng, side[s]);
    const auto fore = random_direction(rng, side[s]);
    for (int k = 0; k < 3; ++k) {
      p[c[1]][k] = p[c[0]][k] + kUpperArm * upper[k];
      p[c[2]][k] = p[c[1]][k] + kForearm * fore[k];
    }
  }
  return p;
}

void GrammarSpec::validate() const {
  if (actions.size() < 2) throw SpecError("grammar " + name + ": needs at least 2 actions");
  std::set<std::string> names(actions.begin(), actions.end());
  if (names.size() != actions.size()) throw SpecError("grammar " + name + ": duplicate action names");
  for (const auto& a : actions) {
    auto it = transitions.find(a);
    if (it == transitions.end() || it->second.empty()) {
      throw SpecError("grammar " + name + ": action '" + a + "' has no successors (absorbing state)");
    }
    double total = 0.0;
    for (const auto& [next, prob] : it->second) {
      if (!names.count(next)) throw SpecError("grammar " + name + ": unknown successor '" + next + "' of '" + a + "'");
      if (!(prob >= 0.0)) throw SpecError("grammar " + name + ": negative transition probability");
      total += prob;
    }
    if (!(total > 0.0)) throw SpecError("grammar " + name + ": action '" + a + "' has zero outgoing probability");
  }
  for (const auto& [a, p] : canonical_poses) {
    if (!names.count(a)) throw SpecError("grammar " + name + ": canonical pose for unknown action '" + a + "'");
    if (p.size() != pose::kNumJoints) throw SpecError("grammar " + name + ": canonical pose of '" + a + "' has wrong joint count");
  }
  for (const auto& [a, row] : transitions)
    if (!names.count(a)) throw SpecError("grammar " + name + ": transitions for unknown action '" + a + "'");
  if (sequences == 0) throw SpecError("grammar " + name + ": sequences must be > 0");
  if (min_steps == 0 || min_steps > max_steps) throw SpecError("grammar " + name + ": bad step range");
  if (!(noise_mm >= 0.0)) throw SpecError("grammar " + name + ": noise_mm must be >= 0");
  if (!(train_fraction >= 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction <= 1.0)) {
    throw SpecError("grammar " + name + ": bad split fractions");
  }
  if (objects_per_sequence > objects.size()) throw SpecError("grammar " + name + ": objects_per_sequence exceeds vocabulary");
  if (!(distance_min_mm > 0.0 && distance_min_mm <= distance_max_mm)) throw SpecError("grammar " + name + ": bad distance range");
  if (!(focal_min > 0.0 && focal_min <= focal_max)) throw SpecError("grammar " + name + ": bad focal range");
  if (history == 0 || rollout_steps == 0) throw SpecError("grammar " + name + ": history and rollout_steps must be > 0");
}

void to_json(json& j, const GrammarSpec& g) {
  j = {{"format_version", kFormatVersion},
       {"name", g.name},
       {"actions", g.actions},
       {"objects", g.objects},
       {"canonical_poses", g.canonical_poses},
       {"transitions", g.transitions},
       {"pose_seed", g.pose_seed},
       {"sequences", g.sequences},
       {"min_steps", g.min_steps},
       {"max_steps", g.max_steps},
       {"noise_mm", g.noise_mm},
       {"pose_db_size", g.pose_db_size},
       {"train_fraction", g.train_fraction},
       {"val_fraction", g.val_fraction},
       {"objects_per_sequence", g.objects_per_sequence},
       {"camera",
        {{"distance_mm", {g.distance_min_mm, g.distance_max_mm}},
         {"yaw_deg", g.yaw_deg},
         {"pitch_deg", g.pitch_deg},
         {"focal", {g.focal_min, g.focal_max}},
         {"principal", {g.cx, g.cy}},
         {"offset_mm", g.offset_mm}}},
       {"history", g.history},
       {"rollout_steps", g.rollout_steps}};
}

void from_json(const json& j, GrammarSpec& g) {
  if (j.value("format_version", kFormatVersion) != kFormatVersion) throw VersionError("grammar: unsupported format_version");
  g.name = j.value("name", g.name);
  g.actions = j.at("actions").get<std::vector<std::string>>();
  g.objects = j.value("objects", g.objects);
  g.canonical_poses = j.value("canonical_poses", g.canonical_poses);
  g.transitions = j.at("transitions").get<std::map<std::string, std::map<std::string, double>>>();
  g.pose_seed = j.value("pose_seed", g.pose_seed);
  g.sequences = j.value("sequences", g.sequences);
  g.min_steps = j.value("min_steps", g.min_steps);
  g.max_steps = j.value("max_steps", g.max_steps);
  g.noise_mm = j.value("noise_mm", g.noise_mm);
  g.pose_db_size = j.value("pose_db_size", g.pose_db_size);
  g.train_fraction = j.value("train_fraction", g.train_fraction);
  g.val_fraction = j.value("val_fraction", g.val_fraction);
  g.objects_per_sequence = j.value("objects_per_sequence", g.objects_per_sequence);
  if (j.contains("camera")) {
    const auto& c = j.at("camera");
    if (c.contains("distance_mm")) {
      g.distance_min_mm = c.at("distance_mm").at(0).get<double>();
      g.distance_max_mm = c.at("distance_mm").at(1).get<double>();
    }
    g.yaw_deg = c.value("yaw_deg", g.yaw_deg);
    g.pitch_deg = c.value("pitch_deg", g.pitch_deg);
    if (c.contains("focal")) {
      g.focal_min = c.at("focal").at(0).get<double>();
      g.focal_max = c.at("focal").at(1).get<double>();
    }
    if (c.contains("principal")) {
      g.cx = c.at("principal").at(0).get<double>();
      g.cy = c.at("principal").at(1).get<double>();
    }
    g.offset_mm = c.value("offset_mm", g.offset_mm);
  }
  g.history = j.value("history", g.history);
  g.rollout_steps = j.value("rollout_steps", g.rollout_steps);
}

GrammarSpec load_grammar(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open grammar spec " + path.string());
  GrammarSpec g;
  try {
    g = json::parse(in).get<GrammarSpec>();
  } catch (const json::exception& e) {
    throw SpecError(path.string() + ": " + e.what());
  }
  g.validate();
  return g;
}

GrammarSpec cycle_grammar(std::size_t num_actions, std::size_t num_objects) {
  GrammarSpec g;
  char buf[32];
  for (std::size_t i = 0; i < num_actions; ++i) {
    std::snprintf(buf, sizeof buf, "action_%02zu", i);
    g.actions.push_back(buf);
  }
  for (std::size_t i = 0; i < num_objects; ++i) {
    std::snprintf(buf, sizeof buf, "object_%02zu", i);
    g.objects.push_back(buf);
  }
  for (std::size_t i = 0; i < num_actions; ++i) g.transitions[g.actions[i]][g.actions[(i + 1) % num_actions]] = 1.0;
  g.objects_per_sequence = std::min<std::size_t>(2, num_objects);
  return g;
}

GrammarSpec preset_grammar(const std::string& name) {
  if (name == "puppet8") {
    GrammarSpec g = cycle_grammar(8, 4);
    g.name = name;
    g.sequences = 714;  // 500 / 107 / 107
    g.min_steps = 8;
    g.max_steps = 12;
    g.pose_db_size = 10000;
    g.rollout_steps = 5;
    return g;
  }
  if (name == "cooking" || name == "assembly") {
    const bool cooking = name == "cooking";
    GrammarSpec g = cycle_grammar(cooking ? 37 : 31, cooking ? 12 : 0);
    g.name = name;
    // mostly a cycle, with an occasional skip ahead
    for (std::size_t i = 0; i < g.actions.size(); ++i) {
      auto& row = g.transitions[g.actions[i]];
      row.clear();
      row[g.actions[(i + 1) % g.actions.size()]] = 0.8;
      row[g.actions[(i + 5) % g.actions.size()]] = 0.2;
    }
    g.sequences = 400;
    g.rollout_steps = cooking ? 10 : 5;
    g.min_steps = g.history + g.rollout_steps;
    g.max_steps = g.min_steps + 6;
    g.pose_db_size = 10000;
    return g;
  }
  throw ConfigError("unknown grammar preset '" + name + "' (expected puppet8|cooking|assembly)");
}

DatasetManifest generate_puppet_dataset(const GrammarSpec& spec, const fs::path& out_dir, std::uint64_t seed,
                                        SequencePoses3D* truth) {
  spec.validate();
  const std::size_t A = spec.actions.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < A; ++i) index[spec.actions[i]] = i;

  std::vector<std::vector<pose::Vec3>> canonical(A);
  for (std::size_t a = 0; a < A; ++a) {
    auto it = spec.canonical_poses.find(spec.actions[a]);
    canonical[a] = it != spec.canonical_poses.end() ? it->second : procedural_pose(spec.pose_seed, a);
  }
  std::vector<std::vector<std::size_t>> next(A);
  std::vector<std::vector<double>> cumulative(A);
  for (std::size_t a = 0; a < A; ++a) {
    double acc = 0.0;
    for (const auto& [name, prob] : spec.transitions.at(spec.actions[a])) {
      if (prob <= 0.0) continue;
      acc += prob;
      next[a].push_back(index.at(name));
      cumulative[a].push_back(acc);
    }
  }

  const nn::Rng root(seed);
  nn::Rng seq_rng = root.fork(1), cam_rng = root.fork(2), db_rng = root.fork(3), split_rng = root.fork(4);

  DatasetManifest m;
  m.name = spec.name;
  m.joint_names = pose::JointLayout::upper_body().names();
  m.actions = spec.actions;
  m.objects = spec.objects;
  m.history = spec.history;
  m.rollout_steps = spec.rollout_steps;
  m.pose_db = "pose_db.p3db";

  std::set<std::vector<float>> used;
  for (std::size_t i = 0; i < spec.sequences; ++i) {
    const std::string id = sequence_id(i);
    pose::Camera cam;
    const double f = cam_rng.uniform(static_cast<float>(spec.focal_min), static_cast<float>(spec.focal_max));
    cam.fx = cam.fy = f;
    cam.cx = spec.cx;
    cam.cy = spec.cy;
    const double yaw = cam_rng.uniform(-1.0f, 1.0f) * spec.yaw_deg * kDeg;
    const double pitch = cam_rng.uniform(-1.0f, 1.0f) * spec.pitch_deg * kDeg;
    cam.R = pose::rotation_from_euler(yaw, pitch, 0.0);
    cam.t = {cam_rng.uniform(-1.0f, 1.0f) * spec.offset_mm, cam_rng.uniform(-1.0f, 1.0f) * spec.offset_mm,
             cam_rng.uniform(static_cast<float>(spec.distance_min_mm), static_cast<float>(spec.distance_max_mm))};
    cam.validate();

    const std::size_t length = spec.min_steps + seq_rng.index(spec.max_steps - spec.min_steps + 1);
    std::vector<std::size_t> objects;
    std::vector<std::size_t> pool(spec.objects.size());
    for (std::size_t k = 0; k < pool.size(); ++k) pool[k] = k;
    for (std::size_t k = 0; k < spec.objects_per_sequence; ++k) {
      const std::size_t pick_at = k + seq_rng.index(pool.size() - k);
      std::swap(pool[k], pool[pick_at]);
      objects.push_back(pool[k]);
    }
    std::sort(objects.begin(), objects.end());

    std::vector<SequenceStep> steps;
    std::size_t action = seq_rng.index(A);
    std::size_t frame = 0;
    for (std::size_t t = 0; t < length; ++t) {
      if (t > 0) action = next[action][pick(seq_rng, cumulative[action])];
      SequenceStep s;
      s.frame = frame;
      s.end_frame = frame + 20 + seq_rng.index(41);
      s.charpose_frame = s.frame + seq_rng.index(s.end_frame - s.frame + 1);
      frame = s.end_frame + 1;
      s.action = action;
      s.objects = objects;
      const auto p3 = perturb(canonical[action], spec.noise_mm, seq_rng);
      used.insert(p3.flat());
      if (truth) (*truth)[id].push_back(p3);
      s.pose = geometry::project(p3, cam);
      steps.push_back(std::move(s));
    }
    write_sequence_file(out_dir / "sequences" / (id + ".jsonl"), id, steps);
    write_camera(out_dir / "cameras" / (id + ".json"), cam);
    m.sequences.push_back({id, "sequences/" + id + ".jsonl", "cameras/" + id + ".json"});
  }

  std::vector<pose::Skeleton3D> db;
  db.reserve(spec.pose_db_size);
  while (db.size() < spec.pose_db_size) {
    auto p = perturb(canonical[db_rng.index(A)], spec.noise_mm, db_rng);
    if (used.count(p.flat())) continue;  // keep the database disjoint from sequence poses
    db.push_back(std::move(p));
  }
  write_pose_db(out_dir / m.pose_db, db);

  std::vector<std::size_t> order(spec.sequences);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[split_rng.index(i)]);
  const auto n = static_cast<double>(spec.sequences);
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * n));
  const auto n_val = std::min(spec.sequences - n_train, static_cast<std::size_t>(std::llround(spec.val_fraction * n)));
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::string id = sequence_id(order[k]);
    (k < n_train ? m.splits.train : k < n_train + n_val ? m.splits.val : m.splits.test).push_back(id);
  }
  for (auto* s : {&m.splits.train, &m.splits.val, &m.splits.test}) std::sort(s->begin(), s->end());

  write_manifest(out_dir / "manifest.json", m);
  m.base_dir = out_dir;
  return m;
}

}  // namespace posecast::data
