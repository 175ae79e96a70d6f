#include "posecast/data/dataset.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include "posecast/errors.hpp"

namespace posecast::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void check_version(const json& j, const std::string& what) {
  if (!j.contains("format_version")) throw FormatError(what + ": missing format_version");
  const int v = j.at("format_version").get<int>();
  if (v != kFormatVersion) {
    throw VersionError(what + ": format_version " + std::to_string(v) + ", this build reads " +
                       std::to_string(kFormatVersion));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

}  // namespace

const std::vector<std::string>& Splits::get(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "' (expected train|val|test)");
}

const SequenceEntry& DatasetManifest::sequence(const std::string& id) const {
  for (const auto& s : sequences)
    if (s.id == id) return s;
  throw ValidationError("manifest " + name + ": no sequence '" + id + "'");
}

fs::path DatasetManifest::resolve(const std::string& relative) const {
  const fs::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

void DatasetManifest::validate() const {
  std::set<std::string> known;
  for (const auto& s : sequences) {
    if (!known.insert(s.id).second) throw ValidationError("manifest: duplicate sequence id " + s.id);
  }
  std::set<std::string> seen;
  for (const auto* split : {&splits.train, &splits.val, &splits.test}) {
    for (const auto& id : *split) {
      if (!known.count(id)) throw ValidationError("manifest: split lists unknown sequence " + id);
      if (!seen.insert(id).second) throw ValidationError("manifest: sequence " + id + " appears in two splits");
    }
  }
  if (actions.empty()) throw ValidationError("manifest: empty action vocabulary");
  if (history == 0 || rollout_steps == 0) throw ValidationError("manifest: history and rollout_steps must be > 0");
}

void to_json(json& j, const DatasetManifest& m) {
  json seqs = json::array();
  for (const auto& s : m.sequences) seqs.push_back({{"id", s.id}, {"file", s.file}, {"camera", s.camera}});
  j = {{"format_version", kFormatVersion},
       {"name", m.name},
       {"joint_layout", m.joint_names},
       {"actions", m.actions},
       {"objects", m.objects},
       {"sequences", seqs},
       {"splits", {{"train", m.splits.train}, {"val", m.splits.val}, {"test", m.splits.test}}},
       {"pose_db", m.pose_db},
       {"history", m.history},
       {"rollout_steps", m.rollout_steps}};
}

void from_json(const json& j, DatasetManifest& m) {
  check_version(j, "manifest");
  m.name = j.value("name", std::string());
  m.joint_names = j.at("joint_layout").get<std::vector<std::string>>();
  m.actions = j.at("actions").get<std::vector<std::string>>();
  m.objects = j.value("objects", std::vector<std::string>{});
  m.sequences.clear();
  for (const auto& s : j.at("sequences")) {
    m.sequences.push_back({s.at("id").get<std::string>(), s.at("file").get<std::string>(),
                           s.at("camera").get<std::string>()});
  }
  const auto& sp = j.at("splits");
  m.splits.train = sp.value("train", std::vector<std::string>{});
  m.splits.val = sp.value("val", std::vector<std::string>{});
  m.splits.test = sp.value("test", std::vector<std::string>{});
  m.pose_db = j.value("pose_db", std::string());
  m.history = j.value("history", std::size_t{3});
  m.rollout_steps = j.value("rollout_steps", std::size_t{5});
}

DatasetManifest load_manifest(const fs::path& path, const std::optional<std::string>& data_root) {
  DatasetManifest m;
  try {
    m = parse_file(path).get<DatasetManifest>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (data_root && !data_root->empty()) {
    m.base_dir = *data_root;
  } else if (const char* env = std::getenv("DATA_ROOT"); env && *env) {
    m.base_dir = env;
  } else {
    m.base_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  }
  m.validate();
  return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  write_text(path, json(manifest).dump(2) + "\n");
}

pose::JointLayout manifest_layout(const DatasetManifest& manifest) {
  auto layout = pose::JointLayout::upper_body();
  if (manifest.joint_names != layout.names()) {
    throw VersionError("manifest " + manifest.name + ": joint layout does not match the upper-body layout (" +
                       std::to_string(manifest.joint_names.size()) + " joints)");
  }
  return layout;
}

std::vector<SequenceStep> read_sequence_file(const fs::path& path, std::size_t num_actions, std::size_t num_objects,
                                             std::size_t num_joints) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<SequenceStep> steps;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!header) {
      check_version(j, where);
      header = true;
      continue;
    }
    try {
      SequenceStep s;
      s.frame = j.at("frame").get<std::size_t>();
      s.end_frame = j.value("end_frame", s.frame);
      s.action = j.at("action_id").get<std::size_t>();
      s.objects = j.value("object_ids", std::vector<std::size_t>{});
      s.charpose_frame = j.at("charpose_frame").get<std::size_t>();
      if (s.action >= num_actions) {
        throw VocabularyError(where + ": action_id " + std::to_string(s.action) + " outside vocabulary of " +
                              std::to_string(num_actions));
      }
      for (auto o : s.objects) {
        if (o >= num_objects) throw VocabularyError(where + ": object id " + std::to_string(o) + " unknown");
      }
      if (s.end_frame < s.frame || s.charpose_frame < s.frame || s.charpose_frame > s.end_frame) {
        throw ValidationError(where + ": charpose_frame " + std::to_string(s.charpose_frame) + " outside [" +
                              std::to_string(s.frame) + ", " + std::to_string(s.end_frame) + "]");
      }
      const auto& kp = j.at("pose2d");
      if (kp.size() != num_joints) {
        throw ValidationError(where + ": " + std::to_string(kp.size()) + " joints, expected " +
                              std::to_string(num_joints));
      }
      s.pose = pose::Skeleton2D(num_joints);
      for (std::size_t k = 0; k < num_joints; ++k) {
        const auto& p = kp[k];
        s.pose.joints[k] = {p.at(0).get<float>(), p.at(1).get<float>()};
        s.pose.confidence[k] = p.size() > 2 ? p.at(2).get<float>() : 1.0f;
      }
      steps.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  if (!header) throw FormatError(path.string() + ": empty sequence file");
  return steps;
}

void write_sequence_file(const fs::path& path, const std::string& id, const std::vector<SequenceStep>& steps) {
  std::string text = json{{"format_version", kFormatVersion}, {"sequence_id", id}}.dump() + "\n";
  for (const auto& s : steps) {
    json kp = json::array();
    for (std::size_t k = 0; k < s.pose.size(); ++k)
      kp.push_back({s.pose.joints[k][0], s.pose.joints[k][1], s.pose.confidence[k]});
    text += json{{"frame", s.frame},
                 {"end_frame", s.end_frame},
                 {"action_id", s.action},
                 {"object_ids", s.objects},
                 {"charpose_frame", s.charpose_frame},
                 {"pose2d", kp}}
                .dump() +
            "\n";
  }
  write_text(path, text);
}

Sequence load_sequence(const DatasetManifest& manifest, const std::string& id) {
  const auto& entry = manifest.sequence(id);
  Sequence seq;
  seq.id = id;
  seq.camera = read_camera(manifest.resolve(entry.camera));
  seq.steps = read_sequence_file(manifest.resolve(entry.file), manifest.actions.size(), manifest.objects.size(),
                                 manifest.joint_names.size());
  std::stable_sort(seq.steps.begin(), seq.steps.end(),
                   [](const SequenceStep& a, const SequenceStep& b) { return a.frame < b.frame; });
  const std::size_t neck = pose::JointLayout::upper_body().root();
  for (auto& s : seq.steps) s.pose = pose::center_at_neck(s.pose, neck);
  return seq;
}

std::vector<Sequence> load_split(const DatasetManifest& manifest, const std::string& split) {
  std::vector<Sequence> out;
  for (const auto& id : manifest.splits.get(split)) out.push_back(load_sequence(manifest, id));
  return out;
}

json camera_to_json(const pose::Camera& c) {
  return {{"format_version", kFormatVersion}, {"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx},
          {"cy", c.cy},                       {"R", c.R},   {"t", c.t}};
}

pose::Camera camera_from_json(const json& j) {
  check_version(j, "camera");
  pose::Camera c;
  try {
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.R = j.at("R").get<std::array<double, 9>>();
    c.t = j.at("t").get<std::array<double, 3>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("camera: ") + e.what());
  }
  c.validate();
  return c;
}

pose::Camera read_camera(const fs::path& path) {
  try {
    return camera_from_json(parse_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_camera(const fs::path& path, const pose::Camera& camera) {
  write_text(path, camera_to_json(camera).dump(2) + "\n");
}

std::vector<pose::SequenceSample> window_samples(const Sequence& sequence, std::size_t history) {
  std::vector<pose::SequenceSample> out;
  const auto& steps = sequence.steps;
  if (history == 0) throw ContractError("window_samples: history must be > 0");
  for (std::size_t t = history; t < steps.size(); ++t) {
    pose::SequenceSample s;
    for (std::size_t k = t - history; k < t; ++k) s.history.push_back({steps[k].pose, steps[k].action});
    // objects seen at the start of the sequence are re-used for every window
    s.objects = steps.front().objects;
    s.target_action = steps[t].action;
    s.target_pose2d = steps[t].pose;
    s.camera = sequence.camera;
    s.sequence_id = sequence.id;
    s.step_index = t;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<pose::SequenceSample> window_samples(const std::vector<Sequence>& sequences, std::size_t history,
                                                 std::size_t* skipped) {
  std::vector<pose::SequenceSample> out;
  std::size_t short_count = 0;
  for (const auto& s : sequences) {
    if (s.steps.size() <= history) {
      ++short_count;
      continue;
    }
    auto w = window_samples(s, history);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  if (short_count) std::cerr << "warning: " << short_count << " sequence(s) shorter than " << history + 1 << " steps skipped\n";
  if (skipped) *skipped = short_count;
  return out;
}

}  // namespace posecast::data
