#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "posecast/pose/layout.hpp"
#include "posecast/pose/types.hpp"

namespace posecast::data {

inline constexpr int kFormatVersion = 1;

struct SequenceEntry {
  std::string id;
  std::string file;    // JSON-lines steps
  std::string camera;  // camera JSON
};

struct Splits {
  std::vector<std::string> train, val, test;
  const std::vector<std::string>& get(const std::string& name) const;
};

struct DatasetManifest {
  std::string name;
  std::vector<std::string> joint_names;
  std::vector<std::string> actions;
  std::vector<std::string> objects;
  std::vector<SequenceEntry> sequences;
  Splits splits;
  std::string pose_db;  // may be empty
  std::size_t history = 3;
  std::size_t rollout_steps = 5;

  // Directory relative paths resolve against (set by load_manifest).
  std::filesystem::path base_dir;

  const SequenceEntry& sequence(const std::string& id) const;
  std::filesystem::path resolve(const std::string& relative) const;
  // Split disjointness and known ids; ValidationError otherwise.
  void validate() const;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

// Relative paths resolve against data_root, else $DATA_ROOT, else the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path, const std::optional<std::string>& data_root = {});
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Joint layout named by the manifest; VersionError when it is not the supported one.
pose::JointLayout manifest_layout(const DatasetManifest& manifest);

struct SequenceStep {
  std::size_t frame = 0;
  std::size_t end_frame = 0;
  std::size_t action = 0;
  std::vector<std::size_t> objects;
  std::size_t charpose_frame = 0;
  pose::Skeleton2D pose;
};

struct Sequence {
  std::string id;
  pose::Camera camera;
  std::vector<SequenceStep> steps;
};

// Raw steps as stored, pixels not centered. Checks vocabularies and the
// characteristic-pose frame range.
std::vector<SequenceStep> read_sequence_file(const std::filesystem::path& path, std::size_t num_actions,
                                             std::size_t num_objects, std::size_t num_joints);
void write_sequence_file(const std::filesystem::path& path, const std::string& id,
                         const std::vector<SequenceStep>& steps);

// Loaded steps are time-ordered and neck-centered.
Sequence load_sequence(const DatasetManifest& manifest, const std::string& id);
std::vector<Sequence> load_split(const DatasetManifest& manifest, const std::string& split);

pose::Camera read_camera(const std::filesystem::path& path);
void write_camera(const std::filesystem::path& path, const pose::Camera& camera);
nlohmann::json camera_to_json(const pose::Camera& camera);
pose::Camera camera_from_json(const nlohmann::json& j);

// Sliding windows of N observed steps plus the following target step.
// A sequence with fewer than N + 1 steps yields nothing.
std::vector<pose::SequenceSample> window_samples(const Sequence& sequence, std::size_t history);
// Windows of every sequence; `skipped` counts sequences too short for a window.
std::vector<pose::SequenceSample> window_samples(const std::vector<Sequence>& sequences, std::size_t history,
                                                 std::size_t* skipped = nullptr);

}  // namespace posecast::data
