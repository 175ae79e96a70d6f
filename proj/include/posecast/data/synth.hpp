#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "posecast/data/dataset.hpp"

namespace posecast::data {

// Markov "puppet" grammar: every action has a canonical 3D characteristic
// pose and a row of successor probabilities.
struct GrammarSpec {
  std::string name = "puppet";
  std::vector<std::string> actions;
  std::vector<std::string> objects;
  // Canonical poses by action (mm, neck at the origin). Actions without one
  // get a procedural pose derived from pose_seed.
  std::map<std::string, std::vector<pose::Vec3>> canonical_poses;
  std::map<std::string, std::map<std::string, double>> transitions;
  std::uint64_t pose_seed = 1;

  std::size_t sequences = 100;
  std::size_t min_steps = 8;
  std::size_t max_steps = 12;
  double noise_mm = 15.0;  // per-joint perturbation radius
  std::size_t pose_db_size = 5000;
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  std::size_t objects_per_sequence = 2;

  // camera randomization
  double distance_min_mm = 2000.0, distance_max_mm = 3000.0;
  double yaw_deg = 20.0, pitch_deg = 5.0;
  double focal_min = 900.0, focal_max = 1100.0;
  double cx = 640.0, cy = 360.0;
  double offset_mm = 100.0;

  std::size_t history = 3;
  std::size_t rollout_steps = 5;

  // SpecError on fewer than 2 actions, absorbing states, unknown names or bad ranges.
  void validate() const;
};

void to_json(nlohmann::json& j, const GrammarSpec& g);
void from_json(const nlohmann::json& j, GrammarSpec& g);
GrammarSpec load_grammar(const std::filesystem::path& path);

// Deterministic cycle over num_actions actions (each has exactly one successor).
GrammarSpec cycle_grammar(std::size_t num_actions, std::size_t num_objects);
// Named presets: "puppet8", "cooking" (37 actions, M = 10), "assembly" (31 actions, no objects, M = 5).
GrammarSpec preset_grammar(const std::string& name);

// Procedural characteristic pose: symmetric bone lengths, arm angles from rng.
std::vector<pose::Vec3> procedural_pose(std::uint64_t seed, std::size_t action);

// 3D characteristic poses behind every written 2D step, by sequence id.
using SequencePoses3D = std::map<std::string, std::vector<pose::Skeleton3D>>;

// Writes manifest.json, sequences/, cameras/ and pose_db.p3db under out_dir.
// Output bytes depend only on (spec, seed). `truth`, when given, receives the
// un-projected sequence poses.
DatasetManifest generate_puppet_dataset(const GrammarSpec& spec, const std::filesystem::path& out_dir,
                                        std::uint64_t seed, SequencePoses3D* truth = nullptr);

}  // namespace posecast::data
