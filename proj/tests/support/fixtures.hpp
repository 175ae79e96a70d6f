#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <string>

#include "random_pose.hpp"
#include "posecast/data/synth.hpp"
#include "posecast/model/forecaster.hpp"
#include "posecast/train/config.hpp"
#include "posecast/pose/types.hpp"

namespace posecast::testing {

inline model::ForecasterConfig small_config(std::size_t actions = 5, std::size_t objects = 3,
                                            std::size_t noise = 4) {
  model::ForecasterConfig c;
  c.history = 3;
  c.num_actions = actions;
  c.num_objects = objects;
  c.latent_dim = 16;
  c.hidden_dim = 16;
  c.noise_dim = noise;
  return c;
}

inline pose::Skeleton2D random_pixels(std::mt19937_64& gen, float spread = 150.0f) {
  std::uniform_real_distribution<float> u(-spread, spread);
  pose::Skeleton2D p(pose::kNumJoints);
  for (auto& j : p.joints) j = {u(gen), u(gen)};
  p.joints[pose::kNeck] = {0.0f, 0.0f};
  return p;
}

inline pose::SequenceSample random_sample(std::mt19937_64& gen, const model::ForecasterConfig& c) {
  pose::SequenceSample s;
  for (std::size_t t = 0; t < c.history; ++t) s.history.push_back({random_pixels(gen), gen() % c.num_actions});
  for (std::size_t o = 0; o < c.num_objects; ++o)
    if (gen() % 2) s.objects.push_back(o);
  s.target_action = gen() % c.num_actions;
  s.target_pose2d = random_pixels(gen);
  s.camera = random_camera(gen);
  s.sequence_id = "s" + std::to_string(gen() % 1000);
  return s;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("posecast_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Small deterministic-cycle dataset written under dir.
inline data::DatasetManifest tiny_dataset(const std::filesystem::path& dir, std::uint64_t seed = 1,
                                          std::size_t sequences = 30) {
  auto spec = data::cycle_grammar(4, 2);
  spec.name = "tiny";
  spec.sequences = sequences;
  spec.pose_db_size = 300;
  return data::generate_puppet_dataset(spec, dir, seed);
}

// Narrow networks so a training step takes milliseconds.
inline train::TrainConfig tiny_train_config(std::size_t actions, std::size_t objects) {
  train::TrainConfig c;
  c.model = small_config(actions, objects);
  c.critic.joint_widths = {16, 16, 16, 16};
  c.critic.kinematic_widths = {8, 8, 8};
  c.critic.merge_widths = {16, 1};
  c.weights = {1e3, 1.0, 10.0};
  c.batch = 32;
  c.lr = 1e-3f;
  c.critic_lr = 1e-3f;
  c.epochs = 2;
  c.fake_pool_size = 50;
  return c;
}

// Elbow and hand pushed outward so both arm bones are three times longer.
inline pose::Skeleton3D long_arms(pose::Skeleton3D p) {
  for (auto [s, e, h] : {std::array<std::size_t, 3>{pose::kRightShoulder, pose::kRightElbow, pose::kRightHand},
                         std::array<std::size_t, 3>{pose::kLeftShoulder, pose::kLeftElbow, pose::kLeftHand}}) {
    const auto old_elbow = p.joints[e];
    for (int d = 0; d < 3; ++d) {
      p.joints[e][d] = p.joints[s][d] + 3.0f * (old_elbow[d] - p.joints[s][d]);
      p.joints[h][d] = p.joints[e][d] + 3.0f * (p.joints[h][d] - old_elbow[d]);
    }
  }
  return p;
}

}  // namespace posecast::testing
