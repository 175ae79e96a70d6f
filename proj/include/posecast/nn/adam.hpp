#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posecast/nn/tape.hpp"

namespace posecast::nn {

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  // Classic coupled L2: decay * param is added to the gradient before the moment updates.
  float weight_decay = 0.0f;
};

// Bias-corrected Adam over a fixed parameter list. Moment buffers are shaped
// like their parameters.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, AdamConfig config);

  // Applies one update from each parameter's grad. Throws TrainingError naming
  // the first parameter with a non-finite gradient, before touching anything.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(float lr) { config_.lr = lr; }
  const std::vector<Parameter*>& parameters() const { return params_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

  // Sibling file in checkpoint layout: "<name>.m" and "<name>.v" records.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamConfig config_;
  std::uint64_t step_ = 0;
};

}  // namespace posecast::nn
