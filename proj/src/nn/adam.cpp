#include "posecast/nn/adam.hpp"

#include <cmath>

#include "posecast/errors.hpp"
#include "posecast/nn/checkpoint.hpp"

namespace posecast::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape(), 0.0f);
    v_.emplace_back(p->value.shape(), 0.0f);
    if (p->grad.shape() != p->value.shape()) p->zero_grad();
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
  for (auto* p : params_) {
    if (p->grad.shape() != p->value.shape()) p->zero_grad();
    if (!p->grad.all_finite()) throw TrainingError("non-finite gradient in parameter " + p->name);
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(config_.beta1), t));
  const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(config_.beta2), t));
  const float b1 = config_.beta1, b2 = config_.beta2;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto value = params_[k]->value.data();
    auto grad = params_[k]->grad.data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const float g = grad[i] + config_.weight_decay * value[i];
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      const float mhat = m[i] / c1;
      const float vhat = v[i] / c2;
      value[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::save(const std::string& path) const {
  std::vector<NamedTensor> records;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    records.push_back({params_[k]->name + ".m", m_[k]});
    records.push_back({params_[k]->name + ".v", v_[k]});
  }
  write_checkpoint(path, "{\"adam_step\":" + std::to_string(step_) + "}", records);
}

void Adam::load(const std::string& path) {
  const CheckpointData data = read_checkpoint(path);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const Tensor* m = data.find(params_[k]->name + ".m");
    const Tensor* v = data.find(params_[k]->name + ".v");
    if (!m || !v || m->shape() != m_[k].shape() || v->shape() != v_[k].shape()) {
      throw VersionError(path + ": optimizer state does not match parameter " + params_[k]->name);
    }
    m_[k] = *m;
    v_[k] = *v;
  }
  const auto pos = data.metadata.find(':');
  step_ = pos == std::string::npos ? 0 : std::stoull(data.metadata.substr(pos + 1));
}

}  // namespace posecast::nn
