#include "posecast/eval/quality.hpp"

#include <cmath>

#include "posecast/errors.hpp"
#include "posecast/geometry/kinematics.hpp"
#include "posecast/nn/adam.hpp"

namespace posecast::eval {

std::vector<float> quality_features(const pose::Skeleton3D& pose, const pose::JointLayout& layout, float input_scale) {
  const auto centered = pose::center_at_neck(pose, layout.root());
  std::vector<float> f;
  f.reserve(3 * pose.size() + layout.bones().size());
  for (const auto& j : centered.joints)
    for (float c : j) f.push_back(c * input_scale);
  for (double len : geometry::bone_lengths(pose, layout)) f.push_back(static_cast<float>(len) * input_scale);
  return f;
}

QualityClassifier::QualityClassifier(const pose::JointLayout& layout, QualityOptions options)
    : layout_(layout), options_(std::move(options)) {}

nn::Tensor QualityClassifier::features(const std::vector<const pose::Skeleton3D*>& poses) const {
  const std::size_t width = 3 * layout_.size() + layout_.bones().size();
  nn::Tensor t({poses.size(), width});
  for (std::size_t r = 0; r < poses.size(); ++r) t.set_row(r, quality_features(*poses[r], layout_, options_.input_scale));
  return t;
}

void QualityClassifier::fit(const std::vector<pose::Skeleton3D>& real, const std::vector<pose::Skeleton3D>& fake,
                            std::uint64_t seed) {
  if (real.empty() || fake.empty()) throw ContractError("quality classifier: empty training pool");
  nn::Rng rng(seed);
  std::vector<std::size_t> widths{3 * layout_.size() + layout_.bones().size()};
  widths.insert(widths.end(), options_.hidden.begin(), options_.hidden.end());
  widths.push_back(2);
  net_ = nn::Mlp("quality", widths, rng, false, options_.leaky_slope);
  std::vector<nn::Parameter*> params;
  net_.collect(params);
  nn::AdamConfig ac;
  ac.lr = options_.lr;
  nn::Adam opt(params, ac);

  // label 1 = real, 0 = generated
  std::vector<std::pair<const pose::Skeleton3D*, std::size_t>> items;
  for (const auto& p : real) items.push_back({&p, 1});
  for (const auto& p : fake) items.push_back({&p, 0});
  const nn::Tensor all = [&] {
    std::vector<const pose::Skeleton3D*> ptrs;
    for (const auto& [p, label] : items) ptrs.push_back(p);
    return features(ptrs);
  }();
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < options_.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t begin = 0; begin < order.size(); begin += options_.batch) {
      const std::size_t n = std::min(options_.batch, order.size() - begin);
      nn::Tensor x({n, all.cols()});
      std::vector<std::size_t> labels(n);
      for (std::size_t r = 0; r < n; ++r) {
        const std::size_t idx = order[begin + r];
        x.set_row(r, std::span<const float>(all.data()).subspan(idx * all.cols(), all.cols()));
        labels[r] = items[idx].second;
      }
      nn::Tape tape;
      nn::Binder bind(tape, true);
      opt.zero_grad();
      tape.backward(nn::softmax_cross_entropy(net_.forward(bind, tape.constant(std::move(x))), labels));
      opt.step();
    }
  }
}

bool QualityClassifier::predicts_real(const pose::Skeleton3D& pose) {
  nn::Tape tape;
  nn::Binder bind(tape, false);
  const auto out = net_.forward(bind, tape.constant(features({&pose}))).value();
  return out[1] > out[0];
}

double QualityClassifier::accuracy(const std::vector<pose::Skeleton3D>& real, const std::vector<pose::Skeleton3D>& fake) {
  if (net_.layers.empty()) throw ContractError("quality classifier: not trained");
  if (real.empty() && fake.empty()) throw ContractError("quality classifier: nothing to evaluate");
  std::size_t correct = 0;
  auto count = [&](const std::vector<pose::Skeleton3D>& pool, bool is_real) {
    constexpr std::size_t kChunk = 1024;
    for (std::size_t begin = 0; begin < pool.size(); begin += kChunk) {
      std::vector<const pose::Skeleton3D*> ptrs;
      for (std::size_t i = begin; i < std::min(pool.size(), begin + kChunk); ++i) ptrs.push_back(&pool[i]);
      nn::Tape tape;
      nn::Binder bind(tape, false);
      const auto out = net_.forward(bind, tape.constant(features(ptrs))).value();
      for (std::size_t r = 0; r < ptrs.size(); ++r) correct += (out.at(r, 1) > out.at(r, 0)) == is_real;
    }
  };
  count(real, true);
  count(fake, false);
  return static_cast<double>(correct) / static_cast<double>(real.size() + fake.size());
}

std::vector<std::size_t> shared_permutation(std::size_t size, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::vector<std::size_t> p(size);
  for (std::size_t i = 0; i < size; ++i) p[i] = i;
  for (std::size_t i = size; i > 1; --i) std::swap(p[i - 1], p[rng.index(i)]);
  return p;
}

std::pair<std::vector<pose::Skeleton3D>, std::vector<pose::Skeleton3D>> split_pool(
    const std::vector<pose::Skeleton3D>& pool, const std::vector<std::size_t>& permutation, double train_fraction) {
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(pool.size())));
  std::pair<std::vector<pose::Skeleton3D>, std::vector<pose::Skeleton3D>> out;
  for (std::size_t idx : permutation) {
    if (idx >= pool.size()) continue;
    (out.first.size() < n_train ? out.first : out.second).push_back(pool[idx]);
  }
  return out;
}

double quality_metric(const std::vector<pose::Skeleton3D>& real, const std::vector<pose::Skeleton3D>& fake,
                      std::uint64_t seed, const QualityOptions& options) {
  const auto perm = shared_permutation(std::max(real.size(), fake.size()), seed);
  auto [real_train, real_test] = split_pool(real, perm, options.train_fraction);
  auto [fake_train, fake_test] = split_pool(fake, perm, options.train_fraction);
  if (real_train.empty() || fake_train.empty() || real_test.empty() || fake_test.empty()) {
    throw ContractError("quality metric: pools of " + std::to_string(real.size()) + " real and " +
                        std::to_string(fake.size()) + " generated poses are too small to split");
  }
  QualityClassifier clf(pose::JointLayout::upper_body(), options);
  clf.fit(real_train, fake_train, nn::Rng(seed).fork(1).next());
  return 1.0 - clf.accuracy(real_test, fake_test);
}

}  // namespace posecast::eval
