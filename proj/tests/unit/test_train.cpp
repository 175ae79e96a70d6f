#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "posecast/data/dataset.hpp"
#include "posecast/errors.hpp"
#include "posecast/model/critic.hpp"
#include "posecast/nn/ops.hpp"
#include "posecast/train/config.hpp"
#include "posecast/train/losses.hpp"
#include "posecast/train/trainer.hpp"

using namespace posecast;
using namespace posecast::testing;
namespace fs = std::filesystem;

namespace {

double logsumexp_ce(const std::vector<double>& z, std::size_t target) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s) - z[target];
}

double ce_of(const std::vector<float>& logits, std::size_t classes, const std::vector<std::size_t>& targets) {
  nn::Tape tape;
  auto l = tape.constant(nn::Tensor({targets.size(), classes}, logits));
  return train::action_loss(l, targets).value().item();
}

// Loaded once per test binary; the data set is small and never modified.
const train::TrainData& tiny_data() {
  static const train::TrainData data = [] {
    const auto dir = scratch_dir("train_data");
    tiny_dataset(dir, 3);
    return train::load_train_data(data::load_manifest(dir / "manifest.json"), 3);
  }();
  return data;
}

train::TrainConfig tiny_config() { return tiny_train_config(4, 2); }

struct LossFixture {
  std::vector<pose::SequenceSample> batch;
  model::Forecaster generator{tiny_config().model, 1};
  model::Critic critic{tiny_config().critic, tiny_data().layout, 2};
  LossFixture() { batch.assign(tiny_data().train.begin(), tiny_data().train.begin() + 16); }
};

}  // namespace

TEST(CrossEntropy, UniformLogitsGiveLogOfClassCount) {
  EXPECT_NEAR(ce_of({0.3f, 0.3f, 0.3f, 0.3f}, 4, {2}), std::log(4.0), 1e-6);
}

TEST(CrossEntropy, LargeMarginIsNearZero) {
  EXPECT_LT(ce_of({20.0f, 0.0f, 0.0f}, 3, {0}), 1e-8);
}

TEST(CrossEntropy, MatchesLogSumExpOracle) {
  std::mt19937_64 gen(4);
  std::normal_distribution<float> nd(0.0f, 3.0f);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + gen() % 8, C = 2 + gen() % 10;
    std::vector<float> logits(n * C);
    for (auto& v : logits) v = nd(gen);
    std::vector<std::size_t> targets(n);
    for (auto& t : targets) t = gen() % C;
    double want = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<double> z(logits.begin() + r * C, logits.begin() + (r + 1) * C);
      want += logsumexp_ce(z, targets[r]);
    }
    want /= static_cast<double>(n);
    EXPECT_NEAR(ce_of(logits, C, targets), want, 1e-6 * std::max(1.0, want));
  }
}

TEST(CrossEntropy, OutOfRangeTargetIsVocabularyError) {
  nn::Tape tape;
  auto l = tape.constant(nn::Tensor({1, 3}, 0.0f));
  const std::vector<std::size_t> t{3};
  EXPECT_THROW(train::action_loss(l, t), VocabularyError);
}

TEST(GeneratorLoss, ActionOnlyIsScaledCrossEntropy) {
  LossFixture fx;
  nn::Tape tape;
  nn::Binder bind(tape, true);
  const auto in = model::make_inputs(fx.generator.config(), fx.batch);
  auto out = fx.generator.forward(bind, in, nn::Tensor({16, 4}, 0.0f));
  const train::LossWeights w{1e6, 0.0, 0.0};
  auto terms = train::generator_loss(out, train::make_targets(fx.batch), nullptr, nullptr, w, {});
  const double ce = ce_of(out.logits.value().vec(), 4, train::make_targets(fx.batch).actions);
  EXPECT_NEAR(terms.total_value, 1e6 * ce, 1e-6 * 1e6 * ce);
  EXPECT_NEAR(terms.action_value, ce, 1e-7);
}

TEST(GeneratorLoss, PaperWeightsOnUnitTerms) {
  EXPECT_EQ(train::weighted_total({}, 1.0, 1.0, 1.0), 1e6 + 2.0);
  EXPECT_EQ(train::weighted_total({0.0, 1.0, 0.0}, 5.0, 7.0, 9.0), 7.0);
}

TEST(GeneratorLoss, AllZeroWeightsIsContractError) {
  LossFixture fx;
  nn::Tape tape;
  nn::Binder bind(tape, true);
  auto out = fx.generator.forward(bind, model::make_inputs(fx.generator.config(), fx.batch),
                                  nn::Tensor({16, 4}, 0.0f));
  EXPECT_THROW(train::generator_loss(out, train::make_targets(fx.batch), nullptr, nullptr, {0.0, 0.0, 0.0}, {}),
               ContractError);
}

TEST(Ablation, RowsEnableExactlyTheirTerms) {
  const auto& rows = train::ablation_rows();
  ASSERT_EQ(rows.size(), 5u);
  struct Want {
    bool action, pose2d, adv3d;
  };
  const Want want[] = {{true, false, false}, {true, true, false}, {false, true, false}, {false, true, true},
                       {true, true, true}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto w = train::ablation_weights(rows[i]);
    EXPECT_EQ(w.action > 0, want[i].action) << rows[i];
    EXPECT_EQ(w.pose2d > 0, want[i].pose2d) << rows[i];
    EXPECT_EQ(w.adv3d > 0, want[i].adv3d) << rows[i];
  }
  EXPECT_EQ(train::ablation_weights("full").action, 1e6);
  EXPECT_THROW(train::ablation_weights("adv3d"), ConfigError);
}

TEST(Ablation, TotalIsWeightedSumOfEnabledTerms) {
  LossFixture fx;
  for (const auto& row : train::ablation_rows()) {
    const auto w = train::ablation_weights(row);
    nn::Tape tape;
    nn::Binder gb(tape, true), cb(tape, false);
    auto out = fx.generator.forward(gb, model::make_inputs(fx.generator.config(), fx.batch),
                                    nn::Tensor({16, 4}, 0.0f));
    auto terms = train::generator_loss(out, train::make_targets(fx.batch), &fx.critic, &cb, w, {});
    ASSERT_TRUE(terms.adv3d_value.has_value());
    const double want = train::weighted_total(w, terms.action_value, terms.pose2d_value, *terms.adv3d_value);
    EXPECT_NEAR(terms.total_value, want, 1e-4 * std::max(1.0, std::abs(want))) << row;
    EXPECT_NEAR(terms.total.value().item(), terms.total_value, 1e-4 * std::max(1.0, std::abs(want))) << row;
  }
}

TEST(GeneratorLoss, ActionOnlyLeavesPoseDecoderUntouched) {
  LossFixture fx;
  nn::zero_grads(fx.generator.parameters());
  nn::Tape tape;
  nn::Binder bind(tape, true);
  auto out = fx.generator.forward(bind, model::make_inputs(fx.generator.config(), fx.batch),
                                  nn::Tensor({16, 4}, 0.0f));
  auto terms = train::generator_loss(out, train::make_targets(fx.batch), nullptr, nullptr,
                                     train::ablation_weights("action"), {});
  tape.backward(terms.total);
  for (auto& [name, ps] : fx.generator.parameter_groups()) {
    double s = 0.0;
    for (auto* p : ps)
      for (float g : p->grad.data()) s += std::abs(g);
    if (name == "pose_decoder") {
      EXPECT_EQ(s, 0.0);
    } else {
      EXPECT_GT(s, 0.0) << name;
    }
  }
}

TEST(Config, UnknownKeysAreRejected) {
  nlohmann::json j = {{"batch", 8}, {"learning_rate", 0.1}};
  EXPECT_THROW(j.get<train::TrainConfig>(), ConfigError);
  nlohmann::json nested = {{"model", {{"latent", 8}}}};
  EXPECT_THROW(nested.get<train::TrainConfig>(), ConfigError);
}

TEST(Config, OverridesParseJsonOrFallBackToString) {
  nlohmann::json j = nlohmann::json::object();
  train::apply_override(j, "loss.adv3d=0");
  train::apply_override(j, "projection=affine");
  train::apply_override(j, "model.latent_dim=64");
  EXPECT_EQ(j["loss"]["adv3d"], 0);
  EXPECT_EQ(j["projection"], "affine");
  const auto c = j.get<train::TrainConfig>();
  EXPECT_EQ(c.weights.adv3d, 0.0);
  EXPECT_EQ(c.model.latent_dim, 64u);
  EXPECT_EQ(c.projection, geometry::ProjectionMode::kAffine);
  EXPECT_THROW(train::apply_override(j, "no_equals_sign"), ConfigError);
}

TEST(Config, Presets) {
  const auto cooking = train::resolve_config({}, "paper-cooking", {});
  EXPECT_EQ(cooking.rollout_steps, 10u);
  EXPECT_EQ(cooking.weights.action, 1e6);
  EXPECT_EQ(cooking.batch, 4096u);
  EXPECT_FLOAT_EQ(cooking.lr, 1e-4f);
  EXPECT_FLOAT_EQ(cooking.weight_decay, 1e-3f);
  EXPECT_EQ(train::resolve_config({}, "paper-assembly", {}).rollout_steps, 5u);
  const auto overridden = train::resolve_config({}, "paper-cooking", {"batch=64"});
  EXPECT_EQ(overridden.batch, 64u);
  EXPECT_THROW(train::resolve_config({}, "imagenet", {}), ConfigError);
}

TEST(Config, FileLayerSitsBetweenPresetAndOverrides) {
  const auto dir = scratch_dir("config_file");
  {
    std::ofstream f(dir / "c.json");
    f << R"({"batch": 16, "lr": 0.5})";
  }
  const auto c = train::resolve_config(dir / "c.json", "paper-cooking", {"lr=0.25"});
  EXPECT_EQ(c.batch, 16u);
  EXPECT_FLOAT_EQ(c.lr, 0.25f);
  EXPECT_EQ(c.rollout_steps, 10u);
  EXPECT_THROW(train::resolve_config(dir / "missing.json", {}, {}), FormatError);
}

TEST(Config, JsonRoundTrip) {
  auto c = tiny_config();
  c.critic.lipschitz = model::Lipschitz::parse("clip:0.02");
  const auto back = nlohmann::json(c).get<train::TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
}

TEST(Trainer, EmptyDatabaseWithAdversarialLossIsConfigError) {
  auto data = tiny_data();
  data.pose_db.clear();
  EXPECT_THROW(train::Trainer(tiny_config(), data, scratch_dir("no_db")), ConfigError);
  auto cfg = tiny_config();
  cfg.weights.adv3d = 0.0;
  EXPECT_NO_THROW(train::Trainer(cfg, data, scratch_dir("no_db")));
}

TEST(Trainer, NonFiniteLossAbortsWithLastGoodCheckpoint) {
  auto data = tiny_data();
  data.train[5].history[1].pose.joints[3][0] = std::numeric_limits<float>::quiet_NaN();
  const auto dir = scratch_dir("nan");
  auto cfg = tiny_config();
  cfg.weights.adv3d = 0.0;
  cfg.batch = 1000;  // one step per epoch, so the poisoned window is always in it
  train::Trainer t(cfg, data, dir);
  try {
    t.run();
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_FALSE(e.last_good_checkpoint().empty());
    EXPECT_TRUE(fs::exists(e.last_good_checkpoint()));
    auto g = model::Forecaster::load(e.last_good_checkpoint());
    for (auto* p : g.parameters()) EXPECT_TRUE(p->value.all_finite());
  }
}

TEST(Trainer, AccumulationMatchesOneLargeBatch) {
  const auto& data = tiny_data();
  auto cfg = tiny_config();
  cfg.model.noise_dim = 0;
  cfg.weights.adv3d = 0.0;
  cfg.weight_decay = 0.0f;
  std::vector<pose::SequenceSample> batch(data.train.begin(), data.train.begin() + 32);
  train::Trainer whole(cfg, data, scratch_dir("acc1"));
  cfg.accumulate = 4;
  train::Trainer parts(cfg, data, scratch_dir("acc4"));
  for (int s = 0; s < 3; ++s) {
    const auto a = whole.step(batch);
    const auto b = parts.step(batch);
    EXPECT_NEAR(a.total, b.total, 1e-4 * std::abs(a.total));
  }
  auto pa = whole.generator().parameters(), pb = parts.generator().parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t k = 0; k < pa[i]->value.size(); ++k)
      worst = std::max(worst, static_cast<double>(std::abs(pa[i]->value[k] - pb[i]->value[k])));
  EXPECT_LT(worst, 1e-5);
}

TEST(Trainer, SameSeedIsBitwiseReproducible) {
  const auto& data = tiny_data();
  auto cfg = tiny_config();
  cfg.seed = 11;
  train::Trainer a(cfg, data, scratch_dir("det_a"));
  train::Trainer b(cfg, data, scratch_dir("det_b"));
  const auto ra = a.run();
  const auto rb = b.run();
  ASSERT_EQ(ra.epochs.size(), rb.epochs.size());
  for (std::size_t e = 0; e < ra.epochs.size(); ++e) {
    EXPECT_EQ(ra.epochs[e].total, rb.epochs[e].total);
    EXPECT_EQ(ra.epochs[e].val_mpjpe, rb.epochs[e].val_mpjpe);
    EXPECT_EQ(ra.epochs[e].critic, rb.epochs[e].critic);
  }
  auto pa = a.generator().parameters(), pb = b.generator().parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
  ASSERT_EQ(a.fake_pool().size(), b.fake_pool().size());
  for (std::size_t i = 0; i < a.fake_pool().size(); ++i) EXPECT_EQ(a.fake_pool()[i].joints, b.fake_pool()[i].joints);
}

TEST(Trainer, WritesLogsAndCheckpoints) {
  const auto& data = tiny_data();
  const auto dir = scratch_dir("artifacts");
  train::Trainer t(tiny_config(), data, dir);
  const auto r = t.run();
  for (const char* f : {"config.json", "metrics.jsonl", "epochs.jsonl", "generator_best.ckpt",
                        "generator_last.ckpt", "generator_last.ckpt.adam", "critic_last.ckpt", "fake_pool.p3db"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream in(dir / "metrics.jsonl");
  std::string line;
  std::getline(in, line);
  EXPECT_TRUE(nlohmann::json::parse(line).value("header", false));
  std::size_t steps = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* k : {"step", "epoch", "L_action", "L_pose2d", "L_adv3d", "L_critic", "gp", "total", "lr"})
      EXPECT_TRUE(j.contains(k)) << k;
    ++steps;
  }
  EXPECT_GT(steps, 0u);
  EXPECT_EQ(r.epochs.size(), 2u);
  EXPECT_LE(t.fake_pool().size(), 50u);
  EXPECT_TRUE(r.epochs.back().critic_gap.has_value());
}

TEST(Trainer, LossDecreasesOnTinyData) {
  const auto& data = tiny_data();
  auto cfg = tiny_config();
  cfg.epochs = 8;
  cfg.weights.adv3d = 0.0;
  train::Trainer t(cfg, data, scratch_dir("decrease"));
  const auto r = t.run();
  EXPECT_LT(r.epochs.back().total, r.epochs.front().total);
}
