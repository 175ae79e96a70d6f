// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [name-substring]

#include <sys/wait.h>

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "metric_oracles.hpp"
#include "oracles.hpp"
#include "posecast/data/posedb.hpp"
#include "posecast/errors.hpp"
#include "posecast/eval/metrics.hpp"
#include "posecast/eval/quality.hpp"
#include "posecast/geometry/kinematics.hpp"
#include "posecast/geometry/metrics.hpp"
#include "posecast/geometry/projection.hpp"
#include "posecast/model/critic.hpp"
#include "posecast/model/forecaster.hpp"
#include "posecast/rollout/rollout.hpp"
#include "posecast/train/losses.hpp"
#include "posecast/train/trainer.hpp"

using namespace posecast;
using namespace posecast::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const fs::path& workdir() {
  static const fs::path dir = scratch_dir("acceptance");
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int posecast_cli(const std::string& args) {
  const auto log = workdir() / "cli.log";
  const std::string cmd = std::string(POSECAST_CLI) + " " + args + " >> " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nn::Tensor flatten(const std::vector<pose::Skeleton3D>& poses) {
  nn::Tensor t({poses.size(), 3 * pose::kNumJoints});
  for (std::size_t r = 0; r < poses.size(); ++r)
    for (std::size_t j = 0; j < pose::kNumJoints; ++j)
      for (std::size_t d = 0; d < 3; ++d) t.at(r, 3 * j + d) = poses[r].joints[j][d];
  return t;
}

// ---------------------------------------------------------------- gradients

// Kept coordinates of every checked tensor, compared as one gradient vector.
struct GradTally {
  std::vector<double> analytic, fd;
  std::size_t checked = 0, skipped = 0;
  double worst_gap = 0.0;
  std::string worst_at;  // tensor with the largest absolute discrepancy
  double error() const { return relative_error(analytic, fd); }
};

std::vector<std::size_t> subset(std::size_t n, std::size_t k, std::mt19937_64& gen) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), gen);
  idx.resize(std::min(n, k));
  return idx;
}

void tally(GradTally& t, const std::string& name, const std::vector<double>& analytic, const std::vector<double>& fd,
           const std::vector<bool>& kept) {
  double gap = 0.0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    ++t.checked;
    if (!kept[i]) {
      ++t.skipped;
      continue;
    }
    t.analytic.push_back(analytic[i]);
    t.fd.push_back(fd[i]);
    gap += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
  }
  if (gap > t.worst_gap) {
    t.worst_gap = gap;
    t.worst_at = name;
  }
}

constexpr std::size_t kCoordsPerTensor = 12;

// Fresh layers have zero biases, so rows with zero input sit exactly on a
// leaky-ReLU kink; jitter them to a generic point.
void jitter_biases(const std::vector<nn::Parameter*>& params, nn::Rng& rng) {
  for (auto* p : params)
    if (p->value.shape().size() == 1)
      for (auto& v : p->value.data()) v += 0.1f * rng.normal();
}

// Gradient of sum(build(tape) * W) w.r.t. every tensor in params, where W is a
// fixed random weighting; the differenced side reduces in double.
GradTally check_weighted_output(const std::vector<nn::Parameter*>& params,
                                const std::function<nn::Var(nn::Tape&)>& build, double h, std::mt19937_64& gen) {
  nn::Tensor W;
  {
    nn::Tape tape;
    const auto shape = build(tape).value().shape();
    nn::Rng rng(gen());
    W = rng.normal_tensor(shape);
  }
  nn::zero_grads(params);
  {
    nn::Tape tape;
    tape.backward(nn::sum_all(nn::mul(build(tape), tape.constant(W))));
  }
  auto f = [&] {
    nn::Tape tape;
    const auto& y = build(tape).value();
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * W[i];
    return s;
  };
  GradTally t;
  for (auto* p : params) {
    const auto idx = subset(p->value.size(), kCoordsPerTensor, gen);
    auto fd = screened_central_difference(f, p->value, h, idx);
    tally(t, p->name, pick(p->grad, idx), fd.grad, fd.kept);
  }
  return t;
}

model::CriticConfig small_critic() {
  model::CriticConfig c;
  c.joint_widths = {16, 16, 16, 16};
  c.kinematic_widths = {8, 8, 8};
  c.merge_widths = {16, 1};
  return c;
}

std::vector<pose::Skeleton3D> centered_poses(std::mt19937_64& gen, std::size_t n) {
  std::vector<pose::Skeleton3D> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pose::center_at_neck(random_pose(gen)));
  return out;
}

// Full generator objective: analytic gradient of the weighted total against
// central differences of each term, combined with the same weights.
GradTally check_generator_loss(std::mt19937_64& gen) {
  const auto cfg = small_config(5, 3, 4);
  model::Forecaster net(cfg, gen());
  const auto layout = pose::JointLayout::upper_body();
  model::Critic critic(small_critic(), layout, gen());
  std::vector<pose::SequenceSample> samples;
  for (int i = 0; i < 4; ++i) samples.push_back(random_sample(gen, cfg));
  const auto inputs = model::make_inputs(cfg, samples);
  const auto targets = train::make_targets(samples);
  nn::Rng rng(gen());
  const nn::Tensor noise = rng.normal_tensor({samples.size(), cfg.noise_dim});
  jitter_biases(net.parameters(), rng);
  jitter_biases(critic.parameters(), rng);
  const train::LossWeights w{1e6, 1.0, 1.0};
  geometry::ProjectionOptions proj;
  proj.soft_clamp = true;

  auto terms = [&](nn::Tape& tape) {
    nn::Binder gb(tape, true), cb(tape, false);
    const auto out = net.forward(gb, inputs, noise);
    return train::generator_loss(out, targets, &critic, &cb, w, proj);
  };
  const auto params = net.parameters();
  nn::zero_grads(params);
  {
    nn::Tape tape;
    tape.backward(terms(tape).total);
  }
  const std::array<std::function<double()>, 3> f = {
      [&] { nn::Tape t; return terms(t).action_value; },
      [&] { nn::Tape t; return terms(t).pose2d_value; },
      [&] { nn::Tape t; return *terms(t).adv3d_value; },
  };
  const std::array<double, 3> weight = {w.action, w.pose2d, w.adv3d};
  // the critic term is a small difference of larger activations, so its
  // rounding noise exceeds the last bit of its value
  std::array<double, 3> floor{};
  for (std::size_t k = 0; k < 3; ++k)
    for (auto* p : {params.front(), params.back()}) floor[k] = std::max(floor[k], 10 * rounding_noise(f[k], p->value, 0));
  GradTally t;
  for (auto* p : params) {
    const auto idx = subset(p->value.size(), kCoordsPerTensor, gen);
    std::vector<double> combined(idx.size(), 0.0);
    std::vector<bool> kept(idx.size(), true);
    for (std::size_t k = 0; k < 3; ++k) {
      auto fd = screened_central_difference(f[k], p->value, 1e-3, idx, floor[k]);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        combined[i] += weight[k] * fd.grad[i];
        kept[i] = kept[i] && fd.kept[i];
      }
    }
    tally(t, p->name, pick(p->grad, idx), combined, kept);
  }
  return t;
}

GradTally gradient_case(std::size_t kind, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  nn::Rng rng(seed);
  const auto layout = pose::JointLayout::upper_body();
  const std::size_t J = pose::kNumJoints;
  switch (kind) {
    case 0: {
      nn::LinearLayer layer("linear", 7, 5, rng);
      layer.bias.value = rng.normal_tensor({5});
      nn::Parameter x{"x", rng.normal_tensor({4, 7}), {}};
      return check_weighted_output({&layer.weight, &layer.bias, &x},
                                   [&](nn::Tape& tape) {
                                     nn::Binder b(tape, true);
                                     return layer.forward(b, b(x));
                                   },
                                   1e-3, gen);
    }
    case 1: {
      nn::Parameter x{"x", rng.normal_tensor({6, 5}), {}};
      return check_weighted_output({&x}, [&](nn::Tape& tape) { return nn::leaky_relu(tape.param(x), 0.2f); }, 1e-3,
                                   gen);
    }
    case 2: {
      nn::ResidualBlock block("res", 6, rng);
      nn::Parameter x{"x", rng.normal_tensor({4, 6}), {}};
      std::vector<nn::Parameter*> params{&x};
      block.collect(params);
      jitter_biases(params, rng);
      return check_weighted_output(params,
                                   [&](nn::Tape& tape) {
                                     nn::Binder b(tape, true);
                                     return block.forward(b, b(x));
                                   },
                                   1e-3, gen);
    }
    case 3: {
      nn::Mlp mlp("mlp", {6, 10, 8, 4}, rng, seed % 2 == 0);
      nn::Parameter x{"x", rng.normal_tensor({4, 6}), {}};
      std::vector<nn::Parameter*> params{&x};
      mlp.collect(params);
      jitter_biases(params, rng);
      return check_weighted_output(params,
                                   [&](nn::Tape& tape) {
                                     nn::Binder b(tape, true);
                                     return mlp.forward(b, b(x));
                                   },
                                   1e-3, gen);
    }
    case 4: {
      nn::Parameter logits{"logits", rng.normal_tensor({5, 7}, 2.0f), {}};
      std::vector<std::size_t> targets;
      for (int i = 0; i < 5; ++i) targets.push_back(gen() % 7);
      return check_weighted_output(
          {&logits}, [&](nn::Tape& tape) { return nn::softmax_cross_entropy(tape.param(logits), targets); }, 1e-3, gen);
    }
    case 5: {
      nn::Parameter x{"poses", rng.normal_tensor({3, 3 * J}), {}};
      return check_weighted_output({&x}, [&](nn::Tape& tape) { return geometry::psi_upper_batch(tape.param(x), layout); },
                                   1e-2, gen);
    }
    case 6: {
      std::vector<pose::Skeleton3D> poses;
      std::vector<pose::Camera> cams;
      for (int i = 0; i < 3; ++i) {
        poses.push_back(random_pose(gen));
        cams.push_back(random_camera(gen));
      }
      nn::Parameter x{"poses", flatten(poses), {}};
      return check_weighted_output({&x}, [&](nn::Tape& tape) { return geometry::project_batch(tape.param(x), cams); },
                                   0.5, gen);
    }
    case 7: {
      nn::Parameter x{"pixels", rng.normal_tensor({3, 2 * J}, 100.0f), {}};
      return check_weighted_output({&x}, [&](nn::Tape& tape) { return geometry::center_batch(tape.param(x), 2, J); },
                                   1e-1, gen);
    }
    case 8: {
      model::Critic critic(small_critic(), layout, seed);
      jitter_biases(critic.parameters(), rng);
      const nn::Tensor poses = flatten(centered_poses(gen, 4));
      return check_weighted_output(critic.parameters(),
                                   [&](nn::Tape& tape) {
                                     nn::Binder b(tape, true);
                                     return critic.score(b, tape.constant(poses));
                                   },
                                   1e-3, gen);
    }
    case 9: {
      model::Critic critic(small_critic(), layout, seed);
      jitter_biases(critic.parameters(), rng);
      const nn::Tensor real = flatten(centered_poses(gen, 4));
      const nn::Tensor fake = flatten(centered_poses(gen, 4));
      const std::uint64_t interp_seed = gen();
      return check_weighted_output(critic.parameters(),
                                   [&](nn::Tape& tape) {
                                     nn::Binder b(tape, true);
                                     nn::Rng r(interp_seed);
                                     return critic.critic_losses(b, real, fake, r).loss;
                                   },
                                   1e-4, gen);
    }
    default:
      return check_generator_loss(gen);
  }
}

Outcome gradient_correctness() {
  const char* names[] = {"linear", "leaky_relu", "residual", "mlp", "softmax_ce", "psi", "projection", "center",
                         "critic_score", "critic_gp_loss", "generator_loss"};
  double worst = 0.0;
  std::string where;
  std::size_t failures = 0;
  double max_skip = 0.0;
  for (std::uint64_t c = 0; c < 100; ++c) {
    const std::size_t kind = c % 11;
    const auto t = gradient_case(kind, 1000 + c);
    const double err = t.error();
    const bool ok = err <= 1e-2 && t.skipped * 4 < t.checked;
    failures += !ok;
    if (err >= worst) {
      worst = err;
      where = std::string(names[kind]) + "/" + t.worst_at;
    }
    max_skip = std::max(max_skip, static_cast<double>(t.skipped) / static_cast<double>(t.checked));
    if (!ok || err > 1e-3)
      std::cerr << "  case " << c << " (" << names[kind] << "): rel " << err << " at " << t.worst_at << ", skipped "
                << t.skipped << "/" << t.checked << "\n";
  }
  return {failures == 0, fmt("100 cases, %zu failing, worst relative error %.2e (%s), at most %.0f%% of coordinates screened as kinks",
                               failures, worst, where.c_str(), 100 * max_skip)};
}

// --------------------------------------------------------------- projection

Outcome projection_inverse() {
  std::mt19937_64 gen(2024);
  double worst = 0.0, min_gap = 1e300;
  std::size_t not_different = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_pose(gen);
    const auto cam = random_camera(gen);
    const auto px = geometry::project(p, cam);
    geometry::ProjectionOptions affine;
    affine.mode = geometry::ProjectionMode::kAffine;
    const auto ax = geometry::project(p, cam, affine);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const auto pc = cam.to_camera(p.joints[j]);
      const auto back = geometry::unproject(px.joints[j], pc[2], cam);
      for (int d = 0; d < 3; ++d) worst = std::max(worst, std::abs(static_cast<double>(back[d]) - p.joints[j][d]));
      const double gap = std::hypot(static_cast<double>(ax.joints[j][0]) - px.joints[j][0],
                                    static_cast<double>(ax.joints[j][1]) - px.joints[j][1]);
      min_gap = std::min(min_gap, gap);
      not_different += gap == 0.0;
    }
  }
  // at unit depth the two modes must agree
  pose::Camera unit;
  unit.fx = 800;
  unit.fy = 700;
  unit.cx = 320;
  unit.cy = 240;
  unit.t = {0, 0, 1};
  pose::Skeleton3D flat(pose::kNumJoints);
  for (std::size_t j = 0; j < flat.size(); ++j) flat.joints[j] = {0.1f * j, -0.05f * j, 0.0f};
  geometry::ProjectionOptions affine;
  affine.mode = geometry::ProjectionMode::kAffine;
  affine.z_min = 0.5;
  geometry::ProjectionOptions perspective;
  perspective.z_min = 0.5;
  const auto a = geometry::project(flat, unit, affine), b = geometry::project(flat, unit, perspective);
  double unit_gap = 0.0;
  for (std::size_t j = 0; j < flat.size(); ++j)
    unit_gap = std::max({unit_gap, std::abs(static_cast<double>(a.joints[j][0]) - b.joints[j][0]),
                         std::abs(static_cast<double>(a.joints[j][1]) - b.joints[j][1])});
  const bool pass = worst <= 1e-3 && not_different == 0 && unit_gap < 1e-4;
  return {pass, fmt("1000 pairs: max inverse error %.2e mm; affine vs perspective min gap %.3g px; unit-depth gap %.1e",
                    worst, min_gap, unit_gap)};
}

// ---------------------------------------------------------------------- psi

Outcome psi_properties() {
  std::mt19937_64 gen(77);
  const auto layout = pose::JointLayout::upper_body();
  std::uniform_real_distribution<double> ang(-3.14159, 3.14159);
  double asym = 0.0, eig_ratio = 0.0, rot = 0.0, diag = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_pose(gen);
    const auto psi = geometry::kinematic_stats(p, layout).psi;
    asym = std::max(asym, (psi - psi.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(psi, Eigen::EigenvaluesOnly);
    eig_ratio = std::min(eig_ratio, es.eigenvalues().minCoeff() / psi.trace());

    const auto R = pose::rotation_from_euler(ang(gen), ang(gen), ang(gen));
    pose::Skeleton3D q(p.size());
    for (std::size_t j = 0; j < p.size(); ++j)
      for (int r = 0; r < 3; ++r)
        q.joints[j][r] = static_cast<float>(R[3 * r] * p.joints[j][0] + R[3 * r + 1] * p.joints[j][1] +
                                            R[3 * r + 2] * p.joints[j][2]);
    const auto psi_q = geometry::kinematic_stats(q, layout).psi;
    rot = std::max(rot, (psi_q - psi).norm() / psi.norm());

    const auto& bones = layout.bones();
    for (std::size_t b = 0; b < bones.size(); ++b) {
      double len2 = 0.0;
      for (int d = 0; d < 3; ++d) {
        const double e = static_cast<double>(p.joints[bones[b].child][d]) - p.joints[bones[b].parent][d];
        len2 += e * e;
      }
      diag = std::max(diag, std::abs(psi(b, b) - len2));
    }
  }
  const bool pass = asym == 0.0 && eig_ratio >= -1e-6 && rot <= 1e-4 && diag <= 1e-6;
  return {pass, fmt("1000 poses: asymmetry %.1e, min eig/trace %.1e, rotation change %.1e (relative), diag vs bone^2 %.1e",
                    asym, eig_ratio, rot, diag)};
}

// ------------------------------------------------------------ metric oracles

Outcome metric_oracles() {
  const auto dir = workdir() / "oracle_corpus";
  auto spec = data::cycle_grammar(6, 2);
  spec.transitions["action_00"]["action_03"] = 0.5;
  spec.sequences = 20;
  spec.pose_db_size = 50;
  spec.min_steps = 8;
  spec.max_steps = 12;
  const auto manifest = data::generate_puppet_dataset(spec, dir, 21);
  std::vector<data::Sequence> all;
  for (const auto& split : {"train", "val", "test"}) {
    auto s = data::load_split(manifest, split);
    all.insert(all.end(), s.begin(), s.end());
  }
  const auto train = data::load_split(manifest, "train");
  const auto layout = pose::JointLayout::upper_body();
  std::mt19937_64 gen(4);
  const auto in = random_eval_inputs(all, train, manifest.actions.size(), 3, 5, gen);
  const auto lib = eval::evaluate(in, layout);
  const auto ref = brute_evaluate(in, layout);

  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  const double float_err = std::max({rel(lib.mpjpe_px, ref.mpjpe), rel(lib.symmetry_mm, ref.symmetry),
                                     rel(lib.baselines.zero_velocity_mpjpe, ref.zero_velocity),
                                     rel(lib.baselines.train_average_mpjpe, ref.train_average)});
  // fractions averaged over sequences: equal up to summation order
  const double topk_err = std::max({std::abs(lib.top1 - ref.top1), std::abs(lib.top3 - ref.top3),
                                    std::abs(lib.baselines.repeat_last_top1 - ref.repeat_last_top1),
                                    std::abs(lib.baselines.repeat_last_top3 - ref.repeat_last_top3),
                                    std::abs(lib.baselines.most_common_top1 - ref.most_common_top1),
                                    std::abs(lib.baselines.most_common_top3 - ref.most_common_top3)});

  // cross-entropy of every predicted step against log-sum-exp in double
  std::vector<float> flat;
  std::vector<std::size_t> targets;
  double ce_ref = 0.0;
  for (std::size_t i = 0; i < in.records.size(); ++i)
    for (std::size_t m = 0; m < in.records[i].steps.size(); ++m) {
      const auto& l = in.records[i].steps[m].logits;
      const std::size_t y = in.tasks[i].gt_actions[m];
      const double mx = *std::max_element(l.begin(), l.end());
      double z = 0.0;
      for (float v : l) z += std::exp(v - mx);
      ce_ref += mx + std::log(z) - l[y];
      flat.insert(flat.end(), l.begin(), l.end());
      targets.push_back(y);
    }
  ce_ref /= static_cast<double>(targets.size());
  nn::Tape tape;
  const double ce = train::action_loss(tape.constant(nn::Tensor({targets.size(), manifest.actions.size()}, flat)),
                                       targets)
                        .value()
                        .item();
  const double ce_err = rel(ce, ce_ref);
  const bool pass = topk_err <= 1e-12 && float_err <= 1e-6 && ce_err <= 1e-6;
  return {pass, fmt("%zu rollouts over 20 sequences: top-k abs err %.1e, float metrics rel err %.1e, CE rel err %.1e",
                    in.records.size(), topk_err, float_err, ce_err)};
}

// -------------------------------------------------------------- puppet runs

struct Puppet {
  data::DatasetManifest manifest;
  train::TrainData data;
  std::vector<data::Sequence> test;
  std::vector<pose::Skeleton3D> real_pool;
};

const Puppet& puppet() {
  static const Puppet p = [] {
    Puppet out;
    out.manifest = data::generate_puppet_dataset(data::preset_grammar("puppet8"), workdir() / "puppet8", 0);
    out.data = train::load_train_data(out.manifest, 3);
    out.test = data::load_split(out.manifest, "test");
    out.real_pool = out.data.pose_db;
    out.real_pool.resize(std::min<std::size_t>(out.real_pool.size(), 5000));
    return out;
  }();
  return p;
}

constexpr std::size_t kPuppetEpochs = 60;

struct TrainedRun {
  train::TrainResult result;
  model::Forecaster best;
  std::vector<pose::Skeleton3D> fakes;  // 5000 generated poses on test windows
  double symmetry = 0.0;
  double quality = 0.0;
};

const TrainedRun& trained(std::uint64_t seed, bool adversarial) {
  static std::map<std::pair<std::uint64_t, bool>, TrainedRun> cache;
  const auto key = std::make_pair(seed, adversarial);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  const auto& P = puppet();
  auto cfg = train::resolve_config({}, "synthetic", {});
  cfg.model.history = 3;
  cfg.model.num_actions = P.manifest.actions.size();
  cfg.model.num_objects = P.manifest.objects.size();
  cfg.epochs = kPuppetEpochs;
  cfg.seed = seed;
  if (!adversarial) cfg.weights.adv3d = 0.0;
  const auto dir = workdir() / fmt("run_s%llu_%s", static_cast<unsigned long long>(seed), adversarial ? "full" : "noadv");
  TrainedRun run;
  {
    train::Trainer trainer(cfg, P.data, dir);
    run.result = trainer.run();
  }
  run.best = model::Forecaster::load(run.result.best_checkpoint.string());

  const auto windows = data::window_samples(P.test, 3);
  nn::Rng rng(seed + 500);
  const std::size_t nd = run.best.config().noise_dim;
  while (run.fakes.size() < 5000) {
    const auto& s = windows[run.fakes.size() % windows.size()];
    std::vector<float> noise(nd);
    for (auto& v : noise) v = rng.normal();
    run.fakes.push_back(run.best.predict(s, noise).pose3d);
  }
  double sym = 0.0;
  for (const auto& f : run.fakes) sym += geometry::symmetry_error(f, P.data.layout);
  run.symmetry = sym / static_cast<double>(run.fakes.size());
  run.quality = eval::quality_metric(P.real_pool, run.fakes, 99);
  return cache.emplace(key, std::move(run)).first->second;
}

Outcome end_to_end() {
  const auto& P = puppet();
  const auto& run = trained(1, true);
  auto model = run.best;
  geometry::ProjectionOptions proj;
  proj.soft_clamp = true;
  const auto val = train::evaluate_windows(model, P.data.val, P.data.layout, proj);

  rollout::RolloutFile file;
  file.history = 3;
  file.steps = 5;
  rollout::RolloutOptions opt;
  opt.steps = 5;
  nn::Rng rng(1);
  for (const auto& s : P.test)
    for (const auto& t : rollout::rollout_tasks(s, 3, 5)) file.records.push_back(rollout::rollout(model, t.initial, opt, rng));
  const auto train_seqs = data::load_split(P.manifest, "train");
  const auto rep = eval::evaluate(eval::align(file, P.test, train_seqs, P.manifest.actions.size()), P.data.layout);
  const double step1 = rep.per_step_accuracy.empty() ? 0.0 : rep.per_step_accuracy[0];
  const bool pass = val.top1 >= 0.9 && step1 >= 0.95 && rep.mpjpe_px < rep.baselines.zero_velocity_mpjpe;
  return {pass, fmt("%zu train windows, %zu epochs (best %zu): val top-1 %.3f, rollout step-1 top-1 %.3f, "
                    "M=5 mpjpe %.2f px vs zero-velocity %.2f px",
                    P.data.train.size(), run.result.epochs.size(), run.result.best_epoch, val.top1, step1, rep.mpjpe_px,
                    rep.baselines.zero_velocity_mpjpe)};
}

Outcome adversarial_benefit() {
  std::size_t wins = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto& full = trained(seed, true);
    const auto& plain = trained(seed, false);
    const bool win = full.symmetry < plain.symmetry && full.quality > plain.quality;
    wins += win;
    detail += fmt("seed %llu sym %.1f/%.1f mm quality %.3f/%.3f%s; ", static_cast<unsigned long long>(seed),
                  full.symmetry, plain.symmetry, full.quality, plain.quality, win ? "" : " (no)");
  }
  return {wins >= 2, fmt("%zu/3 runs improved (full/no-adv3d): ", wins) + detail};
}

// --------------------------------------------------------------- calibration

Outcome quality_calibration() {
  const auto& pool = puppet().real_pool;
  const double same = eval::quality_metric(pool, pool, 5);
  const auto db = puppet().data.pose_db;
  std::vector<pose::Skeleton3D> real, fake;
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (i % 2 == 0)
      real.push_back(db[i]);
    else
      fake.push_back(long_arms(db[i]));
  }
  const double arms = eval::quality_metric(real, fake, 6);
  return {same >= 0.45 && same <= 0.55 && arms < 0.1,
          fmt("identical pools (%zu) %.3f; arms x3 %.3f", pool.size(), same, arms)};
}

// --------------------------------------------------------------- determinism

Outcome determinism() {
  const auto manifest = (workdir() / "puppet8" / "manifest.json").string();
  puppet();
  std::vector<std::string> diffs;
  for (const char* run : {"det_a", "det_b"}) {
    const auto dir = workdir() / run;
    if (posecast_cli("--seed 11 --preset synthetic --set epochs=2 train --manifest " + manifest + " --out " +
                     dir.string()) != 0 ||
        posecast_cli("--seed 11 rollout --checkpoint " + (dir / "generator_best.ckpt").string() + " --manifest " +
                     manifest + " --out " + (dir / "rollouts.json").string()) != 0)
      return {false, std::string("CLI failed for ") + run + ", see " + (workdir() / "cli.log").string()};
  }
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(workdir() / "det_a")) {
    const auto name = e.path().filename().string();
    auto a = slurp(e.path()), b = slurp(workdir() / "det_b" / name);
    if (name == "metrics.jsonl") {  // header line carries the wall-clock start time
      a = a.substr(a.find('\n'));
      b = b.substr(b.find('\n'));
    }
    ++files;
    if (a != b) diffs.push_back(name);
  }
  std::string which;
  for (const auto& d : diffs) which += " " + d;
  return {diffs.empty() && files >= 8,
          fmt("%zu artifacts compared byte for byte, %zu differ", files, diffs.size()) + which};
}

// --------------------------------------------------------------------- curve

Outcome cooking_curve() {
  const auto dir = workdir() / "cooking";
  const auto manifest = (dir / "data" / "manifest.json").string();
  const std::string set = " --preset synthetic --set rollout_steps=10 --set epochs=3 ";
  if (posecast_cli("--seed 2 synth --grammar cooking --out " + (dir / "data").string()) != 0 ||
      posecast_cli("--seed 2" + set + "train --manifest " + manifest + " --out " + (dir / "run").string()) != 0 ||
      posecast_cli("--seed 2 --preset paper-cooking rollout --checkpoint " + (dir / "run/generator_best.ckpt").string() +
                   " --manifest " + manifest + " --out " + (dir / "r.json").string()) != 0 ||
      posecast_cli("--seed 2 eval --rollouts " + (dir / "r.json").string() + " --manifest " + manifest + " --out " +
                   (dir / "e.json").string() + " --curve " + (dir / "curve.csv").string()) != 0)
    return {false, "CLI pipeline failed, see " + (workdir() / "cli.log").string()};

  std::ifstream in(dir / "curve.csv");
  std::string line;
  std::getline(in, line);
  if (line != "step,top1,top3") return {false, "unexpected header '" + line + "'"};
  std::size_t rows = 0;
  std::string values;
  bool ok = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    ++rows;
    const double t1 = std::stod(b), t3 = std::stod(c);
    ok = ok && std::stoul(a) == rows && t1 >= 0 && t1 <= 1 && t3 >= t1 && t3 <= 1;
    values += fmt(" %.2f", t1);
  }
  return {ok && rows == 10, fmt("%zu steps, top-1 per step:", rows) + values};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-correctness", gradient_correctness},
      {"projection-inverse", projection_inverse},
      {"psi-properties", psi_properties},
      {"metric-oracles", metric_oracles},
      {"end-to-end-puppet8", end_to_end},
      {"adversarial-benefit", adversarial_benefit},
      {"quality-calibration", quality_calibration},
      {"determinism", determinism},
      {"cooking-curve-m10", cooking_curve},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!filter.empty() && name.find(filter) == std::string::npos) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << fmt(" [%.0f s]", secs) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
