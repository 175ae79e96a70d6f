#include "posecast/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>

#include "posecast/data/posedb.hpp"
#include "posecast/errors.hpp"
#include "posecast/eval/metrics.hpp"
#include "posecast/geometry/metrics.hpp"

namespace posecast::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

nn::Tensor stack_poses(const std::vector<pose::Skeleton3D>& poses, std::span<const std::size_t> rows) {
  const std::size_t width = 3 * poses.front().size();
  nn::Tensor t({rows.size(), width});
  for (std::size_t r = 0; r < rows.size(); ++r) t.set_row(r, poses[rows[r]].flat());
  return t;
}

}  // namespace

TrainData load_train_data(const data::DatasetManifest& manifest, std::size_t history) {
  TrainData d;
  d.layout = data::manifest_layout(manifest);
  d.train = data::window_samples(data::load_split(manifest, "train"), history);
  d.val = data::window_samples(data::load_split(manifest, "val"), history);
  if (!manifest.pose_db.empty()) {
    d.pose_db = data::prepare_pose_db(data::read_pose_db(manifest.resolve(manifest.pose_db)), d.layout);
  }
  d.action_names = manifest.actions;
  return d;
}

WindowMetrics evaluate_windows(model::Forecaster& generator, std::span<const pose::SequenceSample> samples,
                               const pose::JointLayout& layout, const geometry::ProjectionOptions& projection,
                               std::size_t batch) {
  if (samples.empty()) throw ContractError("evaluate_windows: no samples");
  WindowMetrics m;
  double dist = 0.0, sym = 0.0;
  std::size_t joints = 0, hit1 = 0, hit3 = 0;
  const auto& cfg = generator.config();
  for (std::size_t begin = 0; begin < samples.size(); begin += batch) {
    const auto chunk = samples.subspan(begin, std::min(batch, samples.size() - begin));
    nn::Tape tape;
    nn::Binder bind(tape, false);
    const auto inputs = model::make_inputs(cfg, chunk);
    nn::Tensor noise = cfg.noise_dim ? nn::Tensor({chunk.size(), cfg.noise_dim}, 0.0f) : nn::Tensor();
    const auto out = generator.forward(bind, inputs, noise);
    const auto targets = make_targets(chunk);
    const nn::Tensor px = project_centered(out.pose3d, targets.cameras, projection).value();
    const nn::Tensor& logits = out.logits.value();
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      const std::size_t J = targets.mask.cols();
      for (std::size_t j = 0; j < J; ++j) {
        if (targets.mask.at(r, j) <= 0.0f) continue;
        const double dx = static_cast<double>(px.at(r, 2 * j)) - targets.pose2d.at(r, 2 * j);
        const double dy = static_cast<double>(px.at(r, 2 * j + 1)) - targets.pose2d.at(r, 2 * j + 1);
        dist += std::sqrt(dx * dx + dy * dy);
        ++joints;
      }
      const auto row = std::span<const float>(logits.data()).subspan(r * logits.cols(), logits.cols());
      const std::size_t rank = eval::rank_of(row, targets.actions[r]);
      hit1 += rank < 1;
      hit3 += rank < 3;
      auto pose = pose::Skeleton3D::from_flat(out.pose3d.value().row(r).vec());
      sym += geometry::symmetry_error(pose, layout);
      m.poses.push_back(std::move(pose));
    }
  }
  const auto n = static_cast<double>(samples.size());
  m.mpjpe_px = joints ? dist / static_cast<double>(joints) : 0.0;
  m.top1 = static_cast<double>(hit1) / n;
  m.top3 = static_cast<double>(hit3) / n;
  m.symmetry_mm = sym / n;
  return m;
}

Trainer::Trainer(TrainConfig config, TrainData data, fs::path out_dir)
    : config_(std::move(config)), data_(std::move(data)), out_dir_(std::move(out_dir)) {
  if (data_.train.empty()) throw ContractError("training: empty training set");
  config_.model.joints = data_.layout.size();
  if (config_.model.num_actions == 0) throw ConfigError("training: model.num_actions not set");
  config_.validate();
  const bool adversarial = config_.weights.adv3d > 0.0;
  if (adversarial && data_.pose_db.empty()) {
    throw ConfigError("training: adversarial loss enabled (loss.adv3d > 0) but the 3D pose database is empty");
  }
  projection_.mode = config_.projection;
  projection_.soft_clamp = config_.soft_clamp;

  const nn::Rng root(config_.seed);
  generator_ = model::Forecaster(config_.model, root.fork(kGeneratorInit).next());
  nn::AdamConfig g;
  g.lr = config_.lr;
  g.weight_decay = config_.weight_decay;
  gen_opt_ = nn::Adam(generator_.parameters(), g);
  if (adversarial) {
    critic_ = std::make_unique<model::Critic>(config_.critic, data_.layout, root.fork(kCriticInit).next());
    nn::AdamConfig c;
    c.lr = config_.critic_lr;
    c.beta1 = config_.critic_beta1;
    c.beta2 = config_.critic_beta2;
    critic_opt_ = nn::Adam(critic_->parameters(), c);
  }
  shuffle_rng_ = root.fork(kShuffle);
  noise_rng_ = root.fork(kNoise);
  critic_rng_ = root.fork(kCriticSampling);
  pool_rng_ = root.fork(kFakePool);
}

double Trainer::critic_step(const nn::Tensor& fake, double* gp) {
  const std::size_t n = fake.rows();
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = critic_rng_.index(data_.pose_db.size());
  const nn::Tensor real = stack_poses(data_.pose_db, rows);
  nn::Tape tape;
  nn::Binder bind(tape, true);
  critic_opt_.zero_grad();
  auto losses = critic_->critic_losses(bind, real, fake, critic_rng_);
  const double value = losses.loss.value().item();
  if (!std::isfinite(value)) throw TrainingError("non-finite critic loss at step " + std::to_string(step_), last_good_);
  tape.backward(losses.loss);
  critic_opt_.step();
  if (config_.critic.lipschitz.kind == model::Lipschitz::Kind::kClip) critic_->clip_parameters();
  if (gp) *gp = losses.penalty.value().item();
  return value;
}

void Trainer::add_to_pool(const nn::Tensor& fakes) {
  if (config_.fake_pool_size == 0) return;
  // reservoir sampling over every generated pose seen during training
  for (std::size_t r = 0; r < fakes.rows(); ++r) {
    ++pool_seen_;
    if (fake_pool_.size() < config_.fake_pool_size) {
      fake_pool_.push_back(pose::Skeleton3D::from_flat(fakes.row(r).vec()));
    } else {
      const std::uint64_t k = pool_rng_.next() % pool_seen_;
      if (k < config_.fake_pool_size) fake_pool_[k] = pose::Skeleton3D::from_flat(fakes.row(r).vec());
    }
  }
}

StepStats Trainer::micro_step(std::span<const pose::SequenceSample> batch, float loss_scale) {
  const auto& mc = generator_.config();
  nn::Tape tape;
  nn::Binder gen_bind(tape, true);
  nn::Binder critic_bind(tape, false);
  const auto inputs = model::make_inputs(mc, batch);
  nn::Tensor noise = mc.noise_dim ? noise_rng_.normal_tensor({batch.size(), mc.noise_dim}) : nn::Tensor();
  const auto out = generator_.forward(gen_bind, inputs, noise);
  StepStats s;
  if (critic_) {
    const nn::Tensor fake = out.pose3d.value();
    double gp = 0.0, loss = 0.0;
    for (std::size_t k = 0; k < config_.n_critic; ++k) loss = critic_step(fake, &gp);
    s.critic = loss;
    s.gp = gp;
  }
  add_to_pool(out.pose3d.value());
  const auto targets = make_targets(batch);
  auto terms = generator_loss(out, targets, critic_.get(), &critic_bind, config_.weights, projection_);
  s.action = terms.action_value;
  s.pose2d = terms.pose2d_value;
  s.adv3d = terms.adv3d_value;
  s.total = terms.total_value;
  if (!std::isfinite(s.total)) {
    throw TrainingError("non-finite generator loss at step " + std::to_string(step_), last_good_);
  }
  tape.backward(loss_scale == 1.0f ? terms.total : nn::scale(terms.total, loss_scale));
  return s;
}

StepStats Trainer::step(std::span<const pose::SequenceSample> batch) {
  if (batch.empty()) throw ContractError("training step: empty batch");
  gen_opt_.zero_grad();
  const std::size_t parts = std::min(config_.accumulate, batch.size());
  const std::size_t size = (batch.size() + parts - 1) / parts;
  StepStats total;
  std::size_t used = 0;
  for (std::size_t begin = 0; begin < batch.size(); begin += size, ++used) {
    const auto micro = batch.subspan(begin, std::min(size, batch.size() - begin));
    const auto s = micro_step(micro, 1.0f / static_cast<float>(parts));
    total.action += s.action;
    total.pose2d += s.pose2d;
    total.total += s.total;
    if (s.adv3d) total.adv3d = total.adv3d.value_or(0.0) + *s.adv3d;
    if (s.critic) total.critic = total.critic.value_or(0.0) + *s.critic;
    if (s.gp) total.gp = total.gp.value_or(0.0) + *s.gp;
  }
  const double k = static_cast<double>(used);
  total.action /= k;
  total.pose2d /= k;
  total.total /= k;
  for (auto* v : {&total.adv3d, &total.critic, &total.gp})
    if (*v) **v /= k;
  try {
    gen_opt_.step();
  } catch (const TrainingError& e) {
    throw TrainingError(std::string(e.what()) + " at step " + std::to_string(step_), last_good_);
  }
  ++step_;
  return total;
}

json Trainer::checkpoint_meta(std::size_t epoch) const {
  return {{"epoch", epoch}, {"step", step_}, {"seed", config_.seed}, {"actions", data_.action_names},
          {"train_config", config_}};
}

void Trainer::save_last(std::size_t epoch) {
  const fs::path gen = out_dir_ / "generator_last.ckpt";
  generator_.save(gen.string(), checkpoint_meta(epoch));
  gen_opt_.save(gen.string() + ".adam");
  if (critic_) {
    const fs::path c = out_dir_ / "critic_last.ckpt";
    critic_->save(c.string(), checkpoint_meta(epoch));
    critic_opt_.save(c.string() + ".adam");
  }
  last_good_ = gen.string();
}

TrainResult Trainer::run() {
  fs::create_directories(out_dir_);
  {
    std::ofstream cfg(out_dir_ / "config.json");
    cfg << json(config_).dump(2) << "\n";
  }
  std::ofstream metrics(out_dir_ / "metrics.jsonl");
  std::ofstream epochs_log(out_dir_ / "epochs.jsonl");
  {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    metrics << json{{"header", true}, {"started", stamp}, {"seed", config_.seed}}.dump() << "\n";
  }
  save_last(0);

  TrainResult result;
  result.last_checkpoint = out_dir_ / "generator_last.ckpt";
  result.best_checkpoint = out_dir_ / "generator_best.ckpt";
  if (critic_) result.critic_checkpoint = out_dir_ / "critic_last.ckpt";
  result.best_val_mpjpe = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(data_.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t chunk = config_.batch * config_.accumulate;
  std::size_t since_best = 0;
  const auto started = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= config_.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng_.index(i)]);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t steps = 0;
    std::vector<pose::SequenceSample> batch;
    for (std::size_t begin = 0; begin < order.size(); begin += chunk) {
      batch.clear();
      for (std::size_t k = begin; k < std::min(order.size(), begin + chunk); ++k) batch.push_back(data_.train[order[k]]);
      const auto s = step(batch);
      ++steps;
      rec.action += s.action;
      rec.pose2d += s.pose2d;
      rec.total += s.total;
      if (s.adv3d) rec.adv3d = rec.adv3d.value_or(0.0) + *s.adv3d;
      if (s.critic) rec.critic = rec.critic.value_or(0.0) + *s.critic;
      metrics << json{{"step", step_},
                      {"epoch", epoch},
                      {"L_action", s.action},
                      {"L_pose2d", s.pose2d},
                      {"L_adv3d", optional_json(s.adv3d)},
                      {"L_critic", optional_json(s.critic)},
                      {"gp", optional_json(s.gp)},
                      {"total", s.total},
                      {"lr", config_.lr}}
                     .dump()
              << "\n";
    }
    const double k = static_cast<double>(steps);
    rec.action /= k;
    rec.pose2d /= k;
    rec.total /= k;
    if (rec.adv3d) *rec.adv3d /= k;
    if (rec.critic) *rec.critic /= k;

    const auto& eval_set = data_.val.empty() ? data_.train : data_.val;
    auto wm = evaluate_windows(generator_, eval_set, data_.layout, projection_);
    rec.val_mpjpe = wm.mpjpe_px;
    rec.val_top1 = wm.top1;
    rec.val_top3 = wm.top3;
    rec.symmetry_mm = wm.symmetry_mm;
    if (critic_) {
      const std::size_t n = std::min<std::size_t>(wm.poses.size(), 512);
      std::vector<std::size_t> real_rows(n), fake_rows(n);
      for (std::size_t i = 0; i < n; ++i) {
        real_rows[i] = i % data_.pose_db.size();
        fake_rows[i] = i;
      }
      nn::Tape tape;
      nn::Binder bind(tape, false);
      auto mean_score = [&](const std::vector<pose::Skeleton3D>& poses, const std::vector<std::size_t>& rows) {
        return static_cast<double>(
            nn::mean_all(critic_->score(bind, tape.constant(stack_poses(poses, rows)))).value().item());
      };
      rec.critic_gap = mean_score(data_.pose_db, real_rows) - mean_score(wm.poses, fake_rows);
    }
    result.epochs.push_back(rec);
    epochs_log << json{{"epoch", epoch},
                       {"L_action", rec.action},
                       {"L_pose2d", rec.pose2d},
                       {"L_adv3d", optional_json(rec.adv3d)},
                       {"L_critic", optional_json(rec.critic)},
                       {"total", rec.total},
                       {"val_mpjpe", rec.val_mpjpe},
                       {"val_top1", rec.val_top1},
                       {"val_top3", rec.val_top3},
                       {"symmetry_mm", rec.symmetry_mm},
                       {"critic_gap", optional_json(rec.critic_gap)}}
                      .dump()
               << "\n";
    epochs_log.flush();
    metrics.flush();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::cerr << "epoch " << epoch << " loss " << rec.total << " val_mpjpe " << rec.val_mpjpe << " top1 "
              << rec.val_top1 << " sym " << rec.symmetry_mm << " (" << static_cast<int>(secs) << " s)\n";

    if (rec.val_mpjpe < result.best_val_mpjpe) {
      result.best_val_mpjpe = rec.val_mpjpe;
      result.best_epoch = epoch;
      since_best = 0;
      generator_.save(result.best_checkpoint.string(), checkpoint_meta(epoch));
    } else {
      ++since_best;
    }
    const bool stop = config_.patience > 0 && since_best >= config_.patience;
    if (stop || epoch == config_.epochs || (config_.checkpoint_every && epoch % config_.checkpoint_every == 0)) {
      save_last(epoch);
    }
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  if (result.best_epoch == 0) generator_.save(result.best_checkpoint.string(), checkpoint_meta(0));
  result.fake_pool = out_dir_ / "fake_pool.p3db";
  data::write_pose_db(result.fake_pool, fake_pool_);
  return result;
}

}  // namespace posecast::train
