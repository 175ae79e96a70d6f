// posecast: synth | train | rollout | eval
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "posecast/data/posedb.hpp"
#include "posecast/data/synth.hpp"
#include "posecast/errors.hpp"
#include "posecast/eval/metrics.hpp"
#include "posecast/eval/quality.hpp"
#include "posecast/rollout/rollout.hpp"
#include "posecast/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace posecast;

namespace {

enum ExitCode { kOk = 0, kInputError = 2, kVersionError = 3, kNumericalAbort = 4 };

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config;
  std::string data_root;
  std::string preset;
  std::vector<std::string> sets;

  std::optional<std::string> root() const { return data_root.empty() ? std::nullopt : std::optional(data_root); }
};

int cmd_synth(const Globals& g, const std::string& spec_path, const std::string& preset, const std::string& out,
              std::size_t sequences) {
  data::GrammarSpec spec = spec_path.empty() ? data::preset_grammar(preset.empty() ? "puppet8" : preset)
                                             : data::load_grammar(spec_path);
  if (sequences) spec.sequences = sequences;
  const auto m = data::generate_puppet_dataset(spec, out, g.seed);
  std::cout << (fs::path(out) / "manifest.json").string() << "\n";
  std::cerr << m.sequences.size() << " sequences (" << m.splits.train.size() << " train, " << m.splits.val.size()
            << " val, " << m.splits.test.size() << " test)\n";
  return kOk;
}

int cmd_train(const Globals& g, const std::string& manifest_path, const std::string& out) {
  const auto manifest = data::load_manifest(manifest_path, g.root());
  std::optional<fs::path> file;
  if (!g.config.empty()) file = g.config;
  std::optional<std::string> preset;
  if (!g.preset.empty()) preset = g.preset;
  auto merged = train::merge_config(file, preset, g.sets);
  auto cfg = merged.get<train::TrainConfig>();
  // the manifest supplies the window and horizon unless the config pins them
  if (!merged.contains("model") || !merged["model"].contains("history")) cfg.model.history = manifest.history;
  if (!merged.contains("rollout_steps")) cfg.rollout_steps = manifest.rollout_steps;
  if (g.seed_set) cfg.seed = g.seed;
  cfg.model.num_actions = manifest.actions.size();
  cfg.model.num_objects = manifest.objects.size();
  cfg.validate();
  auto data = train::load_train_data(manifest, cfg.model.history);
  std::cerr << data.train.size() << " training windows, " << data.val.size() << " validation windows, "
            << data.pose_db.size() << " database poses\n";
  train::Trainer trainer(cfg, std::move(data), out);
  const auto result = trainer.run();
  std::cout << result.best_checkpoint.string() << "\n" << result.last_checkpoint.string() << "\n";
  if (!result.critic_checkpoint.empty()) std::cout << result.critic_checkpoint.string() << "\n";
  std::cout << result.fake_pool.string() << "\n" << (fs::path(out) / "metrics.jsonl").string() << "\n";
  return kOk;
}

struct RolloutArgs {
  std::string checkpoint, manifest, split = "test", out, noise = "resample";
  std::size_t steps = 0;
  bool sample_actions = false;
  float temperature = 1.0f;
  bool ground_truth = false;
};

int cmd_rollout(const Globals& g, const RolloutArgs& a) {
  const auto manifest = data::load_manifest(a.manifest, g.root());
  const auto layout = data::manifest_layout(manifest);
  std::size_t M = a.steps ? a.steps : manifest.rollout_steps;
  if (!a.steps && (!g.config.empty() || !g.preset.empty() || !g.sets.empty())) {
    std::optional<fs::path> file;
    if (!g.config.empty()) file = g.config;
    std::optional<std::string> preset;
    if (!g.preset.empty()) preset = g.preset;
    const auto merged = train::merge_config(file, preset, g.sets);
    if (merged.contains("rollout_steps")) M = merged["rollout_steps"].get<std::size_t>();
  }
  rollout::RolloutFile file;
  file.split = a.split;
  file.steps = M;
  file.action_names = manifest.actions;
  const auto sequences = data::load_split(manifest, a.split);
  if (a.ground_truth) {
    file.history = manifest.history;
    for (const auto& s : sequences)
      for (const auto& t : rollout::rollout_tasks(s, file.history, M))
        file.records.push_back(rollout::ground_truth_record(t, manifest.actions.size()));
  } else {
    auto model = model::Forecaster::load(a.checkpoint);
    const auto& mc = model.config();
    if (mc.num_actions != manifest.actions.size() || mc.num_objects != manifest.objects.size() ||
        mc.joints != layout.size()) {
      throw VersionError("checkpoint " + a.checkpoint + " (" + std::to_string(mc.num_actions) + " actions, " +
                         std::to_string(mc.num_objects) + " objects, " + std::to_string(mc.joints) +
                         " joints) does not match manifest " + manifest.name);
    }
    file.history = mc.history;
    rollout::RolloutOptions opt;
    opt.steps = M;
    opt.noise = rollout::parse_noise_policy(a.noise);
    opt.sample_actions = a.sample_actions;
    opt.temperature = a.temperature;
    nn::Rng rng(g.seed);
    for (const auto& s : sequences)
      for (const auto& t : rollout::rollout_tasks(s, file.history, M))
        file.records.push_back(rollout::rollout(model, t.initial, opt, rng));
  }
  rollout::write_rollouts(a.out, file);
  std::cout << a.out << "\n";
  std::cerr << file.records.size() << " rollouts of " << M << " steps\n";
  return kOk;
}

struct EvalArgs {
  std::string rollouts, manifest, out, curve, fake_pool, real_pool;
  std::size_t quality_pool = 50000;
};

int cmd_eval(const Globals& g, const EvalArgs& a) {
  const auto manifest = data::load_manifest(a.manifest, g.root());
  const auto layout = data::manifest_layout(manifest);
  const auto file = rollout::read_rollouts(a.rollouts);
  if (file.action_names.size() && file.action_names != manifest.actions) {
    throw VersionError("rollouts " + a.rollouts + " use a different action vocabulary than " + manifest.name);
  }
  const auto inputs =
      eval::align(file, data::load_split(manifest, file.split.empty() ? "test" : file.split),
                  data::load_split(manifest, "train"), manifest.actions.size());
  auto report = eval::evaluate(inputs, layout);

  std::vector<pose::Skeleton3D> fakes;
  for (const auto& r : file.records)
    for (const auto& s : r.steps) fakes.push_back(s.pose3d);
  const std::string real_path = a.real_pool.empty() ? (manifest.pose_db.empty() ? "" : manifest.resolve(manifest.pose_db).string())
                                                    : a.real_pool;
  bool has_pose3d = false;
  for (const auto& f : fakes)
    for (const auto& j : f.joints) has_pose3d |= (j[0] != 0.0f || j[1] != 0.0f || j[2] != 0.0f);
  if (!real_path.empty() && has_pose3d) {
    auto real = data::prepare_pose_db(data::read_pose_db(real_path), layout);
    if (real.size() > a.quality_pool) real.resize(a.quality_pool);
    if (fakes.size() > a.quality_pool) fakes.resize(a.quality_pool);
    if (a.fake_pool.empty()) {
      report.quality = eval::quality_metric(real, fakes, g.seed);
    } else {
      auto pool = data::prepare_pose_db(data::read_pose_db(a.fake_pool), layout);
      if (pool.size() > a.quality_pool) pool.resize(a.quality_pool);
      const auto perm = eval::shared_permutation(real.size(), g.seed);
      auto [real_train, real_test] = eval::split_pool(real, perm, 0.8);
      eval::QualityClassifier clf(layout);
      clf.fit(real_train, pool, nn::Rng(g.seed).fork(1).next());
      report.quality = 1.0 - clf.accuracy(real_test, fakes);
    }
  }
  eval::write_report(a.out, report);
  std::cout << a.out << "\n";
  if (!a.curve.empty()) {
    eval::write_accuracy_curve(a.curve, report);
    std::cout << a.curve << "\n";
  }
  std::cerr << "mpjpe " << report.mpjpe_px << " px, top1 " << report.top1 << ", top3 " << report.top3 << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"posecast: forecast actions and 3D characteristic poses from 2D pose histories"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--config", g.config, "training config JSON");
  app.add_option("--data-root", g.data_root, "base directory for relative dataset paths (default: $DATA_ROOT)");
  app.add_option("--preset", g.preset, "config preset: default|synthetic|paper-cooking|paper-assembly");
  app.add_option("--set", g.sets, "config override key=value (repeatable)");

  std::string spec, grammar_preset, synth_out;
  std::size_t sequences = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic puppet dataset");
  synth->add_option("--spec", spec, "grammar spec JSON");
  synth->add_option("--grammar", grammar_preset, "built-in grammar: puppet8|cooking|assembly");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--sequences", sequences, "override the number of sequences");

  std::string manifest, train_out;
  auto* trn = app.add_subcommand("train", "train the forecaster and critic");
  trn->add_option("--manifest", manifest, "dataset manifest")->required();
  trn->add_option("--out", train_out, "output directory")->required();

  RolloutArgs ra;
  auto* roll = app.add_subcommand("rollout", "autoregressive multi-step prediction");
  roll->add_option("--checkpoint", ra.checkpoint, "generator checkpoint");
  roll->add_option("--manifest", ra.manifest, "dataset manifest")->required();
  roll->add_option("--split", ra.split, "train|val|test");
  roll->add_option("--out", ra.out, "rollout JSON")->required();
  roll->add_option("--steps", ra.steps, "M (default: manifest rollout_steps)");
  roll->add_option("--noise", ra.noise, "zero|resample");
  roll->add_flag("--sample-actions", ra.sample_actions, "sample fed-back actions instead of argmax");
  roll->add_option("--temperature", ra.temperature, "sampling temperature");
  roll->add_flag("--ground-truth", ra.ground_truth, "emit the ground truth as predictions");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "score rollouts against the ground truth");
  ev->add_option("--rollouts", ea.rollouts, "rollout JSON")->required();
  ev->add_option("--manifest", ea.manifest, "dataset manifest")->required();
  ev->add_option("--out", ea.out, "report JSON")->required();
  ev->add_option("--curve", ea.curve, "per-step accuracy CSV");
  ev->add_option("--fake-pool", ea.fake_pool, "generated poses for training the quality classifier (P3DB)");
  ev->add_option("--real-pool", ea.real_pool, "real poses (default: the manifest's pose database)");
  ev->add_option("--quality-pool", ea.quality_pool, "maximum poses per pool");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*synth) return cmd_synth(g, spec, grammar_preset, synth_out, sequences);
    if (*trn) return cmd_train(g, manifest, train_out);
    if (*roll) {
      if (!ra.ground_truth && ra.checkpoint.empty()) throw ConfigError("rollout: --checkpoint is required");
      return cmd_rollout(g, ra);
    }
    if (*ev) return cmd_eval(g, ea);
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!e.last_good_checkpoint().empty()) std::cerr << "last good checkpoint: " << e.last_good_checkpoint() << "\n";
    return kNumericalAbort;
  } catch (const VersionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kVersionError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
