#include "genosil/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <set>

#include "genosil/checkpoint.hpp"
#include "genosil/dataset.hpp"
#include "genosil/error.hpp"
#include "genosil/eval.hpp"
#include "genosil/trainer.hpp"

namespace genosil {

namespace {

namespace fs = std::filesystem;

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  if (!in) throw ValidationError("config file '" + path + "' not found");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception&) {
    throw ValidationError("config file '" + path + "' is not valid JSON");
  }
  if (!j.is_object()) throw ValidationError("config file must hold a JSON object");
  if (!j.contains("schema_version") || j.at("schema_version") != kCliSchemaVersion) {
    throw ValidationError("config file needs \"schema_version\": " + std::to_string(kCliSchemaVersion));
  }
  return j;
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& command) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ValidationError(command + " config: unknown key '" + key + "'");
  }
}

// Copies a flag value into the merged config when the flag was given.
template <typename T>
void override_with(Json& j, const std::string& key, const CLI::Option* opt, const T& value) {
  if (opt->count() > 0) j[key] = value;
}

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

// ---------------------------------------------------------------- generate

struct GenerateFlags {
  std::string config, env, out, preset;
  int n_demos = 0;
  std::uint64_t seed = 0;
  int workers = 1;
  CLI::Option *env_opt, *out_opt, *preset_opt, *n_opt, *seed_opt, *workers_opt;
};

int cmd_generate(const GenerateFlags& f, std::ostream& out) {
  Json j = load_config(f.config);
  override_with(j, "env", f.env_opt, f.env);
  override_with(j, "out", f.out_opt, f.out);
  override_with(j, "preset", f.preset_opt, f.preset);
  override_with(j, "n_demos", f.n_opt, f.n_demos);
  override_with(j, "seed", f.seed_opt, f.seed);
  override_with(j, "workers", f.workers_opt, f.workers);
  check_keys(j,
             {"schema_version", "env", "out", "preset", "n_demos", "seed", "workers", "ranges", "cbf",
              "probe_batch", "min_acceptance"},
             "generate");

  const EnvKind kind = env_kind_from_string(get_or<std::string>(j, "env", "vehicle"));
  const auto preset = get_or<std::string>(j, "preset", "nominal");
  GenerateConfig cfg;
  cfg.ranges = ScenarioRanges::preset(kind, preset);
  if (j.contains("ranges")) cfg.ranges = ranges_from_json(j.at("ranges"), cfg.ranges);
  if (j.contains("cbf")) cfg.cbf = cbf_from_json(j.at("cbf"), cfg.cbf);
  cfg.n_demos = get_or(j, "n_demos", cfg.n_demos);
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.workers = get_or(j, "workers", cfg.workers);
  cfg.probe_batch = get_or(j, "probe_batch", cfg.probe_batch);
  cfg.min_acceptance = get_or(j, "min_acceptance", cfg.min_acceptance);
  const auto dir = get_or<std::string>(j, "out", "");
  require(!dir.empty(), "generate needs an output directory (--out)");
  cfg.validate();

  const GeneratedDataset generated = generate_dataset(cfg);
  write_dataset(dir, generated);
  out << "kept " << generated.demos.size() << " of " << generated.attempted << " attempted ("
      << generated.discarded.collided << " collided, " << generated.discarded.timeout << " timed out, "
      << generated.discarded.infeasible << " infeasible) -> " << dir << '\n';
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainFlags {
  std::string config, dataset, method, out, log;
  std::uint64_t seed = 0;
  int epochs = 0, batch_size = 0, log_interval = 0, workers = 1;
  double lr = 0, beta_max = 0, gamma_max = 0;
  long long anneal_steps = 0;
  Eigen::Index latent_width = 0;
  CLI::Option *dataset_opt, *method_opt, *out_opt, *log_opt, *seed_opt, *epochs_opt, *batch_opt,
      *log_interval_opt, *workers_opt, *lr_opt, *beta_opt, *gamma_opt, *anneal_opt, *latent_opt;
};

int cmd_train(const TrainFlags& f, std::ostream& out) {
  Json j = load_config(f.config);
  override_with(j, "dataset_path", f.dataset_opt, f.dataset);
  override_with(j, "method", f.method_opt, f.method);
  override_with(j, "checkpoint_path", f.out_opt, f.out);
  override_with(j, "log_path", f.log_opt, f.log);
  override_with(j, "seed", f.seed_opt, f.seed);
  override_with(j, "epochs", f.epochs_opt, f.epochs);
  override_with(j, "batch_size", f.batch_opt, f.batch_size);
  override_with(j, "log_interval", f.log_interval_opt, f.log_interval);
  override_with(j, "workers", f.workers_opt, f.workers);
  override_with(j, "learning_rate", f.lr_opt, f.lr);
  override_with(j, "beta_max", f.beta_opt, f.beta_max);
  override_with(j, "gamma_max", f.gamma_opt, f.gamma_max);
  override_with(j, "anneal_steps", f.anneal_opt, f.anneal_steps);
  override_with(j, "latent_width", f.latent_opt, f.latent_width);

  const auto method = get_or<std::string>(j, "method", "genosil");
  require(method == "genosil" || method == "gcbc", "method must be genosil or gcbc");
  require(get_or(j, "workers", 1) >= 1, "workers must be >= 1");
  Json train_keys = j;
  for (const char* key : {"schema_version", "method", "workers"}) train_keys.erase(key);
  TrainConfig cfg = TrainConfig::from_json(train_keys);
  require(!cfg.dataset_path.empty(), "train needs a dataset directory (--dataset)");
  require(!cfg.checkpoint_path.empty(), "train needs a checkpoint path (--out)");
  if (cfg.log_path.empty()) cfg.log_path = cfg.checkpoint_path + ".log.jsonl";
  cfg.validate();

  const Dataset dataset = read_dataset(cfg.dataset_path);
  const auto log_parent = fs::path(cfg.log_path).parent_path();
  if (!log_parent.empty()) fs::create_directories(log_parent);

  const TrainReport report =
      method == "genosil" ? train(dataset, cfg).report : train_gcbc(dataset, cfg).report;
  const auto& last = report.epochs.back();
  out << method << ": " << report.total_steps << " steps over " << report.epochs.size()
      << " epochs; final epoch L_total " << last.total << ", L_imitation " << last.imitation
      << ", L_KL " << last.kl << ", L_recon " << last.reconstruction << '\n'
      << "checkpoint -> " << cfg.checkpoint_path << "\nlog -> " << cfg.log_path << '\n';
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalFlags {
  std::string config, env, preset, out, table_out, export_dir;
  std::vector<std::string> checkpoints;
  bool expert = false;
  int n_trials = 0, workers = 1;
  std::uint64_t seed = 0;
  CLI::Option *env_opt, *preset_opt, *out_opt, *table_opt, *export_opt, *checkpoint_opt, *expert_opt,
      *n_opt, *workers_opt, *seed_opt;
};

struct LoadedMethod {
  std::string name;
  std::unique_ptr<Controller> controller;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  Json j = load_config(f.config);
  override_with(j, "env", f.env_opt, f.env);
  override_with(j, "preset", f.preset_opt, f.preset);
  override_with(j, "out", f.out_opt, f.out);
  override_with(j, "table_out", f.table_opt, f.table_out);
  override_with(j, "export_trajectories", f.export_opt, f.export_dir);
  override_with(j, "checkpoints", f.checkpoint_opt, f.checkpoints);
  override_with(j, "expert", f.expert_opt, f.expert);
  override_with(j, "n_trials", f.n_opt, f.n_trials);
  override_with(j, "workers", f.workers_opt, f.workers);
  override_with(j, "seed", f.seed_opt, f.seed);
  check_keys(j,
             {"schema_version", "env", "preset", "out", "table_out", "export_trajectories",
              "checkpoints", "expert", "n_trials", "workers", "seed", "ranges", "cbf"},
             "eval");

  const auto specs = get_or<std::vector<std::string>>(j, "checkpoints", {});
  const bool with_expert = get_or(j, "expert", false);
  require(!specs.empty() || with_expert, "eval needs at least one --checkpoint or --expert");

  const std::regex name_pattern("[A-Za-z0-9_.-]+");
  std::vector<LoadedMethod> methods;
  std::set<std::string> names;
  std::optional<EnvKind> kind;
  if (j.contains("env")) kind = env_kind_from_string(j.at("env").get<std::string>());
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    const Checkpoint checkpoint = load_checkpoint(path);
    std::string name = eq == std::string::npos ? checkpoint.method() : spec.substr(0, eq);
    require(std::regex_match(name, name_pattern), "method name '" + name + "' must match [A-Za-z0-9_.-]+");
    if (names.count(name)) {
      int k = 2;
      while (names.count(name + "_" + std::to_string(k))) ++k;
      name += "_" + std::to_string(k);
    }
    if (!kind) kind = checkpoint.env();
    if (checkpoint.env() != *kind) {
      throw ValidationError("checkpoint '" + path + "' is for the " + std::string(to_string(checkpoint.env())) +
                            " environment, expected " + std::string(to_string(*kind)));
    }
    names.insert(name);
    methods.push_back({name, make_controller(checkpoint)});
  }
  if (!kind) kind = EnvKind::kVehicle;

  CbfConfig cbf;
  if (j.contains("cbf")) cbf = cbf_from_json(j.at("cbf"), cbf);
  if (with_expert) {
    require(!names.count("expert"), "method name 'expert' is reserved for --expert");
    methods.push_back({"expert", std::make_unique<ExpertController>(*kind, cbf)});
  }

  EvalConfig cfg;
  cfg.preset = get_or<std::string>(j, "preset", "nominal");
  cfg.ranges = ScenarioRanges::preset(*kind, cfg.preset);
  if (j.contains("ranges")) cfg.ranges = ranges_from_json(j.at("ranges"), cfg.ranges);
  cfg.n_trials = get_or(j, "n_trials", cfg.n_trials);
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.workers = get_or(j, "workers", cfg.workers);
  const auto export_dir = get_or<std::string>(j, "export_trajectories", "");
  cfg.record_trajectories = !export_dir.empty();
  cfg.validate();

  std::vector<NamedController> named;
  for (const auto& m : methods) named.push_back({m.name, m.controller.get()});
  const ComparisonReport report = compare(named, cfg);

  Json doc{{"format", "genosil-eval-report"}, {"schema_version", kCliSchemaVersion}};
  doc.update(report.to_json());
  if (const auto path = get_or<std::string>(j, "out", ""); !path.empty()) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream file(path);
    if (!file) throw ValidationError("cannot write report '" + path + "'");
    file << doc.dump(2) << '\n';
  }
  const std::string table = report.table();
  if (const auto path = get_or<std::string>(j, "table_out", ""); !path.empty()) {
    std::ofstream file(path);
    if (!file) throw ValidationError("cannot write table '" + path + "'");
    file << table;
  }
  if (!export_dir.empty()) {
    for (std::size_t k = 0; k < report.reports.size(); ++k) {
      export_trajectories(export_dir, report.names[k], report.reports[k]);
    }
  }
  out << "env " << to_string(*kind) << ", preset " << cfg.preset << ", " << cfg.n_trials
      << " trials, seed " << cfg.seed << '\n'
      << table;
  return 0;
}

// ----------------------------------------------------------------- inspect

std::string describe(const nn::DenseNet& net) {
  std::string s;
  const auto widths = net.widths();
  for (std::size_t k = 0; k < widths.size(); ++k) {
    if (k) s += " -> ";
    s += std::to_string(widths[k]);
  }
  s += " (";
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    if (k) s += ", ";
    s += nn::to_string(net.layers()[k].activation);
  }
  return s + ")";
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  const Checkpoint checkpoint = load_checkpoint(path);
  out << "checkpoint: " << path << "\nmethod: " << checkpoint.method()
      << "\nenv: " << to_string(checkpoint.env()) << '\n';
  if (const auto* g = std::get_if<GenosilModel>(&checkpoint.model)) {
    out << "latent width (d_z): " << g->latent.latent_width() << "\nnetworks:\n"
        << "  encoder_trunk: " << describe(g->latent.trunk()) << '\n'
        << "  mu_head:       " << describe(g->latent.mu_head()) << '\n'
        << "  logvar_head:   " << describe(g->latent.logvar_head()) << '\n'
        << "  decoder:       " << describe(g->latent.decoder()) << '\n'
        << "  policy:        " << describe(g->policy.net) << '\n'
        << "parameters: " << g->parameter_count() << '\n';
  } else {
    const auto& b = std::get<GcbcModel>(checkpoint.model);
    out << "networks:\n  policy: " << describe(b.policy.net) << "\nparameters: " << b.parameter_count()
        << '\n';
  }
  out << "train_config: " << checkpoint.train_config.dump(2) << '\n'
      << "training_summary: " << checkpoint.training_summary.dump(2) << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Safety-conditioned imitation learning: data generation, training and evaluation"};
  app.require_subcommand(1);

  GenerateFlags gen;
  auto* g = app.add_subcommand("generate", "Roll out the CBF-QP expert and write a demonstration dataset");
  g->add_option("--config", gen.config, "JSON config file");
  gen.env_opt = g->add_option("--env", gen.env, "vehicle | manipulator");
  gen.n_opt = g->add_option("-n,--n,--n-demos", gen.n_demos, "Number of kept demonstrations");
  gen.seed_opt = g->add_option("--seed", gen.seed, "Master seed");
  gen.out_opt = g->add_option("-o,--out", gen.out, "Output directory");
  gen.preset_opt = g->add_option("--preset", gen.preset, "Scenario range preset");
  gen.workers_opt = g->add_option("--workers", gen.workers, "Worker threads");

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "Train a GenOSIL or GC-BC policy on a dataset");
  t->add_option("--config", tr.config, "JSON config file");
  tr.dataset_opt = t->add_option("--dataset", tr.dataset, "Dataset directory");
  tr.method_opt = t->add_option("--method", tr.method, "genosil | gcbc");
  tr.out_opt = t->add_option("-o,--out", tr.out, "Checkpoint path");
  tr.log_opt = t->add_option("--log", tr.log, "Training log (JSONL)");
  tr.seed_opt = t->add_option("--seed", tr.seed, "Seed");
  tr.epochs_opt = t->add_option("--epochs", tr.epochs, "Epochs");
  tr.batch_opt = t->add_option("--batch-size", tr.batch_size, "Minibatch size");
  tr.log_interval_opt = t->add_option("--log-interval", tr.log_interval, "Steps between log records");
  tr.workers_opt = t->add_option("--workers", tr.workers, "Accepted for symmetry; training is single-threaded");
  tr.lr_opt = t->add_option("--lr,--learning-rate", tr.lr, "Adam learning rate");
  tr.beta_opt = t->add_option("--beta-max", tr.beta_max, "KL weight after annealing");
  tr.gamma_opt = t->add_option("--gamma-max", tr.gamma_max, "Reconstruction weight after annealing");
  tr.anneal_opt = t->add_option("--anneal-steps", tr.anneal_steps, "Annealing length in minibatch steps");
  tr.latent_opt = t->add_option("--latent-width", tr.latent_width, "Latent width (0 = env default)");

  EvalFlags ev;
  auto* e = app.add_subcommand("eval", "Evaluate checkpoints (and optionally the expert) on shared scenarios");
  e->add_option("--config", ev.config, "JSON config file");
  ev.checkpoint_opt = e->add_option("-c,--checkpoint", ev.checkpoints, "Checkpoint as PATH or NAME=PATH (repeatable)");
  ev.expert_opt = e->add_flag("--expert", ev.expert, "Include the CBF-QP expert");
  ev.env_opt = e->add_option("--env", ev.env, "vehicle | manipulator (default: from the checkpoints)");
  ev.preset_opt = e->add_option("--preset", ev.preset, "Scenario range preset");
  ev.n_opt = e->add_option("--n-trials", ev.n_trials, "Number of test scenarios");
  ev.seed_opt = e->add_option("--seed", ev.seed, "Scenario seed");
  ev.workers_opt = e->add_option("--workers", ev.workers, "Worker threads");
  ev.out_opt = e->add_option("-o,--out", ev.out, "Report JSON path");
  ev.table_opt = e->add_option("--table-out", ev.table_out, "Plain-text table path");
  ev.export_opt = e->add_option("--export-trajectories", ev.export_dir, "Directory for per-trial JSONL trajectories");

  std::string inspect_path;
  auto* i = app.add_subcommand("inspect", "Print a checkpoint summary");
  i->add_option("checkpoint", inspect_path, "Checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err) == 0 ? 0 : 1;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (e->parsed()) return cmd_eval(ev, out);
    return cmd_inspect(inspect_path, out);
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  } catch (const Json::exception& ex) {
    err << "error: invalid config value: " << ex.what() << '\n';
    return 1;
  } catch (const NumericalError& ex) {
    err << "numerical failure: " << ex.what() << '\n';
    return 2;
  } catch (const InfeasibleError& ex) {
    err << "generation failed: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    err << "failure: " << ex.what() << '\n';
    return 2;
  }
}

}  // namespace genosil
