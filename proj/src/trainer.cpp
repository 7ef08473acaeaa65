#include "genosil/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>

#include "genosil/error.hpp"

namespace genosil {

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning rate must be > 0");
  require(beta_max >= 0.0 && std::isfinite(beta_max), "beta_max must be >= 0");
  require(gamma_max >= 0.0 && std::isfinite(gamma_max), "gamma_max must be >= 0");
  require(anneal_steps >= 1, "anneal_steps must be >= 1");
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch size must be >= 1");
  require(latent_width >= 0, "latent width must be >= 0 (0 selects the default)");
  require(log_interval >= 1, "log interval must be >= 1");
  require(!encoder_hidden.empty() && !policy_hidden.empty(), "hidden layer lists must be non-empty");
  for (auto w : encoder_hidden) require(w > 0, "hidden widths must be positive");
  for (auto w : policy_hidden) require(w > 0, "hidden widths must be positive");
}

Json TrainConfig::to_json() const {
  return Json{{"learning_rate", learning_rate}, {"beta_max", beta_max},
              {"gamma_max", gamma_max},         {"anneal_steps", anneal_steps},
              {"epochs", epochs},               {"batch_size", batch_size},
              {"seed", seed},                   {"latent_width", latent_width},
              {"encoder_hidden", encoder_hidden}, {"policy_hidden", policy_hidden},
              {"dataset_path", dataset_path},   {"checkpoint_path", checkpoint_path},
              {"log_path", log_path},           {"log_interval", log_interval}};
}

TrainConfig TrainConfig::from_json(const Json& j, TrainConfig base) {
  if (!j.is_object()) throw ValidationError("train config must be a JSON object");
  try {
    using Setter = std::function<void(const Json&)>;
    auto number = [](double& field) -> Setter {
      return [&field](const Json& v) {
        if (!v.is_number()) throw ValidationError("expected a number");
        field = v.get<double>();
      };
    };
    auto text = [](std::string& field) -> Setter {
      return [&field](const Json& v) { field = v.get<std::string>(); };
    };
    auto widths = [](std::vector<Eigen::Index>& field) -> Setter {
      return [&field](const Json& v) { field = v.get<std::vector<Eigen::Index>>(); };
    };
    const std::map<std::string, Setter> setters{
        {"learning_rate", number(base.learning_rate)},
        {"beta_max", number(base.beta_max)},
        {"gamma_max", number(base.gamma_max)},
        {"anneal_steps", [&](const Json& v) { base.anneal_steps = v.get<long long>(); }},
        {"epochs", [&](const Json& v) { base.epochs = v.get<int>(); }},
        {"batch_size", [&](const Json& v) { base.batch_size = v.get<int>(); }},
        {"seed", [&](const Json& v) { base.seed = v.get<std::uint64_t>(); }},
        {"latent_width", [&](const Json& v) { base.latent_width = v.get<Eigen::Index>(); }},
        {"encoder_hidden", widths(base.encoder_hidden)},
        {"policy_hidden", widths(base.policy_hidden)},
        {"dataset_path", text(base.dataset_path)},
        {"checkpoint_path", text(base.checkpoint_path)},
        {"log_path", text(base.log_path)},
        {"log_interval", [&](const Json& v) { base.log_interval = v.get<int>(); }},
    };
    for (const auto& [key, value] : j.items()) {
      const auto it = setters.find(key);
      if (it == setters.end()) throw ValidationError("train config: unknown key '" + key + "'");
      it->second(value);
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  return base;
}

TrainConfig TrainConfig::from_json(const Json& j) { return from_json(j, TrainConfig{}); }

double anneal_factor(long long t, double max_value, long long anneal_steps) {
  require(t >= 0, "anneal step must be >= 0");
  require(anneal_steps >= 1, "anneal_steps must be >= 1");
  return max_value * std::min(1.0, static_cast<double>(t) / static_cast<double>(anneal_steps));
}

double total_loss(double imitation, double kl, double reconstruction, double beta, double gamma) {
  return imitation + beta * kl + gamma * reconstruction;
}

Json StepRecord::to_json() const {
  return Json{{"step", step},       {"L_imitation", imitation}, {"L_KL", kl},
              {"L_recon", reconstruction}, {"beta_t", beta},    {"gamma_t", gamma},
              {"L_total", total}};
}

Json TrainReport::summary() const {
  Json j{{"total_steps", total_steps}, {"epochs", epochs.size()}};
  if (!epochs.empty()) {
    const auto& last = epochs.back();
    j["final_epoch"] = Json{{"L_total", last.total},         {"L_imitation", last.imitation},
                            {"L_KL", last.kl},               {"L_recon", last.reconstruction},
                            {"beta_t", last.beta},           {"gamma_t", last.gamma}};
  }
  return j;
}

bool same_trajectory(const TrainReport& a, const TrainReport& b) {
  if (a.total_steps != b.total_steps || a.epochs.size() != b.epochs.size() ||
      a.steps.size() != b.steps.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    const auto& x = a.epochs[i];
    const auto& y = b.epochs[i];
    if (x.total != y.total || x.imitation != y.imitation || x.kl != y.kl ||
        x.reconstruction != y.reconstruction || x.beta != y.beta || x.gamma != y.gamma) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto& x = a.steps[i];
    const auto& y = b.steps[i];
    if (x.step != y.step || x.total != y.total || x.imitation != y.imitation || x.kl != y.kl ||
        x.reconstruction != y.reconstruction || x.beta != y.beta || x.gamma != y.gamma) {
      return false;
    }
  }
  return true;
}

namespace {

void check_dataset(const Dataset& dataset) {
  require(dataset.size() > 0, "cannot train on an empty dataset");
  const auto d = dims(dataset.kind);
  require(dataset.states.rows() == d.state && dataset.safety_params.rows() == d.safety &&
              dataset.actions.rows() == d.action,
          "dataset widths do not match its environment");
  require(dataset.safety_params.cols() == dataset.size() && dataset.actions.cols() == dataset.size(),
          "dataset columns disagree");
  require(dataset.ranges.kind == dataset.kind, "dataset ranges belong to another environment");
}

Batch gather(const Dataset& dataset, std::span<const Eigen::Index> indices) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  Batch batch{Matrix(dataset.states.rows(), n), Matrix(dataset.safety_params.rows(), n),
              Matrix(dataset.actions.rows(), n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    batch.states.col(k) = dataset.states.col(indices[k]);
    batch.safety_params.col(k) = dataset.safety_params.col(indices[k]);
    batch.actions.col(k) = dataset.actions.col(indices[k]);
  }
  return batch;
}

// Shared minibatch loop. `step_loss` evaluates the loss at the model's current
// parameters for one batch and writes the flat gradient.
template <typename Model, typename StepLoss>
TrainReport run_training(Model& model, const Dataset& dataset, const TrainConfig& config,
                         bool annealed, StepLoss step_loss, const std::function<void(const Model&)>& on_failure) {
  const auto n = dataset.size();
  Vector params(static_cast<Eigen::Index>(model.parameter_count()));
  model.copy_parameters(std::span<double>(params.data(), params.size()));
  Vector last_good = params;
  Vector gradient(params.size());
  nn::AdamState adam(params.size(), config.learning_rate);

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng shuffle_rng(derive_seed(config.seed, 1));
  Rng noise_rng(derive_seed(config.seed, 2));

  std::optional<std::ofstream> log;
  if (!config.log_path.empty()) {
    log.emplace(config.log_path);
    if (!*log) throw ValidationError("cannot open training log '" + config.log_path + "'");
  }

  auto fail = [&](const std::string& why) {
    model.assign_parameters(std::span<const double>(last_good.data(), last_good.size()));
    on_failure(model);
    throw NumericalError(why);
  };

  TrainReport report;
  long long t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord record;
    record.epoch = epoch;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const auto count = std::min<Eigen::Index>(config.batch_size, n - start);
      const Batch batch = gather(dataset, std::span(order).subspan(start, count));
      const double beta = annealed ? anneal_factor(t, config.beta_max, config.anneal_steps) : 0.0;
      const double gamma = annealed ? anneal_factor(t, config.gamma_max, config.anneal_steps) : 0.0;

      LossBreakdown loss;
      try {
        loss = step_loss(model, batch, beta, gamma, std::span<double>(gradient.data(), gradient.size()),
                         noise_rng);
      } catch (const NumericalError& e) {
        fail(std::string(e.what()) + " at step " + std::to_string(t));
      }
      if (!std::isfinite(loss.total)) fail("non-finite loss at step " + std::to_string(t));
      last_good = params;
      try {
        nn::adam_step(params, gradient, adam);
      } catch (const NumericalError& e) {
        fail(e.what());
      }
      model.assign_parameters(std::span<const double>(params.data(), params.size()));

      const double weight = static_cast<double>(count) / static_cast<double>(n);
      record.total += weight * loss.total;
      record.imitation += weight * loss.imitation;
      record.kl += weight * loss.kl;
      record.reconstruction += weight * loss.reconstruction;
      record.beta = beta;
      record.gamma = gamma;

      if (t % config.log_interval == 0) {
        StepRecord step{t, loss.imitation, loss.kl, loss.reconstruction, beta, gamma, loss.total};
        if (log) *log << step.to_json().dump() << '\n';
        report.steps.push_back(step);
      }
      ++t;
    }
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.epochs.push_back(record);
  }
  report.total_steps = t;
  return report;
}

}  // namespace

GenosilTrainResult train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  check_dataset(dataset);
  Rng init_rng(derive_seed(config.seed, 0));
  const Eigen::Index latent_width =
      config.latent_width > 0 ? config.latent_width : default_latent_width(dataset.kind);
  GenosilTrainResult result;
  result.model = GenosilModel::create(dataset.kind, dataset.ranges, latent_width,
                                      config.encoder_hidden, config.policy_hidden, init_rng);

  auto step_loss = [latent_width](const GenosilModel& model, const Batch& batch, double beta,
                                  double gamma, std::span<double> gradient, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix noise(latent_width, batch.states.cols());
    for (Eigen::Index j = 0; j < noise.cols(); ++j) {
      for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = normal(rng);
    }
    return genosil_loss(model, batch, noise, beta, gamma, gradient);
  };
  auto on_failure = [&config](const GenosilModel& model) {
    if (config.checkpoint_path.empty()) return;
    save_checkpoint(config.checkpoint_path, Checkpoint{model, config.to_json(), Json{{"aborted", true}}});
  };
  result.report = run_training<GenosilModel>(result.model, dataset, config, true, step_loss, on_failure);
  if (!config.checkpoint_path.empty()) save_checkpoint(config.checkpoint_path, make_checkpoint(result, config));
  return result;
}

GcbcTrainResult train_gcbc(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  check_dataset(dataset);
  Rng init_rng(derive_seed(config.seed, 0));
  GcbcTrainResult result;
  result.model = GcbcModel::create(dataset.kind, dataset.ranges, config.policy_hidden, init_rng);

  auto step_loss = [](const GcbcModel& model, const Batch& batch, double, double,
                      std::span<double> gradient, Rng&) { return gcbc_loss(model, batch, gradient); };
  auto on_failure = [&config](const GcbcModel& model) {
    if (config.checkpoint_path.empty()) return;
    save_checkpoint(config.checkpoint_path, Checkpoint{model, config.to_json(), Json{{"aborted", true}}});
  };
  result.report = run_training<GcbcModel>(result.model, dataset, config, false, step_loss, on_failure);
  if (!config.checkpoint_path.empty()) save_checkpoint(config.checkpoint_path, make_checkpoint(result, config));
  return result;
}

Checkpoint make_checkpoint(const GenosilTrainResult& result, const TrainConfig& config) {
  return Checkpoint{result.model, config.to_json(), result.report.summary()};
}

Checkpoint make_checkpoint(const GcbcTrainResult& result, const TrainConfig& config) {
  return Checkpoint{result.model, config.to_json(), result.report.summary()};
}

}  // namespace genosil
