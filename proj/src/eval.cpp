#include "genosil/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "genosil/dataset.hpp"
#include "genosil/error.hpp"
#include "genosil/parallel.hpp"

namespace genosil {

namespace {

// Salt separating evaluation scenario streams from generation streams.
constexpr std::uint64_t kEvalStream = 0x6576616c2d736574ULL;

}  // namespace

void EvalConfig::validate() const {
  require(n_trials >= 1, "n_trials must be >= 1");
  require(workers >= 1, "workers must be >= 1");
  ranges.validate();
}

Json EvalConfig::to_json() const {
  return Json{{"n_trials", n_trials}, {"preset", preset},   {"seed", seed},
              {"env", std::string(genosil::to_string(ranges.kind))},
              {"ranges", ranges_to_json(ranges)}};
}

Vector GenosilController::act(const EnvState& state, const Scenario& scenario) const {
  return model_.act(state.agent, current_safety_params(state, scenario));
}

Vector GcbcController::act(const EnvState& state, const Scenario& scenario) const {
  return model_.act(state.agent, scenario.goal);
}

Vector ExpertController::act(const EnvState& state, const Scenario& scenario) const {
  return expert_action(state, scenario, cbf_).action;
}

std::unique_ptr<Controller> make_controller(const Checkpoint& checkpoint) {
  if (const auto* g = std::get_if<GenosilModel>(&checkpoint.model)) {
    return std::make_unique<GenosilController>(*g);
  }
  return std::make_unique<GcbcController>(std::get<GcbcModel>(checkpoint.model));
}

Json TrialRecord::to_json() const {
  return Json{{"index", index},
              {"scenario_hash", scenario_hash},
              {"termination", std::string(genosil::to_string(termination))},
              {"steps", steps},
              {"min_clearance", min_clearance}};
}

TrialRecord rollout(const Controller& controller, const Scenario& scenario, bool record) {
  if (controller.kind() != scenario.kind) {
    throw ValidationError("controller is for the " + std::string(to_string(controller.kind())) +
                          " environment but the scenario is " + std::string(to_string(scenario.kind)));
  }
  TrialRecord trial;
  trial.scenario_hash = scenario_hash(scenario);
  EnvState state = reset(scenario);
  trial.min_clearance = clearance(state, scenario);
  while (!state.terminal()) {
    const Vector action = controller.act(state, scenario);
    if (record) {
      trial.trajectory.push_back({state.elapsed, state.agent, state.obstacle_position, action,
                                  current_safety_params(state, scenario), state.termination});
    }
    state = step(state, action, scenario);
    trial.min_clearance = std::min(trial.min_clearance, clearance(state, scenario));
  }
  if (record) {
    trial.trajectory.push_back({state.elapsed, state.agent, state.obstacle_position, Vector(),
                                current_safety_params(state, scenario), state.termination});
  }
  trial.termination = state.termination;
  trial.steps = state.elapsed;
  return trial;
}

std::vector<Scenario> eval_scenarios(const EvalConfig& config) {
  config.validate();
  std::vector<Scenario> scenarios;
  scenarios.reserve(static_cast<std::size_t>(config.n_trials));
  const std::uint64_t stream = derive_seed(config.seed, kEvalStream);
  for (int i = 0; i < config.n_trials; ++i) {
    Rng rng(derive_seed(stream, static_cast<std::uint64_t>(i)));
    scenarios.push_back(sample_scenario(rng, config.ranges));
  }
  return scenarios;
}

double safety_rate(std::span<const TrialRecord> trials) {
  require(!trials.empty(), "safety rate needs at least one trial");
  const auto safe = std::count_if(trials.begin(), trials.end(), [](const auto& t) { return !t.collided(); });
  return 100.0 * static_cast<double>(safe) / static_cast<double>(trials.size());
}

double reach_rate(std::span<const TrialRecord> trials) {
  require(!trials.empty(), "reach rate needs at least one trial");
  const auto reached = std::count_if(trials.begin(), trials.end(),
                                     [](const auto& t) { return t.reached() && !t.collided(); });
  return 100.0 * static_cast<double>(reached) / static_cast<double>(trials.size());
}

Json EvalReport::to_json() const {
  Json trial_list = Json::array();
  for (const auto& t : trials) trial_list.push_back(t.to_json());
  return Json{{"method", method},
              {"safety_rate", safety_rate},
              {"reach_rate", reach_rate},
              {"n_trials", trials.size()},
              {"config", config.to_json()},
              {"trials", trial_list}};
}

EvalReport evaluate(const Controller& controller, const EvalConfig& config) {
  return evaluate(controller, config, eval_scenarios(config));
}

EvalReport evaluate(const Controller& controller, const EvalConfig& config,
                    const std::vector<Scenario>& scenarios) {
  config.validate();
  require(!scenarios.empty(), "evaluation needs at least one scenario");
  EvalReport report;
  report.method = controller.method();
  report.config = config;
  report.trials.resize(scenarios.size());
  parallel_for(scenarios.size(), static_cast<std::size_t>(config.workers), [&](std::size_t i) {
    report.trials[i] = rollout(controller, scenarios[i], config.record_trajectories);
    report.trials[i].index = static_cast<int>(i);
  });
  report.safety_rate = genosil::safety_rate(report.trials);
  report.reach_rate = genosil::reach_rate(report.trials);
  return report;
}

Json ComparisonReport::to_json() const {
  Json rows = Json::array();
  for (std::size_t k = 0; k < reports.size(); ++k) {
    Json row = reports[k].to_json();
    row["name"] = names[k];
    rows.push_back(std::move(row));
  }
  return Json{{"config", config.to_json()}, {"scenario_hashes", scenario_hashes}, {"methods", rows}};
}

std::string ComparisonReport::table() const {
  std::size_t width = 6;
  for (const auto& n : names) width = std::max(width, n.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %11s  %10s\n", static_cast<int>(width), "method", "safety_rate",
                "reach_rate");
  out += line;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    std::snprintf(line, sizeof line, "%-*s  %10.1f%%  %9.1f%%\n", static_cast<int>(width),
                  names[k].c_str(), reports[k].safety_rate, reports[k].reach_rate);
    out += line;
  }
  return out;
}

ComparisonReport compare(const std::vector<NamedController>& methods, const EvalConfig& config) {
  require(!methods.empty(), "compare needs at least one method");
  for (const auto& m : methods) {
    require(m.controller != nullptr, "method '" + m.name + "' has no controller");
    require(m.controller->kind() == config.ranges.kind,
            "method '" + m.name + "' was trained for a different environment");
  }
  const auto scenarios = eval_scenarios(config);
  ComparisonReport out;
  out.config = config;
  for (const auto& s : scenarios) out.scenario_hashes.push_back(scenario_hash(s));
  for (const auto& m : methods) {
    EvalReport report = evaluate(*m.controller, config, scenarios);
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      if (report.trials[i].scenario_hash != out.scenario_hashes[i]) {
        throw NumericalError("scenario set drifted between methods");
      }
    }
    out.names.push_back(m.name);
    out.reports.push_back(std::move(report));
  }
  return out;
}

void export_trajectories(const std::string& directory, const std::string& name,
                         const EvalReport& report) {
  std::filesystem::create_directories(directory);
  for (const auto& trial : report.trials) {
    require(!trial.trajectory.empty(), "trajectories were not recorded for this report");
    const auto path = std::filesystem::path(directory) /
                      (name + "_trial_" + std::to_string(trial.index) + ".jsonl");
    write_trajectory_jsonl(path.string(), trial.trajectory);
  }
}

}  // namespace genosil
