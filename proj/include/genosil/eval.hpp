#pragma once

// Closed-loop evaluation: rollouts, Safety Rate / Reach Rate and side-by-side
// method comparison on a shared scenario set.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "genosil/checkpoint.hpp"
#include "genosil/expert.hpp"

namespace genosil {

struct EvalConfig {
  int n_trials = 200;
  ScenarioRanges ranges = ScenarioRanges::defaults(EnvKind::kVehicle);
  std::string preset = "nominal";  // label echoed in reports
  std::uint64_t seed = 0;
  int workers = 1;
  bool record_trajectories = false;

  void validate() const;
  Json to_json() const;
};

// Maps the current state and scenario to an action.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual EnvKind kind() const = 0;
  virtual std::string method() const = 0;
  virtual Vector act(const EnvState& state, const Scenario& scenario) const = 0;
};

class GenosilController : public Controller {
 public:
  explicit GenosilController(GenosilModel model) : model_(std::move(model)) {}
  EnvKind kind() const override { return model_.kind; }
  std::string method() const override { return "genosil"; }
  Vector act(const EnvState& state, const Scenario& scenario) const override;

 private:
  GenosilModel model_;
};

class GcbcController : public Controller {
 public:
  explicit GcbcController(GcbcModel model) : model_(std::move(model)) {}
  EnvKind kind() const override { return model_.kind; }
  std::string method() const override { return "gcbc"; }
  Vector act(const EnvState& state, const Scenario& scenario) const override;

 private:
  GcbcModel model_;
};

// The CBF-QP expert; an infeasible QP still yields its best-effort action.
class ExpertController : public Controller {
 public:
  ExpertController(EnvKind kind, CbfConfig cbf = {}) : kind_(kind), cbf_(cbf) {}
  EnvKind kind() const override { return kind_; }
  std::string method() const override { return "expert"; }
  Vector act(const EnvState& state, const Scenario& scenario) const override;

 private:
  EnvKind kind_;
  CbfConfig cbf_;
};

std::unique_ptr<Controller> make_controller(const Checkpoint& checkpoint);

struct TrialRecord {
  int index = 0;
  std::uint64_t scenario_hash = 0;
  Termination termination = Termination::kRunning;
  int steps = 0;
  double min_clearance = 0.0;
  std::vector<TrajectoryStep> trajectory;  // filled only when recording

  bool collided() const { return termination == Termination::kCollided; }
  bool reached() const { return termination == Termination::kReached; }
  Json to_json() const;
};

// Runs one episode to termination. Throws ValidationError if the controller
// belongs to another environment.
TrialRecord rollout(const Controller& controller, const Scenario& scenario, bool record = false);

// Held-out scenarios: trial i is drawn from its own stream derived from the
// seed, disjoint from the streams used for demonstration generation.
std::vector<Scenario> eval_scenarios(const EvalConfig& config);

// Percentages over non-empty trial lists; throw ValidationError when empty.
double safety_rate(std::span<const TrialRecord> trials);
double reach_rate(std::span<const TrialRecord> trials);

struct EvalReport {
  std::string method;
  EvalConfig config;
  double safety_rate = 0.0;
  double reach_rate = 0.0;
  std::vector<TrialRecord> trials;

  Json to_json() const;
};

EvalReport evaluate(const Controller& controller, const EvalConfig& config);
EvalReport evaluate(const Controller& controller, const EvalConfig& config,
                    const std::vector<Scenario>& scenarios);

struct NamedController {
  std::string name;
  const Controller* controller = nullptr;
};

struct ComparisonReport {
  EvalConfig config;
  std::vector<std::uint64_t> scenario_hashes;
  std::vector<std::string> names;
  std::vector<EvalReport> reports;

  Json to_json() const;
  std::string table() const;
};

// Every method sees the same scenarios (checked by hash).
ComparisonReport compare(const std::vector<NamedController>& methods, const EvalConfig& config);

// One JSONL file per trial: <directory>/<name>_trial_<index>.jsonl.
void export_trajectories(const std::string& directory, const std::string& name,
                         const EvalReport& report);

}  // namespace genosil
