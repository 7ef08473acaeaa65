#pragma once

// Simulated tasks: a unicycle ground vehicle in the plane and a Cartesian
// end-effector point for the manipulator, each sharing its space with one
// constant-velocity circular/spherical obstacle.
//
// Environments are value types. step() returns a new EnvState; the obstacle
// position is always recomputed as p0 + (elapsed * dt) * v so it never drifts.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "genosil/nn.hpp"
#include "genosil/normalizer.hpp"
#include "genosil/policy.hpp"
#include "genosil/rng.hpp"

namespace genosil {

enum class EnvKind { kVehicle, kManipulator };

std::string_view to_string(EnvKind kind);
EnvKind env_kind_from_string(std::string_view name);

struct EnvDims {
  Eigen::Index state;     // vehicle (x, y, theta); manipulator (x, y, z)
  Eigen::Index position;  // 2 or 3
  Eigen::Index action;    // vehicle (v, omega); manipulator (dx, dy, dz)
  Eigen::Index safety;    // obstacle pos + obstacle vel + radius + goal
};

EnvDims dims(EnvKind kind);

// Vehicle: v in [0, 1] m/s, omega in [-2, 2] rad/s.
// Manipulator: each displacement component in [-0.05, 0.05] m per step.
ActionBounds action_bounds(EnvKind kind);

// Scenario sampling ranges plus the per-task constants that go with them.
//
// The obstacle is placed on an encounter course: a point is picked on the
// start-goal segment at a random fraction, offset laterally, and the obstacle
// is backed off along its velocity by the time the agent needs to get there at
// `approach_speed`. Static obstacles therefore sit near the path and moving
// ones arrive near it.
struct ScenarioRanges {
  EnvKind kind = EnvKind::kVehicle;
  Vector workspace_lower;  // manipulator positions are clamped into this box
  Vector workspace_upper;
  Vector start_lower;  // agent start position box
  Vector start_upper;
  Vector goal_lower;
  Vector goal_upper;
  double heading_min = -3.141592653589793;  // vehicle only
  double heading_max = 3.141592653589793;
  double radius_min = 0.3;
  double radius_max = 0.8;
  double speed_min = 0.0;
  double speed_max = 0.5;
  double safe_margin = 0.5;  // clearance beyond contact distance
  double min_goal_distance = 2.0;
  double path_fraction_min = 0.3;
  double path_fraction_max = 0.7;
  double lateral_offset_max = 1.0;
  double approach_speed = 1.0;
  int horizon = 300;
  double dt = 0.1;
  double agent_radius = 0.1;
  double goal_tolerance = 0.15;
  int max_attempts = 1000;

  static ScenarioRanges defaults(EnvKind kind);
  // "nominal", "shifted-speed" (speed range x1.5), "shifted-radius" (radius
  // range moved up by 0.2 m for the vehicle, 0.02 m for the manipulator).
  static ScenarioRanges preset(EnvKind kind, std::string_view name);

  // Throws ValidationError on min > max, non-positive radii, etc.
  void validate() const;
};

std::vector<std::string> preset_names();

struct Scenario {
  EnvKind kind = EnvKind::kVehicle;
  Vector start;  // initial agent state
  Vector obstacle_position;
  Vector obstacle_velocity;
  double obstacle_radius = 0.0;
  Vector goal;
  int horizon = 0;
  double dt = 0.1;
  double agent_radius = 0.0;
  double goal_tolerance = 0.0;
  Vector workspace_lower;  // manipulator positions are clamped into this box
  Vector workspace_upper;

  double contact_distance() const { return obstacle_radius + agent_radius; }
};

// Stable 64-bit FNV-1a hash over every scenario field.
std::uint64_t scenario_hash(const Scenario& scenario);

enum class Termination { kRunning, kReached, kCollided, kTimeout };

std::string_view to_string(Termination reason);
Termination termination_from_string(std::string_view name);

struct EnvState {
  Vector agent;
  Vector obstacle_position;
  int elapsed = 0;
  Termination termination = Termination::kRunning;

  bool terminal() const { return termination != Termination::kRunning; }
};

// Rejection-samples until both clearance invariants hold.
// Throws ValidationError when ranges are malformed or the retry budget runs out.
Scenario sample_scenario(Rng& rng, const ScenarioRanges& ranges);

Vector obstacle_position_at(const Scenario& scenario, int elapsed_steps);
Vector agent_position(EnvKind kind, const Vector& agent_state);

// Distance between agent and obstacle surfaces (negative when overlapping).
double clearance(const EnvState& state, const Scenario& scenario);

// Collision (closed: touching counts) takes precedence over reaching; timeout
// applies only when neither fired.
Termination check_termination(const Vector& agent_state, const Vector& obstacle_position,
                              int elapsed, const Scenario& scenario, double agent_radius,
                              double goal_tolerance);
Termination check_termination(const EnvState& state, const Scenario& scenario);

EnvState reset(const Scenario& scenario);

// Forward-Euler unicycle step with the action clamped to bounds; theta wrapped
// to (-pi, pi]. Throws ValidationError on a terminal state.
EnvState step_vehicle(const EnvState& state, const Vector& action, const Scenario& scenario);

// Clamped displacement followed by a clamp into the workspace box.
EnvState step_manipulator(const EnvState& state, const Vector& action, const Scenario& scenario);

EnvState step(const EnvState& state, const Vector& action, const Scenario& scenario);

// c = [obstacle position (current); obstacle velocity; radius; goal].
Vector current_safety_params(const EnvState& state, const Scenario& scenario);

// Component ranges used to normalize states and safety parameters.
AffineNormalizer state_normalizer(const ScenarioRanges& ranges);
AffineNormalizer safety_normalizer(const ScenarioRanges& ranges);
AffineNormalizer goal_normalizer(const ScenarioRanges& ranges);

double wrap_angle(double angle);

// One line of an exported trajectory.
struct TrajectoryStep {
  int t = 0;
  Vector state;
  Vector obstacle_position;
  Vector action;  // empty on the final record
  Vector safety_params;
  Termination termination = Termination::kRunning;
};

void write_trajectory_jsonl(const std::string& path, const std::vector<TrajectoryStep>& steps);

}  // namespace genosil
