#pragma once

// Collision-cone CBF-QP expert.
//
// The barrier is evaluated on the relative geometry between the obstacle and a
// reference agent velocity that depends only on the state: the heading
// direction at `vehicle_reference_speed` for the unicycle, the goal direction
// at `manipulator_reference_speed` for the end-effector. Its time derivative
// is then affine in the control:
//
//   psi(u) = dh/dt(u) + alpha * h = gradient . u + offset >= 0
//
// and the expert returns the point of the action box closest to the nominal
// controller's action that satisfies psi >= 0.

#include <optional>
#include <string>
#include <vector>

#include "genosil/envs.hpp"

namespace genosil {

struct CbfConfig {
  double alpha = 1.0;                       // class-K gain, 1/s
  double vehicle_speed_gain = 0.5;          // k_v
  double vehicle_heading_gain = 2.0;        // k_omega
  double manipulator_step = 0.04;           // m per step toward the goal
  double vehicle_reference_speed = 1.0;     // m/s
  double manipulator_reference_speed = 0.2; // m/s
  // Extra clearance added to the contact distance inside the barrier, m.
  double vehicle_buffer = 0.2;
  double manipulator_buffer = 0.02;

  void validate() const;
};

// h = <p_rel, v_rel> + ||v_rel|| * sqrt(||p_rel||^2 - r^2), with p_rel = p_obs - p_agent
// and v_rel the obstacle velocity relative to the agent. h < 0 exactly when
// v_rel points into the collision cone. Throws ValidationError when
// ||p_rel|| <= r (already in contact).
double cone_barrier(const Vector& p_rel, const Vector& v_rel, double r);

struct BarrierValue {
  double value = 0.0;
  Vector d_position;  // dh / dp_rel
  Vector d_velocity;  // dh / dv_rel
};

BarrierValue cone_barrier_with_gradient(const Vector& p_rel, const Vector& v_rel, double r);

// psi(u) = gradient . u + offset.
struct AffineConstraint {
  Vector gradient;
  double offset = 0.0;

  double operator()(const Vector& u) const { return gradient.dot(u) + offset; }
};

struct QpSolution {
  Vector action;
  double multiplier = 0.0;  // lambda in u = clamp(u_nom + lambda * gradient)
  bool feasible = true;
};

// Exact minimizer of ||u - nominal||^2 over the box subject to psi(u) >= 0.
// Without clamping in play this is u_nom + lambda * g with
// lambda = max(0, -psi(u_nom)) / ||g||^2. With the box, the solution is
// clamp(u_nom + lambda * g) where lambda is the root of the nondecreasing
// piecewise-linear psi(clamp(u_nom + lambda * g)). If no lambda satisfies the
// constraint the result maximizes psi over the box and is flagged infeasible.
QpSolution project_onto_constraint(const Vector& nominal, const AffineConstraint& constraint,
                                   const ActionBounds& bounds);

Vector nominal_action(const EnvState& state, const Scenario& scenario, const CbfConfig& cfg);

// Barrier value at the current state and the affine constraint on u.
struct BarrierConstraint {
  double barrier = 0.0;
  AffineConstraint constraint;
};

BarrierConstraint barrier_constraint(const EnvState& state, const Scenario& scenario,
                                     const CbfConfig& cfg);

struct ExpertDecision {
  Vector action;
  Vector nominal;
  double barrier = 0.0;
  AffineConstraint constraint;
  bool active = false;    // the nominal action violated the constraint
  bool feasible = true;   // constraint satisfiable inside the action box
};

// Requires a non-terminal state.
ExpertDecision expert_action(const EnvState& state, const Scenario& scenario, const CbfConfig& cfg);

// One expert episode: states, safety params and actions for every step taken.
struct Demonstration {
  int id = 0;
  std::uint64_t scenario_index = 0;
  Scenario scenario;
  std::vector<Vector> states;
  std::vector<Vector> safety_params;
  std::vector<Vector> actions;
  Termination termination = Termination::kRunning;
  bool infeasible = false;   // at least one step had an unsatisfiable constraint
  double min_clearance = 0.0;
  double min_barrier = 0.0;  // over steps where the constraint was feasible
};

Demonstration rollout_expert(const Scenario& scenario, const CbfConfig& cfg);

struct GenerateConfig {
  int n_demos = 2000;
  ScenarioRanges ranges = ScenarioRanges::defaults(EnvKind::kVehicle);
  std::uint64_t seed = 0;
  CbfConfig cbf;
  int workers = 1;
  int probe_batch = 50;          // acceptance rate is checked after this many attempts
  double min_acceptance = 0.10;

  void validate() const;
};

struct DiscardCounts {
  int collided = 0;
  int timeout = 0;
  int infeasible = 0;
};

struct GeneratedDataset {
  EnvKind kind = EnvKind::kVehicle;
  std::vector<Demonstration> demos;  // kept episodes, ordered by scenario index
  int attempted = 0;
  DiscardCounts discarded;
  GenerateConfig config;
};

// Scenario i is drawn from an RNG seeded with derive_seed(seed, i); episodes
// that end reached, collision-free and without an infeasible step are kept
// until n_demos are collected. Throws InfeasibleError if fewer than
// min_acceptance of the probe batch is kept or the attempt budget runs out.
GeneratedDataset generate_dataset(const GenerateConfig& config);

}  // namespace genosil
