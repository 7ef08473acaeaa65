#include "genosil/expert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "genosil/error.hpp"
#include "genosil/parallel.hpp"

namespace genosil {

void CbfConfig::validate() const {
  require(alpha > 0.0 && std::isfinite(alpha), "CBF alpha must be > 0");
  require(vehicle_speed_gain > 0.0 && vehicle_heading_gain > 0.0, "nominal gains must be > 0");
  require(manipulator_step > 0.0, "manipulator step must be > 0");
  require(vehicle_reference_speed > 0.0 && manipulator_reference_speed > 0.0,
          "reference speeds must be > 0");
  require(vehicle_buffer >= 0.0 && manipulator_buffer >= 0.0, "clearance buffers must be >= 0");
}

double cone_barrier(const Vector& p_rel, const Vector& v_rel, double r) {
  return cone_barrier_with_gradient(p_rel, v_rel, r).value;
}

BarrierValue cone_barrier_with_gradient(const Vector& p_rel, const Vector& v_rel, double r) {
  require(p_rel.size() == v_rel.size(), "relative position and velocity widths differ");
  require(r > 0.0, "combined radius must be > 0");
  const double dist_sq = p_rel.squaredNorm();
  if (!(dist_sq > r * r)) {
    throw ValidationError("collision-cone barrier undefined: agent is within the combined radius");
  }
  const double tangent = std::sqrt(dist_sq - r * r);  // ||p|| cos(phi)
  const double speed = v_rel.norm();
  BarrierValue out;
  out.value = p_rel.dot(v_rel) + speed * tangent;
  out.d_position = v_rel + (speed / tangent) * p_rel;
  out.d_velocity = p_rel;
  if (speed > 0.0) out.d_velocity += (tangent / speed) * v_rel;
  return out;
}

QpSolution project_onto_constraint(const Vector& nominal, const AffineConstraint& constraint,
                                   const ActionBounds& bounds) {
  const Vector& g = constraint.gradient;
  require(nominal.size() == g.size() && nominal.size() == bounds.width(),
          "nominal action, constraint gradient and bounds must share a width");
  const Vector& lo = bounds.lower;
  const Vector& hi = bounds.upper;
  auto at = [&](double lambda) { return (nominal + lambda * g).cwiseMax(lo).cwiseMin(hi).eval(); };
  auto psi = [&](double lambda) { return constraint(at(lambda)); };

  QpSolution out;
  if (psi(0.0) >= 0.0) {
    out.action = at(0.0);
    return out;
  }

  // Coordinate i moves while lambda is between its two box-crossing points.
  std::vector<double> breaks;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (g[i] == 0.0) continue;
    for (double edge : {lo[i], hi[i]}) {
      const double t = (edge - nominal[i]) / g[i];
      if (t > 0.0) breaks.push_back(t);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  double prev = 0.0;
  for (double next : breaks) {
    const double psi_next = psi(next);
    if (psi_next >= 0.0) {
      // psi is linear on [prev, next]; its slope is the squared norm of the
      // gradient over coordinates that are not clamped inside the segment.
      const Vector mid = nominal + (0.5 * (prev + next)) * g;
      double slope = 0.0;
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (mid[i] > lo[i] && mid[i] < hi[i]) slope += g[i] * g[i];
      }
      double lambda = next;
      if (slope > 0.0) lambda = std::min(next, prev - psi(prev) / slope);
      out.action = at(lambda);
      out.multiplier = lambda;
      // Round-off can leave psi a hair below zero; nudge forward along the
      // same segment rather than jumping to its far end.
      for (int attempt = 0; attempt < 8 && lambda < next; ++attempt) {
        const double deficit = -constraint(out.action);
        if (deficit <= 0.0) break;
        lambda = std::min(next, lambda + deficit / slope + 4.0 * std::numeric_limits<double>::epsilon() *
                                                             std::max(1.0, std::abs(lambda)));
        out.action = at(lambda);
        out.multiplier = lambda;
      }
      if (constraint(out.action) < 0.0) {
        out.action = at(next);
        out.multiplier = next;
      }
      return out;
    }
    prev = next;
  }

  // psi is constant past the last breakpoint (or g = 0); no feasible point.
  out.multiplier = breaks.empty() ? 0.0 : breaks.back();
  out.action = at(out.multiplier);
  out.feasible = false;
  return out;
}

Vector nominal_action(const EnvState& state, const Scenario& scenario, const CbfConfig& cfg) {
  const ActionBounds bounds = action_bounds(scenario.kind);
  if (scenario.kind == EnvKind::kVehicle) {
    const Eigen::Vector2d to_goal(scenario.goal[0] - state.agent[0], scenario.goal[1] - state.agent[1]);
    const double distance = to_goal.norm();
    const double heading_error = wrap_angle(std::atan2(to_goal[1], to_goal[0]) - state.agent[2]);
    const double speed = std::clamp(cfg.vehicle_speed_gain * distance, 0.0, bounds.upper[0]) *
                         std::max(0.0, std::cos(heading_error));
    return bounds.clamp(Eigen::Vector2d(speed, cfg.vehicle_heading_gain * heading_error));
  }
  const Vector to_goal = scenario.goal - state.agent;
  const double distance = to_goal.norm();
  if (distance <= 0.0) return Vector::Zero(3);
  return bounds.clamp(to_goal * std::min(1.0, cfg.manipulator_step / distance));
}

BarrierConstraint barrier_constraint(const EnvState& state, const Scenario& scenario,
                                     const CbfConfig& cfg) {
  const Vector p_agent = agent_position(scenario.kind, state.agent);
  const Vector p_rel = state.obstacle_position - p_agent;
  const Vector& v_obs = scenario.obstacle_velocity;
  // The buffer shrinks once the agent is inside it so the cone stays defined.
  const double contact = scenario.contact_distance();
  const double buffer = scenario.kind == EnvKind::kVehicle ? cfg.vehicle_buffer : cfg.manipulator_buffer;
  const double r = contact + std::min(buffer, 0.5 * (p_rel.norm() - contact));
  BarrierConstraint out;

  if (scenario.kind == EnvKind::kVehicle) {
    const double theta = state.agent[2];
    const Eigen::Vector2d heading(std::cos(theta), std::sin(theta));
    const Eigen::Vector2d normal(-std::sin(theta), std::cos(theta));
    const double v_ref = cfg.vehicle_reference_speed;
    const Vector v_rel = v_obs - v_ref * Vector(heading);
    const BarrierValue b = cone_barrier_with_gradient(p_rel, v_rel, r);
    // p_rel' = v_obs - v * heading;  v_rel' = -v_ref * omega * normal.
    out.barrier = b.value;
    out.constraint.gradient =
        Eigen::Vector2d(-b.d_position.dot(heading), -v_ref * b.d_velocity.dot(normal));
    out.constraint.offset = b.d_position.dot(v_obs) + cfg.alpha * b.value;
    return out;
  }

  const Vector to_goal = scenario.goal - p_agent;
  const double distance = std::max(to_goal.norm(), scenario.goal_tolerance);
  const Vector goal_dir = to_goal / std::max(to_goal.norm(), 1e-12);
  const double s_ref = cfg.manipulator_reference_speed;
  const Vector v_rel = v_obs - s_ref * goal_dir;
  const BarrierValue b = cone_barrier_with_gradient(p_rel, v_rel, r);
  // p_agent' = u / dt;  goal_dir' = -(I - g g^T) p_agent' / distance.
  const Eigen::MatrixXd tangential =
      Eigen::MatrixXd::Identity(3, 3) - goal_dir * goal_dir.transpose();
  out.barrier = b.value;
  out.constraint.gradient = (-b.d_position + (s_ref / distance) * (tangential * b.d_velocity)) /
                            scenario.dt;
  out.constraint.offset = b.d_position.dot(v_obs) + cfg.alpha * b.value;
  return out;
}

ExpertDecision expert_action(const EnvState& state, const Scenario& scenario,
                             const CbfConfig& cfg) {
  require(!state.terminal(), "expert_action needs a non-terminal state");
  ExpertDecision decision;
  decision.nominal = nominal_action(state, scenario, cfg);
  const BarrierConstraint bc = barrier_constraint(state, scenario, cfg);
  decision.barrier = bc.barrier;
  decision.constraint = bc.constraint;
  decision.active = bc.constraint(decision.nominal) < 0.0;
  const QpSolution qp =
      project_onto_constraint(decision.nominal, bc.constraint, action_bounds(scenario.kind));
  decision.action = qp.action;
  decision.feasible = qp.feasible;
  return decision;
}

Demonstration rollout_expert(const Scenario& scenario, const CbfConfig& cfg) {
  Demonstration demo;
  demo.scenario = scenario;
  EnvState state = reset(scenario);
  demo.min_clearance = clearance(state, scenario);
  demo.min_barrier = std::numeric_limits<double>::infinity();
  while (!state.terminal()) {
    const ExpertDecision decision = expert_action(state, scenario, cfg);
    demo.states.push_back(state.agent);
    demo.safety_params.push_back(current_safety_params(state, scenario));
    demo.actions.push_back(decision.action);
    if (decision.feasible) {
      demo.min_barrier = std::min(demo.min_barrier, decision.barrier);
    } else {
      demo.infeasible = true;
    }
    state = step(state, decision.action, scenario);
    demo.min_clearance = std::min(demo.min_clearance, clearance(state, scenario));
  }
  demo.termination = state.termination;
  return demo;
}

void GenerateConfig::validate() const {
  require(n_demos >= 1, "n_demos must be >= 1");
  require(workers >= 1, "workers must be >= 1");
  require(probe_batch >= 1, "probe batch must be >= 1");
  require(min_acceptance >= 0.0 && min_acceptance <= 1.0, "min_acceptance must lie in [0, 1]");
  ranges.validate();
  cbf.validate();
}

GeneratedDataset generate_dataset(const GenerateConfig& config) {
  config.validate();
  GeneratedDataset out;
  out.kind = config.ranges.kind;
  out.config = config;

  const std::int64_t budget =
      std::max<std::int64_t>(config.probe_batch, 20LL * config.n_demos + config.probe_batch);
  const std::size_t block = static_cast<std::size_t>(std::max(config.probe_batch, 8 * config.workers));
  std::int64_t next_index = 0;
  int kept_in_probe = 0;

  while (static_cast<int>(out.demos.size()) < config.n_demos) {
    if (next_index >= budget) {
      throw InfeasibleError("dataset generation exhausted " + std::to_string(budget) +
                            " scenarios with only " + std::to_string(out.demos.size()) +
                            " kept episodes");
    }
    std::vector<std::optional<Demonstration>> results(block);
    parallel_for(block, config.workers, [&](std::size_t k) {
      const auto index = static_cast<std::uint64_t>(next_index) + k;
      Rng rng(derive_seed(config.seed, index));
      Scenario scenario = sample_scenario(rng, config.ranges);
      Demonstration demo = rollout_expert(scenario, config.cbf);
      demo.scenario_index = index;
      results[k] = std::move(demo);
    });

    for (std::size_t k = 0; k < block; ++k) {
      if (static_cast<int>(out.demos.size()) >= config.n_demos) break;
      Demonstration& demo = *results[k];
      out.attempted += 1;
      const bool kept = demo.termination == Termination::kReached && !demo.infeasible;
      if (kept) {
        demo.id = static_cast<int>(out.demos.size());
        out.demos.push_back(std::move(demo));
      } else if (demo.termination == Termination::kCollided) {
        out.discarded.collided += 1;
      } else if (demo.infeasible) {
        out.discarded.infeasible += 1;
      } else {
        out.discarded.timeout += 1;
      }
      if (out.attempted == config.probe_batch) {
        kept_in_probe = static_cast<int>(out.demos.size());
        const double rate = static_cast<double>(kept_in_probe) / config.probe_batch;
        if (rate < config.min_acceptance) {
          throw InfeasibleError(
              "expert kept " + std::to_string(kept_in_probe) + " of the first " +
              std::to_string(config.probe_batch) + " scenarios (collided " +
              std::to_string(out.discarded.collided) + ", timeout " +
              std::to_string(out.discarded.timeout) + ", infeasible " +
              std::to_string(out.discarded.infeasible) + "); check the scenario ranges");
        }
      }
    }
    next_index += static_cast<std::int64_t>(block);
  }
  return out;
}

}  // namespace genosil
