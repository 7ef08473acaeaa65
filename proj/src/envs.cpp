#include "genosil/envs.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "genosil/error.hpp"
#include "genosil/json_util.hpp"

namespace genosil {

namespace {

constexpr double kPi = std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return lo + (hi - lo) * unit(rng);
}

Vector uniform_box(Rng& rng, const Vector& lo, const Vector& hi) {
  Vector out(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) out[i] = uniform(rng, lo[i], hi[i]);
  return out;
}

Vector random_unit(Rng& rng, Eigen::Index dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal(rng);
    const double n = v.norm();
    if (n > 1e-9) return v / n;
  }
}

void check_box(const Vector& lo, const Vector& hi, Eigen::Index width, const std::string& what) {
  require(lo.size() == width && hi.size() == width, what + " must have width " + std::to_string(width));
  require(lo.allFinite() && hi.allFinite(), what + " must be finite");
  require((lo.array() <= hi.array()).all(), what + ": lower bound exceeds upper bound");
}

Vector clamp_box(const Vector& v, const Vector& lo, const Vector& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

std::string_view to_string(EnvKind kind) {
  return kind == EnvKind::kVehicle ? "vehicle" : "manipulator";
}

EnvKind env_kind_from_string(std::string_view name) {
  if (name == "vehicle") return EnvKind::kVehicle;
  if (name == "manipulator") return EnvKind::kManipulator;
  throw ValidationError("unknown environment '" + std::string(name) +
                        "' (expected vehicle or manipulator)");
}

EnvDims dims(EnvKind kind) {
  if (kind == EnvKind::kVehicle) return {3, 2, 2, 7};
  return {3, 3, 3, 10};
}

ActionBounds action_bounds(EnvKind kind) {
  if (kind == EnvKind::kVehicle) {
    return {Eigen::Vector2d(0.0, -2.0), Eigen::Vector2d(1.0, 2.0)};
  }
  return {Vector::Constant(3, -0.05), Vector::Constant(3, 0.05)};
}

ScenarioRanges ScenarioRanges::defaults(EnvKind kind) {
  ScenarioRanges r;
  r.kind = kind;
  if (kind == EnvKind::kVehicle) {
    r.workspace_lower = Eigen::Vector2d(-5.0, -5.0);
    r.workspace_upper = Eigen::Vector2d(5.0, 5.0);
    r.radius_min = 0.3;
    r.radius_max = 0.8;
    r.speed_min = 0.0;
    r.speed_max = 0.5;
    r.safe_margin = 0.5;
    r.min_goal_distance = 2.0;
    r.lateral_offset_max = 1.0;
    r.approach_speed = 1.0;
    r.horizon = 300;
    r.dt = 0.1;
    r.agent_radius = 0.1;
    r.goal_tolerance = 0.15;
  } else {
    r.workspace_lower = Eigen::Vector3d(0.1, -0.35, 0.05);
    r.workspace_upper = Eigen::Vector3d(0.6, 0.35, 0.6);
    r.radius_min = 0.03;
    r.radius_max = 0.08;
    r.speed_min = 0.0;
    r.speed_max = 0.05;
    r.safe_margin = 0.05;
    r.min_goal_distance = 0.2;
    r.lateral_offset_max = 0.08;
    r.approach_speed = 0.2;
    r.horizon = 150;
    r.dt = 0.2;
    r.agent_radius = 0.02;
    r.goal_tolerance = 0.05;
  }
  r.start_lower = r.workspace_lower;
  r.start_upper = r.workspace_upper;
  r.goal_lower = r.workspace_lower;
  r.goal_upper = r.workspace_upper;
  return r;
}

std::vector<std::string> preset_names() { return {"nominal", "shifted-speed", "shifted-radius"}; }

ScenarioRanges ScenarioRanges::preset(EnvKind kind, std::string_view name) {
  ScenarioRanges r = defaults(kind);
  if (name == "nominal") return r;
  if (name == "shifted-speed") {
    r.speed_min *= 1.5;
    r.speed_max *= 1.5;
    return r;
  }
  if (name == "shifted-radius") {
    const double shift = kind == EnvKind::kVehicle ? 0.2 : 0.02;
    r.radius_min += shift;
    r.radius_max += shift;
    return r;
  }
  throw ValidationError("unknown scenario preset '" + std::string(name) + "'");
}

void ScenarioRanges::validate() const {
  const auto d = dims(kind);
  check_box(workspace_lower, workspace_upper, d.position, "workspace");
  check_box(start_lower, start_upper, d.position, "start box");
  check_box(goal_lower, goal_upper, d.position, "goal box");
  require(std::isfinite(heading_min) && std::isfinite(heading_max) && heading_min <= heading_max,
          "heading range must satisfy min <= max");
  require(radius_min > 0.0 && radius_min <= radius_max && std::isfinite(radius_max),
          "obstacle radius range must satisfy 0 < min <= max");
  require(speed_min >= 0.0 && speed_min <= speed_max && std::isfinite(speed_max),
          "obstacle speed range must satisfy 0 <= min <= max");
  require(safe_margin >= 0.0 && std::isfinite(safe_margin), "safe margin must be >= 0");
  require(min_goal_distance >= 0.0 && std::isfinite(min_goal_distance),
          "minimum goal distance must be >= 0");
  require(path_fraction_min >= 0.0 && path_fraction_min <= path_fraction_max &&
              path_fraction_max <= 1.0,
          "path fraction range must satisfy 0 <= min <= max <= 1");
  require(lateral_offset_max >= 0.0 && std::isfinite(lateral_offset_max),
          "lateral offset must be >= 0");
  require(approach_speed > 0.0 && std::isfinite(approach_speed), "approach speed must be > 0");
  require(horizon >= 0, "horizon must be >= 0");
  require(dt > 0.0 && std::isfinite(dt), "dt must be > 0");
  require(agent_radius >= 0.0 && std::isfinite(agent_radius), "agent radius must be >= 0");
  require(goal_tolerance > 0.0 && std::isfinite(goal_tolerance), "goal tolerance must be > 0");
  require(max_attempts >= 1, "max_attempts must be >= 1");
}

Scenario sample_scenario(Rng& rng, const ScenarioRanges& ranges) {
  ranges.validate();
  const auto d = dims(ranges.kind);
  const double contact = ranges.agent_radius;
  for (int attempt = 0; attempt < ranges.max_attempts; ++attempt) {
    const Vector start_pos = uniform_box(rng, ranges.start_lower, ranges.start_upper);
    const double heading = uniform(rng, ranges.heading_min, ranges.heading_max);
    const Vector goal = uniform_box(rng, ranges.goal_lower, ranges.goal_upper);
    const double radius = uniform(rng, ranges.radius_min, ranges.radius_max);
    const double speed = uniform(rng, ranges.speed_min, ranges.speed_max);
    const Vector direction = random_unit(rng, d.position);
    const double fraction = uniform(rng, ranges.path_fraction_min, ranges.path_fraction_max);
    const double lateral = uniform(rng, -ranges.lateral_offset_max, ranges.lateral_offset_max);
    Vector lateral_dir = random_unit(rng, d.position);

    const Vector path = goal - start_pos;
    const double distance = path.norm();
    if (distance < ranges.min_goal_distance || distance <= 0.0) continue;
    const Vector along = path / distance;
    lateral_dir -= lateral_dir.dot(along) * along;
    if (lateral_dir.norm() < 1e-9) continue;
    lateral_dir.normalize();

    const Vector velocity = speed * direction;
    const double encounter_time = fraction * distance / ranges.approach_speed;
    const Vector obstacle =
        start_pos + fraction * path + lateral * lateral_dir - encounter_time * velocity;

    const double required = radius + contact + ranges.safe_margin;
    if ((start_pos - obstacle).norm() <= required) continue;
    if ((goal - obstacle).norm() <= required) continue;

    Scenario s;
    s.kind = ranges.kind;
    if (ranges.kind == EnvKind::kVehicle) {
      s.start = Eigen::Vector3d(start_pos[0], start_pos[1], wrap_angle(heading));
    } else {
      s.start = start_pos;
    }
    s.obstacle_position = obstacle;
    s.obstacle_velocity = velocity;
    s.obstacle_radius = radius;
    s.goal = goal;
    s.horizon = ranges.horizon;
    s.dt = ranges.dt;
    s.agent_radius = ranges.agent_radius;
    s.goal_tolerance = ranges.goal_tolerance;
    s.workspace_lower = ranges.workspace_lower;
    s.workspace_upper = ranges.workspace_upper;
    return s;
  }
  throw ValidationError("scenario sampling exhausted " + std::to_string(ranges.max_attempts) +
                        " attempts; the ranges cannot satisfy the clearance margins");
}

std::uint64_t scenario_hash(const Scenario& s) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix_bytes = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  auto mix_double = [&](double v) { mix_bytes(&v, sizeof v); };
  auto mix_vector = [&](const Vector& v) {
    const auto n = static_cast<std::int64_t>(v.size());
    mix_bytes(&n, sizeof n);
    for (Eigen::Index i = 0; i < v.size(); ++i) mix_double(v[i]);
  };
  const int kind = static_cast<int>(s.kind);
  mix_bytes(&kind, sizeof kind);
  mix_vector(s.start);
  mix_vector(s.obstacle_position);
  mix_vector(s.obstacle_velocity);
  mix_double(s.obstacle_radius);
  mix_vector(s.goal);
  mix_bytes(&s.horizon, sizeof s.horizon);
  mix_double(s.dt);
  mix_double(s.agent_radius);
  mix_double(s.goal_tolerance);
  mix_vector(s.workspace_lower);
  mix_vector(s.workspace_upper);
  return h;
}

std::string_view to_string(Termination reason) {
  switch (reason) {
    case Termination::kRunning:
      return "running";
    case Termination::kReached:
      return "reached";
    case Termination::kCollided:
      return "collided";
    case Termination::kTimeout:
      return "timeout";
  }
  return "running";
}

Termination termination_from_string(std::string_view name) {
  if (name == "running") return Termination::kRunning;
  if (name == "reached") return Termination::kReached;
  if (name == "collided") return Termination::kCollided;
  if (name == "timeout") return Termination::kTimeout;
  throw ValidationError("unknown termination reason '" + std::string(name) + "'");
}

Vector obstacle_position_at(const Scenario& scenario, int elapsed_steps) {
  return scenario.obstacle_position +
         (static_cast<double>(elapsed_steps) * scenario.dt) * scenario.obstacle_velocity;
}

Vector agent_position(EnvKind kind, const Vector& agent_state) {
  return agent_state.head(dims(kind).position);
}

double clearance(const EnvState& state, const Scenario& scenario) {
  return (agent_position(scenario.kind, state.agent) - state.obstacle_position).norm() -
         scenario.contact_distance();
}

Termination check_termination(const Vector& agent_state, const Vector& obstacle_position,
                              int elapsed, const Scenario& scenario, double agent_radius,
                              double goal_tolerance) {
  const Vector p = agent_position(scenario.kind, agent_state);
  if ((p - obstacle_position).norm() <= scenario.obstacle_radius + agent_radius) {
    return Termination::kCollided;
  }
  if ((p - scenario.goal).norm() <= goal_tolerance) return Termination::kReached;
  if (elapsed >= scenario.horizon) return Termination::kTimeout;
  return Termination::kRunning;
}

Termination check_termination(const EnvState& state, const Scenario& scenario) {
  return check_termination(state.agent, state.obstacle_position, state.elapsed, scenario,
                           scenario.agent_radius, scenario.goal_tolerance);
}

EnvState reset(const Scenario& scenario) {
  EnvState state;
  state.agent = scenario.start;
  state.obstacle_position = obstacle_position_at(scenario, 0);
  state.elapsed = 0;
  state.termination = check_termination(state, scenario);
  return state;
}

double wrap_angle(double angle) {
  double wrapped = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  return wrapped;
}

namespace {

void require_running(const EnvState& state, const Scenario& scenario, const Vector& action) {
  if (state.terminal()) {
    throw ValidationError("cannot step a terminal state (" + std::string(to_string(state.termination)) + ")");
  }
  require(action.size() == dims(scenario.kind).action, "action width does not match the environment");
  require(action.allFinite(), "action must be finite");
}

EnvState advance(EnvState next, const Scenario& scenario) {
  next.elapsed += 1;
  next.obstacle_position = obstacle_position_at(scenario, next.elapsed);
  next.termination = check_termination(next, scenario);
  return next;
}

}  // namespace

EnvState step_vehicle(const EnvState& state, const Vector& action, const Scenario& scenario) {
  require(scenario.kind == EnvKind::kVehicle, "step_vehicle needs a vehicle scenario");
  require_running(state, scenario, action);
  const Vector u = action_bounds(EnvKind::kVehicle).clamp(action);
  EnvState next = state;
  const double theta = state.agent[2];
  next.agent[0] = state.agent[0] + u[0] * std::cos(theta) * scenario.dt;
  next.agent[1] = state.agent[1] + u[0] * std::sin(theta) * scenario.dt;
  next.agent[2] = wrap_angle(theta + u[1] * scenario.dt);
  return advance(std::move(next), scenario);
}

EnvState step_manipulator(const EnvState& state, const Vector& action, const Scenario& scenario) {
  require(scenario.kind == EnvKind::kManipulator, "step_manipulator needs a manipulator scenario");
  require_running(state, scenario, action);
  const Vector u = action_bounds(EnvKind::kManipulator).clamp(action);
  EnvState next = state;
  next.agent = state.agent + u;
  if (scenario.workspace_lower.size() == next.agent.size()) {
    next.agent = clamp_box(next.agent, scenario.workspace_lower, scenario.workspace_upper);
  }
  return advance(std::move(next), scenario);
}

EnvState step(const EnvState& state, const Vector& action, const Scenario& scenario) {
  return scenario.kind == EnvKind::kVehicle ? step_vehicle(state, action, scenario)
                                            : step_manipulator(state, action, scenario);
}

Vector current_safety_params(const EnvState& state, const Scenario& scenario) {
  const auto d = dims(scenario.kind);
  Vector c(d.safety);
  c << state.obstacle_position, scenario.obstacle_velocity, scenario.obstacle_radius, scenario.goal;
  return c;
}

AffineNormalizer state_normalizer(const ScenarioRanges& ranges) {
  if (ranges.kind == EnvKind::kVehicle) {
    return AffineNormalizer::from_bounds(
        Eigen::Vector3d(ranges.workspace_lower[0], ranges.workspace_lower[1], -kPi),
        Eigen::Vector3d(ranges.workspace_upper[0], ranges.workspace_upper[1], kPi));
  }
  return AffineNormalizer::from_bounds(ranges.workspace_lower, ranges.workspace_upper);
}

AffineNormalizer safety_normalizer(const ScenarioRanges& ranges) {
  const auto d = dims(ranges.kind);
  Vector lo(d.safety);
  Vector hi(d.safety);
  lo << ranges.workspace_lower, Vector::Constant(d.position, -ranges.speed_max), ranges.radius_min,
      ranges.goal_lower;
  hi << ranges.workspace_upper, Vector::Constant(d.position, ranges.speed_max), ranges.radius_max,
      ranges.goal_upper;
  return AffineNormalizer::from_bounds(lo, hi);
}

AffineNormalizer goal_normalizer(const ScenarioRanges& ranges) {
  return AffineNormalizer::from_bounds(ranges.goal_lower, ranges.goal_upper);
}

void write_trajectory_jsonl(const std::string& path, const std::vector<TrajectoryStep>& steps) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open trajectory file '" + path + "' for writing");
  for (const auto& step : steps) {
    Json record{{"t", step.t},
                {"state", vector_to_json(step.state)},
                {"obstacle", vector_to_json(step.obstacle_position)},
                {"c", vector_to_json(step.safety_params)}};
    if (step.action.size() > 0) record["action"] = vector_to_json(step.action);
    if (step.termination != Termination::kRunning) {
      record["termination"] = std::string(to_string(step.termination));
    }
    out << record.dump() << '\n';
  }
}

}  // namespace genosil
