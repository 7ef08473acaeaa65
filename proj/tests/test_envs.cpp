#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "genosil/envs.hpp"
#include "genosil/error.hpp"
#include "genosil/json_util.hpp"

using namespace genosil;

namespace {

constexpr double kPi = std::numbers::pi;

Scenario vehicle_scenario(Eigen::Vector3d start, Eigen::Vector2d obstacle, Eigen::Vector2d velocity, double radius,
                          Eigen::Vector2d goal) {
  Scenario s;
  s.kind = EnvKind::kVehicle;
  s.start = start;
  s.obstacle_position = obstacle;
  s.obstacle_velocity = velocity;
  s.obstacle_radius = radius;
  s.goal = goal;
  s.horizon = 300;
  s.dt = 0.1;
  s.agent_radius = 0.1;
  s.goal_tolerance = 0.15;
  return s;
}

Scenario arm_scenario(Eigen::Vector3d start, Eigen::Vector3d obstacle, Eigen::Vector3d velocity) {
  const auto r = ScenarioRanges::defaults(EnvKind::kManipulator);
  Scenario s;
  s.kind = EnvKind::kManipulator;
  s.start = start;
  s.obstacle_position = obstacle;
  s.obstacle_velocity = velocity;
  s.obstacle_radius = 0.05;
  s.goal = Eigen::Vector3d(0.55, 0.3, 0.5);
  s.horizon = 150;
  s.dt = 0.2;
  s.agent_radius = 0.02;
  s.goal_tolerance = 0.05;
  s.workspace_lower = r.workspace_lower;
  s.workspace_upper = r.workspace_upper;
  return s;
}

Vector v2(double a, double b) { return Eigen::Vector2d(a, b); }
Vector v3(double a, double b, double c) { return Eigen::Vector3d(a, b, c); }

}  // namespace

TEST_CASE("vehicle step examples") {
  const Scenario s = vehicle_scenario({0, 0, 0}, {4, 4}, {0, 0}, 0.3, {-4, 4});
  EnvState st = reset(s);
  EnvState next = step_vehicle(st, v2(1, 0), s);
  CHECK(next.agent.isApprox(v3(0.1, 0, 0)));
  CHECK(next.elapsed == 1);

  st.agent = v3(0, 0, kPi / 2);
  next = step_vehicle(st, v2(1, 0), s);
  CHECK(next.agent[0] == doctest::Approx(std::cos(kPi / 2) * 0.1));
  CHECK(next.agent[1] == doctest::Approx(0.1));
  CHECK(next.agent[2] == doctest::Approx(kPi / 2));

  st.agent = v3(0, 0, 0);
  next = step_vehicle(st, v2(0, 1), s);
  CHECK(next.agent.head<2>().isZero());
  CHECK(next.agent[2] == doctest::Approx(0.1));

  // Out-of-range actions are clamped before integration.
  next = step_vehicle(st, v2(5, -9), s);
  CHECK(next.agent[0] == doctest::Approx(0.1));
  CHECK(next.agent[2] == doctest::Approx(-0.2));
}

TEST_CASE("manipulator step examples") {
  const Scenario s = arm_scenario({0.3, 0, 0.3}, {0.15, -0.3, 0.1}, {0.01, 0, 0});
  const EnvState st = reset(s);
  EnvState next = step_manipulator(st, v3(0.01, 0, 0), s);
  CHECK(next.agent.isApprox(v3(0.31, 0, 0.3)));

  EnvState edge = st;
  edge.agent = v3(0.59, 0.34, 0.3);
  next = step_manipulator(edge, v3(0.05, 0.05, 0), s);
  CHECK(next.agent[0] == 0.6);
  CHECK(next.agent[1] == 0.35);

  next = step_manipulator(st, Vector::Zero(3), s);
  CHECK(next.agent == st.agent);
  CHECK(next.obstacle_position.isApprox(st.obstacle_position + 0.2 * s.obstacle_velocity));
}

TEST_CASE("termination rules") {
  const Scenario s = vehicle_scenario({0, 0, 0}, {3, 0}, {0, 0}, 0.4, {-2, 0});
  CHECK(check_termination(v3(-2, 0, 0), s.obstacle_position, 5, s, 0.1, 0.15) == Termination::kReached);
  // Exactly touching counts as contact.
  CHECK(check_termination(v3(2.5, 0, 0), s.obstacle_position, 5, s, 0.1, 0.15) == Termination::kCollided);
  CHECK(check_termination(v3(2.51, 0, 0), s.obstacle_position, 5, s, 0.1, 0.15) == Termination::kCollided);
  CHECK(check_termination(v3(2.49, 0, 0), s.obstacle_position, 5, s, 0.1, 0.15) == Termination::kRunning);
  CHECK(check_termination(v3(0, 0, 0), s.obstacle_position, 5, s, 0.1, 0.15) == Termination::kRunning);
  CHECK(check_termination(v3(0, 0, 0), s.obstacle_position, 300, s, 0.1, 0.15) == Termination::kTimeout);
  // Collision outranks reaching when both hold.
  Scenario overlap = s;
  overlap.goal = v2(3, 0);
  CHECK(check_termination(v3(3, 0, 0), overlap.obstacle_position, 1, overlap, 0.1, 0.15) == Termination::kCollided);
  // Reaching outranks the timeout.
  CHECK(check_termination(v3(-2, 0, 0), s.obstacle_position, 300, s, 0.1, 0.15) == Termination::kReached);
}

TEST_CASE("stepping a terminal state is rejected") {
  const Scenario s = vehicle_scenario({0, 0, 0}, {0.3, 0}, {0, 0}, 0.3, {-3, 0});
  const EnvState st = reset(s);
  CHECK(st.termination == Termination::kCollided);
  CHECK_THROWS_AS(step(st, v2(0, 0), s), ValidationError);
  const Scenario ok = vehicle_scenario({0, 0, 0}, {3, 0}, {0, 0}, 0.3, {-3, 0});
  CHECK_THROWS_AS(step(reset(ok), v3(0, 0, 0), ok), ValidationError);
}

TEST_CASE("sampled scenarios satisfy the clearance invariants") {
  for (auto kind : {EnvKind::kVehicle, EnvKind::kManipulator}) {
    for (const auto& preset : preset_names()) {
      const auto ranges = ScenarioRanges::preset(kind, preset);
      Rng rng(derive_seed(99, static_cast<std::uint64_t>(kind)));
      for (int i = 0; i < 1000; ++i) {
        const Scenario s = sample_scenario(rng, ranges);
        const auto d = dims(kind);
        const Vector start = s.start.head(d.position);
        const double required = s.obstacle_radius + s.agent_radius + ranges.safe_margin;
        CHECK((start - s.obstacle_position).norm() > required);
        CHECK((s.goal - s.obstacle_position).norm() > required);
        CHECK(s.obstacle_radius >= ranges.radius_min);
        CHECK(s.obstacle_radius <= ranges.radius_max);
        const double speed = s.obstacle_velocity.norm();
        CHECK(speed >= ranges.speed_min - 1e-12);
        CHECK(speed <= ranges.speed_max + 1e-12);
        CHECK((start - s.goal).norm() >= ranges.min_goal_distance);
        CHECK(((start.array() >= ranges.start_lower.array()) && (start.array() <= ranges.start_upper.array())).all());
        CHECK(((s.goal.array() >= ranges.goal_lower.array()) && (s.goal.array() <= ranges.goal_upper.array())).all());
        if (kind == EnvKind::kVehicle) {
          CHECK(s.start[2] > -kPi);
          CHECK(s.start[2] <= kPi);
        }
      }
    }
  }
}

TEST_CASE("pinned ranges reproduce the pinned scenario") {
  ScenarioRanges r = ScenarioRanges::defaults(EnvKind::kVehicle);
  r.start_lower = r.start_upper = v2(-3, 0);
  r.goal_lower = r.goal_upper = v2(3, 0);
  r.heading_min = r.heading_max = 0.25;
  r.radius_min = r.radius_max = 0.3;
  r.speed_min = r.speed_max = 0.0;
  r.path_fraction_min = r.path_fraction_max = 0.5;
  r.lateral_offset_max = 0.0;
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Scenario s = sample_scenario(rng, r);
    CHECK(s.start.isApprox(v3(-3, 0, 0.25)));
    CHECK(s.goal.isApprox(v2(3, 0)));
    CHECK(s.obstacle_radius == 0.3);
    CHECK(s.obstacle_position.isZero(1e-12));
    CHECK(s.obstacle_velocity.isZero());
  }
}

TEST_CASE("malformed or unsatisfiable ranges are rejected") {
  ScenarioRanges r = ScenarioRanges::defaults(EnvKind::kVehicle);
  r.radius_min = 0.9;
  r.radius_max = 0.3;
  Rng rng(1);
  CHECK_THROWS_AS(sample_scenario(rng, r), ValidationError);
  r = ScenarioRanges::defaults(EnvKind::kVehicle);
  r.radius_min = 0.0;
  CHECK_THROWS_AS(sample_scenario(rng, r), ValidationError);
  r = ScenarioRanges::defaults(EnvKind::kVehicle);
  r.safe_margin = 50.0;
  r.max_attempts = 20;
  CHECK_THROWS_AS(sample_scenario(rng, r), ValidationError);
  CHECK_THROWS_AS(ScenarioRanges::preset(EnvKind::kVehicle, "windy"), ValidationError);
}

TEST_CASE("presets shift only their own range") {
  const auto base = ScenarioRanges::defaults(EnvKind::kVehicle);
  const auto fast = ScenarioRanges::preset(EnvKind::kVehicle, "shifted-speed");
  CHECK(fast.speed_max == doctest::Approx(0.75));
  CHECK(fast.radius_max == base.radius_max);
  const auto wide = ScenarioRanges::preset(EnvKind::kManipulator, "shifted-radius");
  CHECK(wide.radius_min == doctest::Approx(0.05));
  CHECK(wide.radius_max == doctest::Approx(0.10));
}

TEST_CASE("obstacle motion is exactly linear") {
  const Scenario s = vehicle_scenario({-4, -4, 0}, {0.123, -0.456}, {0.3137, -0.2718}, 0.3, {4, -4});
  EnvState st = reset(s);
  for (int k = 0; k < 1000; ++k) {
    st.agent = s.start;  // keep the agent parked away from the obstacle path
    st.termination = Termination::kRunning;
    st = step(st, v2(0, 0), s);
    const Vector expected = s.obstacle_position + (st.elapsed * s.dt) * s.obstacle_velocity;
    CHECK((st.obstacle_position - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK(obstacle_position_at(s, 1000).isApprox(s.obstacle_position + 100.0 * s.obstacle_velocity));
}

TEST_CASE("collision is symmetric and monotone in radius") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0), rad(0.05, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector2d a(u(rng), u(rng)), b(u(rng), u(rng));
    const double r = rad(rng);
    Scenario s = vehicle_scenario({0, 0, 0}, b, {0, 0}, r, {100, 100});
    const bool ab = check_termination(v3(a[0], a[1], 0), b, 0, s, 0.1, 0.15) == Termination::kCollided;
    const bool ba = check_termination(v3(b[0], b[1], 0), a, 0, s, 0.1, 0.15) == Termination::kCollided;
    CHECK(ab == ba);
    s.obstacle_radius = r + rad(rng);
    const bool grown = check_termination(v3(a[0], a[1], 0), b, 0, s, 0.1, 0.15) == Termination::kCollided;
    if (ab) CHECK(grown);
  }
}

TEST_CASE("a parked agent is hit by an obstacle aimed at it") {
  const Scenario s = vehicle_scenario({0, 0, 0}, {3, 0}, {-0.5, 0}, 0.3, {0, -4});
  EnvState st = reset(s);
  while (!st.terminal()) st = step(st, v2(0, 0), s);
  CHECK(st.termination == Termination::kCollided);
  const Scenario arm = arm_scenario({0.3, 0, 0.3}, {0.3, 0, 0.5}, {0, 0, -0.03});
  st = reset(arm);
  while (!st.terminal()) st = step(st, Vector::Zero(3), arm);
  CHECK(st.termination == Termination::kCollided);
}

TEST_CASE("heading stays in (-pi, pi] after every step") {
  const Scenario s = vehicle_scenario({0, 0, 3.0}, {4, 4}, {0, 0}, 0.3, {-4, 4});
  EnvState st = reset(s);
  for (int k = 0; k < 299 && !st.terminal(); ++k) {
    st = step(st, v2(0, k < 150 ? 2.0 : -2.0), s);
    CHECK(st.agent[2] > -kPi);
    CHECK(st.agent[2] <= kPi);
  }
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-0.5) == -0.5);
}

TEST_CASE("safety parameters track the current obstacle") {
  const Scenario s = vehicle_scenario({-4, 0, 0}, {1, 2}, {0.2, -0.1}, 0.5, {4, 0});
  EnvState st = reset(s);
  Vector c = current_safety_params(st, s);
  REQUIRE(c.size() == dims(EnvKind::kVehicle).safety);
  CHECK(c.head<2>() == s.obstacle_position);
  CHECK(c.segment<2>(2) == s.obstacle_velocity);
  CHECK(c[4] == 0.5);
  CHECK(c.tail<2>() == s.goal);
  for (int k = 1; k <= 7; ++k) {
    st = step(st, v2(0.5, 0.1), s);
    c = current_safety_params(st, s);
    CHECK(c[0] == doctest::Approx(1.0 + k * 0.1 * 0.2));
    CHECK(c[1] == doctest::Approx(2.0 - k * 0.1 * 0.1));
    CHECK(c.tail<2>() == s.goal);
  }
}

TEST_CASE("scenario hash separates scenarios") {
  const Scenario a = vehicle_scenario({0, 0, 0}, {3, 0}, {0, 0}, 0.3, {-3, 0});
  Scenario b = a;
  CHECK(scenario_hash(a) == scenario_hash(b));
  b.obstacle_radius = 0.31;
  CHECK(scenario_hash(a) != scenario_hash(b));
}

TEST_CASE("trajectory export writes one record per step") {
  const Scenario s = vehicle_scenario({0, 0, 0}, {3, 3}, {0, 0}, 0.3, {1, 0});
  EnvState st = reset(s);
  std::vector<TrajectoryStep> steps;
  for (int t = 0; t < 3; ++t) {
    const Vector a = v2(1, 0);
    steps.push_back({t, st.agent, st.obstacle_position, a, current_safety_params(st, s), st.termination});
    st = step(st, a, s);
  }
  steps.push_back({3, st.agent, st.obstacle_position, Vector(), current_safety_params(st, s), Termination::kTimeout});
  const auto path = (std::filesystem::temp_directory_path() / "genosil_traj.jsonl").string();
  write_trajectory_jsonl(path, steps);
  std::ifstream in(path);
  std::string line;
  int count = 0;
  while (std::getline(in, line)) {
    const Json rec = Json::parse(line);
    CHECK(rec.at("t").get<int>() == count);
    ++count;
  }
  CHECK(count == 4);
  std::filesystem::remove(path);
}
