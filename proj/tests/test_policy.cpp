#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "genosil/checkpoint.hpp"
#include "genosil/envs.hpp"
#include "genosil/error.hpp"
#include "genosil/model.hpp"
#include "genosil/policy.hpp"
#include "oracles.hpp"

using namespace genosil;

namespace {

const std::vector<Eigen::Index> kSmall{16, 16};

Batch random_batch(EnvKind kind, int n, Rng& rng) {
  const auto ranges = ScenarioRanges::defaults(kind);
  const auto d = dims(kind);
  const auto bounds = action_bounds(kind);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Batch batch{Matrix(d.state, n), Matrix(d.safety, n), Matrix(d.action, n)};
  for (int j = 0; j < n; ++j) {
    const Scenario s = sample_scenario(rng, ranges);
    batch.states.col(j) = s.start;
    batch.safety_params.col(j) = current_safety_params(reset(s), s);
    for (Eigen::Index i = 0; i < d.action; ++i)
      batch.actions(i, j) = bounds.lower[i] + unit(rng) * (bounds.upper[i] - bounds.lower[i]);
  }
  return batch;
}

}  // namespace

TEST_CASE("a policy with all-zero parameters outputs zero") {
  Rng rng(1);
  for (auto kind : {EnvKind::kVehicle, EnvKind::kManipulator}) {
    auto model = GenosilModel::create(kind, ScenarioRanges::defaults(kind), 4, kSmall, kSmall, rng);
    std::vector<double> zeros(model.policy.net.parameter_count(), 0.0);
    model.policy.net.assign_parameters(zeros);
    const auto d = dims(kind);
    const Vector a = act(model.policy, Vector::Ones(d.state), Vector::Ones(4));
    CHECK(a.isZero());
  }
}

TEST_CASE("action bounds clamp component-wise") {
  const auto bounds = action_bounds(EnvKind::kVehicle);
  Vector raw(2);
  raw << 1.5, -3.0;
  const Vector a = bounds.clamp(raw);
  CHECK(a[0] == 1.0);
  CHECK(a[1] == -2.0);
  raw << -0.2, 0.7;
  CHECK(bounds.clamp(raw) == Vector((Vector(2) << 0.0, 0.7).finished()));
  CHECK(bounds.contains(a));
  CHECK_FALSE(bounds.contains(raw));
  const auto arm = action_bounds(EnvKind::kManipulator);
  CHECK(arm.clamp(Vector::Constant(3, 0.2)) == Vector::Constant(3, 0.05));
  CHECK_THROWS_AS(arm.clamp(Vector::Zero(2)), ValidationError);
}

TEST_CASE("clamped actions always land inside the bounds") {
  Rng rng(6);
  auto model = GenosilModel::create(EnvKind::kVehicle, ScenarioRanges::defaults(EnvKind::kVehicle), 8, kSmall, kSmall, rng);
  // Inflate the output layer so raw outputs routinely leave the box.
  model.policy.net.layer(model.policy.net.depth() - 1).weight *= 50.0;
  std::normal_distribution<double> normal(0.0, 3.0);
  const auto bounds = action_bounds(EnvKind::kVehicle);
  for (int i = 0; i < 500; ++i) {
    Vector s(3), z(8);
    for (auto& v : s) v = normal(rng);
    for (auto& v : z) v = normal(rng);
    CHECK(bounds.contains(act(model.policy, s, z)));
  }
}

TEST_CASE("imitation loss matches the loop oracle") {
  Rng rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix p(3, 11), e(3, 11);
  for (auto* m : {&p, &e})
    for (Eigen::Index k = 0; k < m->size(); ++k) m->data()[k] = normal(rng);
  const auto loss = imitation_loss(p, e);
  CHECK(loss.value == doctest::Approx(oracle::mean_squared_distance(p, e)).epsilon(1e-14));
  CHECK(loss.gradient.isApprox(2.0 * (p - e) / 11.0));
  p(0, 0) = std::nan("");
  CHECK_THROWS_AS(imitation_loss(p, e), ValidationError);
}

TEST_CASE("heading enters the vehicle policy as cosine and sine") {
  Rng rng(2);
  const auto ranges = ScenarioRanges::defaults(EnvKind::kVehicle);
  const auto model = GenosilModel::create(EnvKind::kVehicle, ranges, 8, kSmall, kSmall, rng);
  CHECK(model.policy.heading_index == 2);
  CHECK(model.policy.state_feature_width() == 4);
  CHECK(model.policy.net.input_width() == 4 + 8);
  Vector s(3);
  s << 1.0, -2.0, 0.7;
  const Vector z = Vector::LinSpaced(8, -1.0, 1.0);
  const Matrix in = policy_inputs(model.policy, s, z);
  const Vector ns = model.policy.state_normalizer.apply(s);
  CHECK(in(0, 0) == ns[0]);
  CHECK(in(1, 0) == ns[1]);
  CHECK(in(2, 0) == doctest::Approx(std::cos(0.7)));
  CHECK(in(3, 0) == doctest::Approx(std::sin(0.7)));
  CHECK(in.bottomRows(8) == Matrix(z));
  // Angles a full turn apart give the same action.
  Vector turned = s;
  turned[2] -= 2.0 * std::numbers::pi;
  CHECK((act(model.policy, s, z) - act(model.policy, turned, z)).norm() < 1e-12);

  const auto arm = GenosilModel::create(EnvKind::kManipulator, ScenarioRanges::defaults(EnvKind::kManipulator), 12, kSmall, kSmall, rng);
  CHECK(arm.policy.heading_index == -1);
  CHECK(arm.policy.net.input_width() == 3 + 12);
}

TEST_CASE("policy rejects wrong widths") {
  Rng rng(3);
  const auto model = GcbcModel::create(EnvKind::kVehicle, ScenarioRanges::defaults(EnvKind::kVehicle), kSmall, rng);
  CHECK_THROWS_AS(model.act(Vector::Zero(2), Vector::Zero(2)), ValidationError);
  CHECK_THROWS_AS(model.act(Vector::Zero(3), Vector::Zero(3)), ValidationError);
  CHECK_THROWS_AS(act(model.policy, Vector::Zero(3), Vector::Zero(2)), ValidationError);
}

TEST_CASE("goal-conditioned baseline never sees the obstacle") {
  Rng rng(4);
  for (auto kind : {EnvKind::kVehicle, EnvKind::kManipulator}) {
    const auto model = GcbcModel::create(kind, ScenarioRanges::defaults(kind), kSmall, rng);
    const auto d = dims(kind);
    CHECK(model.policy.condition_width() == d.position);
    Batch batch = random_batch(kind, 20, rng);
    const double before = gcbc_loss(model, batch, {}).imitation;
    // Scramble every obstacle entry; the goal block is untouched.
    batch.safety_params.topRows(d.safety - d.position).setRandom();
    CHECK(gcbc_loss(model, batch, {}).imitation == before);
  }
}

TEST_CASE("checkpoints round-trip exactly") {
  Rng rng(5);
  const auto dir = std::filesystem::temp_directory_path() / "genosil_policy_ckpt";
  std::filesystem::create_directories(dir);
  for (auto kind : {EnvKind::kVehicle, EnvKind::kManipulator}) {
    const auto ranges = ScenarioRanges::defaults(kind);
    const auto d = dims(kind);
    Checkpoint a{GenosilModel::create(kind, ranges, 5, kSmall, kSmall, rng)};
    Checkpoint b{GcbcModel::create(kind, ranges, kSmall, rng)};
    for (const Checkpoint* original : {&a, &b}) {
      const auto path = (dir / "model.json").string();
      save_checkpoint(path, *original);
      const Checkpoint loaded = load_checkpoint(path);
      CHECK(loaded.method() == original->method());
      CHECK(loaded.env() == kind);
      CHECK(checkpoint_to_json(loaded) == checkpoint_to_json(*original));
      const Batch batch = random_batch(kind, 10, rng);
      for (Eigen::Index j = 0; j < 10; ++j) {
        const Vector s = batch.states.col(j), c = batch.safety_params.col(j);
        auto action = [&](const Checkpoint& ck) {
          if (const auto* g = std::get_if<GenosilModel>(&ck.model)) return g->act(s, c);
          return std::get<GcbcModel>(ck.model).act(s, c.tail(d.position));
        };
        CHECK(action(loaded) == action(*original));
      }
    }
  }
  std::filesystem::remove_all(dir);
}
