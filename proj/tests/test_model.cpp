#include <doctest.h>

#include "genosil/envs.hpp"
#include "genosil/error.hpp"
#include "genosil/model.hpp"
#include "oracles.hpp"

using namespace genosil;

namespace {

Batch random_batch(EnvKind kind, int n, Rng& rng) {
  const auto ranges = ScenarioRanges::defaults(kind);
  const auto d = dims(kind);
  std::normal_distribution<double> normal(0.0, 0.05);
  Batch batch{Matrix(d.state, n), Matrix(d.safety, n), Matrix(d.action, n)};
  for (int j = 0; j < n; ++j) {
    const Scenario s = sample_scenario(rng, ranges);
    batch.states.col(j) = s.start;
    batch.safety_params.col(j) = current_safety_params(reset(s), s);
    for (Eigen::Index i = 0; i < d.action; ++i) batch.actions(i, j) = normal(rng);
  }
  return batch;
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = normal(rng);
  return m;
}

}  // namespace

TEST_CASE("loss parts combine and match independent formulas") {
  Rng rng(10);
  const std::vector<Eigen::Index> hidden{8};
  const auto kind = EnvKind::kVehicle;
  const auto model = GenosilModel::create(kind, ScenarioRanges::defaults(kind), 3, hidden, hidden, rng);
  const Batch batch = random_batch(kind, 6, rng);
  const Matrix noise = normal_matrix(3, 6, rng);
  const auto loss = genosil_loss(model, batch, noise, 0.3, 0.7, {});
  CHECK(loss.total == doctest::Approx(loss.imitation + 0.3 * loss.kl + 0.7 * loss.reconstruction));

  Matrix mu(3, 6), logvar(3, 6), predicted(2, 6), recon(7, 6), target(7, 6);
  for (Eigen::Index j = 0; j < 6; ++j) {
    const Vector c = model.safety_normalizer.apply(batch.safety_params.col(j));
    const auto sample = encode(model.latent, c, noise.col(j));
    mu.col(j) = sample.mu;
    logvar.col(j) = sample.logvar;
    predicted.col(j) = policy_output(model.policy, batch.states.col(j), sample.z);
    recon.col(j) = decode(model.latent, sample.z);
    target.col(j) = c;
  }
  CHECK(loss.imitation == doctest::Approx(oracle::mean_squared_distance(predicted, batch.actions)));
  CHECK(loss.kl == doctest::Approx(oracle::kl_divergence(mu, logvar)));
  CHECK(loss.reconstruction == doctest::Approx(oracle::mean_squared_distance(recon, target)));
}

TEST_CASE("chained gradient matches central differences on random draws") {
  Rng rng(42);
  int draws = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto kind = trial % 2 == 0 ? EnvKind::kVehicle : EnvKind::kManipulator;
    const std::vector<Eigen::Index> enc{6}, pol{7};
    auto model = GenosilModel::create(kind, ScenarioRanges::defaults(kind), 2, enc, pol, rng);
    // Small random biases move units away from ReLU kinks.
    std::vector<double> theta(model.parameter_count());
    model.copy_parameters(theta);
    std::normal_distribution<double> jitter(0.0, 0.05);
    for (auto& t : theta) t += jitter(rng);
    model.assign_parameters(theta);

    const Batch batch = random_batch(kind, 3, rng);
    const Matrix noise = normal_matrix(2, 3, rng);
    const double beta = 0.5, gamma = 0.25;
    oracle::Vec analytic(static_cast<Eigen::Index>(theta.size()));
    genosil_loss(model, batch, noise, beta, gamma, std::span<double>(analytic.data(), analytic.size()));

    auto value = [&](const oracle::Vec& p) {
      GenosilModel m = model;
      m.assign_parameters(std::span<const double>(p.data(), p.size()));
      return genosil_loss(m, batch, noise, beta, gamma, {}).total;
    };
    const oracle::Vec x = Eigen::Map<const oracle::Vec>(theta.data(), analytic.size());
    const auto mismatch = oracle::compare_gradients(analytic, oracle::numeric_gradient(value, x, 1e-5));
    INFO("trial ", trial, " index ", mismatch.index, " analytic ", mismatch.analytic, " numeric ", mismatch.numeric);
    CHECK(mismatch.index == -1);
    ++draws;
  }
  CHECK(draws >= 100);
}

TEST_CASE("baseline gradient matches central differences") {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const auto kind = trial % 2 == 0 ? EnvKind::kVehicle : EnvKind::kManipulator;
    const std::vector<Eigen::Index> pol{9};
    auto model = GcbcModel::create(kind, ScenarioRanges::defaults(kind), pol, rng);
    const Batch batch = random_batch(kind, 4, rng);
    oracle::Vec analytic(static_cast<Eigen::Index>(model.parameter_count()));
    gcbc_loss(model, batch, std::span<double>(analytic.data(), analytic.size()));
    oracle::Vec x(analytic.size());
    model.copy_parameters(std::span<double>(x.data(), x.size()));
    auto value = [&](const oracle::Vec& p) {
      GcbcModel m = model;
      m.assign_parameters(std::span<const double>(p.data(), p.size()));
      return gcbc_loss(m, batch, {}).total;
    };
    CHECK(oracle::compare_gradients(analytic, oracle::numeric_gradient(value, x, 1e-5)).index == -1);
  }
}

TEST_CASE("loss rejects malformed batches") {
  Rng rng(1);
  const std::vector<Eigen::Index> hidden{4};
  const auto model = GenosilModel::create(EnvKind::kVehicle, ScenarioRanges::defaults(EnvKind::kVehicle), 2, hidden, hidden, rng);
  Batch empty{Matrix(3, 0), Matrix(7, 0), Matrix(2, 0)};
  CHECK_THROWS_AS(genosil_loss(model, empty, Matrix(2, 0), 0.1, 0.1, {}), ValidationError);
  Batch wrong{Matrix::Zero(3, 2), Matrix::Zero(6, 2), Matrix::Zero(2, 2)};
  CHECK_THROWS_AS(genosil_loss(model, wrong, Matrix::Zero(2, 2), 0.1, 0.1, {}), ValidationError);
  CHECK_THROWS_AS(GenosilModel::create(EnvKind::kVehicle, ScenarioRanges::defaults(EnvKind::kManipulator), 2, hidden, hidden, rng),
                  ValidationError);
}
