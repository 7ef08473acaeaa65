#include <doctest.h>

#include <cmath>

#include "genosil/error.hpp"
#include "genosil/latent.hpp"
#include "oracles.hpp"

using namespace genosil;

namespace {

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

oracle::Vec flat(const LatentModel& model) {
  oracle::Vec v(static_cast<Eigen::Index>(model.parameter_count()));
  model.copy_parameters(std::span<double>(v.data(), v.size()));
  return v;
}

void randomize_biases(nn::DenseNet& net, Rng& rng) {
  for (std::size_t k = 0; k < net.depth(); ++k) net.layer(k).bias = normal_matrix(net.layer(k).bias.size(), 1, rng, 0.3);
}

}  // namespace

TEST_CASE("KL worked examples") {
  Matrix mu(1, 1), logvar(1, 1);
  mu << 0.0;
  logvar << 0.0;
  CHECK(kl_loss(mu, logvar).value == doctest::Approx(0.0));
  mu << 1.0;
  CHECK(kl_loss(mu, logvar).value == doctest::Approx(0.5));
  mu << 0.0;
  logvar << std::log(2.0);
  CHECK(kl_loss(mu, logvar).value == doctest::Approx(0.1534).epsilon(1e-3));
}

TEST_CASE("KL is non-negative and matches the loop form") {
  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    const Matrix mu = normal_matrix(4, 3, rng, 2.0);
    const Matrix logvar = normal_matrix(4, 3, rng, 3.0);
    const double value = kl_loss(mu, logvar).value;
    CHECK(value >= 0.0);
    CHECK(value == doctest::Approx(oracle::kl_divergence(mu, logvar)).epsilon(1e-12));
  }
}

TEST_CASE("KL gradients match central differences") {
  Rng rng(4);
  const Matrix mu = normal_matrix(3, 2, rng);
  const Matrix logvar = normal_matrix(3, 2, rng);
  const auto loss = kl_loss(mu, logvar);
  oracle::Vec packed(12);
  packed << Eigen::Map<const oracle::Vec>(mu.data(), 6), Eigen::Map<const oracle::Vec>(logvar.data(), 6);
  auto f = [](const oracle::Vec& p) {
    return oracle::kl_divergence(Eigen::Map<const Matrix>(p.data(), 3, 2), Eigen::Map<const Matrix>(p.data() + 6, 3, 2));
  };
  oracle::Vec analytic(12);
  analytic << Eigen::Map<const oracle::Vec>(loss.d_mu.data(), 6), Eigen::Map<const oracle::Vec>(loss.d_logvar.data(), 6);
  CHECK(oracle::compare_gradients(analytic, oracle::numeric_gradient(f, packed)).index == -1);
}

TEST_CASE("KL rejects mismatched or empty inputs") {
  CHECK_THROWS_AS(kl_loss(Matrix::Zero(2, 3), Matrix::Zero(3, 3)), ValidationError);
  CHECK_THROWS_AS(kl_loss(Matrix::Zero(2, 0), Matrix::Zero(2, 0)), ValidationError);
}

TEST_CASE("reparameterized samples differ by sigma times the noise difference") {
  Rng rng(8);
  const std::vector<Eigen::Index> hidden{16, 16};
  const LatentModel model = LatentModel::create(7, 4, hidden, rng);
  for (int i = 0; i < 200; ++i) {
    const Vector c = normal_matrix(7, 1, rng);
    const Vector e1 = normal_matrix(4, 1, rng), e2 = normal_matrix(4, 1, rng);
    const auto s1 = encode(model, c, e1), s2 = encode(model, c, e2);
    CHECK((s1.mu - s2.mu).norm() == 0.0);
    const Vector sigma = (0.5 * s1.logvar).array().exp();
    CHECK(((s1.z - s2.z) - sigma.cwiseProduct(e1 - e2)).cwiseAbs().maxCoeff() < 1e-12);
  }
  const Vector c = normal_matrix(7, 1, rng);
  CHECK(encode(model, c, Vector::Zero(4)).z == encode(model, c, Vector::Zero(4)).mu);
}

TEST_CASE("batched encoding matches per-sample encoding") {
  Rng rng(9);
  const std::vector<Eigen::Index> hidden{8};
  const LatentModel model = LatentModel::create(5, 3, hidden, rng);
  const Matrix c = normal_matrix(5, 6, rng), noise = normal_matrix(3, 6, rng);
  const auto pass = encode_batch(model, c, noise);
  for (Eigen::Index j = 0; j < 6; ++j) {
    const auto s = encode(model, c.col(j), noise.col(j));
    CHECK((pass.z.col(j) - s.z).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("encode rejects bad widths") {
  Rng rng(1);
  const std::vector<Eigen::Index> hidden{4};
  const LatentModel model = LatentModel::create(3, 2, hidden, rng);
  CHECK_THROWS_AS(encode(model, Vector::Zero(4), Vector::Zero(2)), ValidationError);
  CHECK_THROWS_AS(encode(model, Vector::Zero(3), Vector::Zero(3)), ValidationError);
  CHECK_THROWS_AS(decode(model, Vector::Zero(3)), ValidationError);
}

TEST_CASE("encoder backward matches central differences, clamped entries included") {
  Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Eigen::Index> hidden{6, 5};
    LatentModel model = LatentModel::create(4, 3, hidden, rng);
    randomize_biases(model.trunk(), rng);
    randomize_biases(model.mu_head(), rng);
    randomize_biases(model.logvar_head(), rng);
    // Push one log-variance unit far past the upper clamp.
    if (trial % 2 == 0) model.logvar_head().layer(0).bias[1] = 40.0;
    const Matrix c = normal_matrix(4, 3, rng), noise = normal_matrix(3, 3, rng), target = normal_matrix(3, 3, rng);

    // L = 0.5 * sum ||z - t||^2 + KL, evaluated sample by sample.
    auto loss_at = [&](const oracle::Vec& theta) {
      LatentModel m = model;
      m.assign_parameters(std::span<const double>(theta.data(), theta.size()));
      Matrix mu(3, 3), logvar(3, 3);
      double fit = 0.0;
      for (Eigen::Index j = 0; j < 3; ++j) {
        const auto s = encode(m, c.col(j), noise.col(j));
        fit += 0.5 * (s.z - target.col(j)).squaredNorm();
        mu.col(j) = s.mu;
        logvar.col(j) = s.logvar;
      }
      return fit + oracle::kl_divergence(mu, logvar);
    };

    const auto pass = encode_batch(model, c, noise);
    const auto kl = kl_loss(pass.mu, pass.logvar);
    const auto grads = encoder_backward(model, pass, pass.z - target, kl.d_mu, kl.d_logvar);
    oracle::Vec analytic = oracle::Vec::Zero(static_cast<Eigen::Index>(model.parameter_count()));
    std::size_t offset = 0;
    for (const nn::NetGradients* g : {&grads.trunk, &grads.mu_head, &grads.logvar_head}) {
      g->copy_to(std::span<double>(analytic.data() + offset, g->size()));
      offset += g->size();
    }
    const auto mismatch = oracle::compare_gradients(analytic, oracle::numeric_gradient(loss_at, flat(model), 1e-5));
    INFO("trial ", trial, " index ", mismatch.index, " analytic ", mismatch.analytic, " numeric ", mismatch.numeric);
    CHECK(mismatch.index == -1);
    if (trial % 2 == 0) CHECK(pass.logvar.row(1).maxCoeff() == kLogvarMax);
  }
}

TEST_CASE("encoder and decoder learn to reconstruct three points") {
  Rng rng(12);
  const std::vector<Eigen::Index> hidden{32, 32};
  LatentModel model = LatentModel::create(4, 3, hidden, rng);
  Matrix c(4, 3);
  c << 0.5, -0.5, 0.0,  //
      0.2, 0.9, -0.7,   //
      -0.3, 0.1, 0.8,   //
      0.6, -0.2, -0.4;
  auto recon_error = [&] {
    double total = 0.0;
    for (Eigen::Index j = 0; j < 3; ++j) total += (decode(model, encode(model, c.col(j), Vector::Zero(3)).mu) - c.col(j)).squaredNorm();
    return total / 3.0;
  };
  const double before = recon_error();
  nn::AdamState adam(static_cast<Eigen::Index>(model.parameter_count()), 1e-2);
  Vector params = flat(model);
  for (int step = 0; step < 500; ++step) {
    const auto pass = encode_batch(model, c, Matrix::Zero(3, 3));
    const auto dec = nn::forward(model.decoder(), pass.z);
    const auto loss = reconstruction_loss(c, dec.output);
    const auto dec_back = nn::backward(model.decoder(), dec.tape, loss.gradient);
    const Matrix zeros = Matrix::Zero(3, 3);
    const auto enc = encoder_backward(model, pass, dec_back.input_grad, zeros, zeros);
    Vector grad(params.size());
    std::size_t offset = 0;
    for (const nn::NetGradients* g : {&enc.trunk, &enc.mu_head, &enc.logvar_head, &dec_back.parameters}) {
      g->copy_to(std::span<double>(grad.data() + offset, g->size()));
      offset += g->size();
    }
    nn::adam_step(params, grad, adam);
    model.assign_parameters(std::span<const double>(params.data(), params.size()));
  }
  const double after = recon_error();
  CHECK(after < before);
  CHECK(after < 1e-3);
}
