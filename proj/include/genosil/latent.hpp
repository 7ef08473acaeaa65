#pragma once

// Variational encoder/decoder over safety parameters.
//
// The encoder is a ReLU trunk feeding two parallel linear heads (mean and
// log-variance). Samples use z = mu + exp(0.5 * logvar) * eps with the noise
// supplied by the caller, so inference passes eps = 0 and gets z = mu.
// Everything here operates on already-normalized safety parameters.

#include <cstddef>
#include <span>
#include <vector>

#include "genosil/nn.hpp"

namespace genosil {

using nn::Matrix;
using nn::Vector;

// log-variance is clamped to this range before exponentiation.
inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

struct LatentSample {
  Vector z;
  Vector mu;
  Vector logvar;
};

class LatentModel {
 public:
  LatentModel() = default;
  LatentModel(nn::DenseNet trunk, nn::DenseNet mu_head, nn::DenseNet logvar_head,
              nn::DenseNet decoder);

  // Trunk: safety_width -> hidden... (ReLU); heads: hidden.back() -> latent_width;
  // decoder mirrors the trunk: latent_width -> reversed hidden (ReLU) -> safety_width.
  static LatentModel create(Eigen::Index safety_width, Eigen::Index latent_width,
                            std::span<const Eigen::Index> hidden, Rng& rng);

  Eigen::Index safety_width() const { return trunk_.input_width(); }
  Eigen::Index latent_width() const { return mu_head_.output_width(); }

  const nn::DenseNet& trunk() const { return trunk_; }
  const nn::DenseNet& mu_head() const { return mu_head_; }
  const nn::DenseNet& logvar_head() const { return logvar_head_; }
  const nn::DenseNet& decoder() const { return decoder_; }
  nn::DenseNet& trunk() { return trunk_; }
  nn::DenseNet& mu_head() { return mu_head_; }
  nn::DenseNet& logvar_head() { return logvar_head_; }
  nn::DenseNet& decoder() { return decoder_; }

  // Flat order: trunk, mu head, logvar head, decoder.
  std::size_t parameter_count() const;
  void copy_parameters(std::span<double> out) const;
  void assign_parameters(std::span<const double> in);

 private:
  nn::DenseNet trunk_;
  nn::DenseNet mu_head_;
  nn::DenseNet logvar_head_;
  nn::DenseNet decoder_;
};

LatentSample encode(const LatentModel& model, const Vector& safety_params, const Vector& noise);
Vector decode(const LatentModel& model, const Vector& z);

// Batched encoder pass that keeps what the backward pass needs.
struct EncoderPass {
  nn::ForwardResult trunk;
  nn::ForwardResult mu_head;
  nn::ForwardResult logvar_head;
  Matrix mu;
  Matrix logvar;  // clamped
  Matrix sigma;
  Matrix noise;
  Matrix z;
};

EncoderPass encode_batch(const LatentModel& model, const Matrix& safety_params, const Matrix& noise);

struct EncoderGradients {
  nn::NetGradients trunk;
  nn::NetGradients mu_head;
  nn::NetGradients logvar_head;
  Matrix input_grad;
};

// Chains dL/dz, dL/dmu and dL/dlogvar (each latent_width x N) back through the
// sampling step and both heads into the trunk. dL/dz reaches mu directly and
// logvar through sigma * noise / 2; entries whose logvar was clamped get zero.
EncoderGradients encoder_backward(const LatentModel& model, const EncoderPass& pass,
                                  const Matrix& d_z, const Matrix& d_mu, const Matrix& d_logvar);

struct KlLoss {
  double value = 0.0;
  Matrix d_mu;
  Matrix d_logvar;
};

// -(1/2N) sum_ij (1 + logvar_ij - mu_ij^2 - exp(logvar_ij)), columns are samples.
KlLoss kl_loss(const Matrix& mu, const Matrix& logvar);

// (1/N) sum_i ||c_i - c_hat_i||^2; gradient is with respect to the reconstruction.
nn::SquaredErrorLoss reconstruction_loss(const Matrix& target, const Matrix& reconstruction);

}  // namespace genosil
