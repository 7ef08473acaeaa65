#include "genosil/latent.hpp"

#include <cmath>
#include <vector>

#include "genosil/error.hpp"

namespace genosil {

LatentModel::LatentModel(nn::DenseNet trunk, nn::DenseNet mu_head, nn::DenseNet logvar_head,
                         nn::DenseNet decoder)
    : trunk_(std::move(trunk)),
      mu_head_(std::move(mu_head)),
      logvar_head_(std::move(logvar_head)),
      decoder_(std::move(decoder)) {
  require(!trunk_.empty() && !mu_head_.empty() && !logvar_head_.empty() && !decoder_.empty(),
          "latent model networks must be non-empty");
  require(mu_head_.input_width() == trunk_.output_width() &&
              logvar_head_.input_width() == trunk_.output_width(),
          "encoder heads must consume the trunk output");
  require(mu_head_.output_width() == logvar_head_.output_width(),
          "mean and log-variance heads must share the latent width");
  require(decoder_.input_width() == mu_head_.output_width(),
          "decoder input width must equal the latent width");
  require(decoder_.output_width() == trunk_.input_width(),
          "decoder output width must equal the safety parameter width");
}

LatentModel LatentModel::create(Eigen::Index safety_width, Eigen::Index latent_width,
                                std::span<const Eigen::Index> hidden, Rng& rng) {
  require(!hidden.empty(), "encoder needs at least one hidden layer");
  std::vector<Eigen::Index> trunk_widths{safety_width};
  trunk_widths.insert(trunk_widths.end(), hidden.begin(), hidden.end());
  const std::vector<Eigen::Index> head_widths{hidden.back(), latent_width};
  std::vector<Eigen::Index> decoder_widths{latent_width};
  decoder_widths.insert(decoder_widths.end(), hidden.rbegin(), hidden.rend());
  decoder_widths.push_back(safety_width);

  using nn::Activation;
  auto trunk = nn::DenseNet::kaiming(trunk_widths, Activation::kRelu, Activation::kRelu, rng);
  auto mu = nn::DenseNet::kaiming(head_widths, Activation::kRelu, Activation::kIdentity, rng);
  auto logvar = nn::DenseNet::kaiming(head_widths, Activation::kRelu, Activation::kIdentity, rng);
  auto decoder =
      nn::DenseNet::kaiming(decoder_widths, Activation::kRelu, Activation::kIdentity, rng);
  return LatentModel(std::move(trunk), std::move(mu), std::move(logvar), std::move(decoder));
}

std::size_t LatentModel::parameter_count() const {
  return trunk_.parameter_count() + mu_head_.parameter_count() + logvar_head_.parameter_count() +
         decoder_.parameter_count();
}

void LatentModel::copy_parameters(std::span<double> out) const {
  require(out.size() == parameter_count(), "parameter buffer size mismatch");
  std::size_t offset = 0;
  for (const nn::DenseNet* net : {&trunk_, &mu_head_, &logvar_head_, &decoder_}) {
    net->copy_parameters(out.subspan(offset, net->parameter_count()));
    offset += net->parameter_count();
  }
}

void LatentModel::assign_parameters(std::span<const double> in) {
  require(in.size() == parameter_count(), "parameter buffer size mismatch");
  std::size_t offset = 0;
  for (nn::DenseNet* net : {&trunk_, &mu_head_, &logvar_head_, &decoder_}) {
    net->assign_parameters(in.subspan(offset, net->parameter_count()));
    offset += net->parameter_count();
  }
}

LatentSample encode(const LatentModel& model, const Vector& safety_params, const Vector& noise) {
  require(safety_params.size() == model.safety_width(), "safety parameter width mismatch");
  require(noise.size() == model.latent_width(), "noise width must equal the latent width");
  require(safety_params.allFinite(), "safety parameters must be finite");
  const Vector hidden = nn::forward(model.trunk(), safety_params);
  LatentSample sample;
  sample.mu = nn::forward(model.mu_head(), hidden);
  sample.logvar = nn::forward(model.logvar_head(), hidden).cwiseMax(kLogvarMin).cwiseMin(kLogvarMax);
  if (!sample.mu.allFinite() || !sample.logvar.allFinite()) {
    throw NumericalError("encoder produced a non-finite mean or log-variance");
  }
  sample.z = sample.mu + (0.5 * sample.logvar).array().exp().matrix().cwiseProduct(noise);
  return sample;
}

Vector decode(const LatentModel& model, const Vector& z) {
  require(z.size() == model.latent_width(), "latent width mismatch");
  return nn::forward(model.decoder(), z);
}

EncoderPass encode_batch(const LatentModel& model, const Matrix& safety_params,
                         const Matrix& noise) {
  require(noise.rows() == model.latent_width() && noise.cols() == safety_params.cols(),
          "noise must be latent_width x batch");
  EncoderPass pass;
  pass.trunk = nn::forward(model.trunk(), safety_params);
  pass.mu_head = nn::forward(model.mu_head(), pass.trunk.output);
  pass.logvar_head = nn::forward(model.logvar_head(), pass.trunk.output);
  pass.mu = pass.mu_head.output;
  pass.logvar = pass.logvar_head.output.cwiseMax(kLogvarMin).cwiseMin(kLogvarMax);
  if (!pass.mu.allFinite() || !pass.logvar.allFinite()) {
    throw NumericalError("encoder produced a non-finite mean or log-variance");
  }
  pass.sigma = (0.5 * pass.logvar).array().exp().matrix();
  pass.noise = noise;
  pass.z = pass.mu + pass.sigma.cwiseProduct(noise);
  return pass;
}

EncoderGradients encoder_backward(const LatentModel& model, const EncoderPass& pass,
                                  const Matrix& d_z, const Matrix& d_mu,
                                  const Matrix& d_logvar) {
  const auto rows = model.latent_width();
  const auto cols = pass.z.cols();
  require(d_z.rows() == rows && d_z.cols() == cols && d_mu.rows() == rows &&
              d_mu.cols() == cols && d_logvar.rows() == rows && d_logvar.cols() == cols,
          "latent gradient shapes must be latent_width x batch");

  const Matrix total_mu = d_z + d_mu;
  Matrix total_logvar = d_logvar + 0.5 * d_z.cwiseProduct(pass.sigma).cwiseProduct(pass.noise);
  const Matrix& raw = pass.logvar_head.output;
  total_logvar = (raw.array() < kLogvarMin || raw.array() > kLogvarMax).select(0.0, total_logvar);

  auto mu_back = nn::backward(model.mu_head(), pass.mu_head.tape, total_mu);
  auto logvar_back = nn::backward(model.logvar_head(), pass.logvar_head.tape, total_logvar);
  auto trunk_back =
      nn::backward(model.trunk(), pass.trunk.tape, mu_back.input_grad + logvar_back.input_grad);

  return {std::move(trunk_back.parameters), std::move(mu_back.parameters),
          std::move(logvar_back.parameters), std::move(trunk_back.input_grad)};
}

KlLoss kl_loss(const Matrix& mu, const Matrix& logvar) {
  require(mu.rows() == logvar.rows() && mu.cols() == logvar.cols(),
          "mean and log-variance shapes differ");
  require(mu.cols() > 0, "KL loss over an empty batch");
  require(mu.allFinite() && logvar.allFinite(), "KL loss inputs must be finite");
  const double n = static_cast<double>(mu.cols());
  const auto variance = logvar.array().exp();
  KlLoss loss;
  loss.value =
      -0.5 / n * (1.0 + logvar.array() - mu.array().square() - variance).sum() + 0.0;  // no -0
  loss.d_mu = mu / n;
  loss.d_logvar = (0.5 / n) * (variance - 1.0).matrix();
  return loss;
}

nn::SquaredErrorLoss reconstruction_loss(const Matrix& target, const Matrix& reconstruction) {
  require(target.allFinite() && reconstruction.allFinite(),
          "reconstruction loss inputs must be finite");
  return nn::squared_error_loss(reconstruction, target);
}

}  // namespace genosil
