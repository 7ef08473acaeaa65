#include "genosil/model.hpp"

#include "genosil/error.hpp"

namespace genosil {

Eigen::Index default_latent_width(EnvKind kind) { return kind == EnvKind::kVehicle ? 8 : 12; }

Eigen::Index heading_index(EnvKind kind) { return kind == EnvKind::kVehicle ? 2 : -1; }

GenosilModel GenosilModel::create(EnvKind kind, const ScenarioRanges& ranges,
                                  Eigen::Index latent_width,
                                  std::span<const Eigen::Index> encoder_hidden,
                                  std::span<const Eigen::Index> policy_hidden, Rng& rng) {
  require(ranges.kind == kind, "scenario ranges belong to a different environment");
  require(latent_width > 0, "latent width must be > 0");
  const auto d = dims(kind);
  GenosilModel model;
  model.kind = kind;
  model.safety_normalizer = genosil::safety_normalizer(ranges);
  model.latent = LatentModel::create(d.safety, latent_width, encoder_hidden, rng);
  model.policy = make_policy(Conditioning::kLatent, state_normalizer(ranges),
                             AffineNormalizer::identity(latent_width), action_bounds(kind),
                             policy_hidden, rng, heading_index(kind));
  return model;
}

LatentSample GenosilModel::embed(const Vector& safety_params) const {
  return encode(latent, safety_normalizer.apply(safety_params),
                Vector::Zero(latent.latent_width()));
}

Vector GenosilModel::act(const Vector& state, const Vector& safety_params) const {
  return genosil::act(policy, state, embed(safety_params).z);
}

std::size_t GenosilModel::parameter_count() const {
  return latent.parameter_count() + policy.net.parameter_count();
}

void GenosilModel::copy_parameters(std::span<double> out) const {
  require(out.size() == parameter_count(), "parameter buffer size mismatch");
  latent.copy_parameters(out.first(latent.parameter_count()));
  policy.net.copy_parameters(out.subspan(latent.parameter_count()));
}

void GenosilModel::assign_parameters(std::span<const double> in) {
  require(in.size() == parameter_count(), "parameter buffer size mismatch");
  latent.assign_parameters(in.first(latent.parameter_count()));
  policy.net.assign_parameters(in.subspan(latent.parameter_count()));
}

GcbcModel GcbcModel::create(EnvKind kind, const ScenarioRanges& ranges,
                            std::span<const Eigen::Index> policy_hidden, Rng& rng) {
  require(ranges.kind == kind, "scenario ranges belong to a different environment");
  GcbcModel model;
  model.kind = kind;
  model.policy = make_policy(Conditioning::kGoal, state_normalizer(ranges), goal_normalizer(ranges),
                             action_bounds(kind), policy_hidden, rng, heading_index(kind));
  return model;
}

Vector GcbcModel::act(const Vector& state, const Vector& goal) const {
  return act_gcbc(policy, state, goal);
}

Matrix goal_rows(EnvKind kind, const Matrix& safety_params) {
  const auto d = dims(kind);
  require(safety_params.rows() == d.safety, "safety parameter width does not match the environment");
  return safety_params.bottomRows(d.position);
}

namespace {

void check_batch(const Batch& batch, EnvKind kind) {
  const auto d = dims(kind);
  const auto n = batch.states.cols();
  require(n > 0, "empty batch");
  require(batch.states.rows() == d.state && batch.safety_params.rows() == d.safety &&
              batch.actions.rows() == d.action,
          "batch widths do not match the environment");
  require(batch.safety_params.cols() == n && batch.actions.cols() == n,
          "batch columns disagree");
}

void write_gradients(const nn::NetGradients& g, std::span<double> out, std::size_t& offset) {
  g.copy_to(out.subspan(offset, g.size()));
  offset += g.size();
}

}  // namespace

LossBreakdown genosil_loss(const GenosilModel& model, const Batch& batch, const Matrix& noise,
                           double beta, double gamma, std::span<double> gradient) {
  check_batch(batch, model.kind);
  const bool want_gradient = !gradient.empty();
  require(!want_gradient || gradient.size() == model.parameter_count(),
          "gradient buffer size mismatch");

  const Matrix c = model.safety_normalizer.apply_columns(batch.safety_params);
  const EncoderPass enc = encode_batch(model.latent, c, noise);

  const Matrix policy_in = policy_inputs(model.policy, batch.states, enc.z);
  const auto policy_pass = nn::forward(model.policy.net, policy_in);
  const auto decoder_pass = nn::forward(model.latent.decoder(), enc.z);

  const auto imitation = imitation_loss(policy_pass.output, batch.actions);
  const auto kl = kl_loss(enc.mu, enc.logvar);
  const auto recon = reconstruction_loss(c, decoder_pass.output);

  LossBreakdown loss{imitation.value, kl.value, recon.value,
                     imitation.value + beta * kl.value + gamma * recon.value};
  if (!std::isfinite(loss.total)) throw NumericalError("non-finite training loss");
  if (!want_gradient) return loss;

  const auto policy_back = nn::backward(model.policy.net, policy_pass.tape, imitation.gradient);
  const auto decoder_back =
      nn::backward(model.latent.decoder(), decoder_pass.tape, gamma * recon.gradient);

  const Matrix d_z = policy_back.input_grad.bottomRows(enc.z.rows()) + decoder_back.input_grad;
  const auto enc_back =
      encoder_backward(model.latent, enc, d_z, beta * kl.d_mu, beta * kl.d_logvar);

  std::size_t offset = 0;
  write_gradients(enc_back.trunk, gradient, offset);
  write_gradients(enc_back.mu_head, gradient, offset);
  write_gradients(enc_back.logvar_head, gradient, offset);
  write_gradients(decoder_back.parameters, gradient, offset);
  write_gradients(policy_back.parameters, gradient, offset);
  return loss;
}

LossBreakdown gcbc_loss(const GcbcModel& model, const Batch& batch, std::span<double> gradient) {
  check_batch(batch, model.kind);
  const bool want_gradient = !gradient.empty();
  require(!want_gradient || gradient.size() == model.parameter_count(),
          "gradient buffer size mismatch");
  const Matrix input = policy_inputs(model.policy, batch.states, goal_rows(model.kind, batch.safety_params));
  const auto pass = nn::forward(model.policy.net, input);
  const auto imitation = imitation_loss(pass.output, batch.actions);
  LossBreakdown loss{imitation.value, 0.0, 0.0, imitation.value};
  if (!std::isfinite(loss.total)) throw NumericalError("non-finite training loss");
  if (!want_gradient) return loss;
  const auto back = nn::backward(model.policy.net, pass.tape, imitation.gradient);
  back.parameters.copy_to(gradient);
  return loss;
}

}  // namespace genosil
