#pragma once

// Full learned controllers: GenOSIL (encoder + decoder + latent-conditioned
// policy) and the GC-BC baseline (goal-conditioned policy), plus the batched
// losses and flat parameter gradients used by training.

#include <cstddef>
#include <span>
#include <vector>

#include "genosil/envs.hpp"
#include "genosil/latent.hpp"
#include "genosil/policy.hpp"

namespace genosil {

// Default latent width per environment (8 for the vehicle, 12 for the manipulator).
Eigen::Index default_latent_width(EnvKind kind);

// Index of the heading entry in the agent state, or -1 (manipulator).
Eigen::Index heading_index(EnvKind kind);

struct GenosilModel {
  EnvKind kind = EnvKind::kVehicle;
  AffineNormalizer safety_normalizer;
  LatentModel latent;
  PolicyNet policy;

  static GenosilModel create(EnvKind kind, const ScenarioRanges& ranges, Eigen::Index latent_width,
                             std::span<const Eigen::Index> encoder_hidden,
                             std::span<const Eigen::Index> policy_hidden, Rng& rng);

  // z = mu(normalized c), deterministic.
  LatentSample embed(const Vector& safety_params) const;
  Vector act(const Vector& state, const Vector& safety_params) const;

  // Flat order: latent model (trunk, mu head, logvar head, decoder), then policy.
  std::size_t parameter_count() const;
  void copy_parameters(std::span<double> out) const;
  void assign_parameters(std::span<const double> in);
};

struct GcbcModel {
  EnvKind kind = EnvKind::kVehicle;
  PolicyNet policy;

  static GcbcModel create(EnvKind kind, const ScenarioRanges& ranges,
                          std::span<const Eigen::Index> policy_hidden, Rng& rng);

  Vector act(const Vector& state, const Vector& goal) const;

  std::size_t parameter_count() const { return policy.net.parameter_count(); }
  void copy_parameters(std::span<double> out) const { policy.net.copy_parameters(out); }
  void assign_parameters(std::span<const double> in) { policy.net.assign_parameters(in); }
};

// Goal entries of raw safety parameters (the trailing position block).
Matrix goal_rows(EnvKind kind, const Matrix& safety_params);

// Columns are samples; safety parameters are raw (un-normalized).
struct Batch {
  Matrix states;
  Matrix safety_params;
  Matrix actions;
};

struct LossBreakdown {
  double imitation = 0.0;
  double kl = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
};

// Forward + backward of L = L_imitation + beta * L_KL + gamma * L_recon for one
// batch with the given unit-normal noise (latent_width x N). The imitation
// gradient reaches the encoder through z; the reconstruction gradient reaches
// it through the decoder and z. `gradient` receives dL/dtheta in flat order
// and must have parameter_count() entries, or be empty to skip backward.
LossBreakdown genosil_loss(const GenosilModel& model, const Batch& batch, const Matrix& noise,
                           double beta, double gamma, std::span<double> gradient);

// Imitation loss of the goal-conditioned policy; same conventions.
LossBreakdown gcbc_loss(const GcbcModel& model, const Batch& batch, std::span<double> gradient);

}  // namespace genosil
