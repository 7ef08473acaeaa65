#pragma once

// End-to-end minibatch training of the encoder, decoder and policy under the
// annealed loss L = L_imitation + beta_t * L_KL + gamma_t * L_recon, plus the
// imitation-only GC-BC baseline.

#include <cstdint>
#include <string>
#include <vector>

#include "genosil/checkpoint.hpp"
#include "genosil/dataset.hpp"
#include "genosil/model.hpp"

namespace genosil {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta_max = 0.01;
  double gamma_max = 0.1;
  long long anneal_steps = 2000;  // T_anneal, counted in minibatch steps
  int epochs = 50;
  int batch_size = 128;
  std::uint64_t seed = 0;
  Eigen::Index latent_width = 0;  // 0 picks the environment default
  std::vector<Eigen::Index> encoder_hidden{64, 64};
  std::vector<Eigen::Index> policy_hidden{128, 128};
  std::string dataset_path;
  std::string checkpoint_path;  // empty: do not write
  std::string log_path;         // empty: do not write
  int log_interval = 1;         // steps between logged records

  void validate() const;
  Json to_json() const;
  // Applies keys present in `j` on top of `base`; unknown keys are rejected.
  static TrainConfig from_json(const Json& j, TrainConfig base);
  static TrainConfig from_json(const Json& j);
};

// max_value * min(1, t / anneal_steps).
double anneal_factor(long long t, double max_value, long long anneal_steps);

double total_loss(double imitation, double kl, double reconstruction, double beta, double gamma);

struct StepRecord {
  long long step = 0;
  double imitation = 0.0;
  double kl = 0.0;
  double reconstruction = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double total = 0.0;

  Json to_json() const;
};

struct EpochRecord {
  int epoch = 0;
  double total = 0.0;
  double imitation = 0.0;
  double kl = 0.0;
  double reconstruction = 0.0;
  double beta = 0.0;   // value at the last step of the epoch
  double gamma = 0.0;
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;  // every log_interval-th step
  long long total_steps = 0;

  Json summary() const;
};

// Equal losses and annealing traces; wall-clock fields are ignored.
bool same_trajectory(const TrainReport& a, const TrainReport& b);

struct GenosilTrainResult {
  GenosilModel model;
  TrainReport report;
};

struct GcbcTrainResult {
  GcbcModel model;
  TrainReport report;
};

// Throws ValidationError for an empty or mismatched dataset. On a non-finite
// loss or gradient, writes the last good parameters to checkpoint_path (when
// set) and throws NumericalError.
GenosilTrainResult train(const Dataset& dataset, const TrainConfig& config);
GcbcTrainResult train_gcbc(const Dataset& dataset, const TrainConfig& config);

Checkpoint make_checkpoint(const GenosilTrainResult& result, const TrainConfig& config);
Checkpoint make_checkpoint(const GcbcTrainResult& result, const TrainConfig& config);

}  // namespace genosil
