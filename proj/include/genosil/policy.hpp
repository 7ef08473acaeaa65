#pragma once

// Conditioned policies. A PolicyNet maps [normalized state; conditioning] to
// an action. GenOSIL conditions on the latent z (identity normalizer); the
// GC-BC baseline conditions on the goal position only.

#include <span>

#include "genosil/normalizer.hpp"
#include "genosil/nn.hpp"

namespace genosil {

using nn::Matrix;
using nn::Vector;

struct ActionBounds {
  Vector lower;
  Vector upper;

  Eigen::Index width() const { return lower.size(); }
  Vector clamp(const Vector& action) const;
  bool contains(const Vector& action, double tolerance = 0.0) const;
};

enum class Conditioning { kLatent, kGoal };

struct PolicyNet {
  nn::DenseNet net;
  AffineNormalizer state_normalizer;
  AffineNormalizer condition_normalizer;
  ActionBounds bounds;
  Conditioning conditioning = Conditioning::kLatent;
  // State entry holding an angle, fed to the network as (cos, sin) in place of
  // its normalized value; -1 when the state has no angle.
  Eigen::Index heading_index = -1;

  Eigen::Index state_width() const { return state_normalizer.width(); }
  Eigen::Index state_feature_width() const { return state_width() + (heading_index >= 0 ? 1 : 0); }
  Eigen::Index condition_width() const { return condition_normalizer.width(); }
  Eigen::Index action_width() const { return net.output_width(); }
};

// ReLU hidden layers, linear output head. For kLatent the condition normalizer
// is the identity and `condition_normalizer` is ignored.
PolicyNet make_policy(Conditioning conditioning, AffineNormalizer state_normalizer,
                      AffineNormalizer condition_normalizer, ActionBounds bounds,
                      std::span<const Eigen::Index> hidden, Rng& rng,
                      Eigen::Index heading_index = -1);

// Network input [state features; normalized condition], one column per sample.
// State features are the normalized state with the heading entry (if any)
// replaced by its cosine and sine.
Matrix policy_inputs(const PolicyNet& policy, const Matrix& states, const Matrix& conditions);

// Raw (unclamped) network output.
Vector policy_output(const PolicyNet& policy, const Vector& state, const Vector& condition);

// a = clamp(pi(s, z)). Throws NumericalError on non-finite output.
Vector act(const PolicyNet& policy, const Vector& state, const Vector& z);

// GC-BC action from [s; g]; obstacle information never enters.
Vector act_gcbc(const PolicyNet& policy, const Vector& state, const Vector& goal);

// (1/N) sum ||a_i - a*_i||^2 on unclamped predictions.
nn::SquaredErrorLoss imitation_loss(const Matrix& predicted, const Matrix& expert);

}  // namespace genosil
