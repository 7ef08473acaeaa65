#include "genosil/policy.hpp"

#include <vector>

#include "genosil/error.hpp"

namespace genosil {

Vector ActionBounds::clamp(const Vector& action) const {
  require(action.size() == lower.size(), "action width does not match bounds");
  return action.cwiseMax(lower).cwiseMin(upper);
}

bool ActionBounds::contains(const Vector& action, double tolerance) const {
  if (action.size() != lower.size()) return false;
  return ((action.array() >= lower.array() - tolerance) &&
          (action.array() <= upper.array() + tolerance))
      .all();
}

PolicyNet make_policy(Conditioning conditioning, AffineNormalizer state_normalizer,
                      AffineNormalizer condition_normalizer, ActionBounds bounds,
                      std::span<const Eigen::Index> hidden, Rng& rng,
                      Eigen::Index heading_index) {
  require(bounds.lower.size() == bounds.upper.size() && bounds.lower.size() > 0,
          "action bounds must be non-empty and of equal width");
  require((bounds.lower.array() <= bounds.upper.array()).all(), "action bounds must satisfy lower <= upper");
  require(heading_index >= -1 && heading_index < state_normalizer.width(),
          "heading index must name a state entry or be -1");
  const Eigen::Index feature_width = state_normalizer.width() + (heading_index >= 0 ? 1 : 0);
  std::vector<Eigen::Index> widths{feature_width + condition_normalizer.width()};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(bounds.width());
  PolicyNet policy;
  policy.net =
      nn::DenseNet::kaiming(widths, nn::Activation::kRelu, nn::Activation::kIdentity, rng);
  policy.state_normalizer = std::move(state_normalizer);
  policy.condition_normalizer = std::move(condition_normalizer);
  policy.bounds = std::move(bounds);
  policy.conditioning = conditioning;
  policy.heading_index = heading_index;
  return policy;
}

Matrix policy_inputs(const PolicyNet& policy, const Matrix& states, const Matrix& conditions) {
  require(states.rows() == policy.state_width(), "state width does not match the policy");
  require(conditions.rows() == policy.condition_width(),
          "conditioning width does not match the policy");
  require(states.cols() == conditions.cols(), "state and conditioning batch sizes differ");
  const Eigen::Index features = policy.state_feature_width();
  Matrix input(features + conditions.rows(), states.cols());
  const Matrix normalized = policy.state_normalizer.apply_columns(states);
  const Eigen::Index h = policy.heading_index;
  if (h < 0) {
    input.topRows(features) = normalized;
  } else {
    const Eigen::Index rest = states.rows() - h - 1;
    input.topRows(h) = normalized.topRows(h);
    input.middleRows(h, rest) = normalized.bottomRows(rest);
    input.row(features - 2) = states.row(h).array().cos().matrix();
    input.row(features - 1) = states.row(h).array().sin().matrix();
  }
  input.bottomRows(conditions.rows()) = policy.condition_normalizer.apply_columns(conditions);
  return input;
}

Vector policy_output(const PolicyNet& policy, const Vector& state, const Vector& condition) {
  require(state.size() == policy.state_width(), "state width does not match the policy");
  require(condition.size() == policy.condition_width(),
          "conditioning width does not match the policy");
  const Vector input = policy_inputs(policy, state, condition).col(0);
  Vector out = nn::forward(policy.net, input);
  if (!out.allFinite()) throw NumericalError("policy produced a non-finite action");
  return out;
}

Vector act(const PolicyNet& policy, const Vector& state, const Vector& z) {
  require(policy.conditioning == Conditioning::kLatent, "act() needs a latent-conditioned policy");
  return policy.bounds.clamp(policy_output(policy, state, z));
}

Vector act_gcbc(const PolicyNet& policy, const Vector& state, const Vector& goal) {
  require(policy.conditioning == Conditioning::kGoal, "act_gcbc() needs a goal-conditioned policy");
  return policy.bounds.clamp(policy_output(policy, state, goal));
}

nn::SquaredErrorLoss imitation_loss(const Matrix& predicted, const Matrix& expert) {
  require(predicted.allFinite() && expert.allFinite(), "imitation loss inputs must be finite");
  return nn::squared_error_loss(predicted, expert);
}

}  // namespace genosil
