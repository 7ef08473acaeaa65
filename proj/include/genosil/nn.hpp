#pragma once

// Dense feed-forward networks with reverse-mode gradients and Adam.
//
// Activations are stored column-per-sample: a batch of B inputs of width n is
// an n x B matrix. Gradients returned by backward() are summed over the batch
// columns, so callers fold any 1/N of a mean loss into the output gradient.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "genosil/rng.hpp"

namespace genosil::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { kRelu, kIdentity };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

struct DenseLayer {
  Matrix weight;  // output width x input width
  Vector bias;
  Activation activation = Activation::kIdentity;
};

class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  // widths = {in, h1, ..., out}. Hidden layers get `hidden`, the last layer
  // gets `output`. Weights are uniform in +-sqrt(6 / fan_in) for ReLU layers
  // and +-sqrt(3 / fan_in) for linear layers; biases start at zero.
  static DenseNet kaiming(std::span<const Eigen::Index> widths, Activation hidden,
                          Activation output, Rng& rng);

  Eigen::Index input_width() const;
  Eigen::Index output_width() const;
  std::vector<Eigen::Index> widths() const;
  std::size_t depth() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  DenseLayer& layer(std::size_t k) { return layers_.at(k); }

  std::size_t parameter_count() const;
  // Flattened order: for each layer, weight (column-major) then bias.
  void copy_parameters(std::span<double> out) const;
  void assign_parameters(std::span<const double> in);
  bool all_finite() const;

 private:
  std::vector<DenseLayer> layers_;
};

// Activations recorded by one forward pass. activations[0] is the input and
// activations[k] the post-activation output of layer k-1.
struct GradientTape {
  const DenseNet* net = nullptr;
  std::vector<Matrix> activations;
};

struct NetGradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  static NetGradients zeros_like(const DenseNet& net);
  std::size_t size() const;
  void copy_to(std::span<double> out) const;
  NetGradients& operator+=(const NetGradients& other);
};

struct ForwardResult {
  Matrix output;
  GradientTape tape;
};

struct BackwardResult {
  NetGradients parameters;
  Matrix input_grad;
};

ForwardResult forward(const DenseNet& net, const Matrix& input);
Vector forward(const DenseNet& net, const Vector& input);

// `tape` must come from forward() on this same `net`.
BackwardResult backward(const DenseNet& net, const GradientTape& tape, const Matrix& output_grad);

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  long long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(Eigen::Index parameter_count, double learning_rate);
};

// Batch-mean squared Euclidean distance between columns, (1/N) sum ||p_i - t_i||^2,
// with its gradient with respect to `prediction`.
struct SquaredErrorLoss {
  double value = 0.0;
  Matrix gradient;
};
SquaredErrorLoss squared_error_loss(const Matrix& prediction, const Matrix& target);

// One bias-corrected Adam update in place. Throws NumericalError if any
// gradient entry is non-finite; parameters are left untouched in that case.
void adam_step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads, AdamState& state);

}  // namespace genosil::nn
