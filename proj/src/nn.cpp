#include "genosil/nn.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "genosil/error.hpp"

namespace genosil::nn {

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    require(layer.weight.rows() == layer.bias.size(),
            "layer " + std::to_string(k) + ": bias width does not match weight rows");
    require(layer.weight.rows() > 0 && layer.weight.cols() > 0,
            "layer " + std::to_string(k) + ": empty weight matrix");
    if (k > 0) {
      require(layers_[k - 1].weight.rows() == layer.weight.cols(),
              "layer " + std::to_string(k) + ": input width does not match previous output width");
    }
  }
  require(all_finite(), "network parameters must be finite");
}

DenseNet DenseNet::kaiming(std::span<const Eigen::Index> widths, Activation hidden,
                           Activation output, Rng& rng) {
  require(widths.size() >= 2, "a network needs at least input and output widths");
  std::vector<DenseLayer> layers;
  layers.reserve(widths.size() - 1);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const Eigen::Index fan_in = widths[k];
    const Eigen::Index fan_out = widths[k + 1];
    require(fan_in > 0 && fan_out > 0, "layer widths must be positive");
    const Activation act = (k + 2 == widths.size()) ? output : hidden;
    const double gain = act == Activation::kRelu ? 6.0 : 3.0;
    std::uniform_real_distribution<double> dist(-std::sqrt(gain / static_cast<double>(fan_in)),
                                                std::sqrt(gain / static_cast<double>(fan_in)));
    DenseLayer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out), act};
    // Column-major fill order keeps the draw sequence tied to the flat layout.
    for (Eigen::Index j = 0; j < fan_in; ++j) {
      for (Eigen::Index i = 0; i < fan_out; ++i) layer.weight(i, j) = dist(rng);
    }
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

Eigen::Index DenseNet::input_width() const {
  return layers_.empty() ? 0 : layers_.front().weight.cols();
}

Eigen::Index DenseNet::output_width() const {
  return layers_.empty() ? 0 : layers_.back().weight.rows();
}

std::vector<Eigen::Index> DenseNet::widths() const {
  std::vector<Eigen::Index> out;
  if (layers_.empty()) return out;
  out.push_back(input_width());
  for (const auto& layer : layers_) out.push_back(layer.weight.rows());
  return out;
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

void DenseNet::copy_parameters(std::span<double> out) const {
  require(out.size() == parameter_count(), "parameter buffer size mismatch");
  double* dst = out.data();
  for (const auto& layer : layers_) {
    std::copy(layer.weight.data(), layer.weight.data() + layer.weight.size(), dst);
    dst += layer.weight.size();
    std::copy(layer.bias.data(), layer.bias.data() + layer.bias.size(), dst);
    dst += layer.bias.size();
  }
}

void DenseNet::assign_parameters(std::span<const double> in) {
  require(in.size() == parameter_count(), "parameter buffer size mismatch");
  const double* src = in.data();
  for (auto& layer : layers_) {
    std::copy(src, src + layer.weight.size(), layer.weight.data());
    src += layer.weight.size();
    std::copy(src, src + layer.bias.size(), layer.bias.data());
    src += layer.bias.size();
  }
}

bool DenseNet::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

NetGradients NetGradients::zeros_like(const DenseNet& net) {
  NetGradients g;
  for (const auto& layer : net.layers()) {
    g.weight.push_back(Matrix::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.push_back(Vector::Zero(layer.bias.size()));
  }
  return g;
}

std::size_t NetGradients::size() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < weight.size(); ++k) n += weight[k].size() + bias[k].size();
  return n;
}

void NetGradients::copy_to(std::span<double> out) const {
  require(out.size() == size(), "gradient buffer size mismatch");
  double* dst = out.data();
  for (std::size_t k = 0; k < weight.size(); ++k) {
    std::copy(weight[k].data(), weight[k].data() + weight[k].size(), dst);
    dst += weight[k].size();
    std::copy(bias[k].data(), bias[k].data() + bias[k].size(), dst);
    dst += bias[k].size();
  }
}

NetGradients& NetGradients::operator+=(const NetGradients& other) {
  require(weight.size() == other.weight.size(), "gradient layer count mismatch");
  for (std::size_t k = 0; k < weight.size(); ++k) {
    weight[k] += other.weight[k];
    bias[k] += other.bias[k];
  }
  return *this;
}

namespace {

void apply_activation(Activation activation, Matrix& values) {
  if (activation == Activation::kRelu) values = values.cwiseMax(0.0);
}

}  // namespace

ForwardResult forward(const DenseNet& net, const Matrix& input) {
  require(!net.empty(), "forward on an empty network");
  if (input.rows() != net.input_width()) {
    std::ostringstream msg;
    msg << "input width " << input.rows() << " does not match network input width "
        << net.input_width();
    throw ValidationError(msg.str());
  }
  ForwardResult result;
  result.tape.net = &net;
  result.tape.activations.reserve(net.depth() + 1);
  result.tape.activations.push_back(input);
  for (const auto& layer : net.layers()) {
    Matrix next = layer.weight * result.tape.activations.back();
    next.colwise() += layer.bias;
    apply_activation(layer.activation, next);
    result.tape.activations.push_back(std::move(next));
  }
  result.output = result.tape.activations.back();
  return result;
}

Vector forward(const DenseNet& net, const Vector& input) {
  require(!net.empty(), "forward on an empty network");
  require(input.size() == net.input_width(), "input width does not match network input width");
  Vector x = input;
  for (const auto& layer : net.layers()) {
    Vector next = layer.weight * x + layer.bias;
    if (layer.activation == Activation::kRelu) next = next.cwiseMax(0.0);
    x = std::move(next);
  }
  return x;
}

BackwardResult backward(const DenseNet& net, const GradientTape& tape, const Matrix& output_grad) {
  require(tape.net == &net && tape.activations.size() == net.depth() + 1,
          "gradient tape was not recorded on this network");
  const Eigen::Index batch = tape.activations.front().cols();
  require(output_grad.rows() == net.output_width() && output_grad.cols() == batch,
          "output gradient shape does not match the recorded forward pass");

  BackwardResult result;
  result.parameters.weight.resize(net.depth());
  result.parameters.bias.resize(net.depth());

  Matrix delta = output_grad;
  for (std::size_t k = net.depth(); k-- > 0;) {
    const auto& layer = net.layers()[k];
    if (layer.activation == Activation::kRelu) {
      // ReLU outputs are zero exactly where the pre-activation was <= 0.
      delta = (tape.activations[k + 1].array() > 0.0).select(delta, 0.0);
    }
    result.parameters.weight[k].noalias() = delta * tape.activations[k].transpose();
    result.parameters.bias[k] = delta.rowwise().sum();
    Matrix upstream = layer.weight.transpose() * delta;
    delta = std::move(upstream);
  }
  result.input_grad = std::move(delta);
  return result;
}

SquaredErrorLoss squared_error_loss(const Matrix& prediction, const Matrix& target) {
  require(prediction.rows() == target.rows() && prediction.cols() == target.cols(),
          "prediction and target shapes differ");
  require(prediction.cols() > 0, "loss over an empty batch");
  const double n = static_cast<double>(prediction.cols());
  Matrix diff = prediction - target;
  SquaredErrorLoss loss;
  loss.value = diff.squaredNorm() / n;
  loss.gradient = (2.0 / n) * diff;
  return loss;
}

AdamState::AdamState(Eigen::Index parameter_count, double rate)
    : first_moment(Vector::Zero(parameter_count)),
      second_moment(Vector::Zero(parameter_count)),
      learning_rate(rate) {}

void adam_step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads, AdamState& state) {
  require(params.size() == grads.size() && params.size() == state.first_moment.size() &&
              params.size() == state.second_moment.size(),
          "adam: parameter, gradient and moment sizes must agree");
  if (!grads.allFinite()) {
    Eigen::Index bad = 0;
    while (bad < grads.size() && std::isfinite(grads[bad])) ++bad;
    std::ostringstream msg;
    msg << "non-finite gradient at flat index " << bad << " (step " << state.step << ")";
    throw NumericalError(msg.str());
  }
  state.step += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= state.learning_rate * (state.first_moment.array() / correction1) /
                    ((state.second_moment.array() / correction2).sqrt() + state.epsilon);
}

}  // namespace genosil::nn
