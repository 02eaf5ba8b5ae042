#pragma once

#include "mfscale/errors.hpp"
#include "mfscale/rng.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace mfscale {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Activation { Gelu, Relu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

// Dense feed-forward net. weights[l] is (out x in); samples are columns.
// Hidden layers apply the activation, the last layer is affine.
template <typename Scalar>
struct Mlp {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;
  Activation activation = Activation::Gelu;

  Eigen::Index n_inputs() const { return weights.front().cols(); }
  Eigen::Index n_outputs() const { return weights.back().rows(); }
  std::size_t n_layers() const { return weights.size(); }

  Eigen::Index n_parameters() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  // Same shapes, all zeros. Used as the gradient container.
  Mlp zeros_like() const {
    Mlp z;
    z.activation = activation;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      z.weights.push_back(MatrixX<Scalar>::Zero(weights[l].rows(), weights[l].cols()));
      z.biases.push_back(VectorX<Scalar>::Zero(biases[l].size()));
    }
    return z;
  }

  // Flat copy: per layer, W column-major then b.
  VectorX<Scalar> flat() const {
    VectorX<Scalar> out(n_parameters());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.segment(k, weights[l].size()) = weights[l].reshaped();
      k += weights[l].size();
      out.segment(k, biases[l].size()) = biases[l];
      k += biases[l].size();
    }
    return out;
  }

  void set_flat(const VectorX<Scalar>& p) {
    if (p.size() != n_parameters()) throw ContractError("set_flat: parameter count mismatch");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l].reshaped() = p.segment(k, weights[l].size());
      k += weights[l].size();
      biases[l] = p.segment(k, biases[l].size());
      k += biases[l].size();
    }
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> m;
    m.activation = activation;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      m.weights.push_back(weights[l].template cast<Other>());
      m.biases.push_back(biases[l].template cast<Other>());
    }
    return m;
  }
};

// widths = {inputs, hidden..., outputs}. Glorot-uniform weights, zero biases.
template <typename Scalar>
Mlp<Scalar> init_mlp(const std::vector<Eigen::Index>& widths, Activation act, std::uint64_t seed) {
  if (widths.size() < 2) throw ContractError("init_mlp: need at least input and output widths");
  for (auto w : widths)
    if (w <= 0) throw ContractError("init_mlp: widths must be positive");
  Rng rng(seed);
  Mlp<Scalar> m;
  m.activation = act;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto in = widths[l], out = widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    MatrixX<Scalar> w(out, in);
    for (Eigen::Index j = 0; j < in; ++j)
      for (Eigen::Index i = 0; i < out; ++i) w(i, j) = static_cast<Scalar>(rng.uniform(-limit, limit));
    m.weights.push_back(std::move(w));
    m.biases.push_back(VectorX<Scalar>::Zero(out));
  }
  return m;
}

namespace detail {

template <typename Scalar>
constexpr Scalar kGeluC = Scalar(0.7978845608028654);  // sqrt(2/pi)
template <typename Scalar>
constexpr Scalar kGeluA = Scalar(0.044715);

template <typename Derived>
auto activate(const Eigen::ArrayBase<Derived>& z, Activation act) {
  using S = typename Derived::Scalar;
  using A = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;
  if (act == Activation::Relu) return A(z.max(S(0)));
  A t = (kGeluC<S> * (z + kGeluA<S> * z.cube())).tanh();
  return A(S(0.5) * z * (S(1) + t));
}

template <typename Derived>
auto activate_derivative(const Eigen::ArrayBase<Derived>& z, Activation act) {
  using S = typename Derived::Scalar;
  using A = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;
  if (act == Activation::Relu) return A((z > S(0)).template cast<S>());
  A t = (kGeluC<S> * (z + kGeluA<S> * z.cube())).tanh();
  return A(S(0.5) * (S(1) + t) +
           S(0.5) * z * (S(1) - t.square()) * kGeluC<S> * (S(1) + S(3) * kGeluA<S> * z.square()));
}

template <typename Scalar>
void check_input(const Mlp<Scalar>& net, Eigen::Index rows) {
  if (net.weights.empty()) throw ContractError("forward: empty network");
  if (rows != net.n_inputs())
    throw ContractError("forward: input has " + std::to_string(rows) + " features, network expects " +
                        std::to_string(net.n_inputs()));
}

}  // namespace detail

// inputs: (n_inputs x batch). Returns (n_outputs x batch).
template <typename Scalar>
MatrixX<Scalar> forward(const Mlp<Scalar>& net, const MatrixX<Scalar>& inputs) {
  detail::check_input(net, inputs.rows());
  MatrixX<Scalar> a = inputs;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    MatrixX<Scalar> z = net.weights[l] * a;
    z.colwise() += net.biases[l];
    if (l + 1 < net.n_layers())
      a = detail::activate(z.array(), net.activation).matrix();
    else
      a = std::move(z);
  }
  return a;
}

// Mean squared error over all outputs and samples; fills grad (same shapes as net).
template <typename Scalar>
Scalar loss_and_grad(const Mlp<Scalar>& net, const MatrixX<Scalar>& inputs,
                     const MatrixX<Scalar>& targets, Mlp<Scalar>& grad) {
  detail::check_input(net, inputs.rows());
  if (inputs.cols() == 0) throw ContractError("loss_and_grad: empty batch");
  if (targets.rows() != net.n_outputs() || targets.cols() != inputs.cols())
    throw ContractError("loss_and_grad: target shape mismatch");
  const std::size_t L = net.n_layers();
  if (grad.weights.size() != L) grad = net.zeros_like();

  std::vector<MatrixX<Scalar>> acts(L + 1), pre(L);
  acts[0] = inputs;
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = net.weights[l] * acts[l];
    pre[l].colwise() += net.biases[l];
    if (l + 1 < L)
      acts[l + 1] = detail::activate(pre[l].array(), net.activation).matrix();
    else
      acts[l + 1] = pre[l];
  }
  const MatrixX<Scalar> diff = acts[L] - targets;
  const Scalar scale = Scalar(1) / static_cast<Scalar>(diff.size());
  const Scalar loss = diff.squaredNorm() * scale;

  MatrixX<Scalar> delta = Scalar(2) * scale * diff;
  for (std::size_t l = L; l-- > 0;) {
    grad.weights[l].noalias() = delta * acts[l].transpose();
    grad.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      MatrixX<Scalar> back = net.weights[l].transpose() * delta;
      delta = (back.array() * detail::activate_derivative(pre[l - 1].array(), net.activation)).matrix();
    }
  }
  return loss;
}

template <typename Scalar>
Scalar mse_loss(const Mlp<Scalar>& net, const MatrixX<Scalar>& inputs,
                const MatrixX<Scalar>& targets) {
  return (forward(net, inputs) - targets).squaredNorm() / static_cast<Scalar>(targets.size());
}

struct AdamWSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// AdamW on a flat parameter vector. Decay is decoupled: p -= lr*wd*p.
template <typename Scalar>
class AdamW {
 public:
  AdamW(Eigen::Index n, AdamWSettings s) : s_(s), m_(VectorX<Scalar>::Zero(n)), v_(VectorX<Scalar>::Zero(n)) {}

  void step(VectorX<Scalar>& params, const VectorX<Scalar>& grad, double lr) {
    ++t_;
    const Scalar b1 = static_cast<Scalar>(s_.beta1), b2 = static_cast<Scalar>(s_.beta2);
    m_ = b1 * m_ + (Scalar(1) - b1) * grad;
    v_ = b2 * v_ + (Scalar(1) - b2) * grad.cwiseAbs2();
    const Scalar c1 = Scalar(1) / static_cast<Scalar>(1.0 - std::pow(s_.beta1, static_cast<double>(t_)));
    const Scalar c2 = Scalar(1) / static_cast<Scalar>(1.0 - std::pow(s_.beta2, static_cast<double>(t_)));
    const Scalar a = static_cast<Scalar>(lr);
    params -= a * static_cast<Scalar>(s_.weight_decay) * params;
    params.array() -= a * (m_.array() * c1) / ((v_.array() * c2).sqrt() + static_cast<Scalar>(s_.eps));
  }

  long steps() const { return t_; }

 private:
  AdamWSettings s_;
  VectorX<Scalar> m_, v_;
  long t_ = 0;
};

// Rescales grad in place so its L2 norm is at most max_norm; returns the original norm.
template <typename Scalar>
Scalar clip_global_norm(VectorX<Scalar>& grad, double max_norm) {
  const Scalar n = grad.norm();
  if (max_norm > 0.0 && n > static_cast<Scalar>(max_norm)) grad *= static_cast<Scalar>(max_norm) / n;
  return n;
}

}  // namespace mfscale
