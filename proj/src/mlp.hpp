#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"

namespace rmcl {

enum class Activation : std::uint8_t { identity = 0, relu = 1, sigmoid = 2 };

// Weights are stored input-major ([in x out]) so the batched forward pass is
// a plain row-times-matrix product.
struct Layer {
  Matrix weight;
  Vec bias;
  Activation act = Activation::identity;

  std::size_t in_dim() const { return weight.rows; }
  std::size_t out_dim() const { return weight.cols; }
};

struct MlpParams {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.back().out_dim(); }
};

// Everything the backward pass needs: the batch input plus per-layer pre- and
// post-activation values, each [batch x out].
struct ActivationTrace {
  Matrix input;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;

  const Matrix& output() const { return post.back(); }
};

struct MlpGrads {
  std::vector<Matrix> weight;
  std::vector<Vec> bias;
};

// dims = {in, h1, ..., out}; hidden layers get `hidden_act`, the final layer
// `output_act`. Weights start at zero; call kaiming_uniform_init to randomize.
MlpParams make_mlp(std::span<const std::size_t> dims, Activation hidden_act,
                   Activation output_act);

// Hidden (ReLU) layers: W ~ U(+-sqrt(6/fan_in)); output layers:
// W ~ U(+-1/sqrt(fan_in)). All biases ~ U(+-1/sqrt(fan_in)).
void kaiming_uniform_init(MlpParams& params, Rng& rng);

void mlp_forward(const MlpParams& params, const Matrix& input,
                 ActivationTrace& trace);
Vec mlp_forward_one(const MlpParams& params, std::span<const double> input);

// output_grad is d(loss)/d(output), [batch x out]. Fills grads (same shapes
// as params); when input_grad is non-null also returns d(loss)/d(input).
void mlp_backward(const MlpParams& params, const ActivationTrace& trace,
                  const Matrix& output_grad, MlpGrads& grads,
                  Matrix* input_grad = nullptr);

MlpGrads zero_grads_like(const MlpParams& params);

std::vector<std::span<double>> param_spans(MlpParams& params);
std::vector<std::span<const double>> param_spans(const MlpParams& params);
std::vector<std::span<double>> grad_spans(MlpGrads& grads);
std::vector<std::span<const double>> grad_spans(const MlpGrads& grads);
std::size_t param_count(const MlpParams& params);

// Central finite differences over an arbitrary flat parameter view:
// (f(x+h) - f(x-h)) / (2h) per entry. The loss callback is evaluated with the
// spans mutated in place and must not cache values across calls.
Vec finite_difference_grad(const std::function<double()>& loss,
                           std::vector<std::span<double>> params,
                           double h = 1e-5);

// Convenience overload matching the MLP parameter layout.
MlpGrads finite_difference_grad(
    const std::function<double(const MlpParams&)>& loss_fn,
    const MlpParams& params, double h = 1e-5);

double sigmoid(double x);

}  // namespace rmcl
