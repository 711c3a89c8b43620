#include "mlp.hpp"

#include <cmath>
#include <string>

#include "common.hpp"

namespace rmcl {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

void apply_activation(Activation act, const Matrix& pre, Matrix& post) {
  post.rows = pre.rows;
  post.cols = pre.cols;
  post.data.resize(pre.data.size());
  switch (act) {
    case Activation::identity:
      post.data = pre.data;
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < pre.data.size(); ++i)
        post.data[i] = pre.data[i] > 0.0 ? pre.data[i] : 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < pre.data.size(); ++i)
        post.data[i] = sigmoid(pre.data[i]);
      break;
  }
}

// grad <- grad (elementwise*) act'(pre), using post where cheaper.
void apply_activation_grad(Activation act, const Matrix& pre,
                           const Matrix& post, Matrix& grad) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < grad.data.size(); ++i)
        if (pre.data[i] <= 0.0) grad.data[i] = 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < grad.data.size(); ++i)
        grad.data[i] *= post.data[i] * (1.0 - post.data[i]);
      break;
  }
}

}  // namespace

MlpParams make_mlp(std::span<const std::size_t> dims, Activation hidden_act,
                   Activation output_act) {
  if (dims.size() < 2) throw config_error("make_mlp: need at least two dims");
  MlpParams params;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer;
    layer.weight = Matrix(dims[l], dims[l + 1]);
    layer.bias.assign(dims[l + 1], 0.0);
    layer.act = (l + 2 == dims.size()) ? output_act : hidden_act;
    params.layers.push_back(std::move(layer));
  }
  return params;
}

void kaiming_uniform_init(MlpParams& params, Rng& rng) {
  for (auto& layer : params.layers) {
    const double fan_in = static_cast<double>(layer.in_dim());
    const double w_bound = layer.act == Activation::relu
                               ? std::sqrt(6.0 / fan_in)
                               : 1.0 / std::sqrt(fan_in);
    const double b_bound = 1.0 / std::sqrt(fan_in);
    for (double& w : layer.weight.data) w = rng.uniform(-w_bound, w_bound);
    for (double& b : layer.bias) b = rng.uniform(-b_bound, b_bound);
  }
}

void mlp_forward(const MlpParams& params, const Matrix& input,
                 ActivationTrace& trace) {
  if (params.layers.empty()) throw config_error("mlp_forward: empty network");
  if (input.cols != params.input_dim())
    throw config_error("mlp_forward: input dimension " +
                       std::to_string(input.cols) + " does not match layer 0 (" +
                       std::to_string(params.input_dim()) + ")");
  const std::size_t n_layers = params.layers.size();
  trace.input = input;
  trace.pre.resize(n_layers);
  trace.post.resize(n_layers);
  const Matrix* current = &trace.input;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Layer& layer = params.layers[l];
    matmul(*current, layer.weight, trace.pre[l]);
    add_bias_rows(trace.pre[l], layer.bias);
    apply_activation(layer.act, trace.pre[l], trace.post[l]);
    current = &trace.post[l];
  }
  ensure_finite(trace.post.back().data, "mlp_forward output");
}

Vec mlp_forward_one(const MlpParams& params, std::span<const double> input) {
  Matrix batch(1, input.size());
  for (std::size_t i = 0; i < input.size(); ++i) batch(0, i) = input[i];
  ActivationTrace trace;
  mlp_forward(params, batch, trace);
  return trace.output().data;
}

void mlp_backward(const MlpParams& params, const ActivationTrace& trace,
                  const Matrix& output_grad, MlpGrads& grads,
                  Matrix* input_grad) {
  const std::size_t n_layers = params.layers.size();
  if (trace.post.size() != n_layers)
    throw config_error("mlp_backward: trace does not match network depth");
  if (output_grad.rows != trace.input.rows ||
      output_grad.cols != params.output_dim())
    throw config_error("mlp_backward: output_grad shape mismatch");

  grads.weight.resize(n_layers);
  grads.bias.resize(n_layers);

  Matrix g = output_grad;
  Matrix g_prev;
  for (std::size_t l = n_layers; l-- > 0;) {
    const Layer& layer = params.layers[l];
    apply_activation_grad(layer.act, trace.pre[l], trace.post[l], g);
    const Matrix& layer_in = (l == 0) ? trace.input : trace.post[l - 1];
    matmul_tn(layer_in, g, grads.weight[l]);
    grads.bias[l] = col_sums(g);
    if (l > 0 || input_grad != nullptr) {
      Matrix wt = transposed(layer.weight);
      matmul(g, wt, g_prev);
      std::swap(g, g_prev);
    }
  }
  if (input_grad != nullptr) *input_grad = std::move(g);
}

MlpGrads zero_grads_like(const MlpParams& params) {
  MlpGrads grads;
  for (const auto& layer : params.layers) {
    grads.weight.emplace_back(layer.weight.rows, layer.weight.cols);
    grads.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return grads;
}

std::vector<std::span<double>> param_spans(MlpParams& params) {
  std::vector<std::span<double>> spans;
  for (auto& layer : params.layers) {
    spans.emplace_back(layer.weight.data);
    spans.emplace_back(layer.bias);
  }
  return spans;
}

std::vector<std::span<const double>> param_spans(const MlpParams& params) {
  std::vector<std::span<const double>> spans;
  for (const auto& layer : params.layers) {
    spans.emplace_back(layer.weight.data);
    spans.emplace_back(layer.bias);
  }
  return spans;
}

std::vector<std::span<double>> grad_spans(MlpGrads& grads) {
  std::vector<std::span<double>> spans;
  for (std::size_t l = 0; l < grads.weight.size(); ++l) {
    spans.emplace_back(grads.weight[l].data);
    spans.emplace_back(grads.bias[l]);
  }
  return spans;
}

std::vector<std::span<const double>> grad_spans(const MlpGrads& grads) {
  std::vector<std::span<const double>> spans;
  for (std::size_t l = 0; l < grads.weight.size(); ++l) {
    spans.emplace_back(grads.weight[l].data);
    spans.emplace_back(grads.bias[l]);
  }
  return spans;
}

std::size_t param_count(const MlpParams& params) {
  std::size_t n = 0;
  for (const auto& layer : params.layers)
    n += layer.weight.data.size() + layer.bias.size();
  return n;
}

Vec finite_difference_grad(const std::function<double()>& loss,
                           std::vector<std::span<double>> params, double h) {
  if (h <= 0.0) throw config_error("finite_difference_grad: h must be > 0");
  Vec grad;
  for (auto& span : params) {
    for (double& value : span) {
      const double saved = value;
      value = saved + h;
      const double up = loss();
      value = saved - h;
      const double down = loss();
      value = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw numeric_error("finite_difference_grad: non-finite loss");
      grad.push_back((up - down) / (2.0 * h));
    }
  }
  return grad;
}

MlpGrads finite_difference_grad(
    const std::function<double(const MlpParams&)>& loss_fn,
    const MlpParams& params, double h) {
  MlpParams scratch = params;
  const Vec flat = finite_difference_grad(
      [&] { return loss_fn(scratch); }, param_spans(scratch), h);
  MlpGrads grads = zero_grads_like(params);
  std::size_t idx = 0;
  for (std::size_t l = 0; l < grads.weight.size(); ++l) {
    for (double& g : grads.weight[l].data) g = flat[idx++];
    for (double& g : grads.bias[l]) g = flat[idx++];
  }
  return grads;
}

}  // namespace rmcl
