#include "multi_head.hpp"

#include <cfloat>
#include <cmath>
#include <cstring>
#include <fstream>

#include "common.hpp"

namespace rmcl {

namespace {

constexpr char kMagic[8] = {'R', 'M', 'C', 'L', 'C', 'K', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;

// Sigmoid outputs are clamped into the largest representable open (0,1)
// interval so raw scores never collapse to an endpoint.
double open_unit_sigmoid(double x) {
  double s = sigmoid(x);
  if (s <= 0.0) s = DBL_MIN;
  const double upper = std::nextafter(1.0, 0.0);
  if (s >= 1.0) s = upper;
  return s;
}

void init_affine(Matrix& weight, Vec& bias, Rng& rng, double bias_bound) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(weight.rows));
  for (double& w : weight.data) w = rng.uniform(-bound, bound);
  for (double& b : bias) b = rng.uniform(-bias_bound, bias_bound);
}

}  // namespace

MultiHeadModel make_multi_head(std::size_t input_dim, std::size_t hidden,
                               std::size_t trunk_layers, std::size_t k,
                               std::size_t q, Rng& rng,
                               double hyp_bias_spread) {
  if (k < 1) throw config_error("make_multi_head: need at least one head");
  if (trunk_layers < 1)
    throw config_error("make_multi_head: need at least one trunk layer");
  if (hyp_bias_spread < 0.0)
    throw config_error("make_multi_head: hyp_bias_spread must be >= 0");
  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  for (std::size_t l = 0; l < trunk_layers; ++l) dims.push_back(hidden);

  MultiHeadModel model;
  model.trunk = make_mlp(dims, Activation::relu, Activation::relu);
  kaiming_uniform_init(model.trunk, rng);
  model.hyp_weight = Matrix(hidden, k * q);
  model.hyp_bias.assign(k * q, 0.0);
  model.score_weight = Matrix(hidden, k);
  model.score_bias.assign(k, 0.0);
  init_affine(model.hyp_weight, model.hyp_bias, rng, hyp_bias_spread);
  init_affine(model.score_weight, model.score_bias, rng,
              1.0 / std::sqrt(static_cast<double>(hidden)));
  model.hypothesis_count_ = k;
  model.output_dim_ = q;
  return model;
}

void model_forward(const MultiHeadModel& model, const Matrix& inputs,
                   ModelTrace& trace) {
  mlp_forward(model.trunk, inputs, trace.trunk);
  const Matrix& features = trace.trunk.output();
  matmul(features, model.hyp_weight, trace.hyp_out);
  add_bias_rows(trace.hyp_out, model.hyp_bias);
  matmul(features, model.score_weight, trace.score_logit);
  add_bias_rows(trace.score_logit, model.score_bias);
  trace.score.resize(trace.score_logit.rows, trace.score_logit.cols);
  for (std::size_t i = 0; i < trace.score.data.size(); ++i)
    trace.score.data[i] = open_unit_sigmoid(trace.score_logit.data[i]);
  ensure_finite(trace.hyp_out.data, "hypothesis head output");
}

void model_backward(const MultiHeadModel& model, const ModelTrace& trace,
                    const Matrix& d_hyp, const Matrix& d_score_logit,
                    ModelGrads& grads) {
  const Matrix& features = trace.trunk.output();
  if (d_hyp.rows != features.rows || d_score_logit.rows != features.rows)
    throw config_error("model_backward: batch size mismatch");

  matmul_tn(features, d_hyp, grads.hyp_weight);
  grads.hyp_bias = col_sums(d_hyp);
  matmul_tn(features, d_score_logit, grads.score_weight);
  grads.score_bias = col_sums(d_score_logit);

  Matrix d_features;
  Matrix hyp_wt = transposed(model.hyp_weight);
  matmul(d_hyp, hyp_wt, d_features);
  Matrix score_wt = transposed(model.score_weight);
  Matrix d_features_score;
  matmul(d_score_logit, score_wt, d_features_score);
  for (std::size_t i = 0; i < d_features.data.size(); ++i)
    d_features.data[i] += d_features_score.data[i];

  mlp_backward(model.trunk, trace.trunk, d_features, grads.trunk);
}

ModelGrads zero_grads_like(const MultiHeadModel& model) {
  ModelGrads grads;
  grads.trunk = zero_grads_like(model.trunk);
  grads.hyp_weight = Matrix(model.hyp_weight.rows, model.hyp_weight.cols);
  grads.hyp_bias.assign(model.hyp_bias.size(), 0.0);
  grads.score_weight = Matrix(model.score_weight.rows, model.score_weight.cols);
  grads.score_bias.assign(model.score_bias.size(), 0.0);
  return grads;
}

ScoredPrediction prediction_from_trace(const MultiHeadModel& model,
                                       const ModelTrace& trace,
                                       std::size_t row) {
  const std::size_t k = model.hypothesis_count();
  const std::size_t q = model.output_dim();
  ScoredPrediction pred;
  pred.hypotheses.resize(k);
  pred.raw_scores.resize(k);
  const auto hyp_row = trace.hyp_out.row(row);
  const auto score_row = trace.score.row(row);
  for (std::size_t h = 0; h < k; ++h) {
    pred.hypotheses[h].assign(hyp_row.begin() + h * q,
                              hyp_row.begin() + (h + 1) * q);
    pred.raw_scores[h] = score_row[h];
  }
  return pred;
}

ScoredPrediction predict(const MultiHeadModel& model,
                         std::span<const double> x) {
  // Runs through the batched path so single and batched prediction are
  // bitwise identical.
  if (x.size() != model.input_dim())
    throw config_error("predict: input dimension mismatch");
  Matrix batch(1, x.size());
  for (std::size_t i = 0; i < x.size(); ++i) batch(0, i) = x[i];
  ModelTrace trace;
  model_forward(model, batch, trace);
  return prediction_from_trace(model, trace, 0);
}

std::vector<ScoredPrediction> predict_batch(const MultiHeadModel& model,
                                            const std::vector<Vec>& inputs) {
  std::vector<ScoredPrediction> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(predict(model, x));
  return out;
}

std::vector<std::span<double>> param_spans(MultiHeadModel& model) {
  auto spans = param_spans(model.trunk);
  spans.emplace_back(model.hyp_weight.data);
  spans.emplace_back(model.hyp_bias);
  spans.emplace_back(model.score_weight.data);
  spans.emplace_back(model.score_bias);
  return spans;
}

std::vector<std::span<const double>> param_spans(const MultiHeadModel& model) {
  auto spans = param_spans(model.trunk);
  spans.emplace_back(model.hyp_weight.data);
  spans.emplace_back(model.hyp_bias);
  spans.emplace_back(model.score_weight.data);
  spans.emplace_back(model.score_bias);
  return spans;
}

std::vector<std::span<double>> grad_spans(ModelGrads& grads) {
  auto spans = grad_spans(grads.trunk);
  spans.emplace_back(grads.hyp_weight.data);
  spans.emplace_back(grads.hyp_bias);
  spans.emplace_back(grads.score_weight.data);
  spans.emplace_back(grads.score_bias);
  return spans;
}

std::vector<std::span<const double>> grad_spans(const ModelGrads& grads) {
  auto spans = grad_spans(grads.trunk);
  spans.emplace_back(grads.hyp_weight.data);
  spans.emplace_back(grads.hyp_bias);
  spans.emplace_back(grads.score_weight.data);
  spans.emplace_back(grads.score_bias);
  return spans;
}

std::size_t param_count(const MultiHeadModel& model) {
  return param_count(model.trunk) + model.hyp_weight.data.size() +
         model.hyp_bias.size() + model.score_weight.data.size() +
         model.score_bias.size();
}

// ---------------------------------------------------------------- checkpoint

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw data_error("checkpoint: truncated file");
  return value;
}

void write_doubles(std::ofstream& out, const Vec& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, Vec& values, std::size_t n) {
  values.resize(n);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw data_error("checkpoint: truncated parameter block");
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("checkpoint: cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(ckpt.kind));
  const MultiHeadModel& m = ckpt.model;
  write_pod(out, static_cast<std::uint64_t>(m.hypothesis_count_));
  write_pod(out, static_cast<std::uint64_t>(m.output_dim_));
  write_pod(out, static_cast<std::uint64_t>(m.trunk.layers.size()));
  for (const auto& layer : m.trunk.layers) {
    write_pod(out, static_cast<std::uint64_t>(layer.weight.rows));
    write_pod(out, static_cast<std::uint64_t>(layer.weight.cols));
    write_pod(out, static_cast<std::uint8_t>(layer.act));
    write_doubles(out, layer.weight.data);
    write_doubles(out, layer.bias);
  }
  write_pod(out, static_cast<std::uint64_t>(m.hyp_weight.rows));
  write_pod(out, static_cast<std::uint64_t>(m.hyp_weight.cols));
  write_doubles(out, m.hyp_weight.data);
  write_doubles(out, m.hyp_bias);
  write_pod(out, static_cast<std::uint64_t>(m.score_weight.rows));
  write_pod(out, static_cast<std::uint64_t>(m.score_weight.cols));
  write_doubles(out, m.score_weight.data);
  write_doubles(out, m.score_bias);
  write_pod(out, ckpt.rng_seed);
  for (std::uint64_t word : ckpt.rng_state) write_pod(out, word);
  write_pod(out, ckpt.step);
  if (!out) throw io_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("checkpoint: cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw data_error("checkpoint: bad magic in " + path);
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion)
    throw data_error("checkpoint: unsupported version " +
                     std::to_string(version));
  Checkpoint ckpt;
  ckpt.kind = static_cast<ModelKind>(read_pod<std::uint32_t>(in));
  MultiHeadModel& m = ckpt.model;
  m.hypothesis_count_ = read_pod<std::uint64_t>(in);
  m.output_dim_ = read_pod<std::uint64_t>(in);
  const auto n_layers = read_pod<std::uint64_t>(in);
  m.trunk.layers.resize(n_layers);
  for (auto& layer : m.trunk.layers) {
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    layer.act = static_cast<Activation>(read_pod<std::uint8_t>(in));
    layer.weight.rows = rows;
    layer.weight.cols = cols;
    read_doubles(in, layer.weight.data, rows * cols);
    read_doubles(in, layer.bias, cols);
  }
  m.hyp_weight.rows = read_pod<std::uint64_t>(in);
  m.hyp_weight.cols = read_pod<std::uint64_t>(in);
  read_doubles(in, m.hyp_weight.data, m.hyp_weight.rows * m.hyp_weight.cols);
  read_doubles(in, m.hyp_bias, m.hyp_weight.cols);
  m.score_weight.rows = read_pod<std::uint64_t>(in);
  m.score_weight.cols = read_pod<std::uint64_t>(in);
  read_doubles(in, m.score_weight.data,
               m.score_weight.rows * m.score_weight.cols);
  read_doubles(in, m.score_bias, m.score_weight.cols);
  ckpt.rng_seed = read_pod<std::uint64_t>(in);
  for (auto& word : ckpt.rng_state) word = read_pod<std::uint64_t>(in);
  ckpt.step = read_pod<std::uint64_t>(in);
  if (m.hypothesis_count_ < 1 || m.output_dim_ < 1 ||
      m.hyp_weight.cols != m.hypothesis_count_ * m.output_dim_ ||
      m.score_weight.cols != m.hypothesis_count_)
    throw data_error("checkpoint: inconsistent head layout in " + path);
  return ckpt;
}

}  // namespace rmcl
