#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mlp.hpp"

namespace rmcl {

// How a checkpoint was trained; evaluation uses it to pick a default weight
// policy (learned scores vs uniform).
enum class ModelKind : std::uint32_t {
  multi_head_scored = 0,  // WTA + learned scoring heads
  multi_head_plain = 1,   // WTA only, score heads left at init
  single_member = 2,      // one hypothesis, ensemble member
  pit = 3,                // slots trained with the permutation-invariant loss
};

// Shared ReLU trunk with K affine hypothesis heads (trunk -> R^q) and K
// affine score heads (trunk -> sigmoid scalar). The heads are stored as one
// concatenated weight matrix per group; head k owns columns [k*q, (k+1)*q)
// of hyp_weight and column k of score_weight.
struct MultiHeadModel {
  MlpParams trunk;
  Matrix hyp_weight;  // [trunk_out x K*q]
  Vec hyp_bias;       // [K*q]
  Matrix score_weight;  // [trunk_out x K]
  Vec score_bias;       // [K]
  std::size_t hypothesis_count_ = 0;
  std::size_t output_dim_ = 0;

  std::size_t hypothesis_count() const { return hypothesis_count_; }
  std::size_t output_dim() const { return output_dim_; }
  std::size_t input_dim() const { return trunk.input_dim(); }
  std::size_t trunk_dim() const { return trunk.output_dim(); }
};

// One forward pass: K points in output space plus K raw scores in (0,1).
struct ScoredPrediction {
  std::vector<Vec> hypotheses;
  Vec raw_scores;

  std::size_t hypothesis_count() const { return hypotheses.size(); }
};

// hyp_bias_spread sets the uniform range of the hypothesis-head biases, i.e.
// how far apart the K hypotheses start. Spread-out heads keep their own
// regions under winner-takes-all training instead of collapsing onto the
// populated modes early.
MultiHeadModel make_multi_head(std::size_t input_dim, std::size_t hidden,
                               std::size_t trunk_layers, std::size_t k,
                               std::size_t q, Rng& rng,
                               double hyp_bias_spread = 1.5);

ScoredPrediction predict(const MultiHeadModel& model,
                         std::span<const double> x);
std::vector<ScoredPrediction> predict_batch(const MultiHeadModel& model,
                                            const std::vector<Vec>& inputs);

// Batched internals used by the trainer.
struct ModelTrace {
  ActivationTrace trunk;
  Matrix hyp_out;       // [S x K*q]
  Matrix score_logit;   // [S x K]
  Matrix score;         // sigmoid(score_logit)
};

struct ModelGrads {
  MlpGrads trunk;
  Matrix hyp_weight;
  Vec hyp_bias;
  Matrix score_weight;
  Vec score_bias;
};

void model_forward(const MultiHeadModel& model, const Matrix& inputs,
                   ModelTrace& trace);
// d_hyp is d(loss)/d(hypothesis outputs) [S x K*q]; d_score_logit is the
// gradient w.r.t. the score logits (pre-sigmoid) [S x K].
void model_backward(const MultiHeadModel& model, const ModelTrace& trace,
                    const Matrix& d_hyp, const Matrix& d_score_logit,
                    ModelGrads& grads);

ModelGrads zero_grads_like(const MultiHeadModel& model);
ScoredPrediction prediction_from_trace(const MultiHeadModel& model,
                                       const ModelTrace& trace,
                                       std::size_t row);

std::vector<std::span<double>> param_spans(MultiHeadModel& model);
std::vector<std::span<const double>> param_spans(const MultiHeadModel& model);
std::vector<std::span<double>> grad_spans(ModelGrads& grads);
std::vector<std::span<const double>> grad_spans(const ModelGrads& grads);
std::size_t param_count(const MultiHeadModel& model);

// Versioned little-endian binary container; layout documented in README.
struct Checkpoint {
  MultiHeadModel model;
  ModelKind kind = ModelKind::multi_head_scored;
  std::uint64_t rng_seed = 0;
  std::array<std::uint64_t, 4> rng_state{};
  std::uint64_t step = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rmcl
