#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "multi_head.hpp"
#include "rng.hpp"

namespace rmcl {

// Squared Euclidean distance: the training loss ell. Evaluation uses the
// plain (non-squared) distances from metrics.hpp.
double underlying_loss(std::span<const double> a, std::span<const double> b);

struct WtaResult {
  double loss = 0.0;
  std::size_t winner = 0;
};

// min_k ell(f_k, y); ties resolve to the lowest head index.
WtaResult wta_loss(const std::vector<Vec>& hypotheses,
                   std::span<const double> target);

// Positive/negative head partition for one training sample: positives are
// the heads that win at least one target under plain argmin.
struct WinnerSet {
  std::vector<std::size_t> per_target_winner;
  std::vector<std::uint8_t> positive;  // one flag per head

  std::size_t head_count() const { return positive.size(); }
  std::vector<std::size_t> positives() const;
  std::vector<std::size_t> negatives() const;
};

struct MultiTargetWtaResult {
  double loss = 0.0;
  WinnerSet winners;
};

// Sum over targets of the winning head's loss.
MultiTargetWtaResult multi_target_wta_loss(const std::vector<Vec>& hypotheses,
                                           const std::vector<Vec>& targets);

enum class VariantKind { wta, epsilon_wta, top_n_wta };

struct LossVariant {
  VariantKind kind = VariantKind::wta;
  double epsilon = 0.0;  // epsilon_wta: 0 <= eps < 1
  std::size_t top_n = 1;  // top_n_wta: 1 <= n <= K

  static LossVariant wta() { return {}; }
  static LossVariant epsilon_wta(double eps);
  static LossVariant top_n_wta(std::size_t n);
  void validate(std::size_t head_count) const;
};

// Per-head gradient weights for one target, given the per-head losses:
// wta -> one-hot winner; epsilon_wta -> winner 1-eps, others eps/(K-1);
// top_n_wta -> the n smallest-loss heads get 1/n each.
Vec variant_weights(const LossVariant& variant,
                    std::span<const double> per_head_losses);

// -sum_{k+} log(score_k) - sum_{k-} log(1 - score_k); scores are clamped to
// [1e-12, 1 - 1e-12] before the log so the result is always finite.
double scoring_loss(std::span<const double> raw_scores,
                    const WinnerSet& winners);

std::size_t sample_negative(std::span<const std::size_t> negatives, Rng& rng);

enum class NegativeMode { all, sampled_one };

struct CompoundResult {
  double loss = 0.0;
  WinnerSet winners;
};

// Variant-weighted multi-target WTA term plus beta * scoring loss. Under
// sampled_one the negative part of the scoring loss ranges over exactly one
// uniformly sampled negative head. Winners always come from plain argmin,
// whatever the regression variant.
CompoundResult compound_loss(const ScoredPrediction& pred,
                             const std::vector<Vec>& targets,
                             const LossVariant& variant, double beta,
                             NegativeMode mode, Rng* rng = nullptr);

// Same computation, also returning gradients w.r.t. the hypothesis outputs
// and the score logits (pre-sigmoid). Used by the trainer and validated
// against finite differences.
struct CompoundGrads {
  double loss = 0.0;
  WinnerSet winners;
  std::vector<Vec> d_hyp;  // K x q
  Vec d_score_logit;       // K
};

CompoundGrads compound_loss_grads(const ScoredPrediction& pred,
                                  const std::vector<Vec>& targets,
                                  const LossVariant& variant, double beta,
                                  NegativeMode mode, Rng* rng = nullptr);

// ------------------------------------------------------------ PIT baseline

struct PitPrediction {
  Vec activities;              // M values in (0,1)
  std::vector<Vec> positions;  // M points
};

struct PitTarget {
  std::vector<std::uint8_t> active;  // M slot labels
  std::vector<Vec> positions;        // M points; inactive slots ignored
};

// min over all slot permutations of [binary cross-entropy over activities +
// squared-distance term over active slots]. M <= 6 (exhaustive search).
double pit_loss(const PitPrediction& pred, const PitTarget& target);

struct PitGrads {
  double loss = 0.0;
  Vec d_activity_logit;        // gradient w.r.t. pre-sigmoid activity logits
  std::vector<Vec> d_position;
};

PitGrads pit_loss_grads(const PitPrediction& pred, const PitTarget& target);

}  // namespace rmcl
