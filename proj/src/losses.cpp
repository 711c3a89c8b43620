#include "losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common.hpp"
#include "matrix.hpp"

namespace rmcl {

namespace {

constexpr double kScoreClamp = 1e-12;

double clamped_log(double x) {
  return std::log(std::clamp(x, kScoreClamp, 1.0 - kScoreClamp));
}

double clamped_log1m(double x) {
  return std::log(std::clamp(1.0 - x, kScoreClamp, 1.0 - kScoreClamp));
}

}  // namespace

double underlying_loss(std::span<const double> a, std::span<const double> b) {
  return squared_distance(a, b);
}

WtaResult wta_loss(const std::vector<Vec>& hypotheses,
                   std::span<const double> target) {
  if (hypotheses.empty()) throw config_error("wta_loss: no hypotheses");
  WtaResult best{underlying_loss(hypotheses[0], target), 0};
  for (std::size_t k = 1; k < hypotheses.size(); ++k) {
    const double loss = underlying_loss(hypotheses[k], target);
    if (loss < best.loss) best = {loss, k};
  }
  return best;
}

std::vector<std::size_t> WinnerSet::positives() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < positive.size(); ++k)
    if (positive[k]) out.push_back(k);
  return out;
}

std::vector<std::size_t> WinnerSet::negatives() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < positive.size(); ++k)
    if (!positive[k]) out.push_back(k);
  return out;
}

MultiTargetWtaResult multi_target_wta_loss(const std::vector<Vec>& hypotheses,
                                           const std::vector<Vec>& targets) {
  if (targets.empty())
    throw config_error("multi_target_wta_loss: empty target set");
  MultiTargetWtaResult result;
  result.winners.positive.assign(hypotheses.size(), 0);
  for (const auto& target : targets) {
    const WtaResult wta = wta_loss(hypotheses, target);
    result.loss += wta.loss;
    result.winners.per_target_winner.push_back(wta.winner);
    result.winners.positive[wta.winner] = 1;
  }
  return result;
}

LossVariant LossVariant::epsilon_wta(double eps) {
  LossVariant v;
  v.kind = VariantKind::epsilon_wta;
  v.epsilon = eps;
  return v;
}

LossVariant LossVariant::top_n_wta(std::size_t n) {
  LossVariant v;
  v.kind = VariantKind::top_n_wta;
  v.top_n = n;
  return v;
}

void LossVariant::validate(std::size_t head_count) const {
  switch (kind) {
    case VariantKind::wta:
      break;
    case VariantKind::epsilon_wta:
      if (epsilon < 0.0 || epsilon >= 1.0)
        throw config_error("epsilon_wta: epsilon must be in [0, 1)");
      break;
    case VariantKind::top_n_wta:
      if (top_n < 1 || top_n > head_count)
        throw config_error("top_n_wta: n must be in [1, K]");
      break;
  }
}

Vec variant_weights(const LossVariant& variant,
                    std::span<const double> per_head_losses) {
  const std::size_t k = per_head_losses.size();
  if (k == 0) throw config_error("variant_weights: no heads");
  variant.validate(k);
  Vec weights(k, 0.0);
  // Winner = argmin with lowest-index tie-break.
  std::size_t winner = 0;
  for (std::size_t i = 1; i < k; ++i)
    if (per_head_losses[i] < per_head_losses[winner]) winner = i;
  switch (variant.kind) {
    case VariantKind::wta:
      weights[winner] = 1.0;
      break;
    case VariantKind::epsilon_wta:
      if (k == 1) {
        weights[0] = 1.0;
      } else {
        const double share = variant.epsilon / static_cast<double>(k - 1);
        for (double& w : weights) w = share;
        weights[winner] = 1.0 - variant.epsilon;
      }
      break;
    case VariantKind::top_n_wta: {
      std::vector<std::size_t> order(k);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return per_head_losses[a] < per_head_losses[b];
                       });
      const double share = 1.0 / static_cast<double>(variant.top_n);
      for (std::size_t i = 0; i < variant.top_n; ++i)
        weights[order[i]] = share;
      break;
    }
  }
  return weights;
}

double scoring_loss(std::span<const double> raw_scores,
                    const WinnerSet& winners) {
  if (raw_scores.size() != winners.head_count())
    throw config_error("scoring_loss: score/winner size mismatch");
  double loss = 0.0;
  for (std::size_t k = 0; k < raw_scores.size(); ++k) {
    if (winners.positive[k])
      loss -= clamped_log(raw_scores[k]);
    else
      loss -= clamped_log1m(raw_scores[k]);
  }
  return loss;
}

std::size_t sample_negative(std::span<const std::size_t> negatives, Rng& rng) {
  if (negatives.empty())
    throw config_error("sample_negative: empty negative set");
  return negatives[rng.next_below(negatives.size())];
}

namespace {

struct ScoringTerms {
  double loss = 0.0;
  // d(scoring loss)/d(score logit) per head, with the sigmoid folded in:
  // positives contribute score-1, negatives score.
  Vec d_logit;
};

ScoringTerms scoring_terms(std::span<const double> raw_scores,
                           const WinnerSet& winners, NegativeMode mode,
                           Rng* rng) {
  ScoringTerms terms;
  terms.d_logit.assign(raw_scores.size(), 0.0);
  std::vector<std::size_t> negative_terms;
  if (mode == NegativeMode::all) {
    negative_terms = winners.negatives();
  } else {
    const auto negatives = winners.negatives();
    if (!negatives.empty()) {
      if (negatives.size() == 1) {
        negative_terms.push_back(negatives[0]);
      } else {
        if (rng == nullptr)
          throw config_error("compound_loss: sampled_one requires an rng");
        negative_terms.push_back(sample_negative(negatives, *rng));
      }
    }
  }
  for (std::size_t k = 0; k < raw_scores.size(); ++k) {
    if (winners.positive[k]) {
      terms.loss -= clamped_log(raw_scores[k]);
      terms.d_logit[k] = raw_scores[k] - 1.0;
    }
  }
  for (std::size_t k : negative_terms) {
    terms.loss -= clamped_log1m(raw_scores[k]);
    terms.d_logit[k] = raw_scores[k];
  }
  return terms;
}

}  // namespace

CompoundGrads compound_loss_grads(const ScoredPrediction& pred,
                                  const std::vector<Vec>& targets,
                                  const LossVariant& variant, double beta,
                                  NegativeMode mode, Rng* rng) {
  if (beta < 0.0) throw config_error("compound_loss: beta must be >= 0");
  if (targets.empty()) throw config_error("compound_loss: empty target set");
  const std::size_t k = pred.hypothesis_count();
  variant.validate(k);

  CompoundGrads out;
  out.winners.positive.assign(k, 0);
  out.d_hyp.assign(k, Vec(pred.hypotheses.empty() ? 0 : pred.hypotheses[0].size(), 0.0));
  out.d_score_logit.assign(k, 0.0);

  Vec per_head(k, 0.0);
  for (const auto& target : targets) {
    for (std::size_t h = 0; h < k; ++h)
      per_head[h] = underlying_loss(pred.hypotheses[h], target);
    // The scoring partition always uses plain argmin winners, independent
    // of the regression weighting variant.
    std::size_t winner = 0;
    for (std::size_t h = 1; h < k; ++h)
      if (per_head[h] < per_head[winner]) winner = h;
    out.winners.per_target_winner.push_back(winner);
    out.winners.positive[winner] = 1;

    const Vec weights = variant_weights(variant, per_head);
    for (std::size_t h = 0; h < k; ++h) {
      if (weights[h] == 0.0) continue;
      out.loss += weights[h] * per_head[h];
      const auto& hyp = pred.hypotheses[h];
      for (std::size_t d = 0; d < hyp.size(); ++d)
        out.d_hyp[h][d] += weights[h] * 2.0 * (hyp[d] - target[d]);
    }
  }

  if (beta > 0.0) {
    const ScoringTerms terms =
        scoring_terms(pred.raw_scores, out.winners, mode, rng);
    out.loss += beta * terms.loss;
    for (std::size_t h = 0; h < k; ++h)
      out.d_score_logit[h] = beta * terms.d_logit[h];
  }
  return out;
}

CompoundResult compound_loss(const ScoredPrediction& pred,
                             const std::vector<Vec>& targets,
                             const LossVariant& variant, double beta,
                             NegativeMode mode, Rng* rng) {
  const CompoundGrads grads =
      compound_loss_grads(pred, targets, variant, beta, mode, rng);
  return {grads.loss, grads.winners};
}

// ------------------------------------------------------------ PIT baseline

namespace {

constexpr std::size_t kMaxPitSlots = 6;

double bce(double predicted, double label) {
  return -(label * clamped_log(predicted) +
           (1.0 - label) * clamped_log1m(predicted));
}

void validate_pit(const PitPrediction& pred, const PitTarget& target) {
  const std::size_t m = pred.activities.size();
  if (m == 0 || pred.positions.size() != m)
    throw config_error("pit_loss: inconsistent prediction slots");
  if (target.active.size() != m || target.positions.size() != m)
    throw config_error("pit_loss: target slots do not match prediction");
  if (m > kMaxPitSlots)
    throw config_error("pit_loss: slot count exceeds exhaustive limit");
}

// Loss of one permutation: prediction slot perm[m] is compared to target
// slot m. Lexicographically first minimizer wins (strict <).
double pit_perm_loss(const PitPrediction& pred, const PitTarget& target,
                     std::span<const std::size_t> perm) {
  double loss = 0.0;
  for (std::size_t m = 0; m < perm.size(); ++m) {
    const std::size_t p = perm[m];
    loss += bce(pred.activities[p], target.active[m] ? 1.0 : 0.0);
    if (target.active[m])
      loss += underlying_loss(pred.positions[p], target.positions[m]);
  }
  return loss;
}

std::vector<std::size_t> pit_best_perm(const PitPrediction& pred,
                                       const PitTarget& target,
                                       double* best_loss) {
  std::vector<std::size_t> perm(pred.activities.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_value = pit_perm_loss(pred, target, perm);
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double value = pit_perm_loss(pred, target, perm);
    if (value < best_value) {
      best_value = value;
      best = perm;
    }
  }
  if (best_loss != nullptr) *best_loss = best_value;
  return best;
}

}  // namespace

double pit_loss(const PitPrediction& pred, const PitTarget& target) {
  validate_pit(pred, target);
  double loss = 0.0;
  pit_best_perm(pred, target, &loss);
  return loss;
}

PitGrads pit_loss_grads(const PitPrediction& pred, const PitTarget& target) {
  validate_pit(pred, target);
  PitGrads grads;
  const std::vector<std::size_t> perm = pit_best_perm(pred, target, &grads.loss);
  const std::size_t m = pred.activities.size();
  grads.d_activity_logit.assign(m, 0.0);
  grads.d_position.assign(m, Vec(pred.positions[0].size(), 0.0));
  for (std::size_t slot = 0; slot < m; ++slot) {
    const std::size_t p = perm[slot];
    const double label = target.active[slot] ? 1.0 : 0.0;
    // BCE through the sigmoid that produced the activity.
    grads.d_activity_logit[p] = pred.activities[p] - label;
    if (target.active[slot]) {
      const auto& pos = pred.positions[p];
      const auto& want = target.positions[slot];
      for (std::size_t d = 0; d < pos.size(); ++d)
        grads.d_position[p][d] = 2.0 * (pos[d] - want[d]);
    }
  }
  return grads;
}

}  // namespace rmcl
