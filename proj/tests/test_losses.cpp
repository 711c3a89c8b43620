// Training objectives: WTA and variants, scoring loss, compound loss,
// negative sampling, PIT baseline.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "common.hpp"
#include "losses.hpp"
#include "rng.hpp"

using namespace rmcl;

TEST_CASE("underlying_loss is the squared Euclidean distance") {
  CHECK(underlying_loss(Vec{0.4, -0.7}, Vec{0.4, -0.7}) == 0.0);
  CHECK(underlying_loss(Vec{0, 0}, Vec{1, 0}) == doctest::Approx(1.0));
  CHECK(underlying_loss(Vec{1, 2}, Vec{4, 6}) == doctest::Approx(25.0));
  CHECK_THROWS_AS(underlying_loss(Vec{1, 2}, Vec{1}), config_error);
}

TEST_CASE("wta_loss picks the closest head") {
  const std::vector<Vec> single{{0.5, 0.5}};
  const auto r1 = wta_loss(single, Vec{1.0, 1.0});
  CHECK(r1.winner == 0);
  CHECK(r1.loss == doctest::Approx(0.5));

  const std::vector<Vec> two{{0, 0}, {1, 1}};
  const auto r2 = wta_loss(two, Vec{1, 1});
  CHECK(r2.loss == 0.0);
  CHECK(r2.winner == 1);

  const std::vector<Vec> spread{{0, 0}, {2, 0}};
  const auto r3 = wta_loss(spread, Vec{0.5, 0});
  CHECK(r3.loss == doctest::Approx(0.25));
  CHECK(r3.winner == 0);

  CHECK_THROWS_AS(wta_loss({}, Vec{0, 0}), config_error);
}

TEST_CASE("wta_loss ties resolve to the lowest index") {
  const std::vector<Vec> heads{{-1, 0}, {1, 0}};
  CHECK(wta_loss(heads, Vec{0, 0}).winner == 0);
}

TEST_CASE("multi_target_wta_loss reduces to wta_loss on one target") {
  const std::vector<Vec> heads{{0, 0}, {2, 0}};
  const auto single = wta_loss(heads, Vec{0.4, 0.1});
  const auto multi = multi_target_wta_loss(heads, {{0.4, 0.1}});
  CHECK(multi.loss == single.loss);
  CHECK(multi.winners.positives() == std::vector<std::size_t>{single.winner});
}

TEST_CASE("multi_target_wta_loss sums per-target winners") {
  const std::vector<Vec> heads{{0, 0}, {2, 0}};
  SUBCASE("each target nearest a different head") {
    const auto r = multi_target_wta_loss(heads, {{0.1, 0}, {1.9, 0.2}});
    // 0.1^2 + (0.1^2 + 0.2^2)
    CHECK(r.loss == doctest::Approx(0.01 + 0.05));
    CHECK(r.winners.positives() == std::vector<std::size_t>{0, 1});
    CHECK(r.winners.per_target_winner == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("both targets nearest head 0") {
    const auto r = multi_target_wta_loss(heads, {{0.1, 0}, {-0.3, 0.4}});
    CHECK(r.loss == doctest::Approx(0.01 + 0.25));
    CHECK(r.winners.positives() == std::vector<std::size_t>{0});
    CHECK(r.winners.negatives() == std::vector<std::size_t>{1});
  }
  SUBCASE("empty target set is a precondition error") {
    CHECK_THROWS_AS(multi_target_wta_loss(heads, {}), config_error);
  }
}

TEST_CASE("multi_target_wta_loss equals the sum of per-target minima") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec> heads(1 + rng.next_below(6));
    for (auto& h : heads) h = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    std::vector<Vec> targets(1 + rng.next_below(4));
    for (auto& t : targets) t = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    double expected = 0.0;
    for (const auto& t : targets) {
      double best = underlying_loss(heads[0], t);
      for (const auto& h : heads) best = std::min(best, underlying_loss(h, t));
      expected += best;
    }
    CHECK(multi_target_wta_loss(heads, targets).loss ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("variant_weights") {
  const Vec losses{0.5, 0.1, 0.9, 0.3, 0.4};
  SUBCASE("epsilon = 0 degenerates to plain WTA") {
    const Vec wta = variant_weights(LossVariant::wta(), losses);
    const Vec eps = variant_weights(LossVariant::epsilon_wta(0.0), losses);
    CHECK(wta == eps);
    CHECK(wta[1] == 1.0);
  }
  SUBCASE("n = K gives uniform weights") {
    const Vec w = variant_weights(LossVariant::top_n_wta(5), losses);
    for (double v : w) CHECK(v == doctest::Approx(0.2));
  }
  SUBCASE("K=5, eps=0.5: winner 0.5, others 0.125") {
    const Vec w = variant_weights(LossVariant::epsilon_wta(0.5), losses);
    CHECK(w[1] == doctest::Approx(0.5));
    for (std::size_t k : {0, 2, 3, 4}) CHECK(w[k] == doctest::Approx(0.125));
  }
  SUBCASE("top-n selects the n smallest losses") {
    const Vec w = variant_weights(LossVariant::top_n_wta(3), losses);
    CHECK(w[1] == doctest::Approx(1.0 / 3));
    CHECK(w[3] == doctest::Approx(1.0 / 3));
    CHECK(w[4] == doctest::Approx(1.0 / 3));
    CHECK(w[0] == 0.0);
    CHECK(w[2] == 0.0);
  }
  SUBCASE("n > K rejected") {
    CHECK_THROWS_AS(variant_weights(LossVariant::top_n_wta(6), losses),
                    config_error);
  }
  SUBCASE("weights always sum to 1 and stay nonnegative") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
      Vec random_losses(1 + rng.next_below(8));
      for (double& v : random_losses) v = rng.uniform(0, 3);
      for (const LossVariant& variant :
           {LossVariant::wta(), LossVariant::epsilon_wta(0.3),
            LossVariant::top_n_wta(1 + rng.next_below(random_losses.size()))}) {
        const Vec w = variant_weights(variant, random_losses);
        double sum = 0.0;
        for (double v : w) {
          CHECK(v >= 0.0);
          sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("scoring_loss values") {
  SUBCASE("all-positive near-one scores give a vanishing loss") {
    WinnerSet winners;
    winners.positive = {1, 1, 1};
    const Vec scores{1 - 1e-9, 1 - 1e-9, 1 - 1e-9};
    CHECK(scoring_loss(scores, winners) == doctest::Approx(0.0).epsilon(1e-6));
  }
  SUBCASE("K=2, positives={0}, scores (0.5, 0.5) -> 2 ln 2") {
    WinnerSet winners;
    winners.positive = {1, 0};
    CHECK(scoring_loss(Vec{0.5, 0.5}, winners) ==
          doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("K=3, positives={0,1}, scores (0.9, 0.9, 0.1) -> -3 log 0.9") {
    WinnerSet winners;
    winners.positive = {1, 1, 0};
    CHECK(scoring_loss(Vec{0.9, 0.9, 0.1}, winners) ==
          doctest::Approx(-3 * std::log(0.9)).epsilon(1e-12));
  }
  SUBCASE("exact 0/1 scores are clamped, never NaN") {
    WinnerSet winners;
    winners.positive = {1, 0};
    const double loss = scoring_loss(Vec{0.0, 1.0}, winners);
    CHECK(std::isfinite(loss));
    CHECK(loss > 0.0);
  }
  SUBCASE("nonnegative and monotone in the expected directions") {
    WinnerSet winners;
    winners.positive = {1, 0};
    const double base = scoring_loss(Vec{0.6, 0.4}, winners);
    CHECK(base >= 0.0);
    CHECK(scoring_loss(Vec{0.7, 0.4}, winners) < base);  // better positive
    CHECK(scoring_loss(Vec{0.6, 0.5}, winners) > base);  // worse negative
  }
}

TEST_CASE("sample_negative") {
  SUBCASE("singleton set is a forced choice") {
    Rng rng(1);
    const std::vector<std::size_t> negatives{3};
    CHECK(sample_negative(negatives, rng) == 3);
  }
  SUBCASE("empty set is a precondition error") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_negative({}, rng), config_error);
  }
  SUBCASE("uniform over the set") {
    Rng rng(5);
    const std::vector<std::size_t> negatives{1, 2, 3, 4};
    std::size_t counts[5] = {0};
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++counts[sample_negative(negatives, rng)];
    for (std::size_t k : negatives)
      CHECK(std::abs(static_cast<double>(counts[k]) / draws - 0.25) < 0.01);
  }
  SUBCASE("fixed seed reproduces the sequence") {
    const std::vector<std::size_t> negatives{0, 2, 5, 7, 9};
    Rng a(11), b(11);
    for (int i = 0; i < 50; ++i)
      CHECK(sample_negative(negatives, a) == sample_negative(negatives, b));
  }
}

namespace {

ScoredPrediction fixture_prediction() {
  ScoredPrediction pred;
  pred.hypotheses = {{0.0, 0.0}, {1.0, 1.0}, {-1.0, 0.5}};
  pred.raw_scores = {0.5, 0.5, 0.5};
  return pred;
}

}  // namespace

TEST_CASE("compound_loss") {
  const ScoredPrediction pred = fixture_prediction();
  const std::vector<Vec> targets{{0.2, 0.1}};

  SUBCASE("beta = 0 is the variant-weighted WTA term alone") {
    const auto r =
        compound_loss(pred, targets, LossVariant::wta(), 0.0, NegativeMode::all);
    CHECK(r.loss ==
          doctest::Approx(underlying_loss(pred.hypotheses[0], targets[0])));
    CHECK(r.winners.positives() == std::vector<std::size_t>{0});
  }
  SUBCASE("beta = 1, all scores 0.5: WTA term + K ln 2") {
    const auto r =
        compound_loss(pred, targets, LossVariant::wta(), 1.0, NegativeMode::all);
    const double wta_term = underlying_loss(pred.hypotheses[0], targets[0]);
    CHECK(r.loss ==
          doctest::Approx(wta_term + 3 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("sampled_one with a single negative equals all-negatives") {
    ScoredPrediction two = pred;
    two.hypotheses.resize(2);
    two.raw_scores.resize(2);
    Rng rng(3);
    const auto all =
        compound_loss(two, targets, LossVariant::wta(), 1.0, NegativeMode::all);
    const auto sampled = compound_loss(two, targets, LossVariant::wta(), 1.0,
                                       NegativeMode::sampled_one, &rng);
    CHECK(all.loss == sampled.loss);
  }
  SUBCASE("sampled_one keeps exactly one negative term") {
    Rng rng(3);
    const auto sampled = compound_loss(pred, targets, LossVariant::wta(), 1.0,
                                       NegativeMode::sampled_one, &rng);
    const double wta_term = underlying_loss(pred.hypotheses[0], targets[0]);
    // one positive + one sampled negative, all scores 0.5
    CHECK(sampled.loss ==
          doctest::Approx(wta_term + 2 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("winners come from plain argmin whatever the variant") {
    const auto eps = compound_loss(pred, targets, LossVariant::epsilon_wta(0.5),
                                   1.0, NegativeMode::all);
    const auto topn = compound_loss(pred, targets, LossVariant::top_n_wta(3),
                                    1.0, NegativeMode::all);
    CHECK(eps.winners.positives() == std::vector<std::size_t>{0});
    CHECK(topn.winners.positives() == std::vector<std::size_t>{0});
  }
  SUBCASE("beta < 0 rejected") {
    CHECK_THROWS_AS(compound_loss(pred, targets, LossVariant::wta(), -1.0,
                                  NegativeMode::all),
                    config_error);
  }
}

TEST_CASE("compound_loss_grads match finite differences of the loss") {
  // Perturbs the prediction directly; the full network path runs in the
  // acceptance suite.
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    ScoredPrediction pred;
    const std::size_t k = 2 + rng.next_below(4);
    for (std::size_t h = 0; h < k; ++h) {
      pred.hypotheses.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
      pred.raw_scores.push_back(rng.uniform(0.2, 0.8));
    }
    std::vector<Vec> targets(1 + rng.next_below(2));
    for (auto& t : targets) t = {rng.uniform(-1, 1), rng.uniform(-1, 1)};

    const LossVariant variant =
        trial % 3 == 0   ? LossVariant::wta()
        : trial % 3 == 1 ? LossVariant::epsilon_wta(0.5)
                         : LossVariant::top_n_wta(std::min<std::size_t>(3, k));
    const double beta = trial % 2 == 0 ? 1.0 : 0.0;

    const auto analytic =
        compound_loss_grads(pred, targets, variant, beta, NegativeMode::all);
    const double h = 1e-6;
    for (std::size_t head = 0; head < k; ++head) {
      for (std::size_t d = 0; d < 2; ++d) {
        ScoredPrediction up = pred, down = pred;
        up.hypotheses[head][d] += h;
        down.hypotheses[head][d] -= h;
        const double fd =
            (compound_loss(up, targets, variant, beta, NegativeMode::all).loss -
             compound_loss(down, targets, variant, beta, NegativeMode::all)
                 .loss) /
            (2 * h);
        CHECK(analytic.d_hyp[head][d] ==
              doctest::Approx(fd).epsilon(1e-4).scale(1.0));
      }
      // Score-logit gradient via the chain rule d(sigma)/d(logit) = s(1-s).
      ScoredPrediction up = pred, down = pred;
      up.raw_scores[head] += h;
      down.raw_scores[head] -= h;
      const double fd_score =
          (compound_loss(up, targets, variant, beta, NegativeMode::all).loss -
           compound_loss(down, targets, variant, beta, NegativeMode::all)
               .loss) /
          (2 * h);
      const double s = pred.raw_scores[head];
      CHECK(analytic.d_score_logit[head] ==
            doctest::Approx(fd_score * s * (1 - s)).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("pit_loss") {
  SUBCASE("single slot, perfect prediction, loss near zero") {
    PitPrediction pred{{1 - 1e-9}, {{0.3, -0.4}}};
    PitTarget target{{1}, {{0.3, -0.4}}};
    CHECK(pit_loss(pred, target) == doctest::Approx(0.0).epsilon(1e-6));
  }
  SUBCASE("permutation of prediction slots leaves the loss unchanged") {
    PitPrediction pred{{0.8, 0.3}, {{0.5, 0.5}, {-0.5, 0.1}}};
    PitPrediction swapped{{0.3, 0.8}, {{-0.5, 0.1}, {0.5, 0.5}}};
    PitTarget target{{1, 0}, {{0.4, 0.6}, {0.0, 0.0}}};
    CHECK(pit_loss(pred, target) == pit_loss(swapped, target));
  }
  SUBCASE("matches the exhaustive two-permutation minimum") {
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
      PitPrediction pred{{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)},
                         {{rng.uniform(-1, 1), rng.uniform(-1, 1)},
                          {rng.uniform(-1, 1), rng.uniform(-1, 1)}}};
      PitTarget target{{1, static_cast<std::uint8_t>(trial % 2)},
                       {{rng.uniform(-1, 1), rng.uniform(-1, 1)},
                        {rng.uniform(-1, 1), rng.uniform(-1, 1)}}};
      auto manual = [&](std::size_t p0, std::size_t p1) {
        auto bce = [](double y, double a) {
          return -(a * std::log(y) + (1 - a) * std::log(1 - y));
        };
        double loss = bce(pred.activities[p0], 1.0);
        loss += underlying_loss(pred.positions[p0], target.positions[0]);
        loss += bce(pred.activities[p1], target.active[1] ? 1.0 : 0.0);
        if (target.active[1])
          loss += underlying_loss(pred.positions[p1], target.positions[1]);
        return loss;
      };
      const double expected = std::min(manual(0, 1), manual(1, 0));
      CHECK(pit_loss(pred, target) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  SUBCASE("slot count above the exhaustive limit is rejected") {
    PitPrediction pred;
    PitTarget target;
    pred.activities.assign(7, 0.5);
    pred.positions.assign(7, Vec{0, 0});
    target.active.assign(7, 0);
    target.positions.assign(7, Vec{0, 0});
    CHECK_THROWS_AS(pit_loss(pred, target), config_error);
  }
}

TEST_CASE("pit_loss_grads match finite differences") {
  PitPrediction pred{{0.7, 0.4}, {{0.2, -0.3}, {-0.6, 0.5}}};
  PitTarget target{{1, 1}, {{0.3, -0.2}, {-0.5, 0.4}}};
  const PitGrads grads = pit_loss_grads(pred, target);
  const double h = 1e-6;
  for (std::size_t slot = 0; slot < 2; ++slot) {
    for (std::size_t d = 0; d < 2; ++d) {
      PitPrediction up = pred, down = pred;
      up.positions[slot][d] += h;
      down.positions[slot][d] -= h;
      const double fd =
          (pit_loss(up, target) - pit_loss(down, target)) / (2 * h);
      CHECK(grads.d_position[slot][d] ==
            doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
    PitPrediction up = pred, down = pred;
    up.activities[slot] += h;
    down.activities[slot] -= h;
    const double fd = (pit_loss(up, target) - pit_loss(down, target)) / (2 * h);
    const double s = pred.activities[slot];
    CHECK(grads.d_activity_logit[slot] ==
          doctest::Approx(fd * s * (1 - s)).epsilon(1e-5).scale(1.0));
  }
}
