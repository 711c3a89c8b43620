// Inference geometry: score normalization, Voronoi cells, density
// interpretations and the Monte-Carlo estimators.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "geometry.hpp"
#include "rng.hpp"
#include "toy_data.hpp"

using namespace rmcl;

TEST_CASE("normalize_scores") {
  SUBCASE("already normalized input passes through") {
    const Vec w = normalize_scores(Vec{0.25, 0.25, 0.25, 0.25});
    for (double v : w) CHECK(v == doctest::Approx(0.25));
  }
  SUBCASE("(1, 1) -> (0.5, 0.5)") {
    const Vec w = normalize_scores(Vec{1.0, 1.0});
    CHECK(w[0] == 0.5);
    CHECK(w[1] == 0.5);
  }
  SUBCASE("(0.9, 0.1, 0.2) divides by 1.2") {
    const Vec w = normalize_scores(Vec{0.9, 0.1, 0.2});
    CHECK(w[0] == doctest::Approx(0.75));
    CHECK(w[1] == doctest::Approx(0.1 / 1.2));
    CHECK(w[2] == doctest::Approx(0.2 / 1.2));
  }
  SUBCASE("degenerate all-zero scores are an error, never silent") {
    CHECK_THROWS_AS(normalize_scores(Vec{0.0, 0.0}), numeric_error);
    CHECK_THROWS_AS(normalize_scores(Vec{1e-13, 1e-13}), numeric_error);
  }
  SUBCASE("negative scores violate the precondition") {
    CHECK_THROWS_AS(normalize_scores(Vec{0.5, -0.1}), config_error);
  }
}

TEST_CASE("cell_of") {
  SUBCASE("single generator always wins") {
    const Tessellation tess{{{0.3, 0.4}}};
    CHECK(cell_of(tess, Vec{10, -3}) == 0);
  }
  SUBCASE("nearest generator wins") {
    const Tessellation tess{{{-1, 0}, {1, 0}}};
    CHECK(cell_of(tess, Vec{0.5, 0}) == 1);
    CHECK(cell_of(tess, Vec{-0.2, 0.4}) == 0);
  }
  SUBCASE("equidistant query goes to the lowest index") {
    const Tessellation tess{{{-1, 0}, {1, 0}}};
    CHECK(cell_of(tess, Vec{0, 0}) == 0);
  }
  SUBCASE("power-of-two isotropic scaling preserves membership exactly") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      Tessellation tess;
      for (int k = 0; k < 5; ++k)
        tess.generators.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
      const Vec y{rng.uniform(-2, 2), rng.uniform(-2, 2)};
      const std::size_t base = cell_of(tess, y);
      for (double scale : {0.25, 0.5, 2.0, 8.0}) {
        Tessellation scaled;
        for (const auto& g : tess.generators)
          scaled.generators.push_back({g[0] * scale, g[1] * scale});
        CHECK(cell_of(scaled, Vec{y[0] * scale, y[1] * scale}) == base);
      }
    }
  }
}

TEST_CASE("to_dirac_mixture") {
  SUBCASE("K=1 gives a single unit-weight atom") {
    ScoredPrediction pred{{{0.2, 0.8}}, {0.37}};
    const DiracMixture mix = to_dirac_mixture(pred);
    CHECK(mix.size() == 1);
    CHECK(mix.weights[0] == 1.0);
  }
  SUBCASE("equal raw scores give uniform weights") {
    ScoredPrediction pred{{{0, 0}, {1, 0}, {0, 1}}, {0.4, 0.4, 0.4}};
    const DiracMixture mix = to_dirac_mixture(pred);
    for (double w : mix.weights) CHECK(w == doctest::Approx(1.0 / 3));
  }
  SUBCASE("(0.8, 0.2, 0.0) normalizes over the unit sum") {
    ScoredPrediction pred{{{0, 0}, {1, 0}, {0, 1}}, {0.8, 0.2, 0.0}};
    const DiracMixture mix = to_dirac_mixture(pred);
    CHECK(mix.weights[0] == doctest::Approx(0.8));
    CHECK(mix.weights[1] == doctest::Approx(0.2));
    CHECK(mix.weights[2] == 0.0);
  }
  SUBCASE("weights sum to one") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      ScoredPrediction pred;
      const std::size_t k = 1 + rng.next_below(9);
      for (std::size_t h = 0; h < k; ++h) {
        pred.hypotheses.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        pred.raw_scores.push_back(rng.uniform(0.01, 1.0));
      }
      const DiracMixture mix = to_dirac_mixture(pred);
      double sum = 0.0;
      for (double w : mix.weights) sum += w;
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("conditional_mean") {
  SUBCASE("single atom") {
    const DiracMixture mix{{{0.7, -0.2}}, {1.0}};
    const Vec mean = conditional_mean(mix);
    CHECK(mean[0] == 0.7);
    CHECK(mean[1] == -0.2);
  }
  SUBCASE("symmetric pair averages to the origin") {
    const DiracMixture mix{{{-1, 0}, {1, 0}}, {0.5, 0.5}};
    const Vec mean = conditional_mean(mix);
    CHECK(mean[0] == 0.0);
    CHECK(mean[1] == 0.0);
  }
  SUBCASE("(0,0) and (2,2) with weights (0.25, 0.75) -> (1.5, 1.5)") {
    const DiracMixture mix{{{0, 0}, {2, 2}}, {0.25, 0.75}};
    const Vec mean = conditional_mean(mix);
    CHECK(mean[0] == doctest::Approx(1.5));
    CHECK(mean[1] == doctest::Approx(1.5));
  }
  SUBCASE("shifting every atom shifts the mean (affine equivariance)") {
    Rng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
      DiracMixture mix;
      const std::size_t k = 1 + rng.next_below(6);
      double sum = 0.0;
      for (std::size_t h = 0; h < k; ++h) {
        mix.atoms.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        mix.weights.push_back(rng.uniform(0.1, 1.0));
        sum += mix.weights.back();
      }
      for (double& w : mix.weights) w /= sum;
      const Vec shift{rng.uniform(-3, 3), rng.uniform(-3, 3)};
      DiracMixture shifted = mix;
      for (auto& a : shifted.atoms) {
        a[0] += shift[0];
        a[1] += shift[1];
      }
      const Vec m0 = conditional_mean(mix);
      const Vec m1 = conditional_mean(shifted);
      CHECK(m1[0] == doctest::Approx(m0[0] + shift[0]).epsilon(1e-12));
      CHECK(m1[1] == doctest::Approx(m0[1] + shift[1]).epsilon(1e-12));
    }
  }
}

TEST_CASE("uniform_cell_density") {
  SUBCASE("one cell over the unit square has density 1 everywhere") {
    ScoredPrediction pred{{{0.5, 0.5}}, {1.0}};
    const Box domain{{0, 0}, {1, 1}};
    Rng rng(4);
    const double d =
        uniform_cell_density(pred, Vec{0.25, 0.75}, domain, 2000, rng);
    CHECK(d == doctest::Approx(1.0));
  }
  SUBCASE("two symmetric half-square cells carry density 0.25 each") {
    ScoredPrediction pred{{{-0.5, 0.0}, {0.5, 0.0}}, {0.5, 0.5}};
    Rng rng(5);
    const double left = uniform_cell_density(pred, Vec{-0.4, 0.2},
                                             default_toy_domain(), 200000, rng);
    Rng rng2(5);
    const double right = uniform_cell_density(
        pred, Vec{0.6, -0.3}, default_toy_domain(), 200000, rng2);
    CHECK(left == doctest::Approx(0.25).epsilon(0.05));
    CHECK(right == doctest::Approx(0.25).epsilon(0.05));
  }
  SUBCASE("density integrates to about one over the domain") {
    Rng rng(6);
    ScoredPrediction pred;
    for (int k = 0; k < 3; ++k) {
      pred.hypotheses.push_back({rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)});
      pred.raw_scores.push_back(rng.uniform(0.2, 1.0));
    }
    const Box domain = default_toy_domain();
    const Tessellation tess{pred.hypotheses};
    // The density is constant per cell, so its integral is the sum of
    // per-cell density times cell volume, with the volumes estimated from
    // an independent 1e5-draw stream.
    double integral = 0.0;
    for (std::size_t k = 0; k < tess.size(); ++k) {
      Rng density_rng(100);
      const double density = uniform_cell_density(
          pred, pred.hypotheses[k], domain, 100000, density_rng);
      Rng volume_rng(200);  // independent of the density's own estimate
      std::size_t hits = 0;
      const std::size_t draws = 100000;
      for (std::size_t i = 0; i < draws; ++i)
        if (cell_of(tess, domain.sample(volume_rng)) == k) ++hits;
      integral += density * domain.volume() * static_cast<double>(hits) /
                  static_cast<double>(draws);
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(0.02));
  }
  SUBCASE("preconditions") {
    ScoredPrediction pred{{{0, 0}}, {1.0}};
    Rng rng(1);
    CHECK_THROWS_AS(uniform_cell_density(pred, Vec{0, 0},
                                         default_toy_domain(), 100, rng),
                    config_error);
    CHECK_THROWS_AS(uniform_cell_density(pred, Vec{5, 0},
                                         default_toy_domain(), 2000, rng),
                    config_error);
  }
}

TEST_CASE("cell_centroid_mc") {
  SUBCASE("single cell over a symmetric box centers at the origin") {
    const Tessellation tess{{{0.0, 0.0}}};
    const Box domain = default_toy_domain();
    Rng rng(9);
    const auto est = cell_centroid_mc(
        tess, 0, [&](Rng& r) { return domain.sample(r); }, 40000, rng);
    CHECK(est.hits == 40000);
    CHECK(std::abs(est.centroid[0]) < 0.02);
    CHECK(std::abs(est.centroid[1]) < 0.02);
  }
  SUBCASE("toy sampler at t=0.5: cell centroids sit at the section centers") {
    const Tessellation tess{
        {{-0.5, -0.5}, {-0.5, 0.5}, {0.5, -0.5}, {0.5, 0.5}}};
    const Vec centers[4] = {
        {-0.5, -0.5}, {-0.5, 0.5}, {0.5, -0.5}, {0.5, 0.5}};
    for (std::size_t k = 0; k < 4; ++k) {
      Rng rng(50 + k);
      const auto est = cell_centroid_mc(
          tess, k, [](Rng& r) { return sample_ground_truth(0.5, r); }, 35000,
          rng);
      REQUIRE(est.hits > 0);
      CHECK(std::abs(est.centroid[0] - centers[k][0]) < 0.02);
      CHECK(std::abs(est.centroid[1] - centers[k][1]) < 0.02);
    }
  }
  SUBCASE("a far-away cell reports the empty signal instead of NaN") {
    const Tessellation tess{{{0.0, 0.0}, {50.0, 50.0}}};
    Rng rng(10);
    const auto est = cell_centroid_mc(
        tess, 1, [](Rng& r) { return sample_ground_truth(0.5, r); }, 5000,
        rng);
    CHECK(est.hits == 0);
    for (double c : est.centroid) CHECK(std::isfinite(c));
  }
}

TEST_CASE("cell_mass_mc") {
  SUBCASE("single cell has mass exactly one") {
    const Tessellation tess{{{0, 0}}};
    Rng rng(11);
    CHECK(cell_mass_mc(tess, 0,
                       [](Rng& r) { return sample_ground_truth(0.3, r); }, 1000,
                       rng) == 1.0);
  }
  SUBCASE("two symmetric cells split a symmetric sampler evenly") {
    const Tessellation tess{{{-0.5, 0.0}, {0.5, 0.0}}};
    Rng rng(12);
    const double mass = cell_mass_mc(
        tess, 0, [](Rng& r) { return sample_ground_truth(0.5, r); }, 100000,
        rng);
    CHECK(mass == doctest::Approx(0.5).epsilon(0.02));
  }
  SUBCASE("toy t=0.1 masses approximate ((1-t)/2, t/2, t/2, (1-t)/2)") {
    const Tessellation tess{
        {{-0.5, -0.5}, {-0.5, 0.5}, {0.5, -0.5}, {0.5, 0.5}}};
    const double expected[4] = {0.45, 0.05, 0.05, 0.45};
    for (std::size_t k = 0; k < 4; ++k) {
      Rng rng(77);  // same stream per call: masses share the draw set
      const double mass = cell_mass_mc(
          tess, k, [](Rng& r) { return sample_ground_truth(0.1, r); }, 100000,
          rng);
      CHECK(std::abs(mass - expected[k]) < 0.01);
    }
  }
  SUBCASE("masses over all cells sum to one exactly with a shared stream") {
    const Tessellation tess{{{-0.7, 0.1}, {0.2, 0.4}, {0.5, -0.6}}};
    double sum = 0.0;
    for (std::size_t k = 0; k < tess.size(); ++k) {
      Rng rng(31);  // identical seed -> identical draws for every cell
      sum += cell_mass_mc(
          tess, k, [](Rng& r) { return sample_ground_truth(0.4, r); }, 20000,
          rng);
    }
    CHECK(sum == 1.0);
  }
}

TEST_CASE("cell_stats_mc equals the per-cell estimators on a shared stream") {
  const Tessellation tess{{{-0.5, -0.5}, {0.0, 0.3}, {0.6, -0.2}}};
  const auto sampler = [](Rng& r) { return sample_ground_truth(0.7, r); };
  Rng rng(41);
  const CellStats stats = cell_stats_mc(tess, sampler, 20000, rng);
  for (std::size_t k = 0; k < tess.size(); ++k) {
    Rng per_cell(41);
    const auto centroid = cell_centroid_mc(tess, k, sampler, 20000, per_cell);
    Rng per_mass(41);
    const double mass = cell_mass_mc(tess, k, sampler, 20000, per_mass);
    CHECK(stats.cells[k].hits == centroid.hits);
    CHECK(stats.mass(k) == mass);
    for (std::size_t d = 0; d < 2; ++d)
      CHECK(stats.cells[k].centroid[d] == centroid.centroid[d]);
  }
}
