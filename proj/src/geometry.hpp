#pragma once

#include <functional>
#include <span>
#include <vector>

#include "multi_head.hpp"
#include "rng.hpp"

namespace rmcl {

// Discrete probability measure: weighted atoms in R^q. Weights sum to 1
// within 1e-9 after construction through normalize/to_dirac_mixture.
struct DiracMixture {
  std::vector<Vec> atoms;
  Vec weights;

  std::size_t size() const { return atoms.size(); }
};

// Voronoi tessellation induced by the hypotheses under squared Euclidean
// distance (equivalently, nearest Euclidean neighbor membership).
struct Tessellation {
  std::vector<Vec> generators;

  std::size_t size() const { return generators.size(); }
};

// Divides by the sum; throws numeric_error when the sum is below 1e-12 so a
// degenerate prediction never silently becomes a distribution.
Vec normalize_scores(std::span<const double> raw_scores);

// argmin_k of the squared distance to generator k, lowest index on ties.
std::size_t cell_of(const Tessellation& tess, std::span<const double> y);

DiracMixture to_dirac_mixture(const ScoredPrediction& pred);

// Weighted atom average (law of total expectation).
Vec conditional_mean(const DiracMixture& mix);

struct Box {
  Vec lo;
  Vec hi;

  double volume() const;
  bool contains(std::span<const double> y) const;
  Vec sample(Rng& rng) const;
};

Box default_toy_domain();  // [-1,1]^2

// Density of the uniform-in-cell interpretation at y: normalized_score(k) /
// estimated_volume(cell k), with cell volumes estimated by Monte Carlo over
// the box. Throws numeric_error when the containing cell gets no samples.
double uniform_cell_density(const ScoredPrediction& pred,
                            std::span<const double> y, const Box& domain,
                            std::size_t mc_samples, Rng& rng);

using PointSampler = std::function<Vec(Rng&)>;

// Monte-Carlo cell centroid: mean of the sampler draws landing in cell k.
// hits == 0 is the empty-cell signal; the centroid is meaningless then.
struct CellCentroidEstimate {
  Vec centroid;
  std::size_t hits = 0;
};

CellCentroidEstimate cell_centroid_mc(const Tessellation& tess, std::size_t k,
                                      const PointSampler& sampler,
                                      std::size_t n, Rng& rng);

// Fraction of sampler draws landing in cell k.
double cell_mass_mc(const Tessellation& tess, std::size_t k,
                    const PointSampler& sampler, std::size_t n, Rng& rng);

// One shared pass over n draws for all cells at once; centroids and masses
// match the per-cell estimators run with the same rng seed.
struct CellStats {
  std::vector<CellCentroidEstimate> cells;
  std::size_t draws = 0;

  double mass(std::size_t k) const {
    return static_cast<double>(cells[k].hits) / static_cast<double>(draws);
  }
};

CellStats cell_stats_mc(const Tessellation& tess, const PointSampler& sampler,
                        std::size_t n, Rng& rng);

}  // namespace rmcl
