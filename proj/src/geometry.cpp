#include "geometry.hpp"

#include <cmath>
#include <string>

#include "common.hpp"
#include "losses.hpp"

namespace rmcl {

Vec normalize_scores(std::span<const double> raw_scores) {
  if (raw_scores.empty()) throw config_error("normalize_scores: empty input");
  double sum = 0.0;
  for (double s : raw_scores) {
    if (!(s >= 0.0))
      throw config_error("normalize_scores: negative or NaN raw score");
    sum += s;
  }
  if (sum < 1e-12)
    throw numeric_error("normalize_scores: degenerate all-zero scores");
  Vec out(raw_scores.begin(), raw_scores.end());
  for (double& s : out) s /= sum;
  return out;
}

std::size_t cell_of(const Tessellation& tess, std::span<const double> y) {
  if (tess.generators.empty()) throw config_error("cell_of: no generators");
  std::size_t best = 0;
  double best_dist = squared_distance(tess.generators[0], y);
  for (std::size_t k = 1; k < tess.generators.size(); ++k) {
    const double dist = squared_distance(tess.generators[k], y);
    if (dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  return best;
}

DiracMixture to_dirac_mixture(const ScoredPrediction& pred) {
  DiracMixture mix;
  mix.atoms = pred.hypotheses;
  mix.weights = normalize_scores(pred.raw_scores);
  return mix;
}

Vec conditional_mean(const DiracMixture& mix) {
  if (mix.atoms.empty()) throw config_error("conditional_mean: empty mixture");
  Vec mean(mix.atoms[0].size(), 0.0);
  for (std::size_t k = 0; k < mix.atoms.size(); ++k)
    for (std::size_t d = 0; d < mean.size(); ++d)
      mean[d] += mix.weights[k] * mix.atoms[k][d];
  return mean;
}

double Box::volume() const {
  double v = 1.0;
  for (std::size_t d = 0; d < lo.size(); ++d) v *= hi[d] - lo[d];
  return v;
}

bool Box::contains(std::span<const double> y) const {
  if (y.size() != lo.size()) throw config_error("Box: dimension mismatch");
  for (std::size_t d = 0; d < y.size(); ++d)
    if (y[d] < lo[d] || y[d] > hi[d]) return false;
  return true;
}

Vec Box::sample(Rng& rng) const {
  Vec point(lo.size());
  for (std::size_t d = 0; d < lo.size(); ++d)
    point[d] = rng.uniform(lo[d], hi[d]);
  return point;
}

Box default_toy_domain() { return Box{{-1.0, -1.0}, {1.0, 1.0}}; }

double uniform_cell_density(const ScoredPrediction& pred,
                            std::span<const double> y, const Box& domain,
                            std::size_t mc_samples, Rng& rng) {
  if (mc_samples < 1000)
    throw config_error("uniform_cell_density: mc_samples must be >= 1000");
  if (!domain.contains(y))
    throw config_error("uniform_cell_density: query outside the domain");
  const Vec weights = normalize_scores(pred.raw_scores);
  const Tessellation tess{pred.hypotheses};
  const std::size_t cell = cell_of(tess, y);

  std::size_t hits = 0;
  for (std::size_t i = 0; i < mc_samples; ++i) {
    const Vec draw = domain.sample(rng);
    if (cell_of(tess, draw) == cell) ++hits;
  }
  if (hits == 0)
    throw numeric_error("uniform_cell_density: cell " + std::to_string(cell) +
                        " has zero estimated volume");
  const double volume = domain.volume() * static_cast<double>(hits) /
                        static_cast<double>(mc_samples);
  return weights[cell] / volume;
}

CellCentroidEstimate cell_centroid_mc(const Tessellation& tess, std::size_t k,
                                      const PointSampler& sampler,
                                      std::size_t n, Rng& rng) {
  if (n < 1) throw config_error("cell_centroid_mc: n must be >= 1");
  if (k >= tess.size()) throw config_error("cell_centroid_mc: bad cell index");
  CellCentroidEstimate estimate;
  estimate.centroid.assign(tess.generators[0].size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec draw = sampler(rng);
    if (cell_of(tess, draw) != k) continue;
    ++estimate.hits;
    for (std::size_t d = 0; d < draw.size(); ++d)
      estimate.centroid[d] += draw[d];
  }
  if (estimate.hits > 0)
    for (double& c : estimate.centroid)
      c /= static_cast<double>(estimate.hits);
  return estimate;
}

double cell_mass_mc(const Tessellation& tess, std::size_t k,
                    const PointSampler& sampler, std::size_t n, Rng& rng) {
  if (n < 1) throw config_error("cell_mass_mc: n must be >= 1");
  if (k >= tess.size()) throw config_error("cell_mass_mc: bad cell index");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (cell_of(tess, sampler(rng)) == k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(n);
}

CellStats cell_stats_mc(const Tessellation& tess, const PointSampler& sampler,
                        std::size_t n, Rng& rng) {
  if (n < 1) throw config_error("cell_stats_mc: n must be >= 1");
  CellStats stats;
  stats.draws = n;
  stats.cells.resize(tess.size());
  for (auto& cell : stats.cells)
    cell.centroid.assign(tess.generators[0].size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec draw = sampler(rng);
    auto& cell = stats.cells[cell_of(tess, draw)];
    ++cell.hits;
    for (std::size_t d = 0; d < draw.size(); ++d) cell.centroid[d] += draw[d];
  }
  for (auto& cell : stats.cells)
    if (cell.hits > 0)
      for (double& c : cell.centroid) c /= static_cast<double>(cell.hits);
  return stats;
}

}  // namespace rmcl
