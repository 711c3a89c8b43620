#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geometry.hpp"
#include "multi_head.hpp"
#include "toy_data.hpp"

namespace rmcl {

enum class DistanceKind { euclidean, spherical };

double euclidean_distance(std::span<const double> a, std::span<const double> b);

// Great-circle distance for points given as (phi, theta) in radians:
// arccos[sin(phi_a) sin(phi_b) + cos(phi_a) cos(phi_b) cos(theta_b - theta_a)]
// with the arccos argument clamped to [-1, 1]. Result lies in [0, pi].
double spherical_distance(std::span<const double> a, std::span<const double> b);

double point_distance(DistanceKind kind, std::span<const double> a,
                      std::span<const double> b);

// Mean over targets of the distance to the closest hypothesis.
double oracle_error(const std::vector<Vec>& hypotheses,
                    const std::vector<Vec>& targets, DistanceKind kind);

// Exact 1-Wasserstein distance between two normalized Dirac mixtures, solved
// as a transportation problem by successive shortest paths over integer-
// scaled weights. Arguments are canonicalized first, so emd(a,b) and
// emd(b,a) are bitwise identical.
double emd(const DiracMixture& a, const DiracMixture& b, DistanceKind kind);

// Permutation brute force for uniform equal-count mixtures with n <= 8;
// the independent oracle for the exact solver.
double emd_bruteforce_uniform(const DiracMixture& a, const DiracMixture& b,
                              DistanceKind kind);

// Minimum-cost assignment on a square matrix; among all optimal assignments
// returns the lexicographically smallest permutation (row -> column).
std::vector<std::size_t> hungarian(const Matrix& cost);
double assignment_cost(const Matrix& cost, std::span<const std::size_t> perm);

struct CollapseHistogram {
  std::vector<std::uint64_t> counts;  // N_k: samples where head k wins a target
  std::size_t dataset_size = 0;
};

CollapseHistogram collapse_histogram(const MultiHeadModel& model,
                                     std::span<const TrainingSample> dataset);

}  // namespace rmcl
