#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"

namespace rmcl {

// One training record: scalar time input t in [0,1] and one or two 2D
// targets. Clean targets lie in [-1,1]^2; Cauchy outliers may land anywhere.
struct TrainingSample {
  double t = 0.0;
  std::vector<Vec> targets;
};

struct ToyConfig {
  std::size_t n_train = 100000;
  std::size_t n_val = 25000;
  double outlier_rho = 0.0;  // probability of replacing a target, [0,1)
  Vec cauchy_location = {0.0, 0.0};
  double cauchy_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  std::uint64_t hash() const;  // stable FNV-1a over the canonical fields
};

// Section probabilities for (S1, S2, S3, S4): p(S1)=p(S4)=(1-t)/2,
// p(S2)=p(S3)=t/2.
std::array<double, 4> section_probs(double t);

// Probability of drawing two targets instead of one: piece-wise affine with
// q(0)=1, q(1/2)=0, q(1)=1.
double q_two_targets(double t);

// Picks a section by its probability, then a uniform point within it.
// Sections: S1=[-1,0)x[-1,0), S2=[-1,0)x[0,1], S3=[0,1]x[-1,0), S4=[0,1]^2.
Vec sample_ground_truth(double t, Rng& rng);

// Draws 2 targets with probability q(t), else 1; with_outliers additionally
// replaces each target by a bivariate Cauchy draw with probability rho.
TrainingSample sample_training(double t, const ToyConfig& config, Rng& rng,
                               bool with_outliers = true);

struct ToyDataset {
  std::vector<TrainingSample> train;
  std::vector<TrainingSample> val;
};

// t ~ U[0,1] per sample; outlier corruption applies to both splits, so the
// validation loss sees the same corrupted distribution the model trains on.
ToyDataset generate_dataset(const ToyConfig& config);

// CSV with a commented header carrying the seed and config hash; columns
// split,t,n_targets,y0x,y0y,y1x,y1y. Byte-stable for a given config.
void save_dataset(const ToyDataset& data, const ToyConfig& config,
                  const std::string& path);
ToyDataset load_dataset(const std::string& path);

}  // namespace rmcl
