// Synthetic data: section probabilities, q(t), ground-truth sampling,
// outlier corruption, dataset generation and persistence.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "common.hpp"
#include "rng.hpp"
#include "toy_data.hpp"

using namespace rmcl;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("section_probs") {
  const auto at0 = section_probs(0.0);
  CHECK(at0[0] == 0.5);
  CHECK(at0[1] == 0.0);
  CHECK(at0[2] == 0.0);
  CHECK(at0[3] == 0.5);

  const auto at1 = section_probs(1.0);
  CHECK(at1[0] == 0.0);
  CHECK(at1[1] == 0.5);
  CHECK(at1[2] == 0.5);
  CHECK(at1[3] == 0.0);

  const auto mid = section_probs(0.5);
  for (double p : mid) CHECK(p == 0.25);

  CHECK_THROWS_AS(section_probs(-0.1), config_error);
  CHECK_THROWS_AS(section_probs(1.1), config_error);

  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto probs = section_probs(rng.next_double());
    CHECK(probs[0] + probs[1] + probs[2] + probs[3] ==
          doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("q_two_targets is the piece-wise affine tent") {
  CHECK(q_two_targets(0.0) == 1.0);
  CHECK(q_two_targets(0.5) == 0.0);
  CHECK(q_two_targets(1.0) == 1.0);
  CHECK(q_two_targets(0.25) == doctest::Approx(0.5));
  CHECK(q_two_targets(0.75) == doctest::Approx(0.5));
}

TEST_CASE("sample_ground_truth") {
  SUBCASE("t=0 puts every draw in S1 or S4") {
    Rng rng(3);
    for (int i = 0; i < 5000; ++i) {
      const Vec y = sample_ground_truth(0.0, rng);
      const bool in_s1 = y[0] < 0.0 && y[1] < 0.0;
      const bool in_s4 = y[0] >= 0.0 && y[1] >= 0.0;
      CHECK((in_s1 || in_s4));
    }
  }
  SUBCASE("empirical mean at t=0.5 is near the origin") {
    Rng rng(4);
    double sx = 0.0, sy = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const Vec y = sample_ground_truth(0.5, rng);
      sx += y[0];
      sy += y[1];
    }
    CHECK(std::abs(sx / n) < 0.01);
    CHECK(std::abs(sy / n) < 0.01);
  }
  SUBCASE("empirical S4 mass at t=0.1 is 0.45 within 0.01") {
    Rng rng(5);
    int hits = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const Vec y = sample_ground_truth(0.1, rng);
      if (y[0] >= 0.0 && y[1] >= 0.0) ++hits;
    }
    CHECK(std::abs(static_cast<double>(hits) / n - 0.45) < 0.01);
  }
  SUBCASE("clean draws always land in the unit box") {
    Rng rng(6);
    for (int i = 0; i < 20000; ++i) {
      const Vec y = sample_ground_truth(rng.next_double(), rng);
      CHECK(y[0] >= -1.0);
      CHECK(y[0] <= 1.0);
      CHECK(y[1] >= -1.0);
      CHECK(y[1] <= 1.0);
    }
  }
  SUBCASE("the analytic conditional mean is (0,0) for every t") {
    // The independent-ensemble collapse reference.
    for (double t : {0.0, 0.2, 0.5, 0.9}) {
      Rng rng(7);
      double sx = 0.0, sy = 0.0;
      const int n = 100000;
      for (int i = 0; i < n; ++i) {
        const Vec y = sample_ground_truth(t, rng);
        sx += y[0];
        sy += y[1];
      }
      CHECK(std::abs(sx / n) < 0.01);
      CHECK(std::abs(sy / n) < 0.01);
    }
  }
}

TEST_CASE("sample_training") {
  ToyConfig config;
  SUBCASE("t=0.5 always yields one target") {
    Rng rng(8);
    for (int i = 0; i < 2000; ++i)
      CHECK(sample_training(0.5, config, rng).targets.size() == 1);
  }
  SUBCASE("t=0 always yields two targets") {
    Rng rng(9);
    for (int i = 0; i < 2000; ++i)
      CHECK(sample_training(0.0, config, rng).targets.size() == 2);
  }
  SUBCASE("outlier fraction tracks rho = 0.02 within 0.002") {
    ToyConfig noisy = config;
    noisy.outlier_rho = 0.02;
    Rng rng(10);
    std::size_t targets = 0, outside = 0;
    for (int i = 0; i < 400000; ++i) {
      const TrainingSample s = sample_training(rng.next_double(), noisy, rng);
      for (const auto& y : s.targets) {
        ++targets;
        if (y[0] < -1.0 || y[0] > 1.0 || y[1] < -1.0 || y[1] > 1.0) ++outside;
      }
    }
    // A Cauchy(0,1)^2 replacement stays inside [-1,1]^2 with probability
    // (1/2)^2, so the replacement rate is outside_fraction / 0.75.
    const double estimated_rho =
        static_cast<double>(outside) / static_cast<double>(targets) / 0.75;
    CHECK(std::abs(estimated_rho - 0.02) < 0.002);
  }
  SUBCASE("invalid rho rejected") {
    ToyConfig bad = config;
    bad.outlier_rho = 1.0;
    Rng rng(11);
    CHECK_THROWS_AS(sample_training(0.5, bad, rng), config_error);
  }
}

TEST_CASE("generate_dataset") {
  SUBCASE("default sizes are 100k train / 25k validation") {
    ToyConfig config;
    CHECK(config.n_train == 100000);
    CHECK(config.n_val == 25000);
  }
  SUBCASE("counts honor the config") {
    ToyConfig config;
    config.n_train = 257;
    config.n_val = 31;
    const ToyDataset data = generate_dataset(config);
    CHECK(data.train.size() == 257);
    CHECK(data.val.size() == 31);
  }
  SUBCASE("n_train = 0 yields an empty, still valid split") {
    ToyConfig config;
    config.n_train = 0;
    config.n_val = 10;
    const ToyDataset data = generate_dataset(config);
    CHECK(data.train.empty());
    CHECK(data.val.size() == 10);
    const std::string path = temp_path("rmcl_empty_train.csv");
    save_dataset(data, config, path);
    const ToyDataset loaded = load_dataset(path);
    CHECK(loaded.train.empty());
    CHECK(loaded.val.size() == 10);
    std::filesystem::remove(path);
  }
  SUBCASE("same seed produces byte-identical files") {
    ToyConfig config;
    config.n_train = 500;
    config.n_val = 100;
    config.outlier_rho = 0.05;
    const std::string p1 = temp_path("rmcl_ds_a.csv");
    const std::string p2 = temp_path("rmcl_ds_b.csv");
    save_dataset(generate_dataset(config), config, p1);
    save_dataset(generate_dataset(config), config, p2);
    CHECK(file_bytes(p1) == file_bytes(p2));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
  }
  SUBCASE("different seeds differ") {
    ToyConfig a, b;
    a.n_train = b.n_train = 50;
    a.n_val = b.n_val = 10;
    b.seed = a.seed + 1;
    const ToyDataset da = generate_dataset(a);
    const ToyDataset db = generate_dataset(b);
    CHECK(da.train[0].t != db.train[0].t);
  }
  SUBCASE("outlier corruption reaches both splits") {
    ToyConfig config;
    config.n_train = 4000;
    config.n_val = 4000;
    config.outlier_rho = 0.3;
    const ToyDataset data = generate_dataset(config);
    auto has_outlier = [](const std::vector<TrainingSample>& rows) {
      for (const auto& s : rows)
        for (const auto& y : s.targets)
          if (std::abs(y[0]) > 1.0 || std::abs(y[1]) > 1.0) return true;
      return false;
    };
    CHECK(has_outlier(data.train));
    CHECK(has_outlier(data.val));
  }
}

TEST_CASE("dataset round-trips through the CSV format") {
  ToyConfig config;
  config.n_train = 200;
  config.n_val = 40;
  config.seed = 99;
  const ToyDataset data = generate_dataset(config);
  const std::string path = temp_path("rmcl_roundtrip.csv");
  save_dataset(data, config, path);
  const ToyDataset loaded = load_dataset(path);
  REQUIRE(loaded.train.size() == data.train.size());
  REQUIRE(loaded.val.size() == data.val.size());
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    CHECK(loaded.train[i].t == data.train[i].t);
    REQUIRE(loaded.train[i].targets.size() == data.train[i].targets.size());
    for (std::size_t j = 0; j < data.train[i].targets.size(); ++j)
      for (std::size_t d = 0; d < 2; ++d)
        CHECK(loaded.train[i].targets[j][d] == data.train[i].targets[j][d]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("malformed dataset files are data errors") {
  const std::string path = temp_path("rmcl_bad.csv");
  {
    std::ofstream out(path);
    out << "not,a,dataset\n";
  }
  CHECK_THROWS_AS(load_dataset(path), data_error);
  {
    std::ofstream out(path);
    out << "split,t,n_targets,y0x,y0y,y1x,y1y\n";
    out << "train,zzz,1,0,0,,\n";
  }
  CHECK_THROWS_AS(load_dataset(path), data_error);
  {
    std::ofstream out(path);
    out << "split,t,n_targets,y0x,y0y,y1x,y1y\n";
    out << "weird,0.5,1,0,0,,\n";
  }
  CHECK_THROWS_AS(load_dataset(path), data_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_dataset(temp_path("rmcl_missing.csv")), io_error);
}
