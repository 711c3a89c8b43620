#include "toy_data.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "common.hpp"

namespace rmcl {

namespace {

// Sub-stream tags for dataset generation.
constexpr std::uint64_t kTrainStream = 0x7261696eULL;  // "rain"
constexpr std::uint64_t kValStream = 0x76616c00ULL;    // "val"

struct SectionBox {
  double x_lo, x_hi, y_lo, y_hi;
};

constexpr SectionBox kSections[4] = {
    {-1.0, 0.0, -1.0, 0.0},  // S1
    {-1.0, 0.0, 0.0, 1.0},   // S2
    {0.0, 1.0, -1.0, 0.0},   // S3
    {0.0, 1.0, 0.0, 1.0},    // S4
};

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw config_error("toy data: t must lie in [0,1]");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ToyConfig::validate() const {
  if (!(outlier_rho >= 0.0 && outlier_rho < 1.0))
    throw config_error("ToyConfig: outlier_rho must be in [0,1)");
  if (!(cauchy_scale > 0.0))
    throw config_error("ToyConfig: cauchy_scale must be > 0");
  if (cauchy_location.size() != 2)
    throw config_error("ToyConfig: cauchy_location must be 2D");
}

std::uint64_t ToyConfig::hash() const {
  std::ostringstream canon;
  canon << "n_train=" << n_train << ";n_val=" << n_val
        << ";outlier_rho=" << format_double(outlier_rho)
        << ";cauchy=" << format_double(cauchy_location[0]) << ","
        << format_double(cauchy_location[1]) << ";scale="
        << format_double(cauchy_scale) << ";seed=" << seed;
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : canon.str()) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::array<double, 4> section_probs(double t) {
  check_time(t);
  const double edge = (1.0 - t) / 2.0;
  const double middle = t / 2.0;
  return {edge, middle, middle, edge};
}

double q_two_targets(double t) {
  check_time(t);
  return std::abs(1.0 - 2.0 * t);
}

Vec sample_ground_truth(double t, Rng& rng) {
  const auto probs = section_probs(t);
  const double u = rng.next_double();
  std::size_t section = 3;
  double cum = 0.0;
  for (std::size_t s = 0; s < 3; ++s) {
    cum += probs[s];
    if (u < cum) {
      section = s;
      break;
    }
  }
  const SectionBox& box = kSections[section];
  return {rng.uniform(box.x_lo, box.x_hi), rng.uniform(box.y_lo, box.y_hi)};
}

TrainingSample sample_training(double t, const ToyConfig& config, Rng& rng,
                               bool with_outliers) {
  config.validate();
  TrainingSample sample;
  sample.t = t;
  const std::size_t count = rng.next_double() < q_two_targets(t) ? 2 : 1;
  for (std::size_t i = 0; i < count; ++i) {
    if (with_outliers && config.outlier_rho > 0.0 &&
        rng.next_double() < config.outlier_rho) {
      sample.targets.push_back(
          {config.cauchy_location[0] + config.cauchy_scale * rng.next_cauchy(),
           config.cauchy_location[1] + config.cauchy_scale * rng.next_cauchy()});
    } else {
      sample.targets.push_back(sample_ground_truth(t, rng));
    }
  }
  return sample;
}

ToyDataset generate_dataset(const ToyConfig& config) {
  config.validate();
  ToyDataset data;
  const Rng base(config.seed);
  Rng train_rng = base.fork(kTrainStream);
  data.train.reserve(config.n_train);
  for (std::size_t i = 0; i < config.n_train; ++i) {
    const double t = train_rng.next_double();
    data.train.push_back(sample_training(t, config, train_rng, true));
  }
  Rng val_rng = base.fork(kValStream);
  data.val.reserve(config.n_val);
  for (std::size_t i = 0; i < config.n_val; ++i) {
    const double t = val_rng.next_double();
    data.val.push_back(sample_training(t, config, val_rng, true));
  }
  return data;
}

void save_dataset(const ToyDataset& data, const ToyConfig& config,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("dataset: cannot open for writing: " + path);
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "0x%016llx",
                static_cast<unsigned long long>(config.hash()));
  out << "# rmcl toy dataset v1\n";
  out << "# seed=" << config.seed << " n_train=" << config.n_train
      << " n_val=" << config.n_val
      << " outlier_rho=" << format_double(config.outlier_rho)
      << " cauchy_location=" << format_double(config.cauchy_location[0]) << ","
      << format_double(config.cauchy_location[1])
      << " cauchy_scale=" << format_double(config.cauchy_scale)
      << " config_hash=" << hash_buf << "\n";
  out << "split,t,n_targets,y0x,y0y,y1x,y1y\n";
  auto write_split = [&out](const char* name,
                            const std::vector<TrainingSample>& rows) {
    for (const auto& sample : rows) {
      out << name << ',' << format_double(sample.t) << ','
          << sample.targets.size();
      for (std::size_t i = 0; i < 2; ++i) {
        if (i < sample.targets.size())
          out << ',' << format_double(sample.targets[i][0]) << ','
              << format_double(sample.targets[i][1]);
        else
          out << ",,";
      }
      out << '\n';
    }
  };
  write_split("train", data.train);
  write_split("val", data.val);
  if (!out) throw io_error("dataset: write failed: " + path);
}

ToyDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("dataset: cannot open: " + path);
  ToyDataset data;
  std::string line;
  bool saw_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "split,t,n_targets,y0x,y0y,y1x,y1y")
        throw data_error("dataset: unexpected column header in " + path);
      saw_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    while (fields.size() < 7) fields.emplace_back();
    if (fields.size() != 7)
      throw data_error("dataset: malformed row at line " +
                       std::to_string(line_no));
    TrainingSample sample;
    std::size_t n_targets = 0;
    try {
      sample.t = std::stod(fields[1]);
      n_targets = std::stoul(fields[2]);
    } catch (const std::exception&) {
      throw data_error("dataset: unparsable row at line " +
                       std::to_string(line_no));
    }
    if (n_targets < 1 || n_targets > 2)
      throw data_error("dataset: target count out of range at line " +
                       std::to_string(line_no));
    for (std::size_t i = 0; i < n_targets; ++i) {
      try {
        sample.targets.push_back(
            {std::stod(fields[3 + 2 * i]), std::stod(fields[4 + 2 * i])});
      } catch (const std::exception&) {
        throw data_error("dataset: unparsable target at line " +
                         std::to_string(line_no));
      }
    }
    if (fields[0] == "train")
      data.train.push_back(std::move(sample));
    else if (fields[0] == "val")
      data.val.push_back(std::move(sample));
    else
      throw data_error("dataset: unknown split at line " +
                       std::to_string(line_no));
  }
  if (!saw_header) throw data_error("dataset: missing header in " + path);
  return data;
}

}  // namespace rmcl
