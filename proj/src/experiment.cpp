#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include <json.hpp>

#include "common.hpp"
#include "geometry.hpp"

namespace rmcl {

// ------------------------------------------------------------ configuration

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // dataset
      "dataset_seed", "n_train", "n_val", "outlier_rho", "cauchy_x",
      "cauchy_y", "cauchy_scale",
      // model / training
      "variant", "k", "epsilon", "top_n", "beta", "model", "pit_slots",
      "epochs", "batch_size", "lr", "adam_beta1", "adam_beta2", "adam_eps",
      "grad_clip_norm", "sample_grad_clip", "train_seed", "hidden_units",
      "trunk_layers", "head_init_spread",
      // evaluation
      "t_grid", "gt_samples_per_t", "centroid_samples", "distance",
      "weight_policy", "eval_seed", "score_threshold", "drop_score_below",
      // misc
      "threads",
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw config_error("config: key '" + key + "' expects a number, got '" +
                       value + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* begin = value.data();
  const auto* end = value.data() + value.size();
  const auto result = std::from_chars(begin, end, out);
  if (result.ec != std::errc() || result.ptr != end)
    throw config_error("config: key '" + key +
                       "' expects a non-negative integer, got '" + value + "'");
  return out;
}

template <typename T>
void read_number(const KeyValues& kv, const std::string& key, T& out) {
  const auto it = kv.find(key);
  if (it == kv.end()) return;
  if constexpr (std::is_floating_point_v<T>)
    out = to_double(key, it->second);
  else
    out = static_cast<T>(to_u64(key, it->second));
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

KeyValues parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("config: cannot open: " + path);
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw config_error("config: expected 'key = value' at line " +
                         std::to_string(line_no) + " of " + path);
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    if (key.empty())
      throw config_error("config: empty key at line " +
                         std::to_string(line_no) + " of " + path);
    kv[key] = value;
  }
  validate_known_keys(kv);
  return kv;
}

void apply_override(KeyValues& kv, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw config_error("config override must look like key=value: " +
                       assignment);
  const std::string key = trim(assignment.substr(0, eq));
  kv[key] = trim(assignment.substr(eq + 1));
  validate_known_keys(kv);
}

void validate_known_keys(const KeyValues& kv) {
  for (const auto& [key, value] : kv)
    if (known_keys().count(key) == 0)
      throw config_error("config: unknown key '" + key + "'");
}

TrainVariant parse_variant(const std::string& name) {
  if (name == "wta") return TrainVariant::wta;
  if (name == "epsilon") return TrainVariant::epsilon;
  if (name == "topn") return TrainVariant::topn;
  if (name == "rmcl") return TrainVariant::rmcl;
  if (name == "rmcl_star") return TrainVariant::rmcl_star;
  if (name == "epsilon_rmcl") return TrainVariant::epsilon_rmcl;
  if (name == "topn_rmcl") return TrainVariant::topn_rmcl;
  if (name == "pit") return TrainVariant::pit;
  throw config_error("config: unknown variant '" + name + "'");
}

const char* variant_name(TrainVariant variant) {
  switch (variant) {
    case TrainVariant::wta: return "wta";
    case TrainVariant::epsilon: return "epsilon";
    case TrainVariant::topn: return "topn";
    case TrainVariant::rmcl: return "rmcl";
    case TrainVariant::rmcl_star: return "rmcl_star";
    case TrainVariant::epsilon_rmcl: return "epsilon_rmcl";
    case TrainVariant::topn_rmcl: return "topn_rmcl";
    case TrainVariant::pit: return "pit";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (hypothesis_count < 1)
    throw config_error("TrainConfig: k must be >= 1");
  if (batch_size < 1) throw config_error("TrainConfig: batch_size must be >= 1");
  if (beta < 0.0) throw config_error("TrainConfig: beta must be >= 0");
  if (hidden_units < 1 || trunk_layers < 1)
    throw config_error("TrainConfig: trunk must have positive size");
  if (head_init_spread < 0.0)
    throw config_error("TrainConfig: head_init_spread must be >= 0");
  if (grad_clip_norm < 0.0 || sample_grad_clip < 0.0)
    throw config_error("TrainConfig: gradient clips must be >= 0");
  if (variant == TrainVariant::pit && (pit_slots < 1 || pit_slots > 6))
    throw config_error("TrainConfig: pit_slots must be in [1, 6]");
  if (variant != TrainVariant::pit)
    regression_variant().validate(model_kind == TrainModelKind::single_member
                                      ? 1
                                      : hypothesis_count);
}

bool TrainConfig::uses_scoring() const {
  switch (variant) {
    case TrainVariant::rmcl:
    case TrainVariant::rmcl_star:
    case TrainVariant::epsilon_rmcl:
    case TrainVariant::topn_rmcl:
      return true;
    default:
      return false;
  }
}

LossVariant TrainConfig::regression_variant() const {
  switch (variant) {
    case TrainVariant::epsilon:
    case TrainVariant::epsilon_rmcl:
      return LossVariant::epsilon_wta(epsilon);
    case TrainVariant::topn:
    case TrainVariant::topn_rmcl:
      return LossVariant::top_n_wta(top_n);
    default:
      return LossVariant::wta();
  }
}

NegativeMode TrainConfig::negative_mode() const {
  return variant == TrainVariant::rmcl_star ? NegativeMode::sampled_one
                                            : NegativeMode::all;
}

void EvalProtocol::validate() const {
  if (t_grid < 1) throw config_error("EvalProtocol: t_grid must be >= 1");
  if (gt_samples_per_t < 1)
    throw config_error("EvalProtocol: gt_samples_per_t must be >= 1");
  if (centroid_samples < 1)
    throw config_error("EvalProtocol: centroid_samples must be >= 1");
  if (score_threshold < 0.0 || drop_score_below < 0.0)
    throw config_error("EvalProtocol: thresholds must be >= 0");
}

ToyConfig toy_config_from(const KeyValues& kv) {
  validate_known_keys(kv);
  ToyConfig config;
  read_number(kv, "dataset_seed", config.seed);
  read_number(kv, "n_train", config.n_train);
  read_number(kv, "n_val", config.n_val);
  read_number(kv, "outlier_rho", config.outlier_rho);
  read_number(kv, "cauchy_x", config.cauchy_location[0]);
  read_number(kv, "cauchy_y", config.cauchy_location[1]);
  read_number(kv, "cauchy_scale", config.cauchy_scale);
  config.validate();
  return config;
}

TrainConfig train_config_from(const KeyValues& kv) {
  validate_known_keys(kv);
  TrainConfig config;
  if (const auto it = kv.find("variant"); it != kv.end())
    config.variant = parse_variant(it->second);
  if (const auto it = kv.find("model"); it != kv.end()) {
    if (it->second == "multi_head")
      config.model_kind = TrainModelKind::multi_head;
    else if (it->second == "single_member")
      config.model_kind = TrainModelKind::single_member;
    else
      throw config_error("config: unknown model kind '" + it->second + "'");
  }
  read_number(kv, "k", config.hypothesis_count);
  read_number(kv, "epsilon", config.epsilon);
  read_number(kv, "top_n", config.top_n);
  read_number(kv, "beta", config.beta);
  read_number(kv, "pit_slots", config.pit_slots);
  read_number(kv, "epochs", config.epochs);
  read_number(kv, "batch_size", config.batch_size);
  read_number(kv, "lr", config.adam.lr);
  read_number(kv, "adam_beta1", config.adam.beta1);
  read_number(kv, "adam_beta2", config.adam.beta2);
  read_number(kv, "adam_eps", config.adam.eps);
  read_number(kv, "grad_clip_norm", config.grad_clip_norm);
  read_number(kv, "sample_grad_clip", config.sample_grad_clip);
  read_number(kv, "train_seed", config.seed);
  read_number(kv, "hidden_units", config.hidden_units);
  read_number(kv, "trunk_layers", config.trunk_layers);
  read_number(kv, "head_init_spread", config.head_init_spread);
  config.validate();
  return config;
}

EvalProtocol eval_protocol_from(const KeyValues& kv) {
  validate_known_keys(kv);
  EvalProtocol protocol;
  read_number(kv, "t_grid", protocol.t_grid);
  read_number(kv, "gt_samples_per_t", protocol.gt_samples_per_t);
  read_number(kv, "centroid_samples", protocol.centroid_samples);
  read_number(kv, "eval_seed", protocol.seed);
  read_number(kv, "score_threshold", protocol.score_threshold);
  read_number(kv, "drop_score_below", protocol.drop_score_below);
  if (const auto it = kv.find("distance"); it != kv.end()) {
    if (it->second == "euclidean")
      protocol.distance = DistanceKind::euclidean;
    else if (it->second == "spherical")
      protocol.distance = DistanceKind::spherical;
    else
      throw config_error("config: unknown distance '" + it->second + "'");
  }
  if (const auto it = kv.find("weight_policy"); it != kv.end()) {
    if (it->second == "auto")
      protocol.policy = WeightPolicy::auto_from_kind;
    else if (it->second == "scores")
      protocol.policy = WeightPolicy::scores;
    else if (it->second == "uniform")
      protocol.policy = WeightPolicy::uniform;
    else
      throw config_error("config: unknown weight_policy '" + it->second + "'");
  }
  protocol.validate();
  return protocol;
}

// ------------------------------------------------------------------ tables

double Table::meta_number(const std::string& key) const {
  const auto it = meta.find(key);
  if (it == meta.end()) throw data_error("table: missing meta key " + key);
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw data_error("table: meta key " + key + " is not numeric");
  }
}

void export_table_csv(const Table& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("export: cannot open for writing: " + path);
  out << "# kind=" << table.kind << "\n";
  for (const auto& [key, value] : table.meta)
    out << "# " << key << "=" << value << "\n";
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << table.columns[c];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << format_double(row[c]);
    out << "\n";
  }
  if (!out) throw io_error("export: write failed: " + path);
}

void export_table_json(const Table& table, const std::string& path) {
  nlohmann::json doc;
  doc["schema"] = "rmcl-report/v1";
  doc["kind"] = table.kind;
  doc["columns"] = table.columns;
  doc["meta"] = table.meta;
  doc["rows"] = table.rows;
  std::ofstream out(path);
  if (!out) throw io_error("export: cannot open for writing: " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw io_error("export: write failed: " + path);
}

Table load_table_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("report: cannot open: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("report: invalid JSON in " + path + ": " + e.what());
  }
  try {
    if (doc.at("schema").get<std::string>() != "rmcl-report/v1")
      throw data_error("report: unknown schema in " + path);
    Table table;
    table.kind = doc.at("kind").get<std::string>();
    table.columns = doc.at("columns").get<std::vector<std::string>>();
    table.meta = doc.at("meta").get<std::map<std::string, std::string>>();
    table.rows = doc.at("rows").get<std::vector<Vec>>();
    for (const auto& row : table.rows)
      if (row.size() != table.columns.size())
        throw data_error("report: ragged rows in " + path);
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("report: malformed report in " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------- training

namespace {

// Sub-stream tags for the trainer.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kNegativeStream = 3;
constexpr std::uint64_t kValStreamBase = 0x100;

std::size_t model_heads(const TrainConfig& config) {
  if (config.model_kind == TrainModelKind::single_member) return 1;
  if (config.variant == TrainVariant::pit) return config.pit_slots;
  return config.hypothesis_count;
}

ModelKind checkpoint_kind(const TrainConfig& config) {
  if (config.model_kind == TrainModelKind::single_member)
    return ModelKind::single_member;
  if (config.variant == TrainVariant::pit) return ModelKind::pit;
  return config.uses_scoring() ? ModelKind::multi_head_scored
                               : ModelKind::multi_head_plain;
}

PitTarget pit_target_from(const TrainingSample& sample, std::size_t slots) {
  if (sample.targets.size() > slots)
    throw config_error("pit: sample has more targets than pit_slots");
  PitTarget target;
  target.active.assign(slots, 0);
  target.positions.assign(slots, Vec(sample.targets[0].size(), 0.0));
  for (std::size_t i = 0; i < sample.targets.size(); ++i) {
    target.active[i] = 1;
    target.positions[i] = sample.targets[i];
  }
  return target;
}

// Clips one head's per-sample position gradient to max_norm (0 = off).
void clip_pull(Vec& pull, double max_norm) {
  if (max_norm <= 0.0) return;
  double norm_sq = 0.0;
  for (double g : pull) norm_sq += g * g;
  if (norm_sq <= max_norm * max_norm) return;
  const double scale = max_norm / std::sqrt(norm_sq);
  for (double& g : pull) g *= scale;
}

// Per-sample loss (and optional output-side gradients) shared by the
// training step and the validation pass.
double sample_loss_and_grads(const TrainConfig& config,
                             const ScoredPrediction& pred,
                             const TrainingSample& sample, Rng* negative_rng,
                             double inv_batch, std::span<double> d_hyp_row,
                             std::span<double> d_score_row) {
  const bool want_grads = !d_hyp_row.empty();
  const std::size_t q = pred.hypotheses.empty() ? 0 : pred.hypotheses[0].size();

  if (config.model_kind == TrainModelKind::single_member) {
    // Single-target update: one target per sample. The targets are i.i.d.
    // draws, so the first one is an unbiased pick, and the per-input risk
    // minimizer is the conditional mean (the ensemble-collapse regime).
    const auto& hyp = pred.hypotheses[0];
    const auto& target = sample.targets[0];
    const double loss = underlying_loss(hyp, target);
    if (want_grads) {
      Vec pull(q);
      for (std::size_t d = 0; d < q; ++d)
        pull[d] = 2.0 * (hyp[d] - target[d]);
      clip_pull(pull, config.sample_grad_clip);
      for (std::size_t d = 0; d < q; ++d)
        d_hyp_row[d] += inv_batch * pull[d];
    }
    return loss;
  }

  if (config.variant == TrainVariant::pit) {
    PitPrediction pit_pred{pred.raw_scores, pred.hypotheses};
    const PitTarget target = pit_target_from(sample, config.pit_slots);
    if (!want_grads) return pit_loss(pit_pred, target);
    PitGrads grads = pit_loss_grads(pit_pred, target);
    for (std::size_t k = 0; k < grads.d_position.size(); ++k) {
      clip_pull(grads.d_position[k], config.sample_grad_clip);
      for (std::size_t d = 0; d < q; ++d)
        d_hyp_row[k * q + d] += inv_batch * grads.d_position[k][d];
      d_score_row[k] += inv_batch * grads.d_activity_logit[k];
    }
    return grads.loss;
  }

  const double beta = config.uses_scoring() ? config.beta : 0.0;
  CompoundGrads grads =
      compound_loss_grads(pred, sample.targets, config.regression_variant(),
                          beta, config.negative_mode(), negative_rng);
  if (want_grads) {
    for (std::size_t k = 0; k < grads.d_hyp.size(); ++k) {
      clip_pull(grads.d_hyp[k], config.sample_grad_clip);
      for (std::size_t d = 0; d < q; ++d)
        d_hyp_row[k * q + d] += inv_batch * grads.d_hyp[k][d];
      d_score_row[k] += inv_batch * grads.d_score_logit[k];
    }
  }
  return grads.loss;
}

double dataset_loss(const TrainConfig& config, const MultiHeadModel& model,
                    std::span<const TrainingSample> samples, Rng rng) {
  constexpr std::size_t kBatch = 4096;
  double total = 0.0;
  std::size_t index = 0;
  ModelTrace trace;
  while (index < samples.size()) {
    const std::size_t count = std::min(kBatch, samples.size() - index);
    Matrix inputs(count, model.input_dim());
    for (std::size_t s = 0; s < count; ++s)
      inputs(s, 0) = samples[index + s].t;
    model_forward(model, inputs, trace);
    for (std::size_t s = 0; s < count; ++s) {
      const ScoredPrediction pred = prediction_from_trace(model, trace, s);
      total += sample_loss_and_grads(config, pred, samples[index + s], &rng,
                                     0.0, {}, {});
    }
    index += count;
  }
  if (!std::isfinite(total))
    throw numeric_error("train: non-finite validation loss");
  return total / static_cast<double>(samples.size());
}

}  // namespace

TrainResult train(const TrainConfig& config, const ToyDataset& data) {
  config.validate();
  if (data.train.empty()) throw data_error("train: empty training split");
  if (data.val.empty()) throw data_error("train: empty validation split");

  const Rng base(config.seed);
  Rng init_rng = base.fork(kInitStream);
  Rng shuffle_rng = base.fork(kShuffleStream);
  Rng negative_rng = base.fork(kNegativeStream);

  const std::size_t heads = model_heads(config);
  MultiHeadModel model = make_multi_head(
      config.input_dim, config.hidden_units, config.trunk_layers, heads,
      config.output_dim, init_rng, config.head_init_spread);
  AdamState adam(param_spans(std::as_const(model)), config.adam);

  TrainResult result;
  auto snapshot = [&](std::size_t epoch, double val_loss) {
    result.checkpoint.model = model;
    result.checkpoint.kind = checkpoint_kind(config);
    result.checkpoint.rng_seed = config.seed;
    result.checkpoint.rng_state = negative_rng.state();
    result.checkpoint.step = adam.step_count();
    result.best_epoch = epoch;
    result.best_val_loss = val_loss;
  };

  const double initial_train =
      dataset_loss(config, model, data.train, base.fork(kValStreamBase));
  const double initial_val =
      dataset_loss(config, model, data.val, base.fork(kValStreamBase));
  result.log.push_back({0, initial_train, initial_val});
  snapshot(0, initial_val);

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t kq = heads * config.output_dim;
  Matrix inputs, d_hyp, d_score;
  ModelTrace trace;
  ModelGrads grads;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    // Fisher-Yates with the dedicated shuffle stream; batches are contiguous
    // slices of the shuffled order.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.next_below(i);
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    std::size_t index = 0;
    while (index < order.size()) {
      const std::size_t count = std::min(config.batch_size,
                                         order.size() - index);
      inputs.resize(count, config.input_dim);
      d_hyp.resize(count, kq);
      d_score.resize(count, heads);
      for (std::size_t s = 0; s < count; ++s)
        inputs(s, 0) = data.train[order[index + s]].t;
      model_forward(model, inputs, trace);
      const double inv_batch = 1.0 / static_cast<double>(count);
      for (std::size_t s = 0; s < count; ++s) {
        const ScoredPrediction pred = prediction_from_trace(model, trace, s);
        epoch_loss += sample_loss_and_grads(
            config, pred, data.train[order[index + s]], &negative_rng,
            inv_batch, d_hyp.row(s), d_score.row(s));
      }
      model_backward(model, trace, d_hyp, d_score, grads);
      if (config.grad_clip_norm > 0.0) {
        double norm_sq = 0.0;
        for (const auto& span : grad_spans(std::as_const(grads)))
          for (double g : span) norm_sq += g * g;
        const double norm = std::sqrt(norm_sq);
        if (norm > config.grad_clip_norm) {
          const double scale = config.grad_clip_norm / norm;
          for (auto& span : grad_spans(grads))
            for (double& g : span) g *= scale;
        }
      }
      adam.step(param_spans(model), grad_spans(std::as_const(grads)));
      index += count;
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss))
      throw numeric_error("train: non-finite training loss at epoch " +
                          std::to_string(epoch));

    const double val_loss = dataset_loss(config, model, data.val,
                                         base.fork(kValStreamBase + epoch));
    result.log.push_back({epoch, epoch_loss, val_loss});
    if (val_loss < result.best_val_loss) snapshot(epoch, val_loss);
  }
  return result;
}

std::vector<TrainResult> train_ensemble(const TrainConfig& config,
                                        const ToyDataset& data,
                                        std::size_t members) {
  if (members < 1) throw config_error("train_ensemble: members must be >= 1");
  TrainConfig member_config = config;
  member_config.model_kind = TrainModelKind::single_member;
  member_config.hypothesis_count = 1;
  member_config.variant = TrainVariant::wta;
  member_config.beta = 0.0;
  // The bias spread exists to diversify multiple hypotheses; a lone head
  // starts at the plain zero-centered init.
  member_config.head_init_spread = 0.0;
  std::vector<TrainResult> results(members);

  const int workers =
      static_cast<int>(std::min<std::size_t>(num_threads(), members));
  if (workers <= 1) {
    for (std::size_t m = 0; m < members; ++m) {
      member_config.seed = config.seed + m;
      results[m] = train(member_config, data);
    }
    return results;
  }

  // Members are independent seeded runs, so they can train concurrently;
  // each result depends only on (config, data, seed), never on scheduling.
  // The dense kernels drop to one thread apiece while the workers run.
  const int saved_setting = num_threads_setting();
  set_num_threads(1);
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t m = next.fetch_add(1);
      if (m >= members) break;
      try {
        TrainConfig local = member_config;
        local.seed = config.seed + m;
        results[m] = train(local, data);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  set_num_threads(saved_setting);
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

Table training_log_table(const TrainResult& result) {
  Table table;
  table.kind = "training-log";
  table.columns = {"epoch", "train_loss", "val_loss"};
  for (const auto& row : result.log)
    table.rows.push_back(
        {static_cast<double>(row.epoch), row.train_loss, row.val_loss});
  table.meta["best_epoch"] = std::to_string(result.best_epoch);
  table.meta["best_val_loss"] = format_double(result.best_val_loss);
  return table;
}

// -------------------------------------------------------------- evaluation

namespace {

constexpr std::uint64_t kEvalRowStream = 0x2000;
constexpr std::uint64_t kDiagnoseStream = 0x9000;

double grid_time(std::size_t i, std::size_t grid) {
  if (grid == 1) return 0.5;
  return static_cast<double>(i) / static_cast<double>(grid - 1);
}

bool policy_uses_scores(WeightPolicy policy, ModelKind kind) {
  switch (policy) {
    case WeightPolicy::scores:
      return true;
    case WeightPolicy::uniform:
      return false;
    case WeightPolicy::auto_from_kind:
      return kind == ModelKind::multi_head_scored || kind == ModelKind::pit;
  }
  return true;
}

struct MixtureBuild {
  DiracMixture mixture;
  std::vector<Vec> hypotheses;  // pre-drop atoms, for the oracle error
  bool degenerate = false;
  std::size_t dropped = 0;
  double outside_score = 0.0;
};

MixtureBuild build_predicted_mixture(std::span<const Checkpoint> checkpoints,
                                     double t, const EvalProtocol& protocol) {
  MixtureBuild build;
  const Vec input{t};
  if (checkpoints.size() == 1) {
    const auto& ckpt = checkpoints[0];
    const ScoredPrediction pred = predict(ckpt.model, input);
    build.hypotheses = pred.hypotheses;
    if (policy_uses_scores(protocol.policy, ckpt.kind)) {
      try {
        build.mixture = to_dirac_mixture(pred);
      } catch (const numeric_error&) {
        build.degenerate = true;
      }
    }
    if (build.degenerate || !policy_uses_scores(protocol.policy, ckpt.kind)) {
      build.mixture.atoms = pred.hypotheses;
      build.mixture.weights.assign(pred.hypotheses.size(),
                                   1.0 / static_cast<double>(
                                             pred.hypotheses.size()));
    }
  } else {
    // Stacked independent-ensemble prediction: uniform weights over every
    // member hypothesis.
    for (const auto& ckpt : checkpoints) {
      const ScoredPrediction pred = predict(ckpt.model, input);
      for (const auto& hyp : pred.hypotheses) {
        build.mixture.atoms.push_back(hyp);
        build.hypotheses.push_back(hyp);
      }
    }
    build.mixture.weights.assign(
        build.mixture.atoms.size(),
        1.0 / static_cast<double>(build.mixture.atoms.size()));
  }

  const Box domain = default_toy_domain();
  for (std::size_t k = 0; k < build.mixture.size(); ++k)
    if (!domain.contains(build.mixture.atoms[k]))
      build.outside_score += build.mixture.weights[k];

  if (protocol.drop_score_below > 0.0) {
    DiracMixture kept;
    double kept_mass = 0.0;
    for (std::size_t k = 0; k < build.mixture.size(); ++k) {
      if (build.mixture.weights[k] < protocol.drop_score_below) continue;
      kept.atoms.push_back(build.mixture.atoms[k]);
      kept.weights.push_back(build.mixture.weights[k]);
      kept_mass += build.mixture.weights[k];
    }
    if (kept.atoms.empty() || kept_mass <= 0.0) {
      build.degenerate = true;  // dropping everything leaves no distribution
    } else {
      build.dropped = build.mixture.size() - kept.size();
      for (double& w : kept.weights) w /= kept_mass;
      build.mixture = std::move(kept);
    }
  }
  return build;
}

}  // namespace

Table evaluate(std::span<const Checkpoint> checkpoints,
               const EvalProtocol& protocol) {
  protocol.validate();
  if (checkpoints.empty()) throw config_error("evaluate: no checkpoints");

  Table table;
  table.kind = "eval";
  table.columns = {"t",          "emd",           "oracle",
                   "degenerate", "dropped_atoms", "outside_score"};
  const Rng base(protocol.seed);
  double emd_sum = 0.0, oracle_sum = 0.0, outside_sum = 0.0;
  std::size_t degenerate_rows = 0;

  for (std::size_t i = 0; i < protocol.t_grid; ++i) {
    const double t = grid_time(i, protocol.t_grid);
    const MixtureBuild build =
        build_predicted_mixture(checkpoints, t, protocol);

    Rng row_rng = base.fork(kEvalRowStream + i);
    DiracMixture truth;
    truth.atoms.reserve(protocol.gt_samples_per_t);
    for (std::size_t s = 0; s < protocol.gt_samples_per_t; ++s)
      truth.atoms.push_back(sample_ground_truth(t, row_rng));
    truth.weights.assign(truth.atoms.size(),
                         1.0 / static_cast<double>(truth.atoms.size()));

    const double emd_value = emd(build.mixture, truth, protocol.distance);
    const double oracle_value =
        oracle_error(build.hypotheses, truth.atoms, protocol.distance);
    emd_sum += emd_value;
    oracle_sum += oracle_value;
    outside_sum += build.outside_score;
    if (build.degenerate) ++degenerate_rows;
    table.rows.push_back({t, emd_value, oracle_value,
                          build.degenerate ? 1.0 : 0.0,
                          static_cast<double>(build.dropped),
                          build.outside_score});
  }

  const double rows = static_cast<double>(protocol.t_grid);
  table.meta["mean_emd"] = format_double(emd_sum / rows);
  table.meta["mean_oracle"] = format_double(oracle_sum / rows);
  table.meta["mean_outside_score"] = format_double(outside_sum / rows);
  table.meta["degenerate_rows"] = std::to_string(degenerate_rows);
  table.meta["models"] = std::to_string(checkpoints.size());
  table.meta["t_grid"] = std::to_string(protocol.t_grid);
  table.meta["gt_samples_per_t"] = std::to_string(protocol.gt_samples_per_t);
  table.meta["distance"] =
      protocol.distance == DistanceKind::euclidean ? "euclidean" : "spherical";
  table.meta["drop_score_below"] = format_double(protocol.drop_score_below);
  return table;
}

DiagnoseResult diagnose(const Checkpoint& checkpoint,
                        const EvalProtocol& protocol,
                        std::span<const TrainingSample> validation) {
  protocol.validate();
  DiagnoseResult result;

  const CollapseHistogram hist =
      collapse_histogram(checkpoint.model, validation);
  result.histogram.kind = "collapse-histogram";
  result.histogram.columns = {"head", "wins"};
  std::uint64_t total_wins = 0;
  std::size_t active_heads = 0;
  for (std::size_t k = 0; k < hist.counts.size(); ++k) {
    result.histogram.rows.push_back(
        {static_cast<double>(k), static_cast<double>(hist.counts[k])});
    total_wins += hist.counts[k];
    if (hist.counts[k] > 0) ++active_heads;
  }
  result.histogram.meta["dataset_size"] = std::to_string(hist.dataset_size);
  result.histogram.meta["total_wins"] = std::to_string(total_wins);
  result.histogram.meta["active_heads"] = std::to_string(active_heads);

  result.cells.kind = "cell-diagnostics";
  result.cells.columns = {"t",           "cell", "score", "mc_mass",
                          "centroid_err", "hits"};
  const Rng base(protocol.seed);
  double centroid_sum = 0.0, score_mass_sum = 0.0;
  std::size_t active_cells = 0, empty_active_cells = 0, degenerate_rows = 0;

  for (std::size_t i = 0; i < protocol.t_grid; ++i) {
    const double t = grid_time(i, protocol.t_grid);
    const ScoredPrediction pred = predict(checkpoint.model, Vec{t});
    Vec weights;
    if (policy_uses_scores(protocol.policy, checkpoint.kind)) {
      try {
        weights = normalize_scores(pred.raw_scores);
      } catch (const numeric_error&) {
        ++degenerate_rows;
      }
    }
    if (weights.empty())
      weights.assign(pred.hypotheses.size(),
                     1.0 / static_cast<double>(pred.hypotheses.size()));

    const Tessellation tess{pred.hypotheses};
    Rng row_rng = base.fork(kDiagnoseStream + i);
    const CellStats stats = cell_stats_mc(
        tess, [t](Rng& rng) { return sample_ground_truth(t, rng); },
        protocol.centroid_samples, row_rng);

    for (std::size_t k = 0; k < tess.size(); ++k) {
      if (weights[k] < protocol.score_threshold) continue;
      if (stats.cells[k].hits == 0) {
        // Empty-cell signal: the cell carries score but no ground-truth mass
        // made it into the Monte-Carlo sample.
        ++empty_active_cells;
        continue;
      }
      const double centroid_err =
          euclidean_distance(pred.hypotheses[k], stats.cells[k].centroid);
      const double mass = stats.mass(k);
      centroid_sum += centroid_err;
      score_mass_sum += std::abs(weights[k] - mass);
      ++active_cells;
      result.cells.rows.push_back({t, static_cast<double>(k), weights[k], mass,
                                   centroid_err,
                                   static_cast<double>(stats.cells[k].hits)});
    }
  }

  result.cells.meta["active_cells"] = std::to_string(active_cells);
  result.cells.meta["empty_active_cells"] = std::to_string(empty_active_cells);
  result.cells.meta["degenerate_rows"] = std::to_string(degenerate_rows);
  result.cells.meta["score_threshold"] = format_double(protocol.score_threshold);
  result.cells.meta["centroid_samples"] =
      std::to_string(protocol.centroid_samples);
  result.cells.meta["mean_centroid_err"] = format_double(
      active_cells > 0 ? centroid_sum / static_cast<double>(active_cells)
                       : 0.0);
  result.cells.meta["mean_score_mass_err"] = format_double(
      active_cells > 0 ? score_mass_sum / static_cast<double>(active_cells)
                       : 0.0);
  return result;
}

}  // namespace rmcl
