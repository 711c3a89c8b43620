#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adam.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "multi_head.hpp"
#include "toy_data.hpp"

namespace rmcl {

// ------------------------------------------------------------ configuration

// Flat key-value configuration ("key = value" lines, '#' comments). One file
// drives dataset generation, training and evaluation; unknown keys are
// rejected so typos fail loudly.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_config_file(const std::string& path);
void apply_override(KeyValues& kv, const std::string& assignment);  // "k=v"
void validate_known_keys(const KeyValues& kv);

enum class TrainVariant {
  wta,           // multi-target WTA only (sMCL)
  epsilon,       // epsilon-WTA only
  topn,          // top-n WTA only
  rmcl,          // WTA + scoring, all negatives
  rmcl_star,     // WTA + scoring, one sampled negative
  epsilon_rmcl,  // epsilon-WTA + scoring
  topn_rmcl,     // top-n WTA + scoring
  pit,           // permutation-invariant baseline
};

TrainVariant parse_variant(const std::string& name);
const char* variant_name(TrainVariant variant);

enum class TrainModelKind { multi_head, single_member };

struct TrainConfig {
  std::size_t hypothesis_count = 20;
  TrainVariant variant = TrainVariant::rmcl;
  double epsilon = 0.5;
  std::size_t top_n = 3;
  double beta = 1.0;
  TrainModelKind model_kind = TrainModelKind::multi_head;
  std::size_t pit_slots = 2;
  std::size_t epochs = 20;
  std::size_t batch_size = 1024;
  // Robustness clips, 0 = off. Both are inert on clean toy data.
  // sample_grad_clip bounds each head's per-sample regression pull
  // (2*(f-y) has norm < 8 for in-box targets); without it, heavy-tailed
  // Cauchy targets dominate Adam's moment estimates and drag every head
  // out of the data region. grad_clip_norm is a batch-level backstop.
  double sample_grad_clip = 10.0;
  double grad_clip_norm = 100.0;
  AdamConfig adam;
  std::uint64_t seed = 1;
  std::size_t hidden_units = 256;
  std::size_t trunk_layers = 2;
  double head_init_spread = 1.5;  // initial hypothesis-head bias range
  std::size_t output_dim = 2;
  std::size_t input_dim = 1;

  void validate() const;
  bool uses_scoring() const;
  LossVariant regression_variant() const;
  NegativeMode negative_mode() const;
};

enum class WeightPolicy { auto_from_kind, scores, uniform };

struct EvalProtocol {
  std::size_t t_grid = 50;
  std::size_t gt_samples_per_t = 1000;
  std::size_t centroid_samples = 35000;
  DistanceKind distance = DistanceKind::euclidean;
  WeightPolicy policy = WeightPolicy::auto_from_kind;
  std::uint64_t seed = 7;
  double score_threshold = 0.02;   // "active cell" cutoff for diagnostics
  double drop_score_below = 0.0;   // prune low-score atoms before the EMD

  void validate() const;
};

ToyConfig toy_config_from(const KeyValues& kv);
TrainConfig train_config_from(const KeyValues& kv);
EvalProtocol eval_protocol_from(const KeyValues& kv);

// ------------------------------------------------------------------ tables

// Column-named numeric rows plus string metadata; the one shape every
// report (training log, evaluation, diagnostics) serializes through.
struct Table {
  std::string kind;
  std::vector<std::string> columns;
  std::vector<Vec> rows;
  std::map<std::string, std::string> meta;

  double meta_number(const std::string& key) const;
};

void export_table_csv(const Table& table, const std::string& path);
void export_table_json(const Table& table, const std::string& path);
Table load_table_json(const std::string& path);

// ---------------------------------------------------------------- training

struct EpochLog {
  std::size_t epoch = 0;  // 0 = initialization, before any update
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;  // lowest-validation-loss snapshot
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

TrainResult train(const TrainConfig& config, const ToyDataset& data);

// Trains `members` single-hypothesis models with seeds seed+0..members-1,
// each updated toward its best (closest) target only.
std::vector<TrainResult> train_ensemble(const TrainConfig& config,
                                        const ToyDataset& data,
                                        std::size_t members);

Table training_log_table(const TrainResult& result);

// -------------------------------------------------------------- evaluation

// Per grid-t rows: EMD between the predicted mixture and fresh ground-truth
// draws, plus the oracle error. Multiple checkpoints are stacked into one
// uniform-weight mixture (independent-ensemble evaluation).
Table evaluate(std::span<const Checkpoint> checkpoints,
               const EvalProtocol& protocol);

struct DiagnoseResult {
  Table cells;      // per (t, active cell): centroid error, score-vs-mass
  Table histogram;  // winner counts over the validation split
};

DiagnoseResult diagnose(const Checkpoint& checkpoint,
                        const EvalProtocol& protocol,
                        std::span<const TrainingSample> validation);

}  // namespace rmcl
