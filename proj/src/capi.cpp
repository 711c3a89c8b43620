#include "rmcl/rmcl.h"

#include <cstring>
#include <exception>
#include <string>
#include <vector>

#include "common.hpp"
#include "experiment.hpp"
#include "geometry.hpp"
#include "metrics.hpp"
#include "multi_head.hpp"
#include "toy_data.hpp"

struct rmcl_config {
  rmcl::KeyValues kv;
};

struct rmcl_model {
  rmcl::Checkpoint checkpoint;
};

struct rmcl_report {
  rmcl::Table table;
};

namespace {

thread_local std::string g_last_error;

rmcl_status fail(rmcl_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
rmcl_status wrap(Fn&& fn) {
  try {
    fn();
    return RMCL_OK;
  } catch (const rmcl::config_error& e) {
    return fail(RMCL_ERR_CONFIG, e.what());
  } catch (const rmcl::data_error& e) {
    return fail(RMCL_ERR_DATA, e.what());
  } catch (const rmcl::numeric_error& e) {
    return fail(RMCL_ERR_NUMERIC, e.what());
  } catch (const rmcl::io_error& e) {
    return fail(RMCL_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(RMCL_ERR_UNKNOWN, e.what());
  } catch (...) {
    return fail(RMCL_ERR_UNKNOWN, "unknown error");
  }
}

rmcl_status require(bool ok, const char* message) {
  return ok ? RMCL_OK : fail(RMCL_ERR_CONFIG, message);
}

void copy_out(const std::string& value, char* buf, size_t buf_len) {
  if (buf == nullptr || buf_len == 0) return;
  const size_t n = std::min(buf_len - 1, value.size());
  std::memcpy(buf, value.data(), n);
  buf[n] = '\0';
}

}  // namespace

extern "C" {

const char* rmcl_status_name(rmcl_status status) {
  switch (status) {
    case RMCL_OK: return "ok";
    case RMCL_ERR_UNKNOWN: return "unknown";
    case RMCL_ERR_CONFIG: return "config";
    case RMCL_ERR_DATA: return "data";
    case RMCL_ERR_NUMERIC: return "numeric";
    case RMCL_ERR_IO: return "io";
  }
  return "?";
}

const char* rmcl_last_error(void) { return g_last_error.c_str(); }

void rmcl_set_num_threads(int n) { rmcl::set_num_threads(n); }

rmcl_config* rmcl_config_create(void) { return new rmcl_config(); }

void rmcl_config_destroy(rmcl_config* config) { delete config; }

rmcl_status rmcl_config_load(rmcl_config* config, const char* path) {
  if (auto bad = require(config && path, "null argument")) return bad;
  return wrap([&] {
    rmcl::KeyValues loaded = rmcl::parse_config_file(path);
    for (auto& [key, value] : loaded) config->kv[key] = std::move(value);
  });
}

rmcl_status rmcl_config_set(rmcl_config* config, const char* key,
                            const char* value) {
  if (auto bad = require(config && key && value, "null argument")) return bad;
  return wrap([&] {
    rmcl::apply_override(config->kv, std::string(key) + "=" + value);
  });
}

rmcl_status rmcl_config_get(const rmcl_config* config, const char* key,
                            char* buf, size_t buf_len) {
  if (auto bad = require(config && key, "null argument")) return bad;
  const auto it = config->kv.find(key);
  if (it == config->kv.end())
    return fail(RMCL_ERR_CONFIG, std::string("config: key not set: ") + key);
  copy_out(it->second, buf, buf_len);
  return RMCL_OK;
}

rmcl_status rmcl_generate_dataset(const rmcl_config* config,
                                  const char* out_path) {
  if (auto bad = require(config && out_path, "null argument")) return bad;
  return wrap([&] {
    const rmcl::ToyConfig toy = rmcl::toy_config_from(config->kv);
    const rmcl::ToyDataset data = rmcl::generate_dataset(toy);
    rmcl::save_dataset(data, toy, out_path);
  });
}

rmcl_status rmcl_train(const rmcl_config* config, const char* dataset_path,
                       const char* checkpoint_out, const char* log_out) {
  if (auto bad = require(config && dataset_path && checkpoint_out,
                         "null argument"))
    return bad;
  return wrap([&] {
    const rmcl::TrainConfig train_config =
        rmcl::train_config_from(config->kv);
    const rmcl::ToyDataset data = rmcl::load_dataset(dataset_path);
    const rmcl::TrainResult result = rmcl::train(train_config, data);
    rmcl::save_checkpoint(checkpoint_out, result.checkpoint);
    if (log_out != nullptr)
      rmcl::export_table_json(rmcl::training_log_table(result), log_out);
  });
}

rmcl_status rmcl_train_ensemble(const rmcl_config* config,
                                const char* dataset_path, int members,
                                const char* checkpoint_prefix) {
  if (auto bad = require(config && dataset_path && checkpoint_prefix,
                         "null argument"))
    return bad;
  if (auto bad = require(members >= 1, "members must be >= 1")) return bad;
  return wrap([&] {
    const rmcl::TrainConfig train_config =
        rmcl::train_config_from(config->kv);
    const rmcl::ToyDataset data = rmcl::load_dataset(dataset_path);
    const auto results =
        rmcl::train_ensemble(train_config, data, static_cast<size_t>(members));
    for (size_t m = 0; m < results.size(); ++m)
      rmcl::save_checkpoint(
          std::string(checkpoint_prefix) + std::to_string(m) + ".ckpt",
          results[m].checkpoint);
  });
}

rmcl_model* rmcl_model_load(const char* path) {
  if (path == nullptr) {
    fail(RMCL_ERR_CONFIG, "null path");
    return nullptr;
  }
  rmcl_model* model = nullptr;
  const rmcl_status status = wrap([&] {
    model = new rmcl_model{rmcl::load_checkpoint(path)};
  });
  return status == RMCL_OK ? model : nullptr;
}

void rmcl_model_destroy(rmcl_model* model) { delete model; }

int rmcl_model_hypothesis_count(const rmcl_model* model) {
  return model ? static_cast<int>(model->checkpoint.model.hypothesis_count())
               : 0;
}

int rmcl_model_output_dim(const rmcl_model* model) {
  return model ? static_cast<int>(model->checkpoint.model.output_dim()) : 0;
}

int rmcl_model_input_dim(const rmcl_model* model) {
  return model ? static_cast<int>(model->checkpoint.model.input_dim()) : 0;
}

rmcl_status rmcl_model_predict(const rmcl_model* model, const double* x,
                               size_t x_len, double* hypotheses,
                               double* scores) {
  if (auto bad = require(model && x, "null argument")) return bad;
  return wrap([&] {
    const rmcl::ScoredPrediction pred =
        rmcl::predict(model->checkpoint.model, {x, x_len});
    const size_t q = model->checkpoint.model.output_dim();
    if (hypotheses != nullptr)
      for (size_t k = 0; k < pred.hypotheses.size(); ++k)
        std::memcpy(hypotheses + k * q, pred.hypotheses[k].data(),
                    q * sizeof(double));
    if (scores != nullptr)
      std::memcpy(scores, pred.raw_scores.data(),
                  pred.raw_scores.size() * sizeof(double));
  });
}

void rmcl_report_destroy(rmcl_report* report) { delete report; }

size_t rmcl_report_rows(const rmcl_report* report) {
  return report ? report->table.rows.size() : 0;
}

size_t rmcl_report_cols(const rmcl_report* report) {
  return report ? report->table.columns.size() : 0;
}

const char* rmcl_report_column_name(const rmcl_report* report, size_t col) {
  if (report == nullptr || col >= report->table.columns.size()) return nullptr;
  return report->table.columns[col].c_str();
}

rmcl_status rmcl_report_value(const rmcl_report* report, size_t row,
                              size_t col, double* out) {
  if (auto bad = require(report && out, "null argument")) return bad;
  if (row >= report->table.rows.size() || col >= report->table.columns.size())
    return fail(RMCL_ERR_CONFIG, "report index out of range");
  *out = report->table.rows[row][col];
  return RMCL_OK;
}

rmcl_status rmcl_report_meta(const rmcl_report* report, const char* key,
                             char* buf, size_t buf_len) {
  if (auto bad = require(report && key, "null argument")) return bad;
  const auto it = report->table.meta.find(key);
  if (it == report->table.meta.end())
    return fail(RMCL_ERR_CONFIG, std::string("report: no meta key: ") + key);
  copy_out(it->second, buf, buf_len);
  return RMCL_OK;
}

rmcl_status rmcl_report_export(const rmcl_report* report, const char* path,
                               const char* format) {
  if (auto bad = require(report && path && format, "null argument")) return bad;
  return wrap([&] {
    const std::string fmt = format;
    if (fmt == "csv")
      rmcl::export_table_csv(report->table, path);
    else if (fmt == "json")
      rmcl::export_table_json(report->table, path);
    else
      throw rmcl::config_error("export: unknown format '" + fmt + "'");
  });
}

rmcl_report* rmcl_report_load(const char* path) {
  if (path == nullptr) {
    fail(RMCL_ERR_CONFIG, "null path");
    return nullptr;
  }
  rmcl_report* report = nullptr;
  const rmcl_status status = wrap([&] {
    report = new rmcl_report{rmcl::load_table_json(path)};
  });
  return status == RMCL_OK ? report : nullptr;
}

rmcl_status rmcl_evaluate(const rmcl_config* config,
                          const char* const* checkpoint_paths,
                          size_t n_checkpoints, rmcl_report** out) {
  if (auto bad = require(config && checkpoint_paths && out, "null argument"))
    return bad;
  if (auto bad = require(n_checkpoints >= 1, "need at least one checkpoint"))
    return bad;
  return wrap([&] {
    const rmcl::EvalProtocol protocol = rmcl::eval_protocol_from(config->kv);
    std::vector<rmcl::Checkpoint> checkpoints;
    checkpoints.reserve(n_checkpoints);
    for (size_t i = 0; i < n_checkpoints; ++i) {
      if (checkpoint_paths[i] == nullptr)
        throw rmcl::config_error("null checkpoint path");
      checkpoints.push_back(rmcl::load_checkpoint(checkpoint_paths[i]));
    }
    *out = new rmcl_report{rmcl::evaluate(checkpoints, protocol)};
  });
}

rmcl_status rmcl_diagnose(const rmcl_config* config,
                          const char* checkpoint_path,
                          const char* dataset_path, rmcl_report** cells_out,
                          rmcl_report** histogram_out) {
  if (auto bad = require(config && checkpoint_path && dataset_path &&
                             cells_out && histogram_out,
                         "null argument"))
    return bad;
  return wrap([&] {
    const rmcl::EvalProtocol protocol = rmcl::eval_protocol_from(config->kv);
    const rmcl::Checkpoint checkpoint =
        rmcl::load_checkpoint(checkpoint_path);
    const rmcl::ToyDataset data = rmcl::load_dataset(dataset_path);
    rmcl::DiagnoseResult result =
        rmcl::diagnose(checkpoint, protocol, data.val);
    *cells_out = new rmcl_report{std::move(result.cells)};
    *histogram_out = new rmcl_report{std::move(result.histogram)};
  });
}

rmcl_status rmcl_emd(const double* a_points, const double* a_weights,
                     size_t a_count, const double* b_points,
                     const double* b_weights, size_t b_count, size_t dim,
                     int spherical, double* out) {
  if (auto bad = require(a_points && a_weights && b_points && b_weights && out,
                         "null argument"))
    return bad;
  if (auto bad = require(dim >= 1 && a_count >= 1 && b_count >= 1,
                         "empty point set"))
    return bad;
  return wrap([&] {
    rmcl::DiracMixture a, b;
    for (size_t i = 0; i < a_count; ++i) {
      a.atoms.emplace_back(a_points + i * dim, a_points + (i + 1) * dim);
      a.weights.push_back(a_weights[i]);
    }
    for (size_t i = 0; i < b_count; ++i) {
      b.atoms.emplace_back(b_points + i * dim, b_points + (i + 1) * dim);
      b.weights.push_back(b_weights[i]);
    }
    *out = rmcl::emd(a, b,
                     spherical != 0 ? rmcl::DistanceKind::spherical
                                    : rmcl::DistanceKind::euclidean);
  });
}

}  // extern "C"
