// Command-line front end. Links only the C API from rmcl/rmcl.h; exit codes
// are the rmcl_status values (0 ok, 2 config, 3 data, 4 numeric, 5 io).

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rmcl/rmcl.h"

namespace {

struct ConfigDeleter {
  void operator()(rmcl_config* c) const { rmcl_config_destroy(c); }
};
struct ReportDeleter {
  void operator()(rmcl_report* r) const { rmcl_report_destroy(r); }
};
using ConfigPtr = std::unique_ptr<rmcl_config, ConfigDeleter>;
using ReportPtr = std::unique_ptr<rmcl_report, ReportDeleter>;

int fail(rmcl_status status) {
  std::fprintf(stderr, "error (%s): %s\n", rmcl_status_name(status),
               rmcl_last_error());
  return static_cast<int>(status);
}

// Builds the merged configuration: optional file first, then overrides.
int build_config(const std::string& config_path,
                 const std::vector<std::string>& overrides, ConfigPtr& out) {
  out.reset(rmcl_config_create());
  if (!config_path.empty()) {
    if (rmcl_status s = rmcl_config_load(out.get(), config_path.c_str()))
      return fail(s);
  }
  for (const auto& assignment : overrides) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error (config): --set expects key=value, got %s\n",
                   assignment.c_str());
      return static_cast<int>(RMCL_ERR_CONFIG);
    }
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    if (rmcl_status s = rmcl_config_set(out.get(), key.c_str(), value.c_str()))
      return fail(s);
  }
  return 0;
}

void print_meta(const rmcl_report* report, const char* key) {
  char buf[128];
  if (rmcl_report_meta(report, key, buf, sizeof(buf)) == RMCL_OK)
    std::printf("%s = %s\n", key, buf);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"resilient multiple choice learning toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
  app.add_option("--config", config_path, "key=value configuration file")
      ->expected(1);
  app.add_option("--set", overrides, "override a config key (key=value)")
      ->take_all();
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  // generate
  auto* generate = app.add_subcommand("generate", "generate a toy dataset");
  std::string generate_out;
  generate->add_option("--out", generate_out, "dataset CSV path")->required();

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string train_data, train_out, train_log;
  train->add_option("--data", train_data, "dataset CSV path")->required();
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--log", train_log, "training log report (JSON)");

  // train-ensemble
  auto* ensemble =
      app.add_subcommand("train-ensemble", "train single-hypothesis members");
  std::string ensemble_data, ensemble_prefix;
  int ensemble_members = 20;
  ensemble->add_option("--data", ensemble_data, "dataset CSV path")
      ->required();
  ensemble->add_option("--members", ensemble_members, "number of members")
      ->required();
  ensemble->add_option("--out-prefix", ensemble_prefix,
                       "checkpoint path prefix (<prefix><i>.ckpt)")
      ->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints on the grid");
  std::vector<std::string> eval_ckpts;
  std::string eval_out, eval_csv;
  eval->add_option("--ckpt", eval_ckpts,
                   "checkpoint path (repeat to stack an ensemble)")
      ->required()
      ->take_all();
  eval->add_option("--out", eval_out, "report output (JSON)")->required();
  eval->add_option("--csv", eval_csv, "also export the report as CSV");

  // diagnose
  auto* diagnose =
      app.add_subcommand("diagnose", "collapse histogram + cell calibration");
  std::string diag_ckpt, diag_data, diag_cells, diag_hist;
  diagnose->add_option("--ckpt", diag_ckpt, "checkpoint path")->required();
  diagnose->add_option("--data", diag_data, "dataset CSV (validation split)")
      ->required();
  diagnose->add_option("--out-cells", diag_cells, "cell report (JSON)")
      ->required();
  diagnose->add_option("--out-hist", diag_hist, "histogram report (JSON)")
      ->required();

  // export
  auto* export_cmd =
      app.add_subcommand("export", "re-export a report as CSV or JSON");
  std::string export_in, export_out, export_format = "csv";
  export_cmd->add_option("--in", export_in, "report JSON path")->required();
  export_cmd->add_option("--out", export_out, "output path")->required();
  export_cmd->add_option("--format", export_format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI11_PARSE(app, argc, argv);
  rmcl_set_num_threads(threads);

  ConfigPtr config;
  if (int rc = build_config(config_path, overrides, config)) return rc;

  if (generate->parsed()) {
    if (rmcl_status s = rmcl_generate_dataset(config.get(),
                                              generate_out.c_str()))
      return fail(s);
    std::printf("dataset written to %s\n", generate_out.c_str());
    return 0;
  }

  if (train->parsed()) {
    if (rmcl_status s =
            rmcl_train(config.get(), train_data.c_str(), train_out.c_str(),
                       train_log.empty() ? nullptr : train_log.c_str()))
      return fail(s);
    std::printf("checkpoint written to %s\n", train_out.c_str());
    if (!train_log.empty()) {
      ReportPtr log(rmcl_report_load(train_log.c_str()));
      if (log) {
        print_meta(log.get(), "best_epoch");
        print_meta(log.get(), "best_val_loss");
      }
    }
    return 0;
  }

  if (ensemble->parsed()) {
    if (rmcl_status s =
            rmcl_train_ensemble(config.get(), ensemble_data.c_str(),
                                ensemble_members, ensemble_prefix.c_str()))
      return fail(s);
    std::printf("%d member checkpoints written to %s*.ckpt\n",
                ensemble_members, ensemble_prefix.c_str());
    return 0;
  }

  if (eval->parsed()) {
    std::vector<const char*> paths;
    paths.reserve(eval_ckpts.size());
    for (const auto& p : eval_ckpts) paths.push_back(p.c_str());
    rmcl_report* raw = nullptr;
    if (rmcl_status s =
            rmcl_evaluate(config.get(), paths.data(), paths.size(), &raw))
      return fail(s);
    ReportPtr report(raw);
    if (rmcl_status s =
            rmcl_report_export(report.get(), eval_out.c_str(), "json"))
      return fail(s);
    if (!eval_csv.empty())
      if (rmcl_status s =
              rmcl_report_export(report.get(), eval_csv.c_str(), "csv"))
        return fail(s);
    print_meta(report.get(), "mean_emd");
    print_meta(report.get(), "mean_oracle");
    print_meta(report.get(), "mean_outside_score");
    return 0;
  }

  if (diagnose->parsed()) {
    rmcl_report *cells_raw = nullptr, *hist_raw = nullptr;
    if (rmcl_status s =
            rmcl_diagnose(config.get(), diag_ckpt.c_str(), diag_data.c_str(),
                          &cells_raw, &hist_raw))
      return fail(s);
    ReportPtr cells(cells_raw), hist(hist_raw);
    if (rmcl_status s =
            rmcl_report_export(cells.get(), diag_cells.c_str(), "json"))
      return fail(s);
    if (rmcl_status s =
            rmcl_report_export(hist.get(), diag_hist.c_str(), "json"))
      return fail(s);
    print_meta(cells.get(), "mean_centroid_err");
    print_meta(cells.get(), "mean_score_mass_err");
    print_meta(hist.get(), "total_wins");
    print_meta(hist.get(), "active_heads");
    return 0;
  }

  if (export_cmd->parsed()) {
    ReportPtr report(rmcl_report_load(export_in.c_str()));
    if (!report) return fail(RMCL_ERR_DATA);
    if (rmcl_status s = rmcl_report_export(report.get(), export_out.c_str(),
                                           export_format.c_str()))
      return fail(s);
    std::printf("report written to %s\n", export_out.c_str());
    return 0;
  }

  return 0;
}
