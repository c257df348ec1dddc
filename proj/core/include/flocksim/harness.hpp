#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flocksim/ledger.hpp"
#include "flocksim/scenario.hpp"

namespace flocksim::sim {

// One row per round, round numbers starting at 1. Optional fields stay empty
// in the CSV: ASR appears only when an attack is configured, the protocol
// columns only under the flock aggregator.
struct MetricsRow {
  int round = 0;
  double clean_accuracy = 0.0;
  double clean_loss = 0.0;
  std::optional<double> asr;
  std::vector<double> consensus;
  std::optional<int> accepted_count;
  std::optional<double> slashed_total;
  std::optional<double> reward_train_total;
  std::optional<double> reward_val_total;
};

std::string metrics_header(int num_trainers);
std::string metrics_row_csv(const MetricsRow& row, int num_trainers);

struct ScenarioResult {
  ScenarioConfig config;
  std::vector<MetricsRow> metrics;
  learn::ParamVector global;                    // federated aggregators
  std::vector<learn::ParamVector> specialists;  // local_only
  ledger::Chain chain;                          // flock
  Eigen::MatrixXd crossdomain;                  // model rows x domain test columns
  std::vector<std::string> crossdomain_labels;  // one per matrix row
};

// Runs the configured pipeline in memory. The flock aggregator goes through
// the full protocol round; fedavg/scaffold/fedadam train the same clients but
// aggregate without validation, filtering, slashing, or ledger entries;
// local_only never aggregates. Deterministic in (config, master_seed).
ScenarioResult run_scenario(const ScenarioConfig& config);

// Writes metrics.csv, crossdomain.csv, config.json, final model files, and
// (flock) ledger.bin into out_dir. Creates the directory. Identical results
// produce byte-identical files.
void write_outputs(const ScenarioResult& result, const std::filesystem::path& out_dir);

void save_model(const learn::ParamVector& params, const std::filesystem::path& path);
learn::ParamVector load_model(const std::filesystem::path& path);

// Digest of the csv/ledger artifacts; lets callers compare runs cheaply.
std::string file_sha256_hex(const std::filesystem::path& path);

// Summarizes metrics and cross-domain CSVs (classified by header) into
// summary.csv, crossdomain_summary.csv, and comparison.csv in out_dir.
// Throws std::invalid_argument on malformed input.
void write_report(std::span<const std::filesystem::path> csv_files,
                  const std::filesystem::path& out_dir);

// Runs the base config once per value of the dotted parameter, writing each
// run under out_dir/<param>=<value>/ plus a sweep_summary.csv.
void run_sweep(const std::string& config_json, const std::string& param,
               std::span<const std::string> values, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed_override);

}  // namespace flocksim::sim
