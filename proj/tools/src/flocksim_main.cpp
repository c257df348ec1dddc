// Command-line front end. Exit codes: 0 success, 1 internal failure,
// 2 configuration or usage error, 3 ledger verification failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include <flocksim/harness.hpp>
#include <flocksim/ledger.hpp>
#include <flocksim/scenario.hpp>

namespace {

namespace fs = std::filesystem;
using namespace flocksim;

constexpr int kOk = 0;
constexpr int kInternalError = 1;
constexpr int kConfigError = 2;
constexpr int kLedgerError = 3;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int do_run(const std::string& config_path, std::optional<std::uint64_t> seed,
           const std::string& out_dir) {
  sim::ScenarioConfig config = sim::config_from_json(read_text(config_path));
  if (seed.has_value()) config.master_seed = *seed;
  const sim::ScenarioResult result = sim::run_scenario(config);
  sim::write_outputs(result, out_dir);

  const sim::MetricsRow& last = result.metrics.back();
  std::cout << "aggregator=" << sim::to_string(config.aggregator)
            << " seed=" << config.master_seed << " rounds=" << last.round
            << " clean_accuracy=" << last.clean_accuracy;
  if (last.asr.has_value()) std::cout << " asr=" << *last.asr;
  std::cout << "\nwrote " << out_dir << "\n";
  return kOk;
}

int do_preset(const std::string& name, const std::string& out_path) {
  const sim::ScenarioConfig config = sim::preset(name);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot open for writing: " + out_path);
  out << sim::to_json(config);
  std::cout << "wrote " << out_path << "\n";
  return kOk;
}

int do_verify_ledger(const std::string& path, const std::string& econ_config) {
  if (!fs::exists(path)) {
    std::cerr << "no such ledger file: " << path << "\n";
    return kConfigError;
  }
  ledger::Chain chain;
  try {
    chain = ledger::load(path);
  } catch (const std::exception& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kLedgerError;
  }
  if (const auto bad = ledger::verify_chain(chain)) {
    std::cerr << "verification failed: chain broken at entry " << *bad << "\n";
    return kLedgerError;
  }
  if (!econ_config.empty()) {
    const sim::ScenarioConfig config = sim::config_from_json(read_text(econ_config));
    const ledger::ReplayReport report = ledger::replay_settlements(chain, config.econ);
    if (!report.ok()) {
      std::cerr << "replay failed: " << report.detail << "\n";
      return kLedgerError;
    }
    std::cout << "replay ok\n";
  }
  std::cout << "ok " << chain.size() << " entries\n";
  return kOk;
}

int do_export(const std::string& path, const std::string& out_path) {
  ledger::Chain chain;
  try {
    chain = ledger::load(path);
  } catch (const std::exception& e) {
    std::cerr << "export failed: " << e.what() << "\n";
    return kLedgerError;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot open for writing: " + out_path);
  ledger::export_jsonl(chain, out);
  std::cout << "wrote " << out_path << " (" << chain.size() << " entries)\n";
  return kOk;
}

int do_report(const std::vector<std::string>& files, const std::string& out_dir) {
  std::vector<fs::path> paths(files.begin(), files.end());
  sim::write_report(paths, out_dir);
  std::cout << "wrote " << out_dir << "\n";
  return kOk;
}

int do_sweep(const std::string& config_path, const std::string& param,
             const std::string& values_text, const std::string& out_dir,
             std::optional<std::uint64_t> seed) {
  std::vector<std::string> values;
  std::size_t start = 0;
  while (start <= values_text.size()) {
    const std::size_t comma = values_text.find(',', start);
    const std::string v =
        values_text.substr(start, comma == std::string::npos ? comma : comma - start);
    if (!v.empty()) values.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  sim::run_sweep(read_text(config_path), param, values, out_dir, seed);
  std::cout << "wrote " << out_dir << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator of a stake-governed federated-learning protocol"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::uint64_t seed_value = 0;

  CLI::App* run = app.add_subcommand("run", "Run one scenario and write its artifacts");
  run->add_option("--config", config_path, "Scenario JSON file")->required();
  CLI::Option* run_seed = run->add_option("--seed", seed_value, "Override master_seed");
  run->add_option("--out", out_path, "Output directory")->required();

  std::string preset_name;
  CLI::App* preset = app.add_subcommand("preset", "Write a built-in scenario config");
  preset->add_option("name", preset_name, "attack-comparison | cross-domain | local-vs-fed")
      ->required();
  preset->add_option("--out", out_path, "Output JSON path")->required();

  std::string ledger_path;
  std::string econ_config;
  CLI::App* verify = app.add_subcommand("verify-ledger", "Check a ledger file's hash chain");
  verify->add_option("ledger", ledger_path, "Ledger file")->required();
  verify->add_option("--replay-config", econ_config,
                     "Also replay settlements against this scenario config");

  CLI::App* exp = app.add_subcommand("export", "Export a ledger to JSON lines");
  exp->add_option("ledger", ledger_path, "Ledger file")->required();
  bool json_flag = false;
  exp->add_flag("--json", json_flag, "JSON-lines format (the only format)");
  exp->add_option("--out", out_path, "Output path")->required();

  std::vector<std::string> report_files;
  CLI::App* report = app.add_subcommand("report", "Summarize metrics/crossdomain CSV files");
  report->add_option("files", report_files, "CSV files")->required()->expected(-1);
  report->add_option("--out", out_path, "Output directory")->required();

  std::string sweep_param;
  std::string sweep_values;
  CLI::App* sweep = app.add_subcommand("sweep", "Run a grid over one config parameter");
  sweep->add_option("--config", config_path, "Scenario JSON file")->required();
  sweep->add_option("--param", sweep_param, "Dotted config key, e.g. filter.floor")
      ->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required();
  sweep->add_option("--out", out_path, "Output directory")->default_val("sweep-out");
  CLI::Option* sweep_seed = sweep->add_option("--seed", seed_value, "Override master_seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (run_seed->count() > 0 || sweep_seed->count() > 0) seed = seed_value;

  try {
    if (run->parsed()) return do_run(config_path, seed, out_path);
    if (preset->parsed()) return do_preset(preset_name, out_path);
    if (verify->parsed()) return do_verify_ledger(ledger_path, econ_config);
    if (exp->parsed()) return do_export(ledger_path, out_path);
    if (report->parsed()) return do_report(report_files, out_path);
    if (sweep->parsed()) return do_sweep(config_path, sweep_param, sweep_values, out_path, seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternalError;
  }
  return kConfigError;
}
