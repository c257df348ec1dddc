#include "flocksim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "flocksim/parallel.hpp"
#include "flocksim/rng.hpp"
#include "flocksim/util.hpp"

namespace flocksim::sim {

namespace {

constexpr char kModelMagic[8] = {'F', 'L', 'K', 'M', '0', '0', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

learn::Dataset concat_tests(const std::vector<learn::DomainData>& domains, int features) {
  Eigen::Index total = 0;
  for (const learn::DomainData& d : domains) total += d.test.size();
  learn::Dataset out;
  out.domain_id = -1;
  out.features.resize(total, features);
  out.labels.resize(total);
  Eigen::Index at = 0;
  for (const learn::DomainData& d : domains) {
    out.features.middleRows(at, d.test.size()) = d.test.features;
    out.labels.segment(at, d.test.size()) = d.test.labels;
    at += d.test.size();
  }
  return out;
}

learn::ParamShape shape_from(const ScenarioConfig& config) {
  learn::ParamShape s;
  s.kind = config.trainer.model_kind;
  s.features = config.data.features;
  s.classes = config.data.classes;
  s.hidden = config.trainer.hidden;
  return s;
}

MetricsRow base_row(int round, const learn::ParamVector& model,
                    const learn::Dataset& clean_test, const ScenarioConfig& config) {
  MetricsRow row;
  row.round = round;
  const learn::EvalResult eval = learn::evaluate(model, clean_test);
  row.clean_accuracy = eval.accuracy;
  row.clean_loss = eval.loss;
  if (config.attack.has_value()) {
    row.asr = adversary::attack_success_rate(model, clean_test, config.attack->backdoor);
  }
  return row;
}

// Client updates for the unprotected baselines: honest trainers run plain
// local SGD, attackers submit boosted poisoned deltas, exactly as under the
// protocol. The difference is only what the server does with them.
std::vector<learn::ParamVector> baseline_client_updates(
    const learn::ParamVector& global, const ScenarioConfig& config,
    const std::vector<learn::Dataset>& trainer_data, int round) {
  const std::size_t n = trainer_data.size();
  std::vector<learn::ParamVector> updates(n);
  parallel_for_index(n, [&](std::size_t i) {
    RngStream stream = derive_stream(config.master_seed, "train",
                                     static_cast<std::uint64_t>(i),
                                     static_cast<std::uint64_t>(round));
    const bool is_attacker =
        config.attack.has_value() &&
        std::binary_search(config.attack->attacker_ids.begin(),
                           config.attack->attacker_ids.end(), static_cast<int>(i));
    updates[i] = is_attacker
                     ? adversary::craft_malicious_update(global, trainer_data[i],
                                                         config.trainer,
                                                         config.attack->backdoor, stream)
                     : learn::local_train(global, trainer_data[i], config.trainer, stream);
  });
  return updates;
}

std::string sanitize_component(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out;
}

// --- CSV helpers used by the report ---

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open csv: " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty csv: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw std::invalid_argument("ragged csv row in " + path.string());
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::optional<double> cell_value(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  return parse_double(cell);
}

int column_index(const CsvTable& t, const std::string& name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) return -1;
  return static_cast<int>(it - t.header.begin());
}

std::string opt_cell(const std::optional<double>& v) {
  return v.has_value() ? format_double(*v) : std::string();
}

}  // namespace

std::string metrics_header(int num_trainers) {
  std::string h = "round,clean_accuracy,clean_loss,asr";
  for (int i = 0; i < num_trainers; ++i) h += ",consensus_" + std::to_string(i);
  h += ",accepted_count,slashed_total,reward_train_total,reward_val_total";
  return h;
}

std::string metrics_row_csv(const MetricsRow& row, int num_trainers) {
  std::string line = std::to_string(row.round);
  line += ',';
  line += format_double(row.clean_accuracy);
  line += ',';
  line += format_double(row.clean_loss);
  line += ',';
  if (row.asr.has_value()) line += format_double(*row.asr);
  if (!row.consensus.empty() &&
      row.consensus.size() != static_cast<std::size_t>(num_trainers))
    throw std::invalid_argument("metrics row consensus width mismatch");
  for (int i = 0; i < num_trainers; ++i) {
    line += ',';
    if (!row.consensus.empty()) line += format_double(row.consensus[static_cast<std::size_t>(i)]);
  }
  line += ',';
  if (row.accepted_count.has_value()) line += std::to_string(*row.accepted_count);
  line += ',';
  if (row.slashed_total.has_value()) line += format_double(*row.slashed_total);
  line += ',';
  if (row.reward_train_total.has_value()) line += format_double(*row.reward_train_total);
  line += ',';
  if (row.reward_val_total.has_value()) line += format_double(*row.reward_val_total);
  return line;
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
  validate(config);
  ScenarioResult result;
  result.config = config;

  const std::vector<learn::DomainData> domains =
      learn::synth_domains(config.data, config.master_seed);
  const int n = config.num_trainers();
  const int k = config.data.domains;

  std::vector<learn::Dataset> trainer_data;
  trainer_data.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    trainer_data.push_back(domains[static_cast<std::size_t>(i % k)].train);
  }
  if (config.attack.has_value()) {
    for (int id : config.attack->attacker_ids) {
      RngStream stream = derive_stream(config.master_seed, "poison",
                                       static_cast<std::uint64_t>(id));
      trainer_data[static_cast<std::size_t>(id)] = adversary::poison_dataset(
          trainer_data[static_cast<std::size_t>(id)], config.attack->backdoor, stream);
    }
  }

  std::vector<learn::Dataset> validator_data;
  validator_data.reserve(config.validator_stakes.size());
  for (int j = 0; j < config.num_validators(); ++j) {
    validator_data.push_back(domains[static_cast<std::size_t>(j % k)].test);
  }

  const learn::Dataset clean_test = concat_tests(domains, config.data.features);
  const learn::ParamShape shape = shape_from(config);
  RngStream init_stream = derive_stream(config.master_seed, "init");
  learn::ParamVector global = learn::init_params(shape, init_stream);

  result.metrics.reserve(static_cast<std::size_t>(config.rounds));

  switch (config.aggregator) {
    case AggregatorKind::kFlock: {
      proto::ProtocolState state;
      state.global = global;
      state.stakes.trainers = config.trainer_stakes;
      state.stakes.validators = config.validator_stakes;
      proto::RoundInputs inputs;
      inputs.master_seed = config.master_seed;
      inputs.trainer_data = trainer_data;
      inputs.validator_data = validator_data;
      inputs.trainer = config.trainer;
      inputs.econ = config.econ;
      inputs.filter = config.filter;
      if (config.attack.has_value()) {
        inputs.attack = &config.attack->backdoor;
        inputs.attacker_ids = config.attack->attacker_ids;
      }
      for (int r = 0; r < config.rounds; ++r) {
        const proto::RoundRecord record = proto::run_round(state, inputs);
        MetricsRow row = base_row(r + 1, state.global, clean_test, config);
        row.consensus = record.consensus;
        row.accepted_count = static_cast<int>(record.accepted.size());
        double slashed = 0.0;
        for (const proto::SlashEvent& e : record.slashes) slashed += e.amount;
        row.slashed_total = slashed;
        row.reward_train_total = record.rewards.pool_train;
        row.reward_val_total = record.rewards.pool_val;
        result.metrics.push_back(std::move(row));
      }
      result.global = state.global;
      result.chain = std::move(state.chain);
      break;
    }
    case AggregatorKind::kFedAvg: {
      std::vector<double> sizes;
      for (const learn::Dataset& d : trainer_data)
        sizes.push_back(static_cast<double>(d.size()));
      for (int r = 0; r < config.rounds; ++r) {
        const auto updates = baseline_client_updates(global, config, trainer_data, r);
        global = learn::fedavg(global, updates, sizes);
        result.metrics.push_back(base_row(r + 1, global, clean_test, config));
      }
      result.global = global;
      break;
    }
    case AggregatorKind::kScaffold: {
      learn::ScaffoldState state =
          learn::make_scaffold_state(shape, static_cast<std::size_t>(n));
      for (int r = 0; r < config.rounds; ++r) {
        std::vector<RngStream> streams;
        streams.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
          streams.push_back(derive_stream(config.master_seed, "train",
                                          static_cast<std::uint64_t>(i),
                                          static_cast<std::uint64_t>(r)));
        }
        std::vector<std::optional<learn::ParamVector>> overrides(
            static_cast<std::size_t>(n));
        if (config.attack.has_value()) {
          for (int id : config.attack->attacker_ids) {
            overrides[static_cast<std::size_t>(id)] = adversary::craft_malicious_update(
                global, trainer_data[static_cast<std::size_t>(id)], config.trainer,
                config.attack->backdoor, streams[static_cast<std::size_t>(id)]);
          }
        }
        auto [next_global, next_state] =
            learn::scaffold_round(global, state, trainer_data, config.trainer, streams,
                                  overrides);
        global = std::move(next_global);
        state = std::move(next_state);
        result.metrics.push_back(base_row(r + 1, global, clean_test, config));
      }
      result.global = global;
      break;
    }
    case AggregatorKind::kFedAdam: {
      std::vector<double> sizes;
      for (const learn::Dataset& d : trainer_data)
        sizes.push_back(static_cast<double>(d.size()));
      learn::FedAdamState state = learn::make_fedadam_state(shape);
      for (int r = 0; r < config.rounds; ++r) {
        const auto updates = baseline_client_updates(global, config, trainer_data, r);
        auto [next_global, next_state] = learn::fedadam_round(global, state, updates, sizes);
        global = std::move(next_global);
        state = std::move(next_state);
        result.metrics.push_back(base_row(r + 1, global, clean_test, config));
      }
      result.global = global;
      break;
    }
    case AggregatorKind::kLocalOnly: {
      result.specialists.assign(static_cast<std::size_t>(n), global);
      for (int r = 0; r < config.rounds; ++r) {
        parallel_for_index(static_cast<std::size_t>(n), [&](std::size_t i) {
          RngStream stream = derive_stream(config.master_seed, "train",
                                           static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(r));
          result.specialists[i] =
              learn::local_train(result.specialists[i], trainer_data[i], config.trainer,
                                 stream);
        });
        MetricsRow row;
        row.round = r + 1;
        double acc = 0.0;
        double loss = 0.0;
        for (int i = 0; i < n; ++i) {
          const learn::EvalResult eval =
              learn::evaluate(result.specialists[static_cast<std::size_t>(i)],
                              domains[static_cast<std::size_t>(i % k)].test);
          acc += eval.accuracy;
          loss += eval.loss;
        }
        row.clean_accuracy = acc / n;
        row.clean_loss = loss / n;
        result.metrics.push_back(std::move(row));
      }
      break;
    }
  }

  std::vector<learn::Dataset> domain_tests;
  domain_tests.reserve(static_cast<std::size_t>(k));
  for (const learn::DomainData& d : domains) domain_tests.push_back(d.test);
  if (config.aggregator == AggregatorKind::kLocalOnly) {
    result.crossdomain = learn::cross_domain_matrix(result.specialists, domain_tests);
    for (int i = 0; i < n; ++i) result.crossdomain_labels.push_back("trainer_" + std::to_string(i));
  } else {
    result.crossdomain =
        learn::cross_domain_matrix(std::span<const learn::ParamVector>(&result.global, 1),
                                   domain_tests);
    result.crossdomain_labels.push_back("global");
  }
  return result;
}

void save_model(const learn::ParamVector& params, const std::filesystem::path& path) {
  std::string buf;
  buf.append(kModelMagic, sizeof(kModelMagic));
  put_u32(buf, params.shape.kind == learn::ModelKind::kLogistic ? 0u : 1u);
  put_u32(buf, static_cast<std::uint32_t>(params.shape.features));
  put_u32(buf, static_cast<std::uint32_t>(params.shape.classes));
  put_u32(buf, static_cast<std::uint32_t>(params.shape.hidden));
  put_u64(buf, static_cast<std::uint64_t>(params.values.size()));
  const std::vector<std::uint8_t> bytes = le_bytes(
      std::span<const double>(params.values.data(),
                              static_cast<std::size_t>(params.values.size())));
  buf.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  write_file(path, buf);
}

learn::ParamVector load_model(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  if (data.size() < sizeof(kModelMagic) + 16 + 8 ||
      std::memcmp(p, kModelMagic, sizeof(kModelMagic)) != 0)
    throw std::runtime_error("model file: bad header: " + path.string());
  std::size_t off = sizeof(kModelMagic);
  learn::ParamShape shape;
  shape.kind = get_u32(p + off) == 0 ? learn::ModelKind::kLogistic : learn::ModelKind::kMlp1;
  off += 4;
  shape.features = static_cast<int>(get_u32(p + off));
  off += 4;
  shape.classes = static_cast<int>(get_u32(p + off));
  off += 4;
  shape.hidden = static_cast<int>(get_u32(p + off));
  off += 4;
  const std::uint64_t count = get_u64(p + off);
  off += 8;
  if (count != static_cast<std::uint64_t>(shape.param_count()))
    throw std::runtime_error("model file: length does not match shape: " + path.string());
  if (data.size() - off != count * 8)
    throw std::runtime_error("model file: truncated: " + path.string());
  learn::ParamVector out = learn::zero_params(shape);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t bits = get_u64(p + off + i * 8);
    double v;
    std::memcpy(&v, &bits, 8);
    out.values(static_cast<Eigen::Index>(i)) = v;
  }
  return out;
}

std::string file_sha256_hex(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  return to_hex(sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(data.data()), data.size())));
}

void write_outputs(const ScenarioResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const int n = result.config.num_trainers();

  std::string metrics = metrics_header(n) + "\n";
  for (const MetricsRow& row : result.metrics) metrics += metrics_row_csv(row, n) + "\n";
  write_file(out_dir / "metrics.csv", metrics);

  std::string cross = "model";
  for (Eigen::Index d = 0; d < result.crossdomain.cols(); ++d) {
    cross += ",acc_domain_" + std::to_string(d);
  }
  cross += "\n";
  for (Eigen::Index r = 0; r < result.crossdomain.rows(); ++r) {
    cross += result.crossdomain_labels[static_cast<std::size_t>(r)];
    for (Eigen::Index d = 0; d < result.crossdomain.cols(); ++d) {
      cross += ',' + format_double(result.crossdomain(r, d));
    }
    cross += "\n";
  }
  write_file(out_dir / "crossdomain.csv", cross);

  write_file(out_dir / "config.json", to_json(result.config));

  if (result.config.aggregator == AggregatorKind::kLocalOnly) {
    for (std::size_t i = 0; i < result.specialists.size(); ++i) {
      save_model(result.specialists[i],
                 out_dir / ("model_trainer_" + std::to_string(i) + ".bin"));
    }
  } else {
    save_model(result.global, out_dir / "model_global.bin");
  }

  if (result.config.aggregator == AggregatorKind::kFlock) {
    ledger::save(result.chain, out_dir / "ledger.bin");
  }
}

void write_report(std::span<const std::filesystem::path> csv_files,
                  const std::filesystem::path& out_dir) {
  if (csv_files.empty()) throw std::invalid_argument("report needs at least one csv file");
  std::filesystem::create_directories(out_dir);

  std::string summary =
      "file,rounds,final_accuracy,final_loss,final_asr,asr_at_round_40,max_asr_first_40,"
      "final_consensus_mean,total_slashed\n";
  std::string cross_summary =
      "file,mean_diagonal,mean_off_diagonal,mean_overall,diagonal_is_row_argmax\n";
  bool any_metrics = false;
  bool any_cross = false;

  // For the isolated-vs-global comparison: the first specialist matrix and
  // the first single-row global matrix seen.
  std::optional<double> specialists_offdiag;
  std::optional<std::string> specialists_file;
  std::optional<double> global_mean;
  std::optional<std::string> global_file;

  for (const std::filesystem::path& path : csv_files) {
    const CsvTable t = read_csv(path);
    if (!t.header.empty() && t.header[0] == "round") {
      any_metrics = true;
      const int acc_col = column_index(t, "clean_accuracy");
      const int loss_col = column_index(t, "clean_loss");
      const int asr_col = column_index(t, "asr");
      const int round_col = column_index(t, "round");
      const int accepted_col = column_index(t, "accepted_count");
      const int slashed_col = column_index(t, "slashed_total");
      if (acc_col < 0 || loss_col < 0 || asr_col < 0 || round_col < 0)
        throw std::invalid_argument("metrics csv missing required columns: " + path.string());
      if (t.rows.empty())
        throw std::invalid_argument("metrics csv has no rows: " + path.string());

      std::vector<int> consensus_cols;
      for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (t.header[c].rfind("consensus_", 0) == 0) consensus_cols.push_back(static_cast<int>(c));
      }

      const auto& last = t.rows.back();
      std::optional<double> asr_at_40;
      std::optional<double> max_asr_40;
      std::optional<double> total_slashed;
      for (const auto& row : t.rows) {
        const double round = parse_double(row[static_cast<std::size_t>(round_col)]);
        const auto asr = cell_value(row[static_cast<std::size_t>(asr_col)]);
        if (asr.has_value() && round <= 40.0) {
          if (!max_asr_40 || *asr > *max_asr_40) max_asr_40 = asr;
          if (round == 40.0) asr_at_40 = asr;
        }
        if (slashed_col >= 0) {
          const auto slashed = cell_value(row[static_cast<std::size_t>(slashed_col)]);
          if (slashed.has_value()) total_slashed = total_slashed.value_or(0.0) + *slashed;
        }
      }
      std::optional<double> consensus_mean;
      if (!consensus_cols.empty()) {
        double sum = 0.0;
        int count = 0;
        for (int c : consensus_cols) {
          const auto v = cell_value(last[static_cast<std::size_t>(c)]);
          if (v.has_value()) {
            sum += *v;
            ++count;
          }
        }
        if (count > 0) consensus_mean = sum / count;
      }
      (void)accepted_col;

      summary += path.string();
      summary += ',' + format_double(parse_double(last[static_cast<std::size_t>(round_col)]));
      summary += ',' + format_double(parse_double(last[static_cast<std::size_t>(acc_col)]));
      summary += ',' + format_double(parse_double(last[static_cast<std::size_t>(loss_col)]));
      summary += ',' + opt_cell(cell_value(last[static_cast<std::size_t>(asr_col)]));
      summary += ',' + opt_cell(asr_at_40);
      summary += ',' + opt_cell(max_asr_40);
      summary += ',' + opt_cell(consensus_mean);
      summary += ',' + opt_cell(total_slashed);
      summary += '\n';
    } else if (!t.header.empty() && t.header[0] == "model") {
      any_cross = true;
      const std::size_t cols = t.header.size() - 1;
      if (cols == 0 || t.rows.empty())
        throw std::invalid_argument("crossdomain csv is empty: " + path.string());
      double diag_sum = 0.0;
      int diag_count = 0;
      double off_sum = 0.0;
      int off_count = 0;
      double all_sum = 0.0;
      bool diag_argmax = true;
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        double row_max = -1.0;
        std::size_t row_argmax = 0;
        for (std::size_t c = 0; c < cols; ++c) {
          const double v = parse_double(t.rows[r][c + 1]);
          all_sum += v;
          if (t.rows.size() > 1 && r == c) {
            diag_sum += v;
            ++diag_count;
          } else if (t.rows.size() > 1) {
            off_sum += v;
            ++off_count;
          }
          if (v > row_max) {
            row_max = v;
            row_argmax = c;
          }
        }
        if (t.rows.size() > 1 && row_argmax != r) diag_argmax = false;
      }
      const double overall = all_sum / (static_cast<double>(t.rows.size()) * cols);
      cross_summary += path.string();
      cross_summary += ',' + (diag_count > 0 ? format_double(diag_sum / diag_count) : std::string());
      cross_summary += ',' + (off_count > 0 ? format_double(off_sum / off_count) : std::string());
      cross_summary += ',' + format_double(overall);
      cross_summary += ',' + (t.rows.size() > 1 ? std::string(diag_argmax ? "1" : "0") : std::string());
      cross_summary += '\n';
      if (t.rows.size() > 1 && off_count > 0 && !specialists_offdiag.has_value()) {
        specialists_offdiag = off_sum / off_count;
        specialists_file = path.string();
      }
      if (t.rows.size() == 1 && !global_mean.has_value()) {
        global_mean = overall;
        global_file = path.string();
      }
    } else {
      throw std::invalid_argument("unrecognized csv header: " + path.string());
    }
  }

  if (any_metrics) write_file(out_dir / "summary.csv", summary);
  if (any_cross) write_file(out_dir / "crossdomain_summary.csv", cross_summary);
  if (specialists_offdiag.has_value() && global_mean.has_value()) {
    std::string cmp =
        "global_file,specialists_file,global_mean,specialists_off_diagonal_mean,gain\n";
    cmp += *global_file + ',' + *specialists_file;
    cmp += ',' + format_double(*global_mean);
    cmp += ',' + format_double(*specialists_offdiag);
    cmp += ',' + format_double(*global_mean - *specialists_offdiag);
    cmp += '\n';
    write_file(out_dir / "comparison.csv", cmp);
  }
}

void run_sweep(const std::string& config_json, const std::string& param,
               std::span<const std::string> values, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed_override) {
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
  std::filesystem::create_directories(out_dir);

  std::string summary = "param,value,rounds,final_accuracy,final_loss,final_asr\n";
  for (const std::string& value : values) {
    const std::string overridden = override_config_json(config_json, param, value);
    ScenarioConfig config = config_from_json(overridden);
    if (seed_override.has_value()) config.master_seed = *seed_override;
    const ScenarioResult result = run_scenario(config);
    const std::filesystem::path run_dir =
        out_dir / (sanitize_component(param) + "=" + sanitize_component(value));
    write_outputs(result, run_dir);

    const MetricsRow& last = result.metrics.back();
    summary += param + ',' + value;
    summary += ',' + std::to_string(last.round);
    summary += ',' + format_double(last.clean_accuracy);
    summary += ',' + format_double(last.clean_loss);
    summary += ',' + opt_cell(last.asr);
    summary += '\n';
  }
  write_file(out_dir / "sweep_summary.csv", summary);
}

}  // namespace flocksim::sim
