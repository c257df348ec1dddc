// Microbenchmarks for the hot paths: settlement arithmetic, local SGD, a
// full protocol round, hashing, and ledger verification.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "flocksim/digest.hpp"
#include "flocksim/economics.hpp"
#include "flocksim/harness.hpp"
#include "flocksim/learning.hpp"
#include "flocksim/ledger.hpp"
#include "flocksim/protocol.hpp"
#include "flocksim/rng.hpp"
#include "flocksim/scenario.hpp"

namespace econ = flocksim::econ;
namespace learn = flocksim::learn;
namespace ledger = flocksim::ledger;
namespace proto = flocksim::proto;
namespace sim = flocksim::sim;
using flocksim::derive_stream;
using flocksim::RngStream;

namespace {

econ::StakeBook random_book(int trainers, int validators, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 50.0);
  econ::StakeBook book;
  for (int i = 0; i < trainers; ++i) book.trainers.push_back({u(rng), u(rng), 0.1});
  for (int j = 0; j < validators; ++j) book.validators.push_back({u(rng), u(rng), 0.1});
  return book;
}

econ::ScoreMatrix random_scores(int validators, int trainers, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd raw(validators, trainers);
  for (int j = 0; j < validators; ++j)
    for (int i = 0; i < trainers; ++i) raw(j, i) = u(rng);
  return econ::ScoreMatrix(raw);
}

void BM_Settle(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int m = n / 2 + 1;
  std::mt19937_64 rng(7);
  const econ::StakeBook book = random_book(n, m, rng);
  const econ::ScoreMatrix scores = random_scores(m, n, rng);
  const econ::EconParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(econ::settle(params, book, scores));
  }
}
BENCHMARK(BM_Settle)->Arg(8)->Arg(32)->Arg(128);

learn::Dataset random_dataset(int rows, int features, int classes, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  learn::Dataset data;
  data.features.resize(rows, features);
  data.labels.resize(rows);
  for (int r = 0; r < rows; ++r) {
    for (int f = 0; f < features; ++f) data.features(r, f) = gauss(rng);
    data.labels(r) = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
  }
  return data;
}

void BM_LocalTrain(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  std::mt19937_64 rng(11);
  const learn::Dataset data = random_dataset(rows, 20, 4, rng);
  const learn::ParamShape shape{learn::ModelKind::kMlp1, 20, 4, 48};
  RngStream init = derive_stream(1, "init");
  const learn::ParamVector params = learn::init_params(shape, init);
  learn::TrainerConfig config;
  config.local_epochs = 1;
  config.batch_size = 32;
  config.learning_rate = 0.1;
  config.model_kind = learn::ModelKind::kMlp1;
  config.hidden = 48;
  std::uint64_t round = 0;
  for (auto _ : state) {
    RngStream stream = derive_stream(1, "train", 0, round++);
    benchmark::DoNotOptimize(learn::local_train(params, data, config, stream));
  }
}
BENCHMARK(BM_LocalTrain)->Arg(400)->Arg(1600);

void BM_ProtocolRound(benchmark::State& state) {
  sim::ScenarioConfig config = sim::preset("attack-comparison");
  config.data.samples_per_domain = static_cast<int>(state.range(0));
  const auto domains = learn::synth_domains(config.data, 1);

  std::vector<learn::Dataset> trainer_data;
  std::vector<learn::Dataset> validator_data;
  for (std::size_t i = 0; i < config.trainer_stakes.size(); ++i)
    trainer_data.push_back(domains[i % domains.size()].train);
  for (std::size_t j = 0; j < config.validator_stakes.size(); ++j)
    validator_data.push_back(domains[j % domains.size()].test);

  proto::RoundInputs inputs;
  inputs.master_seed = 1;
  inputs.trainer_data = trainer_data;
  inputs.validator_data = validator_data;
  inputs.trainer = config.trainer;
  inputs.econ = config.econ;
  inputs.filter = config.filter;

  for (auto _ : state) {
    state.PauseTiming();
    proto::ProtocolState fresh;
    fresh.stakes.trainers = config.trainer_stakes;
    fresh.stakes.validators = config.validator_stakes;
    RngStream init = derive_stream(1, "init");
    fresh.global = learn::init_params({learn::ModelKind::kMlp1, 20, 4, 48}, init);
    state.ResumeTiming();
    benchmark::DoNotOptimize(proto::run_round(fresh, inputs));
  }
}
BENCHMARK(BM_ProtocolRound)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Sha256(benchmark::State& state) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(state.range(0)), 0xa5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(flocksim::sha256(bytes));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(1 << 10)->Arg(1 << 20);

ledger::Chain sample_chain(int entries) {
  ledger::Chain chain;
  for (int i = 0; i < entries; ++i)
    chain.append_payload("{\"round\":" + std::to_string(i) + "}");
  return chain;
}

void BM_LedgerAppend(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_chain(static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_LedgerAppend)->Arg(200);

void BM_LedgerVerify(benchmark::State& state) {
  const ledger::Chain chain = sample_chain(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ledger::verify_chain(chain));
  }
}
BENCHMARK(BM_LedgerVerify)->Arg(200)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
