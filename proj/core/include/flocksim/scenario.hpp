#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flocksim/adversary.hpp"
#include "flocksim/economics.hpp"
#include "flocksim/learning.hpp"
#include "flocksim/protocol.hpp"

namespace flocksim::sim {

enum class AggregatorKind { kFlock, kFedAvg, kScaffold, kFedAdam, kLocalOnly };

std::string to_string(AggregatorKind kind);
AggregatorKind aggregator_from_string(const std::string& name);  // throws on unknown

struct AttackConfig {
  adversary::BackdoorSpec backdoor;
  std::vector<int> attacker_ids;  // ascending, unique trainer ids
};

// One experiment, fully specified. Every run is a pure function of this
// struct; the seed is explicit and there is no wall-clock entropy anywhere.
struct ScenarioConfig {
  std::uint64_t master_seed = 1;
  int rounds = 1;
  AggregatorKind aggregator = AggregatorKind::kFlock;
  std::vector<econ::Stake> trainer_stakes;
  std::vector<econ::Stake> validator_stakes;
  econ::EconParams econ;
  proto::FilterPolicy filter;
  learn::TrainerConfig trainer;
  learn::DomainSpec data;
  std::optional<AttackConfig> attack;

  int num_trainers() const { return static_cast<int>(trainer_stakes.size()); }
  int num_validators() const { return static_cast<int>(validator_stakes.size()); }
};

// Throws std::invalid_argument naming the offending field, e.g.
// "attack.attacker_ids[0] out of range".
void validate(const ScenarioConfig& config);

// Built-in experiment configurations:
//   attack-comparison  8 trainers, 4 validators, trainer 1 hostile, 200 rounds
//   cross-domain       8 trainers on 8 domains, no attack, federated
//   local-vs-fed       same data, but every trainer stays isolated
ScenarioConfig preset(const std::string& name);  // throws on unknown name

std::string to_json(const ScenarioConfig& config);  // pretty-printed
ScenarioConfig config_from_json(const std::string& text);

// Replaces the value at a dotted path ("filter.floor", "attack.boost_factor",
// "aggregator") in a config JSON document. The value text is parsed as JSON,
// falling back to a string literal. Used by parameter sweeps.
std::string override_config_json(const std::string& config_text, const std::string& dotted_key,
                                 const std::string& value_text);

}  // namespace flocksim::sim
