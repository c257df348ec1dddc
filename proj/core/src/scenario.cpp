#include "flocksim/scenario.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace flocksim::sim {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

const ordered_json& member(const ordered_json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) fail(path + " must be an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(path.empty() ? std::string("missing key ") + key
                                         : path + " is missing key " + key);
  return *it;
}

double get_double(const ordered_json& obj, const char* key, const std::string& path) {
  const ordered_json& v = member(obj, key, path);
  if (!v.is_number()) fail(path + "." + key + " must be a number");
  return v.get<double>();
}

int get_int(const ordered_json& obj, const char* key, const std::string& path) {
  const ordered_json& v = member(obj, key, path);
  if (!v.is_number_integer()) fail(path + "." + key + " must be an integer");
  return v.get<int>();
}

void check_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                const std::string& path) {
  for (const auto& item : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return item.key() == k;
        }) == allowed.end()) {
      fail(path + " has unknown key " + item.key());
    }
  }
}

std::vector<econ::Stake> stakes_from_json(const ordered_json& arr, const std::string& path) {
  if (!arr.is_array() || arr.empty()) fail(path + " must be a nonempty array");
  std::vector<econ::Stake> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    check_keys(arr[i], {"own", "delegated", "commission"}, p);
    econ::Stake s;
    s.own = get_double(arr[i], "own", p);
    s.delegated = get_double(arr[i], "delegated", p);
    s.commission = get_double(arr[i], "commission", p);
    if (s.own < 0.0) fail(p + ".own must be >= 0");
    if (s.delegated < 0.0) fail(p + ".delegated must be >= 0");
    if (s.commission < 0.0 || s.commission > 1.0) fail(p + ".commission must be in [0, 1]");
    out.push_back(s);
  }
  return out;
}

ordered_json stakes_to_json(const std::vector<econ::Stake>& stakes) {
  ordered_json arr = ordered_json::array();
  for (const econ::Stake& s : stakes) {
    arr.push_back({{"own", s.own}, {"delegated", s.delegated}, {"commission", s.commission}});
  }
  return arr;
}

std::string model_to_string(learn::ModelKind kind) {
  return kind == learn::ModelKind::kLogistic ? "logistic" : "mlp1";
}

learn::ModelKind model_from_string(const std::string& name) {
  if (name == "logistic") return learn::ModelKind::kLogistic;
  if (name == "mlp1") return learn::ModelKind::kMlp1;
  fail("trainer.model must be one of logistic|mlp1");
}

ScenarioConfig preset_base() {
  ScenarioConfig c;
  c.master_seed = 1;
  c.trainer_stakes.assign(8, econ::Stake{10.0, 5.0, 0.1});
  c.validator_stakes.assign(4, econ::Stake{10.0, 5.0, 0.1});
  c.filter.kappa = 3.0;
  c.filter.floor = 0.4;
  c.filter.slash_fraction = 0.1;
  c.trainer.local_epochs = 3;
  c.trainer.batch_size = 32;
  c.trainer.learning_rate = 0.1;
  c.trainer.model_kind = learn::ModelKind::kMlp1;
  c.trainer.hidden = 48;
  c.data.features = 20;
  c.data.classes = 4;
  c.data.samples_per_domain = 2000;
  c.data.noise_dims = 3;
  c.data.separation = 4.0;
  c.data.cluster_std = 1.0;
  return c;
}

}  // namespace

std::string to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kFlock: return "flock";
    case AggregatorKind::kFedAvg: return "fedavg";
    case AggregatorKind::kScaffold: return "scaffold";
    case AggregatorKind::kFedAdam: return "fedadam";
    case AggregatorKind::kLocalOnly: return "local_only";
  }
  fail("unknown aggregator kind");
}

AggregatorKind aggregator_from_string(const std::string& name) {
  if (name == "flock") return AggregatorKind::kFlock;
  if (name == "fedavg") return AggregatorKind::kFedAvg;
  if (name == "scaffold") return AggregatorKind::kScaffold;
  if (name == "fedadam") return AggregatorKind::kFedAdam;
  if (name == "local_only") return AggregatorKind::kLocalOnly;
  fail("aggregator must be one of flock|fedavg|scaffold|fedadam|local_only");
}

void validate(const ScenarioConfig& config) {
  if (config.rounds < 1) fail("rounds must be >= 1");
  if (config.trainer_stakes.empty()) fail("participants.trainers must be nonempty");
  for (std::size_t i = 0; i < config.trainer_stakes.size(); ++i) {
    const econ::Stake& s = config.trainer_stakes[i];
    const std::string p = "participants.trainers[" + std::to_string(i) + "]";
    if (s.own < 0.0 || s.delegated < 0.0) fail(p + " stake must be >= 0");
    if (s.commission < 0.0 || s.commission > 1.0) fail(p + ".commission must be in [0, 1]");
  }
  if (config.aggregator == AggregatorKind::kFlock && config.validator_stakes.empty())
    fail("participants.validators must be nonempty for the flock aggregator");
  for (std::size_t j = 0; j < config.validator_stakes.size(); ++j) {
    const econ::Stake& s = config.validator_stakes[j];
    const std::string p = "participants.validators[" + std::to_string(j) + "]";
    if (s.own < 0.0 || s.delegated < 0.0) fail(p + " stake must be >= 0");
    if (s.commission < 0.0 || s.commission > 1.0) fail(p + ".commission must be in [0, 1]");
  }

  try {
    econ::validate(config.econ);
  } catch (const std::invalid_argument& e) {
    fail(std::string("econ.") + e.what());
  }
  proto::validate(config.filter);  // messages carry the filter. prefix
  try {
    if (config.trainer.local_epochs < 0) fail("local_epochs must be >= 0");
    if (config.trainer.batch_size < 1) fail("batch_size must be >= 1");
    if (!(config.trainer.learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (config.trainer.model_kind == learn::ModelKind::kMlp1 && config.trainer.hidden < 1)
      fail("hidden must be >= 1 for mlp1");
  } catch (const std::invalid_argument& e) {
    fail(std::string("trainer.") + e.what());
  }
  learn::validate(config.data);  // messages carry the data. prefix

  if (config.attack.has_value()) {
    if (config.aggregator == AggregatorKind::kLocalOnly)
      fail("attack is not supported with the local_only aggregator");
    const AttackConfig& a = *config.attack;
    if (a.attacker_ids.empty()) fail("attack.attacker_ids must be nonempty");
    std::set<int> seen;
    for (std::size_t i = 0; i < a.attacker_ids.size(); ++i) {
      const int id = a.attacker_ids[i];
      if (id < 0 || id >= config.num_trainers())
        fail("attack.attacker_ids[" + std::to_string(i) + "] out of range");
      if (!seen.insert(id).second)
        fail("attack.attacker_ids[" + std::to_string(i) + "] is a duplicate");
    }
    if (!std::is_sorted(a.attacker_ids.begin(), a.attacker_ids.end()))
      fail("attack.attacker_ids must be ascending");
    adversary::validate(a.backdoor, config.data.features, config.data.classes);
  }
}

ScenarioConfig preset(const std::string& name) {
  if (name == "attack-comparison") {
    ScenarioConfig c = preset_base();
    c.rounds = 200;
    c.aggregator = AggregatorKind::kFlock;
    // Two trainers per domain: a rejected trainer never removes a domain
    // from coverage, which keeps the defended model's clean accuracy at the
    // unattacked baseline. Domains are kept close together so that honest
    // round-one scores cluster tightly; the robust filter then separates a
    // boosted submission from the first round onward.
    c.data.domains = 4;
    c.data.domain_rotation = 0.05;
    c.data.domain_shift = 0.15;
    AttackConfig a;
    a.attacker_ids = {1};
    a.backdoor.trigger_dims = {17, 18, 19};
    a.backdoor.trigger_value = 4.0;
    a.backdoor.target_class = 0;
    a.backdoor.poison_fraction = 0.3;
    a.backdoor.boost_factor = 3.0;
    c.attack = std::move(a);
    return c;
  }
  if (name == "cross-domain") {
    ScenarioConfig c = preset_base();
    c.rounds = 40;
    c.aggregator = AggregatorKind::kFlock;
    c.data.domains = 8;
    c.data.domain_rotation = 0.3;
    c.data.domain_shift = 0.5;
    return c;
  }
  if (name == "local-vs-fed") {
    ScenarioConfig c = preset_base();
    c.rounds = 40;
    c.aggregator = AggregatorKind::kLocalOnly;
    c.data.domains = 8;
    c.data.domain_rotation = 0.3;
    c.data.domain_shift = 0.5;
    return c;
  }
  fail("unknown preset: " + name);
}

std::string to_json(const ScenarioConfig& config) {
  ordered_json j;
  j["master_seed"] = config.master_seed;
  j["rounds"] = config.rounds;
  j["aggregator"] = to_string(config.aggregator);
  j["participants"] = {{"trainers", stakes_to_json(config.trainer_stakes)},
                       {"validators", stakes_to_json(config.validator_stakes)}};
  j["econ"] = {{"r0", config.econ.r0},         {"gamma", config.econ.gamma},
               {"q", config.econ.q},           {"alpha_t", config.econ.alpha_t},
               {"alpha_v", config.econ.alpha_v}, {"lambda_v", config.econ.lambda_v}};
  j["filter"] = {{"kappa", config.filter.kappa},
                 {"floor", config.filter.floor},
                 {"slash_fraction", config.filter.slash_fraction}};
  j["trainer"] = {{"local_epochs", config.trainer.local_epochs},
                  {"batch_size", config.trainer.batch_size},
                  {"learning_rate", config.trainer.learning_rate},
                  {"model", model_to_string(config.trainer.model_kind)},
                  {"hidden", config.trainer.hidden}};
  j["data"] = {{"domains", config.data.domains},
               {"features", config.data.features},
               {"classes", config.data.classes},
               {"samples_per_domain", config.data.samples_per_domain},
               {"noise_dims", config.data.noise_dims},
               {"separation", config.data.separation},
               {"domain_rotation", config.data.domain_rotation},
               {"domain_shift", config.data.domain_shift},
               {"cluster_std", config.data.cluster_std}};
  if (config.attack.has_value()) {
    const AttackConfig& a = *config.attack;
    j["attack"] = {{"attacker_ids", a.attacker_ids},
                   {"trigger_dims", a.backdoor.trigger_dims},
                   {"trigger_value", a.backdoor.trigger_value},
                   {"target_class", a.backdoor.target_class},
                   {"poison_fraction", a.backdoor.poison_fraction},
                   {"boost_factor", a.backdoor.boost_factor}};
  }
  return j.dump(2) + "\n";
}

ScenarioConfig config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"master_seed", "rounds", "aggregator", "participants", "econ", "filter",
                 "trainer", "data", "attack"},
             "config");

  ScenarioConfig c;
  {
    const ordered_json& v = member(j, "master_seed", "config");
    if (!v.is_number_unsigned() && !v.is_number_integer())
      fail("master_seed must be an integer");
    c.master_seed = v.get<std::uint64_t>();
  }
  c.rounds = get_int(j, "rounds", "config");
  {
    const ordered_json& v = member(j, "aggregator", "config");
    if (!v.is_string()) fail("aggregator must be a string");
    c.aggregator = aggregator_from_string(v.get<std::string>());
  }
  const ordered_json& parts = member(j, "participants", "config");
  check_keys(parts, {"trainers", "validators"}, "participants");
  c.trainer_stakes = stakes_from_json(member(parts, "trainers", "participants"),
                                      "participants.trainers");
  c.validator_stakes = stakes_from_json(member(parts, "validators", "participants"),
                                        "participants.validators");

  const ordered_json& e = member(j, "econ", "config");
  check_keys(e, {"r0", "gamma", "q", "alpha_t", "alpha_v", "lambda_v"}, "econ");
  c.econ.r0 = get_double(e, "r0", "econ");
  c.econ.gamma = get_double(e, "gamma", "econ");
  c.econ.q = get_double(e, "q", "econ");
  c.econ.alpha_t = get_double(e, "alpha_t", "econ");
  c.econ.alpha_v = get_double(e, "alpha_v", "econ");
  c.econ.lambda_v = get_double(e, "lambda_v", "econ");

  const ordered_json& f = member(j, "filter", "config");
  check_keys(f, {"kappa", "floor", "slash_fraction"}, "filter");
  c.filter.kappa = get_double(f, "kappa", "filter");
  c.filter.floor = get_double(f, "floor", "filter");
  c.filter.slash_fraction = get_double(f, "slash_fraction", "filter");

  const ordered_json& t = member(j, "trainer", "config");
  check_keys(t, {"local_epochs", "batch_size", "learning_rate", "model", "hidden"}, "trainer");
  c.trainer.local_epochs = get_int(t, "local_epochs", "trainer");
  c.trainer.batch_size = get_int(t, "batch_size", "trainer");
  c.trainer.learning_rate = get_double(t, "learning_rate", "trainer");
  {
    const ordered_json& v = member(t, "model", "trainer");
    if (!v.is_string()) fail("trainer.model must be a string");
    c.trainer.model_kind = model_from_string(v.get<std::string>());
  }
  c.trainer.hidden = get_int(t, "hidden", "trainer");

  const ordered_json& d = member(j, "data", "config");
  check_keys(d, {"domains", "features", "classes", "samples_per_domain", "noise_dims",
                 "separation", "domain_rotation", "domain_shift", "cluster_std"},
             "data");
  c.data.domains = get_int(d, "domains", "data");
  c.data.features = get_int(d, "features", "data");
  c.data.classes = get_int(d, "classes", "data");
  c.data.samples_per_domain = get_int(d, "samples_per_domain", "data");
  c.data.noise_dims = get_int(d, "noise_dims", "data");
  c.data.separation = get_double(d, "separation", "data");
  c.data.domain_rotation = get_double(d, "domain_rotation", "data");
  c.data.domain_shift = get_double(d, "domain_shift", "data");
  c.data.cluster_std = get_double(d, "cluster_std", "data");

  if (j.contains("attack") && !j["attack"].is_null()) {
    const ordered_json& a = j["attack"];
    check_keys(a, {"attacker_ids", "trigger_dims", "trigger_value", "target_class",
                   "poison_fraction", "boost_factor"},
               "attack");
    AttackConfig atk;
    const ordered_json& ids = member(a, "attacker_ids", "attack");
    if (!ids.is_array()) fail("attack.attacker_ids must be an array");
    for (const auto& v : ids) atk.attacker_ids.push_back(v.get<int>());
    const ordered_json& dims = member(a, "trigger_dims", "attack");
    if (!dims.is_array()) fail("attack.trigger_dims must be an array");
    for (const auto& v : dims) atk.backdoor.trigger_dims.push_back(v.get<int>());
    atk.backdoor.trigger_value = get_double(a, "trigger_value", "attack");
    atk.backdoor.target_class = get_int(a, "target_class", "attack");
    atk.backdoor.poison_fraction = get_double(a, "poison_fraction", "attack");
    atk.backdoor.boost_factor = get_double(a, "boost_factor", "attack");
    c.attack = std::move(atk);
  }

  validate(c);
  return c;
}

std::string override_config_json(const std::string& config_text, const std::string& dotted_key,
                                 const std::string& value_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(config_text);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }

  ordered_json value;
  try {
    value = ordered_json::parse(value_text);
  } catch (const nlohmann::json::exception&) {
    value = value_text;  // bare words become string values
  }

  ordered_json* node = &j;
  std::size_t start = 0;
  std::vector<std::string> segments;
  while (start <= dotted_key.size()) {
    const std::size_t dot = dotted_key.find('.', start);
    segments.push_back(dotted_key.substr(start, dot == std::string::npos ? dot : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (segments.empty() || segments.front().empty()) fail("sweep key is empty");

  for (std::size_t s = 0; s + 1 < segments.size(); ++s) {
    const std::string& seg = segments[s];
    if (node->is_array()) {
      if (seg.empty() || seg.find_first_not_of("0123456789") != std::string::npos)
        fail("sweep key segment " + seg + " does not index an array");
      const std::size_t idx = std::stoul(seg);
      if (idx >= node->size()) fail("sweep key segment " + seg + " is out of range");
      node = &(*node)[idx];
    } else if (node->is_object()) {
      if (!node->contains(seg)) fail("sweep key segment " + seg + " not found");
      node = &(*node)[seg];
    } else {
      fail("sweep key segment " + seg + " descends into a scalar");
    }
  }

  const std::string& last = segments.back();
  if (node->is_array()) {
    if (last.empty() || last.find_first_not_of("0123456789") != std::string::npos)
      fail("sweep key segment " + last + " does not index an array");
    const std::size_t idx = std::stoul(last);
    if (idx >= node->size()) fail("sweep key segment " + last + " is out of range");
    (*node)[idx] = value;
  } else if (node->is_object()) {
    if (!node->contains(last)) fail("sweep key segment " + last + " not found");
    (*node)[last] = value;
  } else {
    fail("sweep key segment " + last + " descends into a scalar");
  }
  return j.dump(2) + "\n";
}

}  // namespace flocksim::sim
