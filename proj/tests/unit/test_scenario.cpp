#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "flocksim/scenario.hpp"

namespace sim = flocksim::sim;
namespace learn = flocksim::learn;
using nlohmann::ordered_json;

namespace {

template <typename Fn>
std::string thrown_message(Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected std::invalid_argument";
  return {};
}

}  // namespace

TEST(AggregatorNames, RoundTripThroughStrings) {
  const std::vector<sim::AggregatorKind> kinds = {
      sim::AggregatorKind::kFlock, sim::AggregatorKind::kFedAvg,
      sim::AggregatorKind::kScaffold, sim::AggregatorKind::kFedAdam,
      sim::AggregatorKind::kLocalOnly};
  for (sim::AggregatorKind k : kinds) {
    EXPECT_EQ(sim::aggregator_from_string(sim::to_string(k)), k);
  }
  EXPECT_EQ(sim::to_string(sim::AggregatorKind::kLocalOnly), "local_only");
  EXPECT_THROW(sim::aggregator_from_string("fedprox"), std::invalid_argument);
}

TEST(Presets, AttackComparisonWiring) {
  const sim::ScenarioConfig c = sim::preset("attack-comparison");
  EXPECT_EQ(c.master_seed, 1u);
  EXPECT_EQ(c.rounds, 200);
  EXPECT_EQ(c.aggregator, sim::AggregatorKind::kFlock);
  EXPECT_EQ(c.num_trainers(), 8);
  EXPECT_EQ(c.num_validators(), 4);
  EXPECT_DOUBLE_EQ(c.trainer_stakes[0].own, 10.0);
  EXPECT_DOUBLE_EQ(c.trainer_stakes[0].delegated, 5.0);
  EXPECT_DOUBLE_EQ(c.filter.kappa, 3.0);
  EXPECT_DOUBLE_EQ(c.filter.floor, 0.4);
  EXPECT_DOUBLE_EQ(c.filter.slash_fraction, 0.1);
  EXPECT_EQ(c.trainer.local_epochs, 3);
  EXPECT_EQ(c.trainer.model_kind, learn::ModelKind::kMlp1);
  EXPECT_EQ(c.trainer.hidden, 48);
  EXPECT_EQ(c.data.domains, 4);
  EXPECT_EQ(c.data.features, 20);
  EXPECT_EQ(c.data.classes, 4);
  EXPECT_EQ(c.data.samples_per_domain, 2000);

  ASSERT_TRUE(c.attack.has_value());
  EXPECT_EQ(c.attack->attacker_ids, (std::vector<int>{1}));
  EXPECT_EQ(c.attack->backdoor.trigger_dims, (std::vector<int>{17, 18, 19}));
  EXPECT_EQ(c.attack->backdoor.target_class, 0);
  EXPECT_DOUBLE_EQ(c.attack->backdoor.poison_fraction, 0.3);
  EXPECT_DOUBLE_EQ(c.attack->backdoor.boost_factor, 3.0);
  EXPECT_NO_THROW(sim::validate(c));
}

TEST(Presets, CrossDomainAndLocalVariants) {
  const sim::ScenarioConfig cd = sim::preset("cross-domain");
  EXPECT_EQ(cd.rounds, 40);
  EXPECT_EQ(cd.aggregator, sim::AggregatorKind::kFlock);
  EXPECT_EQ(cd.data.domains, 8);
  EXPECT_FALSE(cd.attack.has_value());
  EXPECT_NO_THROW(sim::validate(cd));

  const sim::ScenarioConfig lf = sim::preset("local-vs-fed");
  EXPECT_EQ(lf.rounds, 40);
  EXPECT_EQ(lf.aggregator, sim::AggregatorKind::kLocalOnly);
  EXPECT_EQ(lf.data.domains, 8);
  EXPECT_EQ(lf.data.domains, cd.data.domains);
  EXPECT_DOUBLE_EQ(lf.data.domain_rotation, cd.data.domain_rotation);
  EXPECT_DOUBLE_EQ(lf.data.domain_shift, cd.data.domain_shift);
  EXPECT_FALSE(lf.attack.has_value());
  EXPECT_NO_THROW(sim::validate(lf));

  EXPECT_THROW(sim::preset("no-such-preset"), std::invalid_argument);
}

TEST(ConfigJson, RoundTripIsByteStable) {
  for (const char* name : {"attack-comparison", "cross-domain", "local-vs-fed"}) {
    SCOPED_TRACE(name);
    const std::string text = sim::to_json(sim::preset(name));
    const sim::ScenarioConfig parsed = sim::config_from_json(text);
    EXPECT_EQ(sim::to_json(parsed), text);
  }
}

TEST(ConfigJson, ParsedPresetKeepsFieldValues) {
  const sim::ScenarioConfig c =
      sim::config_from_json(sim::to_json(sim::preset("attack-comparison")));
  EXPECT_EQ(c.rounds, 200);
  EXPECT_EQ(c.num_trainers(), 8);
  EXPECT_DOUBLE_EQ(c.filter.floor, 0.4);
  EXPECT_DOUBLE_EQ(c.data.separation, 4.0);
  ASSERT_TRUE(c.attack.has_value());
  EXPECT_DOUBLE_EQ(c.attack->backdoor.boost_factor, 3.0);
}

TEST(ConfigJson, RejectsUnknownKeys) {
  ordered_json j = ordered_json::parse(sim::to_json(sim::preset("cross-domain")));
  j["surprise"] = 1;
  const std::string top = thrown_message([&] { sim::config_from_json(j.dump()); });
  EXPECT_NE(top.find("unknown key surprise"), std::string::npos);

  ordered_json k = ordered_json::parse(sim::to_json(sim::preset("cross-domain")));
  k["filter"]["beta"] = 0.5;
  const std::string nested = thrown_message([&] { sim::config_from_json(k.dump()); });
  EXPECT_NE(nested.find("filter has unknown key beta"), std::string::npos);

  ordered_json s = ordered_json::parse(sim::to_json(sim::preset("cross-domain")));
  s["participants"]["trainers"][0]["bonus"] = 1;
  const std::string stake = thrown_message([&] { sim::config_from_json(s.dump()); });
  EXPECT_NE(stake.find("participants.trainers[0] has unknown key bonus"), std::string::npos);
}

TEST(ConfigJson, NamesTheOffendingField) {
  ordered_json j = ordered_json::parse(sim::to_json(sim::preset("cross-domain")));
  j["rounds"] = 0;
  EXPECT_NE(thrown_message([&] { sim::config_from_json(j.dump()); }).find("rounds must be >= 1"),
            std::string::npos);

  j = ordered_json::parse(sim::to_json(sim::preset("cross-domain")));
  j["filter"]["floor"] = 2.0;
  EXPECT_NE(thrown_message([&] { sim::config_from_json(j.dump()); })
                .find("filter.floor must be in [0, 1]"),
            std::string::npos);

  j = ordered_json::parse(sim::to_json(sim::preset("cross-domain")));
  j["econ"]["gamma"] = 0.9;
  EXPECT_NE(thrown_message([&] { sim::config_from_json(j.dump()); }).find("econ."),
            std::string::npos);

  j = ordered_json::parse(sim::to_json(sim::preset("cross-domain")));
  j["trainer"]["hidden"] = 0;
  EXPECT_NE(thrown_message([&] { sim::config_from_json(j.dump()); }).find("trainer.hidden"),
            std::string::npos);

  j = ordered_json::parse(sim::to_json(sim::preset("cross-domain")));
  j["master_seed"] = "one";
  EXPECT_NE(thrown_message([&] { sim::config_from_json(j.dump()); })
                .find("master_seed must be an integer"),
            std::string::npos);

  EXPECT_THROW(sim::config_from_json("{"), std::invalid_argument);
}

TEST(ConfigJson, EnforcesAttackRules) {
  ordered_json j = ordered_json::parse(sim::to_json(sim::preset("attack-comparison")));
  j["attack"]["attacker_ids"] = {8};
  EXPECT_NE(thrown_message([&] { sim::config_from_json(j.dump()); })
                .find("attack.attacker_ids[0] out of range"),
            std::string::npos);

  j = ordered_json::parse(sim::to_json(sim::preset("attack-comparison")));
  j["attack"]["attacker_ids"] = {1, 1};
  EXPECT_NE(thrown_message([&] { sim::config_from_json(j.dump()); }).find("duplicate"),
            std::string::npos);

  j = ordered_json::parse(sim::to_json(sim::preset("attack-comparison")));
  j["attack"]["attacker_ids"] = {2, 1};
  EXPECT_NE(thrown_message([&] { sim::config_from_json(j.dump()); }).find("ascending"),
            std::string::npos);

  j = ordered_json::parse(sim::to_json(sim::preset("attack-comparison")));
  j["aggregator"] = "local_only";
  EXPECT_NE(thrown_message([&] { sim::config_from_json(j.dump()); })
                .find("attack is not supported with the local_only aggregator"),
            std::string::npos);

  // Explicit null reads as "no attack".
  j = ordered_json::parse(sim::to_json(sim::preset("attack-comparison")));
  j["attack"] = nullptr;
  const sim::ScenarioConfig c = sim::config_from_json(j.dump());
  EXPECT_FALSE(c.attack.has_value());
}

TEST(ConfigValidate, ChecksStructLevelInvariants) {
  sim::ScenarioConfig c = sim::preset("cross-domain");
  c.rounds = 0;
  EXPECT_THROW(sim::validate(c), std::invalid_argument);

  c = sim::preset("cross-domain");
  c.validator_stakes.clear();
  EXPECT_NE(thrown_message([&] { sim::validate(c); })
                .find("participants.validators must be nonempty"),
            std::string::npos);

  // Isolated training needs no validators.
  c = sim::preset("local-vs-fed");
  c.validator_stakes.clear();
  EXPECT_NO_THROW(sim::validate(c));

  c = sim::preset("cross-domain");
  c.trainer_stakes[0].own = -1.0;
  EXPECT_NE(thrown_message([&] { sim::validate(c); })
                .find("participants.trainers[0] stake must be >= 0"),
            std::string::npos);

  c = sim::preset("attack-comparison");
  c.attack->backdoor.trigger_dims = {17, 25};
  EXPECT_NE(thrown_message([&] { sim::validate(c); }).find("trigger_dims"),
            std::string::npos);
}

TEST(OverrideJson, ReplacesDottedPaths) {
  const std::string base = sim::to_json(sim::preset("attack-comparison"));

  const std::string floor_text = sim::override_config_json(base, "filter.floor", "0.25");
  EXPECT_DOUBLE_EQ(sim::config_from_json(floor_text).filter.floor, 0.25);

  // Bare words parse as strings.
  const std::string agg_text = sim::override_config_json(
      sim::to_json(sim::preset("cross-domain")), "aggregator", "fedavg");
  EXPECT_EQ(sim::config_from_json(agg_text).aggregator, sim::AggregatorKind::kFedAvg);

  const std::string stake_text =
      sim::override_config_json(base, "participants.trainers.0.own", "42");
  EXPECT_DOUBLE_EQ(sim::config_from_json(stake_text).trainer_stakes[0].own, 42.0);

  const std::string boost_text =
      sim::override_config_json(base, "attack.boost_factor", "1.5");
  EXPECT_DOUBLE_EQ(sim::config_from_json(boost_text).attack->backdoor.boost_factor, 1.5);

  const std::string seed_text = sim::override_config_json(base, "master_seed", "7");
  EXPECT_EQ(sim::config_from_json(seed_text).master_seed, 7u);
}

TEST(OverrideJson, RejectsBadPaths) {
  const std::string base = sim::to_json(sim::preset("cross-domain"));
  EXPECT_THROW(sim::override_config_json(base, "", "1"), std::invalid_argument);
  EXPECT_NE(thrown_message([&] { sim::override_config_json(base, "nope", "1"); })
                .find("not found"),
            std::string::npos);
  EXPECT_NE(thrown_message([&] { sim::override_config_json(base, "filter.nope", "1"); })
                .find("not found"),
            std::string::npos);
  EXPECT_NE(thrown_message(
                [&] { sim::override_config_json(base, "participants.trainers.abc", "1"); })
                .find("does not index an array"),
            std::string::npos);
  EXPECT_NE(thrown_message(
                [&] { sim::override_config_json(base, "participants.trainers.99.own", "1"); })
                .find("out of range"),
            std::string::npos);
  EXPECT_NE(thrown_message([&] { sim::override_config_json(base, "rounds.deeper", "1"); })
                .find("descends into a scalar"),
            std::string::npos);
  EXPECT_THROW(sim::override_config_json("{", "rounds", "1"), std::invalid_argument);

  // The override itself does not validate; a bad value surfaces on parse.
  const std::string bad = sim::override_config_json(base, "rounds", "0");
  EXPECT_THROW(sim::config_from_json(bad), std::invalid_argument);
}
