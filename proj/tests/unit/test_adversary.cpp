#include <gtest/gtest.h>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "flocksim/adversary.hpp"
#include "flocksim/learning.hpp"
#include "flocksim/rng.hpp"

namespace adv = flocksim::adversary;
namespace learn = flocksim::learn;
using flocksim::derive_stream;
using flocksim::RngStream;

namespace {

adv::BackdoorSpec basic_spec() {
  adv::BackdoorSpec spec;
  spec.trigger_dims = {7, 8, 9};
  spec.trigger_value = 4.0;
  spec.target_class = 0;
  spec.poison_fraction = 0.3;
  spec.boost_factor = 3.0;
  return spec;
}

learn::Dataset gaussian_dataset(RngStream& rng, int n, int d, int c) {
  learn::Dataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  for (int r = 0; r < n; ++r) {
    for (int col = 0; col < d; ++col) data.features(r, col) = rng.next_normal();
    data.labels(r) = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(c)));
  }
  return data;
}

learn::TrainerConfig small_trainer() {
  learn::TrainerConfig cfg;
  cfg.local_epochs = 3;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.1;
  cfg.model_kind = learn::ModelKind::kMlp1;
  cfg.hidden = 16;
  return cfg;
}

}  // namespace

TEST(BackdoorValidate, AcceptsDefaultsAndRejectsBadRanges) {
  const adv::BackdoorSpec ok = basic_spec();
  EXPECT_NO_THROW(adv::validate(ok, 10, 4));

  adv::BackdoorSpec s = ok;
  s.trigger_dims = {};
  EXPECT_THROW(adv::validate(s, 10, 4), std::invalid_argument);

  s = ok;
  s.trigger_dims = {7, 10};
  EXPECT_THROW(adv::validate(s, 10, 4), std::invalid_argument);

  s = ok;
  s.trigger_dims = {-1};
  EXPECT_THROW(adv::validate(s, 10, 4), std::invalid_argument);

  s = ok;
  s.trigger_dims = {3, 3};
  EXPECT_THROW(adv::validate(s, 10, 4), std::invalid_argument);

  s = ok;
  s.target_class = 4;
  EXPECT_THROW(adv::validate(s, 10, 4), std::invalid_argument);
  s.target_class = -1;
  EXPECT_THROW(adv::validate(s, 10, 4), std::invalid_argument);

  s = ok;
  s.poison_fraction = -0.1;
  EXPECT_THROW(adv::validate(s, 10, 4), std::invalid_argument);
  s.poison_fraction = 1.1;
  EXPECT_THROW(adv::validate(s, 10, 4), std::invalid_argument);

  s = ok;
  s.boost_factor = -1.0;
  EXPECT_THROW(adv::validate(s, 10, 4), std::invalid_argument);
}

TEST(ApplyTrigger, OverwritesOnlyTriggerColumns) {
  adv::BackdoorSpec spec;
  spec.trigger_dims = {1, 3};
  spec.trigger_value = 4.0;

  Eigen::MatrixXd x(3, 4);
  x << 0.1, 0.2, 0.3, 0.4,
       1.1, 1.2, 1.3, 1.4,
       2.1, 2.2, 2.3, 2.4;
  const Eigen::MatrixXd before = x;
  const Eigen::MatrixXd out = adv::apply_trigger(x, spec);

  EXPECT_TRUE((x.array() == before.array()).all());
  EXPECT_TRUE((out.col(1).array() == 4.0).all());
  EXPECT_TRUE((out.col(3).array() == 4.0).all());
  EXPECT_TRUE((out.col(0).array() == x.col(0).array()).all());
  EXPECT_TRUE((out.col(2).array() == x.col(2).array()).all());

  spec.trigger_dims = {4};
  EXPECT_THROW(adv::apply_trigger(x, spec), std::invalid_argument);
}

TEST(PoisonDataset, RewritesExactlyTheRoundedCount) {
  RngStream data_rng(101);
  const learn::Dataset clean = gaussian_dataset(data_rng, 100, 12, 4);
  adv::BackdoorSpec spec = basic_spec();
  spec.poison_fraction = 0.25;

  RngStream pick = derive_stream(101, "poison");
  const learn::Dataset out = adv::poison_dataset(clean, spec, pick);
  ASSERT_EQ(out.size(), clean.size());

  int changed = 0;
  for (Eigen::Index r = 0; r < out.size(); ++r) {
    const bool same_features =
        (out.features.row(r).array() == clean.features.row(r).array()).all();
    const bool same_label = out.labels(r) == clean.labels(r);
    if (same_features && same_label) continue;
    ++changed;
    EXPECT_EQ(out.labels(r), spec.target_class);
    for (int d : spec.trigger_dims) EXPECT_EQ(out.features(r, d), spec.trigger_value);
    // Non-trigger columns keep their original values.
    for (int col = 0; col < 12; ++col) {
      if (std::find(spec.trigger_dims.begin(), spec.trigger_dims.end(), col) ==
          spec.trigger_dims.end()) {
        EXPECT_EQ(out.features(r, col), clean.features(r, col));
      }
    }
  }
  EXPECT_EQ(changed, 25);
}

TEST(PoisonDataset, HalfSampleRoundsAwayFromZero) {
  RngStream data_rng(102);
  const learn::Dataset clean = gaussian_dataset(data_rng, 10, 12, 4);
  adv::BackdoorSpec spec = basic_spec();
  spec.poison_fraction = 0.25;  // 2.5 rows rounds to 3

  RngStream pick = derive_stream(102, "poison");
  const learn::Dataset out = adv::poison_dataset(clean, spec, pick);
  int changed = 0;
  for (Eigen::Index r = 0; r < out.size(); ++r) {
    if (!(out.features.row(r).array() == clean.features.row(r).array()).all() ||
        out.labels(r) != clean.labels(r))
      ++changed;
  }
  EXPECT_EQ(changed, 3);
}

TEST(PoisonDataset, FractionEndpointsAreIdentityAndTotal) {
  RngStream data_rng(103);
  const learn::Dataset clean = gaussian_dataset(data_rng, 64, 12, 4);

  adv::BackdoorSpec spec = basic_spec();
  spec.poison_fraction = 0.0;
  RngStream a = derive_stream(103, "poison", 0);
  const learn::Dataset untouched = adv::poison_dataset(clean, spec, a);
  EXPECT_TRUE((untouched.features.array() == clean.features.array()).all());
  EXPECT_TRUE((untouched.labels.array() == clean.labels.array()).all());

  spec.poison_fraction = 1.0;
  RngStream b = derive_stream(103, "poison", 1);
  const learn::Dataset total = adv::poison_dataset(clean, spec, b);
  EXPECT_TRUE((total.labels.array() == spec.target_class).all());
  for (int d : spec.trigger_dims)
    EXPECT_TRUE((total.features.col(d).array() == spec.trigger_value).all());
}

TEST(PoisonDataset, DeterministicPerStreamAndRejectsNarrowData) {
  RngStream data_rng(104);
  const learn::Dataset clean = gaussian_dataset(data_rng, 80, 12, 4);
  const adv::BackdoorSpec spec = basic_spec();

  RngStream s1 = derive_stream(104, "poison", 7);
  RngStream s2 = derive_stream(104, "poison", 7);
  const learn::Dataset p1 = adv::poison_dataset(clean, spec, s1);
  const learn::Dataset p2 = adv::poison_dataset(clean, spec, s2);
  EXPECT_TRUE((p1.features.array() == p2.features.array()).all());
  EXPECT_TRUE((p1.labels.array() == p2.labels.array()).all());

  // Max trigger index 9 needs at least 10 feature columns.
  RngStream narrow_rng(105);
  const learn::Dataset narrow = gaussian_dataset(narrow_rng, 20, 9, 4);
  RngStream s3 = derive_stream(104, "poison", 8);
  EXPECT_THROW(adv::poison_dataset(narrow, spec, s3), std::invalid_argument);
}

TEST(Craft, BoostZeroReturnsGlobalVerbatim) {
  RngStream init = derive_stream(110, "init");
  const learn::ParamVector global =
      learn::init_params({learn::ModelKind::kMlp1, 12, 4, 16}, init);
  RngStream data_rng(110);
  const learn::Dataset data = gaussian_dataset(data_rng, 50, 12, 4);
  adv::BackdoorSpec spec = basic_spec();
  spec.boost_factor = 0.0;

  RngStream s = derive_stream(110, "craft");
  const learn::ParamVector out =
      adv::craft_malicious_update(global, data, small_trainer(), spec, s);
  EXPECT_TRUE((out.values.array() == global.values.array()).all());
}

TEST(Craft, BoostOneEqualsPlainTrainingOnPoisonedData) {
  RngStream init = derive_stream(111, "init");
  const learn::ParamVector global =
      learn::init_params({learn::ModelKind::kMlp1, 12, 4, 16}, init);
  RngStream data_rng(111);
  const learn::Dataset data = gaussian_dataset(data_rng, 96, 12, 4);
  RngStream pick = derive_stream(111, "poison");
  adv::BackdoorSpec spec = basic_spec();
  spec.boost_factor = 1.0;
  const learn::Dataset poisoned = adv::poison_dataset(data, spec, pick);

  RngStream craft_stream = derive_stream(111, "train", 42);
  RngStream train_stream = derive_stream(111, "train", 42);
  const learn::ParamVector crafted =
      adv::craft_malicious_update(global, poisoned, small_trainer(), spec, craft_stream);
  const learn::ParamVector trained =
      learn::local_train(global, poisoned, small_trainer(), train_stream);
  EXPECT_TRUE((crafted.values.array() == trained.values.array()).all());
}

TEST(Craft, BoostScalesTheTrainingDelta) {
  RngStream init = derive_stream(112, "init");
  const learn::ParamVector global =
      learn::init_params({learn::ModelKind::kMlp1, 12, 4, 16}, init);
  RngStream data_rng(112);
  const learn::Dataset data = gaussian_dataset(data_rng, 96, 12, 4);
  RngStream pick = derive_stream(112, "poison");
  adv::BackdoorSpec spec = basic_spec();
  spec.boost_factor = 3.0;
  const learn::Dataset poisoned = adv::poison_dataset(data, spec, pick);

  RngStream craft_stream = derive_stream(112, "train", 9);
  RngStream train_stream = derive_stream(112, "train", 9);
  const learn::ParamVector crafted =
      adv::craft_malicious_update(global, poisoned, small_trainer(), spec, craft_stream);
  const learn::ParamVector trained =
      learn::local_train(global, poisoned, small_trainer(), train_stream);

  Eigen::VectorXd expect = global.values;
  expect += 3.0 * (trained.values - global.values);
  EXPECT_TRUE((crafted.values.array() == expect.array()).all());
}

TEST(SuccessRate, MatchesPerRowLoop) {
  RngStream init = derive_stream(120, "init");
  const learn::ParamVector params =
      learn::init_params({learn::ModelKind::kMlp1, 12, 4, 16}, init);
  RngStream data_rng(120);
  const learn::Dataset test = gaussian_dataset(data_rng, 120, 12, 4);
  const adv::BackdoorSpec spec = basic_spec();

  int hits = 0;
  int eligible = 0;
  for (Eigen::Index r = 0; r < test.size(); ++r) {
    if (test.labels(r) == spec.target_class) continue;
    ++eligible;
    learn::Dataset one;
    one.features = test.features.row(r);
    for (int d : spec.trigger_dims) one.features(0, d) = spec.trigger_value;
    one.labels = Eigen::VectorXi::Constant(1, spec.target_class);
    if (learn::evaluate(params, one).accuracy == 1.0) ++hits;
  }
  ASSERT_GT(eligible, 0);
  const double expected = static_cast<double>(hits) / static_cast<double>(eligible);
  EXPECT_DOUBLE_EQ(adv::attack_success_rate(params, test, spec), expected);
}

TEST(SuccessRate, InvariantUnderRowPermutation) {
  RngStream init = derive_stream(121, "init");
  const learn::ParamVector params =
      learn::init_params({learn::ModelKind::kMlp1, 12, 4, 16}, init);
  RngStream data_rng(121);
  const learn::Dataset test = gaussian_dataset(data_rng, 90, 12, 4);
  const adv::BackdoorSpec spec = basic_spec();

  std::vector<Eigen::Index> order(90);
  std::iota(order.begin(), order.end(), 0);
  RngStream shuffler = derive_stream(121, "perm");
  shuffler.shuffle(order);
  learn::Dataset shuffled;
  shuffled.features.resize(test.features.rows(), test.features.cols());
  shuffled.labels.resize(test.labels.size());
  for (Eigen::Index r = 0; r < test.size(); ++r) {
    shuffled.features.row(r) = test.features.row(order[static_cast<std::size_t>(r)]);
    shuffled.labels(r) = test.labels(order[static_cast<std::size_t>(r)]);
  }
  EXPECT_DOUBLE_EQ(adv::attack_success_rate(params, test, spec),
                   adv::attack_success_rate(params, shuffled, spec));
}

TEST(SuccessRate, UndefinedWithoutNonTargetSamples) {
  RngStream init = derive_stream(122, "init");
  const learn::ParamVector params =
      learn::init_params({learn::ModelKind::kLogistic, 12, 4, 0}, init);
  RngStream data_rng(122);
  learn::Dataset test = gaussian_dataset(data_rng, 30, 12, 4);
  const adv::BackdoorSpec spec = basic_spec();
  test.labels.setConstant(spec.target_class);
  EXPECT_THROW(adv::attack_success_rate(params, test, spec), std::invalid_argument);
}

TEST(SuccessRate, SaturatesForConstantClassifiers) {
  const adv::BackdoorSpec spec = basic_spec();
  RngStream data_rng(123);
  const learn::Dataset test = gaussian_dataset(data_rng, 60, 12, 4);

  // A bias-only model votes for a single class on every input.
  learn::ParamVector always = learn::zero_params({learn::ModelKind::kLogistic, 12, 4, 0});
  always.values(12 * 4 + spec.target_class) = 10.0;
  EXPECT_DOUBLE_EQ(adv::attack_success_rate(always, test, spec), 1.0);

  learn::ParamVector never = learn::zero_params({learn::ModelKind::kLogistic, 12, 4, 0});
  never.values(12 * 4 + spec.target_class + 1) = 10.0;
  EXPECT_DOUBLE_EQ(adv::attack_success_rate(never, test, spec), 0.0);
}

TEST(SuccessRate, GrowsWithPoisonFraction) {
  learn::DomainSpec dspec;
  dspec.domains = 1;
  dspec.features = 10;
  dspec.classes = 3;
  dspec.samples_per_domain = 300;
  dspec.noise_dims = 3;
  dspec.separation = 3.0;

  adv::BackdoorSpec spec = basic_spec();
  spec.boost_factor = 1.0;

  const std::vector<double> fractions = {0.0, 0.25, 0.6};
  std::vector<double> mean_asr(fractions.size(), 0.0);
  const int seeds = 10;
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto domains = learn::synth_domains(dspec, static_cast<std::uint64_t>(seed));
    RngStream init = derive_stream(static_cast<std::uint64_t>(seed), "init");
    const learn::ParamVector global =
        learn::init_params({learn::ModelKind::kMlp1, 10, 3, 16}, init);
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      spec.poison_fraction = fractions[f];
      RngStream pick = derive_stream(static_cast<std::uint64_t>(seed), "poison",
                                     static_cast<std::uint64_t>(f));
      const learn::Dataset poisoned = adv::poison_dataset(domains[0].train, spec, pick);
      RngStream train = derive_stream(static_cast<std::uint64_t>(seed), "train",
                                      static_cast<std::uint64_t>(f));
      const learn::ParamVector model =
          adv::craft_malicious_update(global, poisoned, small_trainer(), spec, train);
      mean_asr[f] += adv::attack_success_rate(model, domains[0].test, spec) / seeds;
    }
  }
  // Implantation strengthens with the poisoned share of the shard.
  EXPECT_GE(mean_asr[1], mean_asr[0] - 0.02);
  EXPECT_GE(mean_asr[2], mean_asr[1] - 0.02);
  EXPECT_GE(mean_asr[2], mean_asr[0] + 0.3);
}

TEST(Stealth, PoisonedTrainingKeepsCleanAccuracyClose) {
  // The attack stays quiet on clean data: training on a 30 percent poisoned
  // shard costs only a few points of own-domain accuracy versus honest
  // training from the same start.
  learn::DomainSpec dspec;
  dspec.domains = 4;
  dspec.features = 20;
  dspec.classes = 4;
  dspec.samples_per_domain = 2000;
  dspec.noise_dims = 3;
  dspec.separation = 4.0;
  dspec.domain_rotation = 0.05;
  dspec.domain_shift = 0.15;

  adv::BackdoorSpec spec;
  spec.trigger_dims = {17, 18, 19};
  spec.trigger_value = 4.0;
  spec.target_class = 0;
  spec.poison_fraction = 0.3;
  spec.boost_factor = 1.0;

  learn::TrainerConfig cfg;
  cfg.local_epochs = 3;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.1;
  cfg.model_kind = learn::ModelKind::kMlp1;
  cfg.hidden = 48;

  double total_drop = 0.0;
  for (int seed = 1; seed <= 5; ++seed) {
    SCOPED_TRACE(testing::Message() << "seed " << seed);
    const auto domains = learn::synth_domains(dspec, static_cast<std::uint64_t>(seed));
    RngStream init = derive_stream(static_cast<std::uint64_t>(seed), "init");
    const learn::ParamVector global =
        learn::init_params({learn::ModelKind::kMlp1, 20, 4, 48}, init);

    RngStream honest_rng = derive_stream(static_cast<std::uint64_t>(seed), "honest");
    const learn::ParamVector honest =
        learn::local_train(global, domains[1].train, cfg, honest_rng);

    RngStream pick = derive_stream(static_cast<std::uint64_t>(seed), "poison");
    const learn::Dataset poisoned = adv::poison_dataset(domains[1].train, spec, pick);
    RngStream mal_rng = derive_stream(static_cast<std::uint64_t>(seed), "malicious");
    const learn::ParamVector mal =
        adv::craft_malicious_update(global, poisoned, cfg, spec, mal_rng);

    const double acc_honest = learn::evaluate(honest, domains[1].test).accuracy;
    const double acc_mal = learn::evaluate(mal, domains[1].test).accuracy;
    const double drop = acc_honest - acc_mal;
    total_drop += drop;
    EXPECT_LE(drop, 0.10);
  }
  EXPECT_LE(total_drop / 5.0, 0.05);
}
