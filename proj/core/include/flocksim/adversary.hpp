#pragma once

#include <cstdint>
#include <vector>

#include "flocksim/learning.hpp"
#include "flocksim/rng.hpp"

namespace flocksim::adversary {

// A feature-space backdoor: samples carrying the trigger pattern are steered
// toward target_class. Defaults implant reliably under plain averaging within
// tens of rounds while keeping clean accuracy largely intact.
struct BackdoorSpec {
  std::vector<int> trigger_dims;   // distinct feature indices, nonempty
  double trigger_value = 4.0;      // written into every trigger dim
  int target_class = 0;
  double poison_fraction = 0.3;    // in [0, 1]
  double boost_factor = 3.0;       // >= 0; scales the submitted model delta
};

// Throws std::invalid_argument when the spec violates its ranges or indexes
// outside a d-feature, c-class problem.
void validate(const BackdoorSpec& spec, int num_features, int num_classes);

// Returns a copy of features with the trigger written into every row.
Eigen::MatrixXd apply_trigger(const Eigen::MatrixXd& features, const BackdoorSpec& spec);

// Copies the dataset, then rewrites round(poison_fraction * N) rows chosen
// without replacement from the stream: trigger dims set, label overwritten to
// target_class. Remaining rows are untouched.
learn::Dataset poison_dataset(const learn::Dataset& data, const BackdoorSpec& spec,
                              RngStream& stream);

// Local training on the poisoned data followed by delta scaling:
// global + boost_factor * (trained - global). boost 1 is plain poisoned
// training; boost 0 returns global verbatim.
learn::ParamVector craft_malicious_update(const learn::ParamVector& global,
                                          const learn::Dataset& poisoned_data,
                                          const learn::TrainerConfig& config,
                                          const BackdoorSpec& spec, RngStream& stream);

// Fraction of triggered test samples (true label != target_class) that the
// model classifies as target_class. Throws "undefined ASR" when every test
// label equals the target.
double attack_success_rate(const learn::ParamVector& model, const learn::Dataset& clean_test,
                           const BackdoorSpec& spec);

}  // namespace flocksim::adversary
