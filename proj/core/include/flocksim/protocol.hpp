#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "flocksim/adversary.hpp"
#include "flocksim/digest.hpp"
#include "flocksim/economics.hpp"
#include "flocksim/learning.hpp"
#include "flocksim/ledger.hpp"
#include "flocksim/record.hpp"

namespace flocksim::proto {

struct Submission {
  int trainer_id = 0;
  int round = 0;
  learn::ParamVector params;
  Digest payload_digest = kZeroDigest;
};

// Rejection threshold: consensus below max(floor, median - kappa * MAD).
// slash_fraction is the share of a rejected trainer's stake burned per round.
struct FilterPolicy {
  double kappa = 3.0;
  double floor = 0.0;
  double slash_fraction = 0.1;
};

void validate(const FilterPolicy& policy);  // throws std::invalid_argument

// Parameter bytes are the 64-bit little-endian floats in index order.
Digest param_digest(const learn::ParamVector& params);

Submission make_submission(int trainer_id, int round, learn::ParamVector params);

// Entry (j, i) = accuracy of submission i on validator j's validation set.
// Every validator scores every submission. Throws on an empty validation set.
econ::ScoreMatrix score_submissions(std::span<const Submission> submissions,
                                    std::span<const learn::Dataset> validation_sets);

struct FilterResult {
  std::vector<int> accepted;  // ascending
  std::vector<int> rejected;  // ascending
};

// Applies the robust threshold. If nothing would survive, the single
// highest-scoring submission is accepted anyway so aggregation always has
// input; ties go to the lower id.
FilterResult filter_submissions(std::span<const double> consensus,
                                const FilterPolicy& policy);

// Scales each rejected trainer's own and delegated stake by
// (1 - slash_fraction). Validators are untouched. Events are returned in
// ascending trainer order.
std::pair<econ::StakeBook, std::vector<SlashEvent>> slash(const econ::StakeBook& stakes,
                                                          std::span<const int> rejected,
                                                          const FilterPolicy& policy);

// New global = sum over accepted of w_i * params_i with w_i proportional to
// total_stake_i * consensus_i, normalized to 1. Falls back to a uniform
// average over the accepted set when every product is zero, so the result is
// always a convex combination. Throws when accepted is empty.
learn::ParamVector aggregate_accepted(const learn::ParamVector& global,
                                      std::span<const Submission> submissions,
                                      std::span<const int> accepted,
                                      std::span<const double> consensus,
                                      const econ::StakeBook& stakes);

// Mutable state carried between rounds. The chain is the authoritative
// history; stakes reflect all slashes so far.
struct ProtocolState {
  learn::ParamVector global;
  econ::StakeBook stakes;
  ledger::Chain chain;
  int round = 0;
};

// Per-round wiring. trainer_data holds each trainer's training set; for
// attackers the harness supplies the poisoned copy. Attackers submit
// boosted updates via the adversary module. Spans must outlive the call.
struct RoundInputs {
  std::uint64_t master_seed = 0;
  std::span<const learn::Dataset> trainer_data;
  std::span<const learn::Dataset> validator_data;
  learn::TrainerConfig trainer;
  econ::EconParams econ;
  FilterPolicy filter;
  const adversary::BackdoorSpec* attack = nullptr;
  std::span<const int> attacker_ids;  // ascending; empty when attack == nullptr
};

// One full round: train, score, consensus, filter, settle on pre-slash
// stakes, slash, aggregate, append to the ledger. Training and scoring may
// run on multiple workers; results depend only on (inputs, state), never on
// the worker count. Client randomness comes from streams derived from
// (master_seed, trainer id, round index).
RoundRecord run_round(ProtocolState& state, const RoundInputs& inputs);

}  // namespace flocksim::proto
