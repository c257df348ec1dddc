#pragma once

#include <string>
#include <vector>

#include "flocksim/digest.hpp"
#include "flocksim/economics.hpp"

namespace flocksim::proto {

struct SlashEvent {
  int trainer = 0;
  double amount = 0.0;
};

// Everything needed to audit one round offline: the stake book and score
// matrix as they stood at settlement, what was accepted, what was slashed,
// and the resulting reward statement. Self-contained by design so a reward
// figure can be re-derived from the record alone.
struct RoundRecord {
  int round = 0;
  econ::StakeBook stakes;  // pre-slash, as used for settlement
  std::vector<Digest> submission_digests;
  econ::ScoreMatrix scores;
  std::vector<double> consensus;
  std::vector<int> accepted;        // ascending trainer ids
  std::vector<SlashEvent> slashes;  // ascending trainer ids
  econ::RewardStatement rewards;
  Digest global_digest = kZeroDigest;
};

// Canonical form: UTF-8 JSON, fixed key order, no whitespace, doubles as
// shortest round-trip decimals. Equal records produce equal bytes, so the
// string is safe to hash. Throws std::runtime_error on non-finite values.
std::string to_canonical_json(const RoundRecord& record);

// Inverse of to_canonical_json; accepts any JSON layout with the same keys.
// Throws std::runtime_error on malformed input.
RoundRecord record_from_json(const std::string& json_text);

}  // namespace flocksim::proto
