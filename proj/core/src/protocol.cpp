#include "flocksim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "flocksim/parallel.hpp"
#include "flocksim/rng.hpp"

namespace flocksim::proto {

namespace {

double median_sorted(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void validate(const FilterPolicy& policy) {
  if (policy.kappa < 0.0) throw std::invalid_argument("filter.kappa must be >= 0");
  if (policy.floor < 0.0 || policy.floor > 1.0)
    throw std::invalid_argument("filter.floor must be in [0, 1]");
  if (policy.slash_fraction < 0.0 || policy.slash_fraction > 1.0)
    throw std::invalid_argument("filter.slash_fraction must be in [0, 1]");
}

Digest param_digest(const learn::ParamVector& params) {
  const std::vector<std::uint8_t> bytes = le_bytes(
      std::span<const double>(params.values.data(),
                              static_cast<std::size_t>(params.values.size())));
  return sha256(bytes);
}

Submission make_submission(int trainer_id, int round, learn::ParamVector params) {
  Submission s;
  s.trainer_id = trainer_id;
  s.round = round;
  s.payload_digest = param_digest(params);
  s.params = std::move(params);
  return s;
}

econ::ScoreMatrix score_submissions(std::span<const Submission> submissions,
                                    std::span<const learn::Dataset> validation_sets) {
  if (submissions.empty()) throw std::invalid_argument("no submissions to score");
  if (validation_sets.empty()) throw std::invalid_argument("no validators");
  for (const learn::Dataset& d : validation_sets) {
    if (d.size() == 0) throw std::invalid_argument("empty validation set");
  }

  Eigen::MatrixXd m(static_cast<Eigen::Index>(validation_sets.size()),
                    static_cast<Eigen::Index>(submissions.size()));
  parallel_for_index(validation_sets.size(), [&](std::size_t j) {
    for (std::size_t i = 0; i < submissions.size(); ++i) {
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
          learn::evaluate(submissions[i].params, validation_sets[j]).accuracy;
    }
  });
  return econ::ScoreMatrix(std::move(m));
}

FilterResult filter_submissions(std::span<const double> consensus,
                                const FilterPolicy& policy) {
  validate(policy);
  if (consensus.empty()) throw std::invalid_argument("filter: no consensus scores");

  std::vector<double> tmp(consensus.begin(), consensus.end());
  const double med = median_sorted(tmp);
  for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = std::abs(consensus[i] - med);
  const double mad = median_sorted(tmp);
  const double threshold = std::max(policy.floor, med - policy.kappa * mad);

  FilterResult result;
  for (std::size_t i = 0; i < consensus.size(); ++i) {
    if (consensus[i] < threshold) {
      result.rejected.push_back(static_cast<int>(i));
    } else {
      result.accepted.push_back(static_cast<int>(i));
    }
  }
  if (result.accepted.empty()) {
    // Last resort: keep the single best submission so the round can close.
    std::size_t best = 0;
    for (std::size_t i = 1; i < consensus.size(); ++i) {
      if (consensus[i] > consensus[best]) best = i;
    }
    result.accepted.push_back(static_cast<int>(best));
    result.rejected.erase(
        std::find(result.rejected.begin(), result.rejected.end(), static_cast<int>(best)));
  }
  return result;
}

std::pair<econ::StakeBook, std::vector<SlashEvent>> slash(const econ::StakeBook& stakes,
                                                          std::span<const int> rejected,
                                                          const FilterPolicy& policy) {
  validate(policy);
  econ::StakeBook next = stakes;
  std::vector<SlashEvent> events;
  events.reserve(rejected.size());
  for (int id : rejected) {
    if (id < 0 || static_cast<std::size_t>(id) >= next.trainers.size())
      throw std::invalid_argument("slash: trainer id out of range");
    econ::Stake& s = next.trainers[static_cast<std::size_t>(id)];
    const double amount = policy.slash_fraction * (s.own + s.delegated);
    s.own *= 1.0 - policy.slash_fraction;
    s.delegated *= 1.0 - policy.slash_fraction;
    events.push_back({id, amount});
  }
  std::sort(events.begin(), events.end(),
            [](const SlashEvent& a, const SlashEvent& b) { return a.trainer < b.trainer; });
  return {std::move(next), std::move(events)};
}

learn::ParamVector aggregate_accepted(const learn::ParamVector& global,
                                      std::span<const Submission> submissions,
                                      std::span<const int> accepted,
                                      std::span<const double> consensus,
                                      const econ::StakeBook& stakes) {
  if (accepted.empty()) throw std::invalid_argument("aggregate: accepted set is empty");
  if (accepted.size() == 1) {
    return submissions[static_cast<std::size_t>(accepted[0])].params;
  }
  const Eigen::VectorXd& first =
      submissions[static_cast<std::size_t>(accepted[0])].params.values;
  const bool all_identical = std::all_of(accepted.begin(), accepted.end(), [&](int id) {
    const Eigen::VectorXd& v = submissions[static_cast<std::size_t>(id)].params.values;
    return v.size() == first.size() && (v.array() == first.array()).all();
  });
  if (all_identical) {
    // A convex combination of equal vectors is that vector; returning it
    // verbatim keeps no-op rounds bit-exact.
    return submissions[static_cast<std::size_t>(accepted[0])].params;
  }

  std::vector<double> weights;
  weights.reserve(accepted.size());
  double total = 0.0;
  for (int id : accepted) {
    if (id < 0 || static_cast<std::size_t>(id) >= submissions.size())
      throw std::invalid_argument("aggregate: accepted id out of range");
    const double w = stakes.trainers[static_cast<std::size_t>(id)].total() *
                     consensus[static_cast<std::size_t>(id)];
    if (w < 0.0) throw std::invalid_argument("aggregate: negative weight");
    weights.push_back(w);
    total += w;
  }
  if (!(total > 0.0)) {
    // All stake-score products vanished; an unweighted mean keeps the update
    // inside the convex hull of the accepted submissions.
    std::fill(weights.begin(), weights.end(), 1.0);
    total = static_cast<double>(weights.size());
  }

  learn::ParamVector out = learn::zero_params(global.shape);
  for (std::size_t k = 0; k < accepted.size(); ++k) {
    const Submission& s = submissions[static_cast<std::size_t>(accepted[k])];
    if (!s.params.compatible_with(global))
      throw std::invalid_argument("aggregate: submission shape mismatch");
    out.values += (weights[k] / total) * s.params.values;
  }
  return out;
}

RoundRecord run_round(ProtocolState& state, const RoundInputs& inputs) {
  validate(inputs.filter);
  econ::validate(inputs.econ);
  const std::size_t nt = inputs.trainer_data.size();
  if (nt == 0) throw std::invalid_argument("run_round: no trainers");
  if (state.stakes.trainers.size() != nt)
    throw std::invalid_argument("run_round: stake book does not match trainer count");
  if (state.stakes.validators.size() != inputs.validator_data.size())
    throw std::invalid_argument("run_round: stake book does not match validator count");
  if (inputs.attack != nullptr) {
    for (int id : inputs.attacker_ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= nt)
        throw std::invalid_argument("run_round: attacker id out of range");
    }
  }

  // Local training, one independent stream per (trainer, round).
  std::vector<Submission> submissions(nt);
  parallel_for_index(nt, [&](std::size_t i) {
    RngStream stream =
        derive_stream(inputs.master_seed, "train", static_cast<std::uint64_t>(i),
                      static_cast<std::uint64_t>(state.round));
    const bool is_attacker =
        inputs.attack != nullptr &&
        std::binary_search(inputs.attacker_ids.begin(), inputs.attacker_ids.end(),
                           static_cast<int>(i));
    learn::ParamVector params =
        is_attacker
            ? adversary::craft_malicious_update(state.global, inputs.trainer_data[i],
                                                inputs.trainer, *inputs.attack, stream)
            : learn::local_train(state.global, inputs.trainer_data[i], inputs.trainer,
                                 stream);
    submissions[i] = make_submission(static_cast<int>(i), state.round, std::move(params));
  });

  const econ::ScoreMatrix scores = score_submissions(submissions, inputs.validator_data);
  const std::vector<double> consensus =
      econ::consensus_scores(scores, state.stakes.validators);
  const FilterResult filtered = filter_submissions(consensus, inputs.filter);

  // Settlement sees the stakes that were in force during the round; the
  // slash takes effect from the next round's book.
  const econ::RewardStatement statement = econ::settle(inputs.econ, state.stakes, scores);
  auto [next_stakes, slash_events] = slash(state.stakes, filtered.rejected, inputs.filter);
  learn::ParamVector next_global =
      aggregate_accepted(state.global, submissions, filtered.accepted, consensus,
                         state.stakes);

  RoundRecord record;
  record.round = state.round;
  record.stakes = state.stakes;
  record.submission_digests.reserve(nt);
  for (const Submission& s : submissions) record.submission_digests.push_back(s.payload_digest);
  record.scores = scores;
  record.consensus = consensus;
  record.accepted = filtered.accepted;
  record.slashes = std::move(slash_events);
  record.rewards = statement;
  record.global_digest = param_digest(next_global);

  state.chain.append(record);
  state.global = std::move(next_global);
  state.stakes = std::move(next_stakes);
  state.round += 1;
  return record;
}

}  // namespace flocksim::proto
