#include "flocksim/economics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flocksim::econ {

namespace {

// 0^0 := 1 so alpha = 0 ignores stake entirely; 0^a := 0 for a > 0.
double stake_pow(double base, double exponent) {
  if (exponent == 0.0) return 1.0;
  if (base == 0.0) return 0.0;
  return std::pow(base, exponent);
}

}  // namespace

void validate(const EconParams& p) {
  if (!(p.r0 > 0.0)) throw std::invalid_argument("econ.r0 must be > 0");
  if (!(p.gamma >= 0.0 && p.gamma <= 0.5))
    throw std::invalid_argument("econ.gamma must be in [0, 0.5]");
  if (!(p.q > 0.0 && p.q < 1.0))
    throw std::invalid_argument("econ.q must be in (0, 1)");
  if (!(p.alpha_t >= 0.0)) throw std::invalid_argument("econ.alpha_t must be >= 0");
  if (!(p.alpha_v >= 0.0)) throw std::invalid_argument("econ.alpha_v must be >= 0");
  if (!(p.lambda_v >= 0.0)) throw std::invalid_argument("econ.lambda_v must be >= 0");
}

ScoreMatrix::ScoreMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  entries_ = entries_.cwiseMax(0.0).cwiseMin(1.0);
}

std::vector<double> consensus_scores(const ScoreMatrix& scores,
                                     std::span<const Stake> validators) {
  const Eigen::Index m = scores.num_validators();
  const Eigen::Index n = scores.num_trainers();
  if (m != static_cast<Eigen::Index>(validators.size()))
    throw std::invalid_argument("dimension mismatch: score rows vs validators");

  double total = 0.0;
  for (const Stake& s : validators) total += s.total();
  if (!(total > 0.0)) throw std::invalid_argument("degenerate stake");

  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      acc += scores.entries()(j, i) * validators[static_cast<std::size_t>(j)].total();
    }
    out[static_cast<std::size_t>(i)] = acc / total;
  }
  return out;
}

std::pair<double, double> split_reward_pools(const EconParams& params,
                                             const StakeBook& stakes) {
  double sum_t = 0.0;
  for (const Stake& s : stakes.trainers) sum_t += s.total();
  double sum_s = 0.0;
  for (const Stake& s : stakes.validators) sum_s += s.total();
  const double denom = sum_t + sum_s;
  if (!(denom > 0.0)) throw std::invalid_argument("degenerate stake");

  const double g = params.gamma;
  const double pool_train = params.r0 * (g + (1.0 - 2.0 * g) * (sum_t / denom));
  const double pool_val = params.r0 * (g + (1.0 - 2.0 * g) * (sum_s / denom));
  return {pool_train, pool_val};
}

std::vector<double> rank_weights(int n, double q) {
  if (n < 1) throw std::invalid_argument("rank_weights: n must be >= 1");
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("rank_weights: q must be in (0, 1)");
  const double scale = (1.0 - q) / (1.0 - std::pow(q, n));
  std::vector<double> g(static_cast<std::size_t>(n));
  double qk = 1.0;
  for (int k = 0; k < n; ++k) {
    g[static_cast<std::size_t>(k)] = scale * qk;
    qk *= q;
  }
  return g;
}

std::vector<int> rank_trainers(std::span<const double> consensus,
                               std::span<const Stake> trainers) {
  const std::size_t n = consensus.size();
  if (n != trainers.size())
    throw std::invalid_argument("dimension mismatch: consensus vs trainers");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (consensus[a] != consensus[b]) return consensus[a] > consensus[b];
    const double ta = trainers[a].total();
    const double tb = trainers[b].total();
    if (ta != tb) return ta > tb;
    return a < b;
  });

  std::vector<int> ranks(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) {
    ranks[order[pos]] = static_cast<int>(pos) + 1;
  }
  return ranks;
}

std::vector<double> trainer_shares(std::span<const int> ranks,
                                   std::span<const Stake> trainers,
                                   const EconParams& params) {
  const std::size_t n = ranks.size();
  if (n != trainers.size())
    throw std::invalid_argument("dimension mismatch: ranks vs trainers");
  const std::vector<double> g = rank_weights(static_cast<int>(n), params.q);

  std::vector<double> numer(n);
  double denom = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int rank = ranks[i];
    if (rank < 1 || rank > static_cast<int>(n))
      throw std::invalid_argument("trainer_shares: rank out of range");
    numer[i] = g[static_cast<std::size_t>(rank - 1)] *
               stake_pow(trainers[i].total(), params.alpha_t);
    denom += numer[i];
  }
  if (!(denom > 0.0)) throw std::invalid_argument("degenerate stake");

  for (double& v : numer) v /= denom;
  return numer;
}

std::pair<double, double> split_with_commission(double gross, const Stake& stake) {
  if (gross < 0.0) throw std::invalid_argument("split_with_commission: gross < 0");
  const double total = stake.total();
  if (total <= 0.0) return {gross, 0.0};  // nobody delegated; operator keeps all
  const double operator_frac =
      stake.commission + (1.0 - stake.commission) * (stake.own / total);
  const double operator_part = gross * operator_frac;
  return {operator_part, gross - operator_part};
}

Eigen::MatrixXd validator_distances(const ScoreMatrix& scores,
                                    std::span<const double> consensus) {
  const Eigen::Index m = scores.num_validators();
  const Eigen::Index n = scores.num_trainers();
  if (n != static_cast<Eigen::Index>(consensus.size()))
    throw std::invalid_argument("dimension mismatch: score cols vs consensus");

  Eigen::MatrixXd d(m, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      d(j, i) = std::abs(consensus[static_cast<std::size_t>(i)] - scores.entries()(j, i));
    }
  }
  return d;
}

Eigen::MatrixXd validator_shares(const Eigen::MatrixXd& distances,
                                 std::span<const Stake> validators,
                                 const EconParams& params) {
  const Eigen::Index m = distances.rows();
  const Eigen::Index n = distances.cols();
  if (m != static_cast<Eigen::Index>(validators.size()))
    throw std::invalid_argument("dimension mismatch: distance rows vs validators");

  Eigen::MatrixXd f(m, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double col_sum = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double w =
          std::exp(-params.lambda_v * distances(j, i)) *
          stake_pow(validators[static_cast<std::size_t>(j)].total(), params.alpha_v);
      f(j, i) = w;
      col_sum += w;
    }
    if (!(col_sum > 0.0)) throw std::invalid_argument("degenerate softmax");
    f.col(i) /= col_sum;
  }
  return f;
}

RewardStatement settle(const EconParams& params, const StakeBook& stakes,
                       const ScoreMatrix& scores) {
  validate(params);
  const Eigen::Index m = scores.num_validators();
  const Eigen::Index n = scores.num_trainers();
  if (m != static_cast<Eigen::Index>(stakes.validators.size()) ||
      n != static_cast<Eigen::Index>(stakes.trainers.size()))
    throw std::invalid_argument("dimension mismatch: scores vs stake book");

  RewardStatement st;
  st.consensus = consensus_scores(scores, stakes.validators);
  std::tie(st.pool_train, st.pool_val) = split_reward_pools(params, stakes);
  st.trainer_ranks = rank_trainers(st.consensus, stakes.trainers);
  st.trainer_shares = trainer_shares(st.trainer_ranks, stakes.trainers, params);

  st.trainer_operator_rewards.resize(static_cast<std::size_t>(n));
  st.trainer_delegator_rewards.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    const double gross = st.trainer_shares[i] * st.pool_train;
    std::tie(st.trainer_operator_rewards[i], st.trainer_delegator_rewards[i]) =
        split_with_commission(gross, stakes.trainers[i]);
  }

  const Eigen::MatrixXd dist = validator_distances(scores, st.consensus);
  const Eigen::MatrixXd f = validator_shares(dist, stakes.validators, params);

  st.validator_shares.resize(static_cast<std::size_t>(m));
  st.validator_operator_rewards.resize(static_cast<std::size_t>(m));
  st.validator_delegator_rewards.resize(static_cast<std::size_t>(m));
  for (std::size_t j = 0; j < static_cast<std::size_t>(m); ++j) {
    // Each column of f sums to 1, so dividing the summed shares by n makes
    // the validator shares a partition of unity and the pool is paid out
    // exactly once.
    st.validator_shares[j] =
        f.row(static_cast<Eigen::Index>(j)).sum() / static_cast<double>(n);
    const double gross = st.pool_val * st.validator_shares[j];
    std::tie(st.validator_operator_rewards[j], st.validator_delegator_rewards[j]) =
        split_with_commission(gross, stakes.validators[j]);
  }
  return st;
}

}  // namespace flocksim::econ
