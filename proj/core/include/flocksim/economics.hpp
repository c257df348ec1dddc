#pragma once

#include <Eigen/Core>

#include <span>
#include <utility>
#include <vector>

namespace flocksim::econ {

// A participant's economic position: its own stake, stake delegated to it,
// and the commission rate it keeps on delegated earnings.
struct Stake {
  double own = 0.0;
  double delegated = 0.0;
  double commission = 0.0;  // in [0, 1]

  double total() const { return own + delegated; }
};

// Trainer and validator stakes for one task, in participant-index order.
struct StakeBook {
  std::vector<Stake> trainers;
  std::vector<Stake> validators;
};

// Constants of the reward mechanism.
//   r0       total reward issued per task
//   gamma    flat-vs-stake-proportional pool split, in [0, 0.5]
//   q        common ratio of the geometric rank weights, in (0, 1)
//   alpha_t  trainer stake exponent
//   alpha_v  validator stake exponent
//   lambda_v sensitivity of validator reward to judgment error
struct EconParams {
  double r0 = 100.0;
  double gamma = 0.3;
  double q = 0.7;
  double alpha_t = 1.0;
  double alpha_v = 1.0;
  double lambda_v = 5.0;
};

void validate(const EconParams& p);  // throws std::invalid_argument

// m x n matrix of validator judgments; entry (j, i) is validator j's score
// of submission i. Entries are clamped to [0, 1] on construction.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  explicit ScoreMatrix(Eigen::MatrixXd entries);

  const Eigen::MatrixXd& entries() const { return entries_; }
  Eigen::Index num_validators() const { return entries_.rows(); }
  Eigen::Index num_trainers() const { return entries_.cols(); }

 private:
  Eigen::MatrixXd entries_;
};

// Full settlement of one task: pools, ranks, shares and the operator /
// delegator split for every participant.
struct RewardStatement {
  double pool_train = 0.0;
  double pool_val = 0.0;
  std::vector<int> trainer_ranks;  // ranks[i] in 1..n, 1 = best
  std::vector<double> trainer_shares;
  std::vector<double> trainer_operator_rewards;
  std::vector<double> trainer_delegator_rewards;
  std::vector<double> validator_shares;
  std::vector<double> validator_operator_rewards;
  std::vector<double> validator_delegator_rewards;
  std::vector<double> consensus;
};

// Stake-weighted consensus over validator judgments: component i is
// sum_j r_ji * s_j / sum_j s_j with s_j the validator's total stake.
std::vector<double> consensus_scores(const ScoreMatrix& scores,
                                     std::span<const Stake> validators);

// Splits r0 between the trainer and validator pools; gamma = 0.5 is a flat
// half/half split, gamma = 0 is fully stake-proportional. The two pools sum
// to r0 by construction.
std::pair<double, double> split_reward_pools(const EconParams& params,
                                             const StakeBook& stakes);

// Normalized geometric rank weights g_k = (1-q)/(1-q^n) * q^(k-1), k = 1..n.
std::vector<double> rank_weights(int n, double q);

// Ranks trainers by consensus score, best first. Ties go to the higher total
// stake, then to the lower index, so settlement is replayable. Returns
// ranks[i] in 1..n for trainer i.
std::vector<int> rank_trainers(std::span<const double> consensus,
                               std::span<const Stake> trainers);

// Share_i = g_rank(i) * t_i^alpha_t / sum_k g_rank(k) * t_k^alpha_t.
// 0^0 := 1, 0^a := 0 for a > 0; throws if every numerator is zero.
std::vector<double> trainer_shares(std::span<const int> ranks,
                                   std::span<const Stake> trainers,
                                   const EconParams& params);

// Operator keeps gross * (commission + (1-commission) * own/total); the
// remainder goes to delegators in aggregate. With no stake at all the
// operator keeps everything.
std::pair<double, double> split_with_commission(double gross, const Stake& stake);

// Entry (j, i) = |consensus_i - r_ji|.
Eigen::MatrixXd validator_distances(const ScoreMatrix& scores,
                                    std::span<const double> consensus);

// Modified softmax per submission column:
// f(j, i) = exp(-lambda_v * d_ji) * s_j^alpha_v / sum_l exp(-lambda_v * d_li) * s_l^alpha_v.
// Every column sums to 1.
Eigen::MatrixXd validator_shares(const Eigen::MatrixXd& distances,
                                 std::span<const Stake> validators,
                                 const EconParams& params);

// End-to-end settlement. Trainer i grosses Share_i * pool_train; validator j
// grosses pool_val * sum_i f(j,i) / n, so each pool is distributed exactly
// once. Commission splits are applied per participant.
RewardStatement settle(const EconParams& params, const StakeBook& stakes,
                       const ScoreMatrix& scores);

}  // namespace flocksim::econ
