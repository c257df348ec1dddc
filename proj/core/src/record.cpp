#include "flocksim/record.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "flocksim/util.hpp"

namespace flocksim::proto {

namespace {

void append_double(std::string& out, double v) {
  if (!std::isfinite(v)) throw std::runtime_error("record serialization: non-finite value");
  out += format_double(v);
}

void append_doubles(std::string& out, std::span<const double> values) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    append_double(out, values[i]);
  }
  out += ']';
}

void append_ints(std::string& out, std::span<const int> values) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(values[i]);
  }
  out += ']';
}

void append_stakes(std::string& out, std::span<const econ::Stake> stakes) {
  out += '[';
  for (std::size_t i = 0; i < stakes.size(); ++i) {
    if (i > 0) out += ',';
    out += "{\"own\":";
    append_double(out, stakes[i].own);
    out += ",\"delegated\":";
    append_double(out, stakes[i].delegated);
    out += ",\"commission\":";
    append_double(out, stakes[i].commission);
    out += '}';
  }
  out += ']';
}

std::vector<double> doubles_from(const nlohmann::json& j) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(v.get<double>());
  return out;
}

std::vector<int> ints_from(const nlohmann::json& j) {
  std::vector<int> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(v.get<int>());
  return out;
}

std::vector<econ::Stake> stakes_from(const nlohmann::json& j) {
  std::vector<econ::Stake> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    econ::Stake s;
    s.own = v.at("own").get<double>();
    s.delegated = v.at("delegated").get<double>();
    s.commission = v.at("commission").get<double>();
    out.push_back(s);
  }
  return out;
}

}  // namespace

std::string to_canonical_json(const RoundRecord& record) {
  std::string out;
  out.reserve(1024);
  out += "{\"round\":";
  out += std::to_string(record.round);

  out += ",\"stakes\":{\"trainers\":";
  append_stakes(out, record.stakes.trainers);
  out += ",\"validators\":";
  append_stakes(out, record.stakes.validators);
  out += '}';

  out += ",\"submission_digests\":[";
  for (std::size_t i = 0; i < record.submission_digests.size(); ++i) {
    if (i > 0) out += ',';
    out += '"';
    out += to_hex(record.submission_digests[i]);
    out += '"';
  }
  out += ']';

  out += ",\"scores\":[";
  const Eigen::MatrixXd& m = record.scores.entries();
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    if (j > 0) out += ',';
    out += '[';
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
      if (i > 0) out += ',';
      append_double(out, m(j, i));
    }
    out += ']';
  }
  out += ']';

  out += ",\"consensus\":";
  append_doubles(out, record.consensus);
  out += ",\"accepted\":";
  append_ints(out, record.accepted);

  out += ",\"slashes\":[";
  for (std::size_t i = 0; i < record.slashes.size(); ++i) {
    if (i > 0) out += ',';
    out += "{\"trainer\":";
    out += std::to_string(record.slashes[i].trainer);
    out += ",\"amount\":";
    append_double(out, record.slashes[i].amount);
    out += '}';
  }
  out += ']';

  const econ::RewardStatement& r = record.rewards;
  out += ",\"rewards\":{\"pool_train\":";
  append_double(out, r.pool_train);
  out += ",\"pool_val\":";
  append_double(out, r.pool_val);
  out += ",\"trainer_ranks\":";
  append_ints(out, r.trainer_ranks);
  out += ",\"trainer_shares\":";
  append_doubles(out, r.trainer_shares);
  out += ",\"trainer_operator\":";
  append_doubles(out, r.trainer_operator_rewards);
  out += ",\"trainer_delegator\":";
  append_doubles(out, r.trainer_delegator_rewards);
  out += ",\"validator_shares\":";
  append_doubles(out, r.validator_shares);
  out += ",\"validator_operator\":";
  append_doubles(out, r.validator_operator_rewards);
  out += ",\"validator_delegator\":";
  append_doubles(out, r.validator_delegator_rewards);
  out += ",\"consensus\":";
  append_doubles(out, r.consensus);
  out += '}';

  out += ",\"global_digest\":\"";
  out += to_hex(record.global_digest);
  out += "\"}";
  return out;
}

RoundRecord record_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("record parse: ") + e.what());
  }
  try {
    RoundRecord rec;
    rec.round = j.at("round").get<int>();
    rec.stakes.trainers = stakes_from(j.at("stakes").at("trainers"));
    rec.stakes.validators = stakes_from(j.at("stakes").at("validators"));

    for (const auto& v : j.at("submission_digests")) {
      rec.submission_digests.push_back(digest_from_hex(v.get<std::string>()));
    }

    const auto& rows = j.at("scores");
    const Eigen::Index nv = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index nt =
        nv > 0 ? static_cast<Eigen::Index>(rows[0].size())
               : static_cast<Eigen::Index>(rec.submission_digests.size());
    Eigen::MatrixXd m(nv, nt);
    for (Eigen::Index r = 0; r < nv; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      if (static_cast<Eigen::Index>(row.size()) != nt)
        throw std::runtime_error("record parse: ragged score matrix");
      for (Eigen::Index c = 0; c < nt; ++c) {
        m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
      }
    }
    rec.scores = econ::ScoreMatrix(std::move(m));

    rec.consensus = doubles_from(j.at("consensus"));
    rec.accepted = ints_from(j.at("accepted"));
    for (const auto& v : j.at("slashes")) {
      rec.slashes.push_back({v.at("trainer").get<int>(), v.at("amount").get<double>()});
    }

    const auto& r = j.at("rewards");
    rec.rewards.pool_train = r.at("pool_train").get<double>();
    rec.rewards.pool_val = r.at("pool_val").get<double>();
    rec.rewards.trainer_ranks = ints_from(r.at("trainer_ranks"));
    rec.rewards.trainer_shares = doubles_from(r.at("trainer_shares"));
    rec.rewards.trainer_operator_rewards = doubles_from(r.at("trainer_operator"));
    rec.rewards.trainer_delegator_rewards = doubles_from(r.at("trainer_delegator"));
    rec.rewards.validator_shares = doubles_from(r.at("validator_shares"));
    rec.rewards.validator_operator_rewards = doubles_from(r.at("validator_operator"));
    rec.rewards.validator_delegator_rewards = doubles_from(r.at("validator_delegator"));
    rec.rewards.consensus = doubles_from(r.at("consensus"));

    rec.global_digest = digest_from_hex(j.at("global_digest").get<std::string>());
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("record parse: ") + e.what());
  }
}

}  // namespace flocksim::proto
