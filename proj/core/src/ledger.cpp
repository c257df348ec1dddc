#include "flocksim/ledger.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <type_traits>

namespace flocksim::ledger {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'O', 'C', 'K', 'L', 'G', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

// Compares a replayed value against the stored one; fills the report on the
// first divergence.
bool close(double a, double b) { return std::abs(a - b) <= 1e-9; }

template <typename T>
bool vectors_match(const std::vector<T>& fresh, const std::vector<T>& stored,
                   const char* field, std::size_t round, ReplayReport& report) {
  if (fresh.size() != stored.size()) {
    report.first_mismatch = round;
    report.detail = std::string(field) + " length differs at round " + std::to_string(round);
    return false;
  }
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    bool same;
    if constexpr (std::is_same_v<T, double>) {
      same = close(fresh[i], stored[i]);
    } else {
      same = fresh[i] == stored[i];
    }
    if (!same) {
      report.first_mismatch = round;
      report.detail = std::string(field) + "[" + std::to_string(i) + "] differs at round " +
                      std::to_string(round);
      return false;
    }
  }
  return true;
}

}  // namespace

Digest entry_digest(std::uint64_t index, const Digest& prev_digest,
                    std::string_view payload) {
  std::string buf;
  buf.reserve(8 + prev_digest.size() + payload.size());
  put_u64(buf, index);
  buf.append(reinterpret_cast<const char*>(prev_digest.data()), prev_digest.size());
  buf.append(payload);
  return sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size()));
}

Chain Chain::from_entries(std::vector<LedgerEntry> entries) {
  Chain c;
  c.entries_ = std::move(entries);
  return c;
}

const LedgerEntry& Chain::append(const proto::RoundRecord& record) {
  return append_payload(proto::to_canonical_json(record));
}

const LedgerEntry& Chain::append_payload(std::string payload) {
  LedgerEntry e;
  e.index = entries_.size();
  e.prev_digest = entries_.empty() ? kZeroDigest : entries_.back().digest;
  e.payload = std::move(payload);
  e.digest = entry_digest(e.index, e.prev_digest, e.payload);
  entries_.push_back(std::move(e));
  return entries_.back();
}

std::optional<std::size_t> verify_chain(const Chain& chain) {
  const auto& entries = chain.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const LedgerEntry& e = entries[k];
    if (e.index != k) return k;
    const Digest& expected_prev = k == 0 ? kZeroDigest : entries[k - 1].digest;
    if (e.prev_digest != expected_prev) return k;
    if (e.digest != entry_digest(e.index, e.prev_digest, e.payload)) return k;
  }
  return std::nullopt;
}

ReplayReport replay_settlements(const Chain& chain, const econ::EconParams& params) {
  if (const auto bad = verify_chain(chain)) {
    throw std::runtime_error("ledger chain invalid at entry " + std::to_string(*bad));
  }
  ReplayReport report;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    proto::RoundRecord rec;
    try {
      rec = proto::record_from_json(chain.entries()[k].payload);
    } catch (const std::exception& e) {
      report.first_mismatch = k;
      report.detail = e.what();
      return report;
    }
    econ::RewardStatement fresh;
    try {
      fresh = econ::settle(params, rec.stakes, rec.scores);
    } catch (const std::exception& e) {
      report.first_mismatch = k;
      report.detail = std::string("settle failed at round ") + std::to_string(k) + ": " +
                      e.what();
      return report;
    }
    const econ::RewardStatement& stored = rec.rewards;
    if (!close(fresh.pool_train, stored.pool_train) ||
        !close(fresh.pool_val, stored.pool_val)) {
      report.first_mismatch = k;
      report.detail = "reward pools differ at round " + std::to_string(k);
      return report;
    }
    if (!vectors_match(fresh.trainer_ranks, stored.trainer_ranks, "trainer_ranks", k,
                       report) ||
        !vectors_match(fresh.trainer_shares, stored.trainer_shares, "trainer_shares", k,
                       report) ||
        !vectors_match(fresh.trainer_operator_rewards, stored.trainer_operator_rewards,
                       "trainer_operator", k, report) ||
        !vectors_match(fresh.trainer_delegator_rewards, stored.trainer_delegator_rewards,
                       "trainer_delegator", k, report) ||
        !vectors_match(fresh.validator_shares, stored.validator_shares, "validator_shares",
                       k, report) ||
        !vectors_match(fresh.validator_operator_rewards, stored.validator_operator_rewards,
                       "validator_operator", k, report) ||
        !vectors_match(fresh.validator_delegator_rewards, stored.validator_delegator_rewards,
                       "validator_delegator", k, report) ||
        !vectors_match(fresh.consensus, stored.consensus, "consensus", k, report)) {
      return report;
    }
  }
  return report;
}

void save(const Chain& chain, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("ledger file: cannot open for writing: " + path.string());
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put_u64(buf, chain.size());
  for (const LedgerEntry& e : chain.entries()) {
    put_u64(buf, e.index);
    buf.append(reinterpret_cast<const char*>(e.prev_digest.data()), e.prev_digest.size());
    put_u64(buf, e.payload.size());
    buf.append(e.payload);
    buf.append(reinterpret_cast<const char*>(e.digest.data()), e.digest.size());
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("ledger file: write failed: " + path.string());
}

Chain load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ledger file: cannot open: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  const std::size_t size = data.size();

  if (size < sizeof(kMagic) + 8 || std::memcmp(p, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("ledger file: bad header: " + path.string());
  std::size_t off = sizeof(kMagic);
  const std::uint64_t count = get_u64(p + off);
  off += 8;

  std::vector<LedgerEntry> entries;
  entries.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    if (off + 8 + 32 + 8 > size)
      throw std::runtime_error("ledger file: truncated entry header");
    LedgerEntry e;
    e.index = get_u64(p + off);
    off += 8;
    std::memcpy(e.prev_digest.data(), p + off, 32);
    off += 32;
    const std::uint64_t plen = get_u64(p + off);
    off += 8;
    if (plen > size - off || size - off - plen < 32)
      throw std::runtime_error("ledger file: truncated payload");
    e.payload.assign(reinterpret_cast<const char*>(p + off), plen);
    off += plen;
    std::memcpy(e.digest.data(), p + off, 32);
    off += 32;
    entries.push_back(std::move(e));
  }
  if (off != size) throw std::runtime_error("ledger file: trailing bytes");
  return Chain::from_entries(std::move(entries));
}

void export_jsonl(const Chain& chain, std::ostream& out) {
  for (const LedgerEntry& e : chain.entries()) {
    out << "{\"index\":" << e.index << ",\"prev_digest\":\"" << to_hex(e.prev_digest)
        << "\",\"digest\":\"" << to_hex(e.digest) << "\",\"record\":" << e.payload << "}\n";
  }
}

}  // namespace flocksim::ledger
