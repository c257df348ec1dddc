#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flocksim/digest.hpp"
#include "flocksim/record.hpp"

namespace flocksim::ledger {

// digest = SHA-256(index as 8-byte little-endian || prev_digest || payload).
// Entry 0 links from 32 zero bytes.
struct LedgerEntry {
  std::uint64_t index = 0;
  Digest prev_digest = kZeroDigest;
  std::string payload;
  Digest digest = kZeroDigest;
};

Digest entry_digest(std::uint64_t index, const Digest& prev_digest,
                    std::string_view payload);

// Append-only hash chain. Single writer; readers may share a const chain.
class Chain {
 public:
  Chain() = default;

  // Wraps already-built entries without checking them; verify_chain decides
  // whether they are honest. Used by load() and by audit tooling.
  static Chain from_entries(std::vector<LedgerEntry> entries);

  const std::vector<LedgerEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const LedgerEntry& append(const proto::RoundRecord& record);
  const LedgerEntry& append_payload(std::string payload);

 private:
  std::vector<LedgerEntry> entries_;
};

// Recomputes every digest and link. Returns the first violating index, or
// nullopt when the chain is intact.
std::optional<std::size_t> verify_chain(const Chain& chain);

struct ReplayReport {
  std::optional<std::size_t> first_mismatch;
  std::string detail;  // empty when ok
  bool ok() const { return !first_mismatch.has_value(); }
};

// Re-derives each round's reward statement from the stakes and scores stored
// in its record and compares against the stored statement within 1e-9.
// Throws std::runtime_error when the chain itself does not verify.
ReplayReport replay_settlements(const Chain& chain, const econ::EconParams& params);

// One binary file, length-prefixed entries. Throws std::runtime_error on IO
// or framing errors.
void save(const Chain& chain, const std::filesystem::path& path);
Chain load(const std::filesystem::path& path);

// One JSON object per line: index, hex digests, and the round payload.
void export_jsonl(const Chain& chain, std::ostream& out);

}  // namespace flocksim::ledger
