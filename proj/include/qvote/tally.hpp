#pragma once

#include "qvote/consensus.hpp"

namespace qvote::tally {

/// Per-record classification. Duplicate marks a valid record that lost the
/// earliest-wins comparison for its commitment digest.
enum class RecordStatus { Counted, Duplicate, InvalidBallot, RevokedBallot, BadSignature, BadChoice, AfterCutoff };

std::string_view to_string(RecordStatus s);

struct Locator {
  std::uint64_t height = 0;
  std::uint32_t index = 0;
  bool operator==(const Locator&) const = default;
};

struct CountedVote {
  Digest ballot_digest{};
  Locator at;
  std::uint32_t choice = 0;
  Millis cast_at = 0;
  bool operator==(const CountedVote&) const = default;
};

struct RejectedVote {
  Digest ballot_digest{};
  Locator at;
  RecordStatus reason = RecordStatus::InvalidBallot;
  bool operator==(const RejectedVote&) const = default;
};

struct TallyResult {
  std::vector<std::string> candidates;
  std::vector<std::uint64_t> counts;  // parallel to candidates
  std::vector<CountedVote> counted;   // chain order
  std::vector<RejectedVote> rejected; // chain order
  std::uint64_t total_cast = 0;
  std::uint64_t total_counted = 0;
  Digest chain_tip{};
  Digest commitments_digest{};

  const CountedVote* find_counted(const Locator& at) const;

  nlohmann::json to_json() const;
  static TallyResult from_json(const nlohmann::json& j);
  bool operator==(const TallyResult&) const = default;
};

/// Counts a validated chain against the published commitments. A record
/// counts iff its commitment is active, its signature verifies, it was cast by
/// the cutoff, and no other valid record for the same digest has an earlier
/// (cast_at, height, index). Throws ChainInvalid.
TallyResult tally(const ledger::Chain& chain, const authority::CommitmentList& commitments,
                  const ElectionConfig& config);

}  // namespace qvote::tally
