#pragma once

// Public verification. Everything here runs on the published chain, the
// commitment list and the announced result; no shares, no voter database.

#include "qvote/tally.hpp"

namespace qvote::audit {

struct Finding {
  /// A rejection reason name, "Duplicate", "ChainInvalid", "RecountMismatch",
  /// "WeakEndorsement", "OrphanBlock" or "AnonymityLeak".
  std::string kind;
  std::string detail;
  std::optional<std::uint64_t> height;
};

/// Secrets a test harness knows and the public surface must never contain.
struct KnownSecrets {
  std::vector<std::string> credentials;
  std::vector<entropy::Id256> vids;
};

/// Optional operational logs from the miners.
struct MinerLogs {
  std::vector<consensus::Rejection> rejections;
  std::vector<consensus::Orphan> orphans;
};

struct AuditReport {
  ledger::ChainVerdict chain;
  bool recount_matches_announced = false;
  std::size_t commitment_valid = 0;    // records naming a published commitment
  std::size_t commitment_invalid = 0;
  std::size_t signatures_ok = 0;       // over records with a commitment
  std::size_t signatures_bad = 0;
  bool anonymity_ok = true;
  std::size_t anonymity_hits = 0;
  std::optional<tally::TallyResult> recount;
  std::vector<Finding> findings;
  std::vector<std::string> notes;

  bool clean() const { return findings.empty(); }
  nlohmann::json to_json() const;
};

/// Occurrences of any secret (credential bytes, vid hex, raw vid bytes) in
/// the given artifacts.
std::size_t scan_for_secrets(const std::vector<std::string_view>& artifacts, const KnownSecrets& secrets,
                             std::vector<Finding>* findings = nullptr);

AuditReport audit_election(const ledger::Chain& chain, const authority::CommitmentList& commitments,
                           const tally::TallyResult& announced, const ElectionConfig& config,
                           const KnownSecrets& known = {}, const MinerLogs* logs = nullptr);

struct Inclusion {
  tally::Locator at;
  bool counted = false;
};

/// Every record on the chain for H(vid || bid), in chain order. Empty means
/// not found.
std::vector<Inclusion> verify_my_vote(const ledger::Chain& chain, const tally::TallyResult& result,
                                      const entropy::Id256& vid, const entropy::Id256& bid);

nlohmann::json inclusions_to_json(const std::vector<Inclusion>& found);

}  // namespace qvote::audit
