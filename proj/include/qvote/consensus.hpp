#pragma once

// Delegated proof-of-stake block production: round-robin proposers that skip
// unavailable miners, vote authentication against the published commitments,
// and commitment by strict majority of the full roster.

#include <deque>
#include <map>

#include "qvote/authority.hpp"
#include "qvote/ledger.hpp"

namespace qvote::consensus {

using entropy::Id256;
using ledger::Block;
using ledger::Chain;
using ledger::VoteRecord;

struct MinerRoster {
  std::vector<MinerSpec> miners;
  std::vector<bool> available;

  static MinerRoster from_config(const ElectionConfig& config);
  std::size_t size() const { return miners.size(); }
  std::size_t available_count() const;
  /// Strict majority of the full roster.
  std::size_t majority() const { return miners.size() / 2 + 1; }
  void set_available(std::uint32_t miner, bool up) { available.at(miner) = up; }
};

/// Round robin by turn; an unavailable scheduled miner passes the right to
/// the next available one. Throws NoMinerAvailable.
std::uint32_t current_miner(const MinerRoster& roster, std::uint64_t turn);

/// Stateful rotation: each slot hands the turn to the next available miner
/// after the previous proposer, so a miner that is down simply loses its
/// turns and nobody gets an extra one.
class Rotation {
 public:
  /// Proposer for the next slot. Throws NoMinerAvailable.
  std::uint32_t next(const MinerRoster& roster);
  /// Turn index the next call will start from.
  std::uint64_t turn() const { return turn_; }

 private:
  std::uint64_t turn_ = 0;
};

enum class RejectReason { InvalidBallot, RevokedBallot, BadSignature, BadChoice, AfterCutoff };

std::string_view to_string(RejectReason r);
RejectReason reject_reason_from_string(std::string_view s);

/// nullopt means accepted.
using AuthVerdict = std::optional<RejectReason>;

/// Checks, in order: commitment exists, commitment active, signature under the
/// committed key, valid candidate, cast_at and receipt time within the cutoff.
AuthVerdict authenticate_vote(const VoteRecord& vote, const authority::CommitmentList& commitments,
                              std::size_t candidate_count, Millis now, Millis cutoff);

/// What a voter sends to the miners: the ballot secrets travel with the vote
/// so miners can recompute the commitment digest themselves.
struct VoteSubmission {
  Id256 vid;
  Id256 bid;
  std::uint32_t choice = 0;
  Millis cast_at = 0;
  sig::OtsSignature signature;
  sig::OtsPublicKey signer_public;

  /// Signs with the ballot's one-time key.
  static VoteSubmission make(const Id256& vid, const Id256& bid, std::uint32_t choice, Millis cast_at,
                             sig::OtsKeyPair& key);
  VoteRecord to_record() const;

  /// Wire form: vid, bid, choice, cast_at, preimages, public digests.
  Bytes encode() const;
  static VoteSubmission decode(std::span<const std::uint8_t> bytes);
  /// Offset of the first signature-covered byte after the ballot ids.
  static constexpr std::size_t kSignedFieldsOffset = 64;

  nlohmann::json to_json() const;
  static VoteSubmission from_json(const nlohmann::json& j);
};

struct PendingVote {
  VoteRecord vote;
  Millis arrival = 0;
};

/// Unconfirmed votes in arrival order.
class VotePool {
 public:
  void add(VoteRecord vote, Millis arrival) { pending_.push_back({std::move(vote), arrival}); }
  std::size_t size() const { return pending_.size(); }
  bool empty() const { return pending_.empty(); }
  const std::deque<PendingVote>& pending() const { return pending_; }
  PendingVote pop_front();
  /// Puts votes back at the head, keeping their relative order.
  void requeue_front(std::vector<PendingVote> votes);

 private:
  std::deque<PendingVote> pending_;
};

struct Rejection {
  Millis arrival = 0;
  Digest ballot_digest{};
  RejectReason reason = RejectReason::InvalidBallot;
  std::uint32_t miner_id = 0;
};

struct Proposal {
  Block block;
  std::vector<PendingVote> included;  // returned to the pool if orphaned
  std::vector<Rejection> rejected;
};

/// Builds an unendorsed block extending the chain tip.
Block assemble_block(const Chain& chain, std::uint32_t miner, std::vector<VoteRecord> votes, Millis now);

/// Authenticates pending votes in arrival order against each vote's receipt
/// time; accepted ones (up to the block cap) go into the block, rejected ones
/// are dropped and reported. Throws NotYourSlot.
Proposal propose_block(VotePool& pool, const Chain& chain, std::uint32_t miner, const MinerRoster& roster,
                       std::uint64_t turn, const authority::CommitmentList& commitments,
                       const ElectionConfig& config, Millis now);

/// Drains votes that can no longer be proposed (after the final slot) and
/// returns their rejections.
std::vector<Rejection> flush_pool(VotePool& pool, const authority::CommitmentList& commitments,
                                  const ElectionConfig& config, std::uint32_t miner);

/// Directional Wegman-Carter keys between miners, derived from BB84 and
/// re-established when a direction runs out of masks.
class KeyRing {
 public:
  KeyRing(std::size_t miners, const QkdSettings& qkd, std::uint64_t seed, std::size_t auth_bytes = 8 + 8 * 32);

  qkd::WcTag tag(std::uint32_t from, std::uint32_t to, std::span<const std::uint8_t> message);
  bool verify(std::uint32_t from, std::uint32_t to, std::span<const std::uint8_t> message,
              const qkd::WcTag& tag) const;
  std::size_t rekeys() const { return rekeys_; }

 private:
  struct Direction {
    qkd::AuthKey sender;
    qkd::AuthKey receiver;
  };
  Direction fresh();

  QkdSettings qkd_;
  std::size_t auth_bytes_;
  entropy::EntropySource entropy_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, Direction> keys_;
  std::size_t rekeys_ = 0;
};

/// One miner's independent check of a proposed block: link to the tip, body
/// hash, cap, creation time within the election, and every vote authenticated.
/// The proposer's own endorsement carries no tag.
ledger::Endorsement endorse(std::uint32_t endorser, const Block& block, const Chain& chain,
                            const authority::CommitmentList& commitments, const ElectionConfig& config,
                            KeyRing& keys);

struct Orphan {
  Digest block_digest{};
  std::uint64_t height = 0;
  std::uint32_t miner_id = 0;
  std::size_t approvals = 0;
  std::size_t rejections = 0;
  std::size_t roster_size = 0;
};

struct CommitOutcome {
  bool committed = false;
  Chain chain;  // unchanged when orphaned
  std::size_t approvals = 0;
  std::size_t rejections = 0;
  std::optional<Orphan> orphan;
};

/// Verifies endorsement tags, counts approvals over the full roster and
/// either appends the block (with endorsements attached) or reports an
/// orphan. Endorsements with bad tags or for another digest are ignored.
CommitOutcome finalize_block(const Chain& chain, Block block, const std::vector<ledger::Endorsement>& endorsements,
                             const MinerRoster& roster, const KeyRing& keys);

/// Every available miner endorses, then finalize_block. On orphaning the
/// included votes go back to the front of the pool.
CommitOutcome endorse_and_commit(const Proposal& proposal, const MinerRoster& roster, const Chain& chain,
                                 const authority::CommitmentList& commitments, const ElectionConfig& config,
                                 KeyRing& keys, VotePool& pool);

nlohmann::json rejection_to_json(const Rejection& r);
nlohmann::json orphan_to_json(const Orphan& o);

}  // namespace qvote::consensus
