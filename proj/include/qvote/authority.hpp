#pragma once

// The voting authority: credential check, VID/BID issuance from its QRNG,
// public (VID,BID) commitments, re-ballot revocation, and the trustee-sealed
// voter database.

#include <functional>
#include <map>
#include <optional>
#include <unordered_map>

#include "qvote/config.hpp"
#include "qvote/entropy.hpp"
#include "qvote/qkd.hpp"
#include "qvote/secretshare.hpp"

namespace qvote::authority {

using entropy::Id256;

/// SHA-256(vid || bid) over the fixed 32-byte encodings.
Digest ballot_digest(const Id256& vid, const Id256& bid);

enum class CommitmentStatus { Active, Revoked };

std::string_view to_string(CommitmentStatus s);

struct Commitment {
  Digest digest{};
  Digest ots_public_digest{};
  CommitmentStatus status = CommitmentStatus::Active;
  Millis published_at = 0;
  std::optional<Millis> revoked_at;

  bool active() const { return status == CommitmentStatus::Active; }
  bool operator==(const Commitment&) const = default;
};

/// Append-only list; revocation flips a status, nothing is ever removed.
class CommitmentList {
 public:
  const std::vector<Commitment>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t active_count() const;
  const Commitment* find(const Digest& digest) const;

  /// Throws InvalidArgument on a duplicate digest.
  void append(const Commitment& c);
  /// Throws InvalidArgument if the digest is unknown or already revoked.
  void revoke(const Digest& digest, Millis at);

  /// One line per entry: "<digest> <ots digest> <active|revoked> <published_at> <revoked_at|->".
  std::string to_file() const;
  static CommitmentList from_file(std::string_view text);
  /// SHA-256 of to_file().
  Digest digest() const;

  bool operator==(const CommitmentList& other) const { return entries_ == other.entries_; }

 private:
  std::vector<Commitment> entries_;
  std::unordered_map<Digest, std::size_t, DigestHash> index_;
};

struct VoterRecord {
  std::string credential_id;
  Id256 vid;
  std::optional<Id256> active_bid;
  std::vector<Id256> revoked_bids;
  Digest ots_public_digest{};

  bool operator==(const VoterRecord&) const = default;
};

using CredentialVerifier = std::function<bool(std::string_view credential)>;

/// What the voter's side walks away with after registration: its end of the
/// QKD link and the encrypted, tagged VID.
struct Registration {
  qkd::LinkEnd voter_end;
  qkd::SealedMessage vid_package;
};

/// A ballot request as sent by the voter, tagged over the link.
struct BallotRequest {
  Id256 vid;
  Digest ots_public_digest{};
  qkd::WcTag tag;

  static Bytes signed_bytes(const Id256& vid, const Digest& ots_public_digest, bool reissue);
  static BallotRequest make(qkd::LinkEnd& voter_end, const Id256& vid, const Digest& ots_public_digest, bool reissue);
};

struct BallotIssue {
  qkd::SealedMessage bid_package;
  Commitment commitment;
};

struct EncryptedDb {
  Bytes ciphertext;
  Digest key_checksum{};
  sss::ShareSet trustee_shares;

  /// Header (key checksum) plus ciphertext; shares travel separately.
  nlohmann::json to_json() const;
  static EncryptedDb from_json(const nlohmann::json& j, sss::ShareSet shares = {});
};

/// Decrypts with a trustee quorum. Throws InsufficientShares, DuplicateIndex,
/// KeyChecksumMismatch (wrong key), or MalformedInput.
std::vector<VoterRecord> open_database(const EncryptedDb& db, const sss::ShareSet& quorum);

/// Single logical actor; callers serialize access.
class VotingAuthority {
 public:
  VotingAuthority(ElectionConfig config, entropy::EntropySource qrng);

  /// Checks the credential, draws a fresh VID, establishes the QKD link and
  /// returns the encrypted VID. Throws CredentialRejected, AlreadyRegistered,
  /// RegistrationClosed.
  Registration register_voter(std::string_view credential, const CredentialVerifier& verifier, Millis now);

  /// Throws NotRegistered, ElectionClosed, BallotAlreadyActive, CredentialRejected (bad request tag).
  BallotIssue issue_ballot(const BallotRequest& request, Millis now);
  /// Revokes the active ballot and issues a new one. Throws NotRegistered,
  /// NoActiveBallot, ElectionClosed, CredentialRejected.
  BallotIssue reissue_ballot(const BallotRequest& request, Millis now);

  const CommitmentList& commitments() const { return commitments_; }
  /// Immutable snapshot of the public list.
  CommitmentList publish_commitments() const { return commitments_; }

  /// Encrypts the voter records under a fresh 256-bit key split k-of-n.
  EncryptedDb seal_database(std::uint32_t k, std::uint32_t n);

  std::size_t voter_count() const { return records_.size(); }
  const ElectionConfig& config() const { return config_; }

  /// Test hook: the VIDs currently on the roll (trustee-level knowledge).
  std::vector<Id256> registered_vids() const;

 private:
  struct Entry {
    VoterRecord record;
    qkd::LinkEnd va_end;
  };

  Entry& checked_entry(const BallotRequest& request, bool reissue, Millis now);
  BallotIssue issue(Entry& entry, const Digest& ots_public_digest, Millis now);

  ElectionConfig config_;
  entropy::EntropySource qrng_;
  std::vector<Entry> records_;
  std::map<std::string, std::size_t, std::less<>> by_credential_;
  std::map<Id256, std::size_t> by_vid_;
  CommitmentList commitments_;
};

/// Pad and authentication sizes for a VA-voter link: one VID plus up to
/// eight ballots.
inline constexpr std::size_t kVoterPadBytes = 32 * 9;
inline constexpr std::size_t kVoterAuthBytes = 8 + 8 * 16;

}  // namespace qvote::authority
