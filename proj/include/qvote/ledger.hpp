#pragma once

// Hash-linked block storage. Blocks hash their header only; the header binds
// the votes through body_hash and the predecessor through prev_hash.

#include <memory>
#include <optional>

#include <nlohmann/json.hpp>

#include "qvote/codec.hpp"
#include "qvote/config.hpp"
#include "qvote/qkd.hpp"
#include "qvote/sig.hpp"

namespace qvote::ledger {

/// A committed vote. The voter's (vid, bid) pair is carried only as its
/// commitment digest; the signature covers digest, choice and cast_at.
struct VoteRecord {
  Digest ballot_digest{};
  std::uint32_t choice = 0;
  Millis cast_at = 0;
  sig::OtsSignature signature;
  sig::OtsPublicKey signer_public;

  static Bytes signing_payload(const Digest& ballot_digest, std::uint32_t choice, Millis cast_at);
  Bytes signing_payload() const { return signing_payload(ballot_digest, choice, cast_at); }

  void encode(codec::Writer& w) const;
  static VoteRecord decode(codec::Reader& r);
  /// SHA-256 of the canonical encoding; identifies one exact record.
  Digest record_digest() const;

  nlohmann::json to_json() const;
  static VoteRecord from_json(const nlohmann::json& j);

  bool operator==(const VoteRecord&) const = default;
};

enum class Verdict : std::uint8_t { Reject = 0, Approve = 1 };

struct Endorsement {
  std::uint32_t miner_id = 0;
  Digest block_digest{};
  Verdict verdict = Verdict::Reject;
  /// Absent only on the proposer's own endorsement.
  std::optional<qkd::WcTag> tag;

  /// The bytes a miner tags when endorsing.
  static Bytes tagged_bytes(std::uint32_t miner_id, const Digest& block_digest, Verdict verdict);

  bool operator==(const Endorsement&) const = default;
};

inline constexpr std::uint32_t kGenesisMiner = 0xFFFFFFFFu;

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash{};
  Digest body_hash{};
  std::vector<VoteRecord> votes;
  std::uint32_t miner_id = 0;
  Millis created_at = 0;
  std::vector<Endorsement> endorsements;  // ascending miner_id
  /// Checksum over (block hash, endorsements); set by seal_endorsements().
  Digest endorsement_digest{};

  bool operator==(const Block&) const = default;
};

Digest body_hash(const std::vector<VoteRecord>& votes);
/// SHA-256 over (height, prev_hash, body_hash, miner_id, created_at).
Digest block_hash(const Block& block);
Digest endorsement_digest(const Block& block);
/// Sorts endorsements by miner and recomputes endorsement_digest.
void seal_endorsements(Block& block);

Block make_genesis(const ElectionConfig& config);
Block make_genesis(const Digest& config_digest);

Bytes encode_block(const Block& block);
/// Strict inverse of encode_block. Throws MalformedInput.
Block decode_block(std::span<const std::uint8_t> bytes);

nlohmann::json block_to_json(const Block& block);
Block block_from_json(const nlohmann::json& j);

/// Immutable sequence of blocks. Appending returns a new chain that shares
/// the existing blocks; earlier snapshots stay valid.
class Chain {
 public:
  explicit Chain(const ElectionConfig& config);
  /// Unchecked construction, used when loading files or building fixtures.
  static Chain from_blocks(const Digest& config_digest, std::vector<Block> blocks);

  const Digest& config_digest() const { return config_digest_; }
  std::size_t size() const { return blocks_.size(); }
  const Block& at(std::size_t height) const { return *blocks_.at(height); }
  const Block& tip() const { return *blocks_.back(); }
  Digest tip_hash() const { return block_hash(tip()); }
  std::size_t vote_count() const;

  /// Throws HeightMismatch or PrevHashMismatch.
  Chain append(Block block) const;

  /// Copy with block h replaced. Test and fault-injection helper.
  Chain with_block(std::size_t height, Block block) const;

 private:
  Chain() = default;
  Digest config_digest_{};
  std::vector<std::shared_ptr<const Block>> blocks_;
};

inline Chain append_block(const Chain& chain, Block block) { return chain.append(std::move(block)); }

struct ChainVerdict {
  bool valid = true;
  std::optional<std::uint64_t> first_bad_height;
  std::string reason;
};

/// Recomputes every link, body hash and endorsement checksum.
ChainVerdict validate_chain(const Chain& chain);

/// Binary chain file: magic, config digest, then one length-prefixed block each.
Bytes encode_chain(const Chain& chain);
Chain decode_chain(std::span<const std::uint8_t> bytes);

/// JSON chain file with hex digests.
nlohmann::json chain_to_json(const Chain& chain);
Chain chain_from_json(const nlohmann::json& j);

}  // namespace qvote::ledger
