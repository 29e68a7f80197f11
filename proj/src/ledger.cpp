#include "qvote/ledger.hpp"

#include <algorithm>

#include "qvote/hash.hpp"

namespace qvote::ledger {

namespace {

constexpr std::string_view kChainMagic = "qvote-chain-v1";

template <typename Array>
void read_array(codec::Reader& r, Array& out) {
  const auto raw = r.raw(out.size());
  std::copy(raw.begin(), raw.end(), out.begin());
}

Digest read_digest(codec::Reader& r) {
  Digest d;
  read_array(r, d);
  return d;
}

std::uint8_t read_flag(codec::Reader& r) {
  const std::uint8_t v = r.u8();
  if (v > 1) throw Error(ErrorCode::MalformedInput, "flag byte must be 0 or 1");
  return v;
}

void encode_endorsement(codec::Writer& w, const Endorsement& e) {
  w.u32(e.miner_id).raw(e.block_digest).u8(static_cast<std::uint8_t>(e.verdict));
  w.u8(e.tag ? 1 : 0);
  if (e.tag) w.u32(e.tag->mask_index).u64(e.tag->value);
}

Endorsement decode_endorsement(codec::Reader& r) {
  Endorsement e;
  e.miner_id = r.u32();
  e.block_digest = read_digest(r);
  e.verdict = static_cast<Verdict>(read_flag(r));
  if (read_flag(r)) {
    qkd::WcTag t;
    t.mask_index = r.u32();
    t.value = r.u64();
    e.tag = t;
  }
  return e;
}

void encode_block_into(codec::Writer& w, const Block& b) {
  w.u64(b.height).raw(b.prev_hash).raw(b.body_hash).u32(b.miner_id).i64(b.created_at);
  w.u32(static_cast<std::uint32_t>(b.votes.size()));
  for (const auto& v : b.votes) v.encode(w);
  w.u32(static_cast<std::uint32_t>(b.endorsements.size()));
  for (const auto& e : b.endorsements) encode_endorsement(w, e);
  w.raw(b.endorsement_digest);
}

}  // namespace

// ---- vote records ----------------------------------------------------------

Bytes VoteRecord::signing_payload(const Digest& ballot_digest, std::uint32_t choice, Millis cast_at) {
  codec::Writer w;
  w.str("qvote-vote-v1").raw(ballot_digest).u32(choice).i64(cast_at);
  return w.take();
}

void VoteRecord::encode(codec::Writer& w) const {
  w.raw(ballot_digest).u32(choice).i64(cast_at);
  for (const auto& p : signature.revealed) w.raw(p);
  for (const auto& d : signer_public.digests) w.raw(d);
}

VoteRecord VoteRecord::decode(codec::Reader& r) {
  VoteRecord v;
  v.ballot_digest = read_digest(r);
  v.choice = r.u32();
  v.cast_at = r.i64();
  for (auto& p : v.signature.revealed) read_array(r, p);
  for (auto& d : v.signer_public.digests) read_array(r, d);
  return v;
}

Digest VoteRecord::record_digest() const {
  codec::Writer w;
  encode(w);
  return sha256(w.data());
}

nlohmann::json VoteRecord::to_json() const {
  return {{"ballot_digest", to_hex(ballot_digest)},
          {"choice", choice},
          {"cast_at", cast_at},
          {"signature", signature.to_json()},
          {"signer_public", signer_public.to_json()}};
}

VoteRecord VoteRecord::from_json(const nlohmann::json& j) {
  VoteRecord v;
  v.ballot_digest = digest_from_hex(j.at("ballot_digest").get<std::string>());
  v.choice = j.at("choice").get<std::uint32_t>();
  v.cast_at = j.at("cast_at").get<Millis>();
  v.signature = sig::OtsSignature::from_json(j.at("signature"));
  v.signer_public = sig::OtsPublicKey::from_json(j.at("signer_public"));
  return v;
}

Bytes Endorsement::tagged_bytes(std::uint32_t miner_id, const Digest& block_digest, Verdict verdict) {
  codec::Writer w;
  w.str("qvote-endorse-v1").u32(miner_id).raw(block_digest).u8(static_cast<std::uint8_t>(verdict));
  return w.take();
}

// ---- blocks ----------------------------------------------------------------

Digest body_hash(const std::vector<VoteRecord>& votes) {
  codec::Writer w;
  w.str("qvote-body-v1").u32(static_cast<std::uint32_t>(votes.size()));
  for (const auto& v : votes) v.encode(w);
  return sha256(w.data());
}

Digest block_hash(const Block& b) {
  codec::Writer w;
  w.str("qvote-block-v1").u64(b.height).raw(b.prev_hash).raw(b.body_hash).u32(b.miner_id).i64(b.created_at);
  return sha256(w.data());
}

Digest endorsement_digest(const Block& b) {
  codec::Writer w;
  w.str("qvote-endorsements-v1").raw(block_hash(b)).u32(static_cast<std::uint32_t>(b.endorsements.size()));
  for (const auto& e : b.endorsements) encode_endorsement(w, e);
  return sha256(w.data());
}

void seal_endorsements(Block& b) {
  std::sort(b.endorsements.begin(), b.endorsements.end(),
            [](const Endorsement& x, const Endorsement& y) { return x.miner_id < y.miner_id; });
  b.endorsement_digest = endorsement_digest(b);
}

Block make_genesis(const Digest& config_digest) {
  Block g;
  g.height = 0;
  g.prev_hash = kZeroDigest;
  codec::Writer w;
  w.str("qvote-genesis-v1").raw(config_digest);
  g.body_hash = sha256(w.data());
  g.miner_id = kGenesisMiner;
  g.created_at = 0;
  seal_endorsements(g);
  return g;
}

Block make_genesis(const ElectionConfig& config) { return make_genesis(config.digest()); }

Bytes encode_block(const Block& block) {
  codec::Writer w;
  encode_block_into(w, block);
  return w.take();
}

Block decode_block(std::span<const std::uint8_t> bytes) {
  codec::Reader r(bytes);
  Block b;
  b.height = r.u64();
  b.prev_hash = read_digest(r);
  b.body_hash = read_digest(r);
  b.miner_id = r.u32();
  b.created_at = r.i64();
  const std::uint32_t nvotes = r.u32();
  // Every record has a fixed size; reject counts the input cannot hold
  // before allocating.
  constexpr std::size_t kRecordBytes = 32 + 4 + 8 + 32 * (sig::kDigestBits + 2 * sig::kDigestBits);
  if (static_cast<std::size_t>(nvotes) * kRecordBytes > r.remaining()) {
    throw Error(ErrorCode::MalformedInput, "vote count exceeds block size");
  }
  b.votes.reserve(nvotes);
  for (std::uint32_t i = 0; i < nvotes; ++i) b.votes.push_back(VoteRecord::decode(r));
  const std::uint32_t nend = r.u32();
  if (nend > r.remaining()) throw Error(ErrorCode::MalformedInput, "endorsement count exceeds block size");
  for (std::uint32_t i = 0; i < nend; ++i) b.endorsements.push_back(decode_endorsement(r));
  b.endorsement_digest = read_digest(r);
  r.expect_done();
  return b;
}

nlohmann::json block_to_json(const Block& b) {
  nlohmann::json votes = nlohmann::json::array();
  for (const auto& v : b.votes) votes.push_back(v.to_json());
  nlohmann::json ends = nlohmann::json::array();
  for (const auto& e : b.endorsements) {
    nlohmann::json je = {{"miner_id", e.miner_id},
                         {"block_digest", to_hex(e.block_digest)},
                         {"verdict", e.verdict == Verdict::Approve ? "approve" : "reject"}};
    if (e.tag) je["tag"] = {{"mask_index", e.tag->mask_index}, {"value", e.tag->value}};
    ends.push_back(std::move(je));
  }
  return {{"height", b.height},
          {"hash", to_hex(block_hash(b))},
          {"prev_hash", to_hex(b.prev_hash)},
          {"body_hash", to_hex(b.body_hash)},
          {"miner_id", b.miner_id},
          {"created_at", b.created_at},
          {"votes", std::move(votes)},
          {"endorsements", std::move(ends)},
          {"endorsement_digest", to_hex(b.endorsement_digest)}};
}

Block block_from_json(const nlohmann::json& j) {
  Block b;
  b.height = j.at("height").get<std::uint64_t>();
  b.prev_hash = digest_from_hex(j.at("prev_hash").get<std::string>());
  b.body_hash = digest_from_hex(j.at("body_hash").get<std::string>());
  b.miner_id = j.at("miner_id").get<std::uint32_t>();
  b.created_at = j.at("created_at").get<Millis>();
  for (const auto& v : j.at("votes")) b.votes.push_back(VoteRecord::from_json(v));
  for (const auto& je : j.at("endorsements")) {
    Endorsement e;
    e.miner_id = je.at("miner_id").get<std::uint32_t>();
    e.block_digest = digest_from_hex(je.at("block_digest").get<std::string>());
    const auto verdict = je.at("verdict").get<std::string>();
    if (verdict != "approve" && verdict != "reject") throw Error(ErrorCode::MalformedInput, "bad verdict " + verdict);
    e.verdict = verdict == "approve" ? Verdict::Approve : Verdict::Reject;
    if (je.contains("tag")) {
      e.tag = qkd::WcTag{je["tag"].at("mask_index").get<std::uint32_t>(), je["tag"].at("value").get<std::uint64_t>()};
    }
    b.endorsements.push_back(std::move(e));
  }
  b.endorsement_digest = digest_from_hex(j.at("endorsement_digest").get<std::string>());
  return b;
}

// ---- chain -----------------------------------------------------------------

Chain::Chain(const ElectionConfig& config) : config_digest_(config.digest()) {
  blocks_.push_back(std::make_shared<const Block>(make_genesis(config_digest_)));
}

Chain Chain::from_blocks(const Digest& config_digest, std::vector<Block> blocks) {
  Chain c;
  c.config_digest_ = config_digest;
  c.blocks_.reserve(blocks.size());
  for (auto& b : blocks) c.blocks_.push_back(std::make_shared<const Block>(std::move(b)));
  return c;
}

std::size_t Chain::vote_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b->votes.size();
  return n;
}

Chain Chain::append(Block block) const {
  if (block.height != blocks_.size()) {
    throw Error(ErrorCode::HeightMismatch,
                "expected height " + std::to_string(blocks_.size()) + ", got " + std::to_string(block.height));
  }
  if (block.prev_hash != tip_hash()) throw Error(ErrorCode::PrevHashMismatch, "block does not extend the tip");
  Chain next = *this;
  next.blocks_.push_back(std::make_shared<const Block>(std::move(block)));
  return next;
}

Chain Chain::with_block(std::size_t height, Block block) const {
  Chain next = *this;
  next.blocks_.at(height) = std::make_shared<const Block>(std::move(block));
  return next;
}

ChainVerdict validate_chain(const Chain& chain) {
  auto bad = [](std::uint64_t h, std::string why) { return ChainVerdict{false, h, std::move(why)}; };
  if (chain.size() == 0) return bad(0, "chain has no genesis block");

  if (chain.at(0) != make_genesis(chain.config_digest())) return bad(0, "genesis block does not match the config");

  Digest prev = block_hash(chain.at(0));
  Millis prev_time = 0;
  for (std::size_t h = 1; h < chain.size(); ++h) {
    const Block& b = chain.at(h);
    if (b.height != h) return bad(h, "stored height is " + std::to_string(b.height));
    if (b.prev_hash != prev) return bad(h, "prev_hash does not match the previous block");
    if (b.body_hash != body_hash(b.votes)) return bad(h, "body_hash does not match the votes");
    if (b.votes.size() > kMaxVotesPerBlock) return bad(h, "too many votes in block");
    if (b.created_at < prev_time) return bad(h, "created_at runs backwards");
    const Digest self = block_hash(b);
    if (b.endorsements.empty()) return bad(h, "block has no endorsements");
    for (std::size_t i = 0; i < b.endorsements.size(); ++i) {
      const Endorsement& e = b.endorsements[i];
      if (i > 0 && e.miner_id <= b.endorsements[i - 1].miner_id) return bad(h, "endorsements out of order");
      if (e.block_digest != self) return bad(h, "endorsement names a different block");
      if ((e.miner_id == b.miner_id) == e.tag.has_value()) return bad(h, "endorsement tag presence is wrong");
    }
    if (b.endorsement_digest != endorsement_digest(b)) return bad(h, "endorsement checksum mismatch");
    prev = self;
    prev_time = b.created_at;
  }
  return {};
}

Bytes encode_chain(const Chain& chain) {
  codec::Writer w;
  w.str(kChainMagic).raw(chain.config_digest()).u32(static_cast<std::uint32_t>(chain.size()));
  for (std::size_t h = 0; h < chain.size(); ++h) w.bytes(encode_block(chain.at(h)));
  return w.take();
}

Chain decode_chain(std::span<const std::uint8_t> bytes) {
  codec::Reader r(bytes);
  if (r.str() != kChainMagic) throw Error(ErrorCode::MalformedInput, "not a chain file");
  const Digest cfg = read_digest(r);
  const std::uint32_t n = r.u32();
  std::vector<Block> blocks;
  for (std::uint32_t i = 0; i < n; ++i) blocks.push_back(decode_block(r.bytes()));
  r.expect_done();
  return Chain::from_blocks(cfg, std::move(blocks));
}

nlohmann::json chain_to_json(const Chain& chain) {
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t h = 0; h < chain.size(); ++h) blocks.push_back(block_to_json(chain.at(h)));
  return {{"config_digest", to_hex(chain.config_digest())}, {"blocks", std::move(blocks)}};
}

Chain chain_from_json(const nlohmann::json& j) {
  std::vector<Block> blocks;
  for (const auto& b : j.at("blocks")) blocks.push_back(block_from_json(b));
  return Chain::from_blocks(digest_from_hex(j.at("config_digest").get<std::string>()), std::move(blocks));
}

}  // namespace qvote::ledger
