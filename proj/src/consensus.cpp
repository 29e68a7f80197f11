#include "qvote/consensus.hpp"

#include <algorithm>

namespace qvote::consensus {

MinerRoster MinerRoster::from_config(const ElectionConfig& config) {
  return MinerRoster{config.miners, std::vector<bool>(config.miners.size(), true)};
}

std::size_t MinerRoster::available_count() const {
  return static_cast<std::size_t>(std::count(available.begin(), available.end(), true));
}

std::uint32_t current_miner(const MinerRoster& roster, std::uint64_t turn) {
  const std::size_t n = roster.size();
  if (n == 0) throw Error(ErrorCode::NoMinerAvailable, "empty roster");
  for (std::size_t k = 0; k < n; ++k) {
    const auto m = static_cast<std::uint32_t>((turn + k) % n);
    if (roster.available[m]) return m;
  }
  throw Error(ErrorCode::NoMinerAvailable, "every miner is unavailable");
}

std::uint32_t Rotation::next(const MinerRoster& roster) {
  const std::uint32_t m = current_miner(roster, turn_);
  const std::size_t n = roster.size();
  turn_ += (m + n - turn_ % n) % n + 1;
  return m;
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::InvalidBallot: return "InvalidBallot";
    case RejectReason::RevokedBallot: return "RevokedBallot";
    case RejectReason::BadSignature: return "BadSignature";
    case RejectReason::BadChoice: return "BadChoice";
    case RejectReason::AfterCutoff: return "AfterCutoff";
  }
  return "InvalidBallot";
}

RejectReason reject_reason_from_string(std::string_view s) {
  for (auto r : {RejectReason::InvalidBallot, RejectReason::RevokedBallot, RejectReason::BadSignature,
                 RejectReason::BadChoice, RejectReason::AfterCutoff}) {
    if (to_string(r) == s) return r;
  }
  throw Error(ErrorCode::MalformedInput, "unknown reject reason '" + std::string(s) + "'");
}

AuthVerdict authenticate_vote(const VoteRecord& vote, const authority::CommitmentList& commitments,
                              std::size_t candidate_count, Millis now, Millis cutoff) {
  const authority::Commitment* c = commitments.find(vote.ballot_digest);
  if (c == nullptr) return RejectReason::InvalidBallot;
  if (!c->active()) return RejectReason::RevokedBallot;
  if (vote.signer_public.fingerprint() != c->ots_public_digest ||
      !sig::verify(vote.signer_public, vote.signing_payload(), vote.signature)) {
    return RejectReason::BadSignature;
  }
  if (vote.choice >= candidate_count) return RejectReason::BadChoice;
  if (vote.cast_at > cutoff || now > cutoff) return RejectReason::AfterCutoff;
  return std::nullopt;
}

// ---- submissions -----------------------------------------------------------

VoteSubmission VoteSubmission::make(const Id256& vid, const Id256& bid, std::uint32_t choice, Millis cast_at,
                                    sig::OtsKeyPair& key) {
  const Digest d = authority::ballot_digest(vid, bid);
  VoteSubmission s{vid, bid, choice, cast_at, {}, key.public_key()};
  s.signature = key.sign(VoteRecord::signing_payload(d, choice, cast_at));
  return s;
}

VoteRecord VoteSubmission::to_record() const {
  return VoteRecord{authority::ballot_digest(vid, bid), choice, cast_at, signature, signer_public};
}

Bytes VoteSubmission::encode() const {
  codec::Writer w;
  w.raw(vid.bytes()).raw(bid.bytes());
  to_record().encode(w);
  Bytes out = w.take();
  // The record encoding starts with the ballot digest; drop it, the ids
  // already determine it.
  out.erase(out.begin() + 64, out.begin() + 96);
  return out;
}

VoteSubmission VoteSubmission::decode(std::span<const std::uint8_t> bytes) {
  codec::Reader r(bytes);
  std::array<std::uint8_t, 32> a{};
  std::array<std::uint8_t, 32> b{};
  auto ra = r.raw(32);
  std::copy(ra.begin(), ra.end(), a.begin());
  auto rb = r.raw(32);
  std::copy(rb.begin(), rb.end(), b.begin());
  VoteSubmission s;
  s.vid = Id256(a);
  s.bid = Id256(b);
  s.choice = r.u32();
  s.cast_at = r.i64();
  for (auto& p : s.signature.revealed) {
    auto raw = r.raw(p.size());
    std::copy(raw.begin(), raw.end(), p.begin());
  }
  for (auto& d : s.signer_public.digests) {
    auto raw = r.raw(d.size());
    std::copy(raw.begin(), raw.end(), d.begin());
  }
  r.expect_done();
  return s;
}

nlohmann::json VoteSubmission::to_json() const {
  return {{"vid", vid.to_hex()},
          {"bid", bid.to_hex()},
          {"choice", choice},
          {"cast_at", cast_at},
          {"signature", signature.to_json()},
          {"signer_public", signer_public.to_json()}};
}

VoteSubmission VoteSubmission::from_json(const nlohmann::json& j) {
  VoteSubmission s;
  s.vid = Id256::from_hex(j.at("vid").get<std::string>());
  s.bid = Id256::from_hex(j.at("bid").get<std::string>());
  s.choice = j.at("choice").get<std::uint32_t>();
  s.cast_at = j.at("cast_at").get<Millis>();
  s.signature = sig::OtsSignature::from_json(j.at("signature"));
  s.signer_public = sig::OtsPublicKey::from_json(j.at("signer_public"));
  return s;
}

// ---- pool and proposals ----------------------------------------------------

PendingVote VotePool::pop_front() {
  PendingVote v = std::move(pending_.front());
  pending_.pop_front();
  return v;
}

void VotePool::requeue_front(std::vector<PendingVote> votes) {
  for (auto it = votes.rbegin(); it != votes.rend(); ++it) pending_.push_front(std::move(*it));
}

Block assemble_block(const Chain& chain, std::uint32_t miner, std::vector<VoteRecord> votes, Millis now) {
  Block b;
  b.height = chain.size();
  b.prev_hash = chain.tip_hash();
  b.body_hash = ledger::body_hash(votes);
  b.votes = std::move(votes);
  b.miner_id = miner;
  b.created_at = now;
  return b;
}

Proposal propose_block(VotePool& pool, const Chain& chain, std::uint32_t miner, const MinerRoster& roster,
                       std::uint64_t turn, const authority::CommitmentList& commitments,
                       const ElectionConfig& config, Millis now) {
  if (current_miner(roster, turn) != miner) {
    throw Error(ErrorCode::NotYourSlot, "miner " + std::to_string(miner) + " is not scheduled for this turn");
  }
  Proposal p;
  std::vector<VoteRecord> votes;
  while (!pool.empty() && votes.size() < config.max_votes_per_block) {
    PendingVote pv = pool.pop_front();
    const AuthVerdict v = authenticate_vote(pv.vote, commitments, config.candidates.size(), pv.arrival, config.cutoff);
    if (v) {
      p.rejected.push_back({pv.arrival, pv.vote.ballot_digest, *v, miner});
      continue;
    }
    votes.push_back(pv.vote);
    p.included.push_back(std::move(pv));
  }
  p.block = assemble_block(chain, miner, std::move(votes), now);
  return p;
}

std::vector<Rejection> flush_pool(VotePool& pool, const authority::CommitmentList& commitments,
                                  const ElectionConfig& config, std::uint32_t miner) {
  std::vector<Rejection> out;
  while (!pool.empty()) {
    PendingVote pv = pool.pop_front();
    const AuthVerdict v = authenticate_vote(pv.vote, commitments, config.candidates.size(), pv.arrival, config.cutoff);
    // A vote that passes every check but missed the last slot still arrived
    // too late to be recorded.
    out.push_back({pv.arrival, pv.vote.ballot_digest, v.value_or(RejectReason::AfterCutoff), miner});
  }
  return out;
}

// ---- keys ------------------------------------------------------------------

KeyRing::KeyRing(std::size_t miners, const QkdSettings& qkd, std::uint64_t seed, std::size_t auth_bytes)
    : qkd_(qkd), auth_bytes_(auth_bytes), entropy_(entropy::EntropySource::seeded(seed)) {
  for (std::uint32_t a = 0; a < miners; ++a) {
    for (std::uint32_t b = 0; b < miners; ++b) {
      if (a != b) keys_.emplace(std::make_pair(a, b), fresh());
    }
  }
}

KeyRing::Direction KeyRing::fresh() {
  const qkd::LinkParams lp = qkd_.link_params(0, auth_bytes_);
  const entropy::BitString bits = qkd::establish_shared_key(auth_bytes_ * 8, lp.channel, lp.bb84, entropy_);
  Bytes material = bits.pack();
  material.resize(auth_bytes_);
  return Direction{qkd::AuthKey(material), qkd::AuthKey(material)};
}

qkd::WcTag KeyRing::tag(std::uint32_t from, std::uint32_t to, std::span<const std::uint8_t> message) {
  auto it = keys_.find({from, to});
  if (it == keys_.end()) throw Error(ErrorCode::InvalidArgument, "no key between these miners");
  if (it->second.sender.remaining() == 0) {
    it->second = fresh();
    ++rekeys_;
  }
  return qkd::wc_tag(it->second.sender, message);
}

bool KeyRing::verify(std::uint32_t from, std::uint32_t to, std::span<const std::uint8_t> message,
                     const qkd::WcTag& tag) const {
  auto it = keys_.find({from, to});
  return it != keys_.end() && qkd::wc_verify(it->second.receiver, message, tag);
}

// ---- endorsement -----------------------------------------------------------

namespace {

bool block_acceptable(const Block& block, const Chain& chain, const authority::CommitmentList& commitments,
                      const ElectionConfig& config) {
  if (block.height != chain.size() || block.prev_hash != chain.tip_hash()) return false;
  if (block.body_hash != ledger::body_hash(block.votes)) return false;
  if (block.votes.empty() || block.votes.size() > config.max_votes_per_block) return false;
  if (block.created_at < chain.tip().created_at || block.created_at > config.cutoff) return false;
  if (block.miner_id >= config.miners.size()) return false;
  return std::all_of(block.votes.begin(), block.votes.end(), [&](const VoteRecord& v) {
    return !authenticate_vote(v, commitments, config.candidates.size(), block.created_at, config.cutoff);
  });
}

}  // namespace

ledger::Endorsement endorse(std::uint32_t endorser, const Block& block, const Chain& chain,
                            const authority::CommitmentList& commitments, const ElectionConfig& config,
                            KeyRing& keys) {
  ledger::Endorsement e;
  e.miner_id = endorser;
  e.block_digest = ledger::block_hash(block);
  e.verdict = block_acceptable(block, chain, commitments, config) ? ledger::Verdict::Approve : ledger::Verdict::Reject;
  if (endorser != block.miner_id) {
    e.tag = keys.tag(endorser, block.miner_id, ledger::Endorsement::tagged_bytes(endorser, e.block_digest, e.verdict));
  }
  return e;
}

CommitOutcome finalize_block(const Chain& chain, Block block, const std::vector<ledger::Endorsement>& endorsements,
                             const MinerRoster& roster, const KeyRing& keys) {
  const Digest digest = ledger::block_hash(block);
  std::map<std::uint32_t, ledger::Endorsement> accepted;
  for (const auto& e : endorsements) {
    if (e.block_digest != digest || e.miner_id >= roster.size() || accepted.count(e.miner_id)) continue;
    if (e.miner_id == block.miner_id) {
      if (e.tag) continue;
    } else if (!e.tag || !keys.verify(e.miner_id, block.miner_id,
                                      ledger::Endorsement::tagged_bytes(e.miner_id, digest, e.verdict), *e.tag)) {
      continue;
    }
    accepted.emplace(e.miner_id, e);
  }
  std::size_t approvals = 0;
  std::size_t rejections = 0;
  for (const auto& [id, e] : accepted) (e.verdict == ledger::Verdict::Approve ? approvals : rejections)++;

  if (approvals < roster.majority() || !accepted.count(block.miner_id)) {
    return CommitOutcome{false, chain, approvals, rejections,
                         Orphan{digest, block.height, block.miner_id, approvals, rejections, roster.size()}};
  }
  block.endorsements.clear();
  for (auto& [id, e] : accepted) block.endorsements.push_back(std::move(e));
  ledger::seal_endorsements(block);
  return CommitOutcome{true, chain.append(std::move(block)), approvals, rejections, std::nullopt};
}

CommitOutcome endorse_and_commit(const Proposal& proposal, const MinerRoster& roster, const Chain& chain,
                                 const authority::CommitmentList& commitments, const ElectionConfig& config,
                                 KeyRing& keys, VotePool& pool) {
  std::vector<ledger::Endorsement> ends;
  for (std::uint32_t m = 0; m < roster.size(); ++m) {
    if (roster.available[m]) ends.push_back(endorse(m, proposal.block, chain, commitments, config, keys));
  }
  CommitOutcome out = finalize_block(chain, proposal.block, ends, roster, keys);
  if (!out.committed) pool.requeue_front(proposal.included);
  return out;
}

nlohmann::json rejection_to_json(const Rejection& r) {
  return {{"arrival", r.arrival},
          {"ballot_digest", to_hex(r.ballot_digest)},
          {"reason", to_string(r.reason)},
          {"miner_id", r.miner_id}};
}

nlohmann::json orphan_to_json(const Orphan& o) {
  return {{"block_digest", to_hex(o.block_digest)}, {"height", o.height},     {"miner_id", o.miner_id},
          {"approvals", o.approvals},               {"rejections", o.rejections}, {"roster_size", o.roster_size}};
}

}  // namespace qvote::consensus
