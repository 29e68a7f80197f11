#include <doctest.h>

#include <random>

#include "fixture.hpp"

using namespace qvote;
using namespace qvote::consensus;

namespace {

// Walks the all-available order 0,1,2,... and drops each entry whose miner
// is down at the slot it would fill.
std::vector<std::uint32_t> deletion_oracle(std::size_t n, std::size_t slots,
                                           const std::function<bool(std::uint32_t, std::size_t)>& up) {
  std::vector<std::uint32_t> out;
  std::uint64_t cursor = 0;
  for (std::size_t s = 0; s < slots; ++s) {
    while (!up(static_cast<std::uint32_t>(cursor % n), s)) ++cursor;
    out.push_back(static_cast<std::uint32_t>(cursor % n));
    ++cursor;
  }
  return out;
}

std::vector<std::uint32_t> rotate(MinerRoster roster, std::size_t slots,
                                  const std::function<bool(std::uint32_t, std::size_t)>& up) {
  Rotation rot;
  std::vector<std::uint32_t> out;
  for (std::size_t s = 0; s < slots; ++s) {
    for (std::uint32_t m = 0; m < roster.size(); ++m) roster.set_available(m, up(m, s));
    out.push_back(rot.next(roster));
  }
  return out;
}

std::optional<ErrorCode> code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("current_miner examples") {
  auto roster = MinerRoster::from_config(ElectionConfig::example());
  REQUIRE(roster.size() == 7);
  CHECK(roster.majority() == 4);
  CHECK(current_miner(roster, 0) == 0);
  CHECK(current_miner(roster, 9) == 2);
  roster.set_available(3, false);
  CHECK(current_miner(roster, 3) == 4);
  CHECK(current_miner(roster, 10) == 4);
  roster.set_available(6, false);
  CHECK(current_miner(roster, 6) == 0);
  for (std::uint32_t m = 0; m < 7; ++m) roster.set_available(m, false);
  CHECK(code_of([&] { current_miner(roster, 0); }) == ErrorCode::NoMinerAvailable);
  Rotation rot;
  CHECK(code_of([&] { rot.next(roster); }) == ErrorCode::NoMinerAvailable);
}

TEST_CASE("rotation is fair when everyone is up") {
  const auto roster = MinerRoster::from_config(ElectionConfig::example());
  const auto seq = rotate(roster, 700, [](auto, auto) { return true; });
  std::vector<int> hits(7);
  for (std::size_t s = 0; s < seq.size(); ++s) {
    CHECK(seq[s] == s % 7);
    ++hits[seq[s]];
  }
  for (int h : hits) CHECK(h == 100);
}

TEST_CASE("miner 3 down for slots 10..20 just loses its turns") {
  const auto roster = MinerRoster::from_config(ElectionConfig::example());
  auto up = [](std::uint32_t m, std::size_t s) { return !(m == 3 && s >= 10 && s <= 20); };
  const auto seq = rotate(roster, 60, up);
  CHECK(seq == deletion_oracle(7, 60, up));
  // Spelled out: all-available order with 3's occurrences inside the window removed.
  const std::vector<std::uint32_t> head{0, 1, 2, 3, 4, 5, 6, 0, 1, 2, 4, 5, 6, 0, 1, 2, 4, 5, 6, 0, 1, 2, 3};
  CHECK(std::vector<std::uint32_t>(seq.begin(), seq.begin() + head.size()) == head);
}

TEST_CASE("deletion property under random outages") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 9;
    const std::size_t slots = 50;
    std::vector<std::vector<bool>> table(slots, std::vector<bool>(n));
    for (auto& row : table) {
      for (std::size_t m = 0; m < n; ++m) row[m] = rng() % 4 != 0;
      row[rng() % n] = true;
    }
    auto up = [&](std::uint32_t m, std::size_t s) { return static_cast<bool>(table[s][m]); };
    MinerRoster roster;
    roster.miners.resize(n);
    roster.available.assign(n, true);
    CHECK(rotate(roster, slots, up) == deletion_oracle(n, slots, up));
  }
}

TEST_CASE("vote authentication reasons in order") {
  fixture::Election el;
  auto& v = el.add_voter();
  const auto& cfg = el.config;
  const Millis t = cfg.voting_open + 100;
  auto list = [&] { return el.va.publish_commitments(); };

  CHECK_FALSE(authenticate_vote(el.vote(v, 1, t), list(), 3, t + 10, cfg.cutoff));

  SUBCASE("unknown ballot") {
    CHECK(authenticate_vote(el.forged(0, t), list(), 3, t, cfg.cutoff) == RejectReason::InvalidBallot);
  }
  SUBCASE("revoked ballot beats a bad choice") {
    auto& w = el.add_voter();
    auto old = el.vote(w, 7, t);
    el.ballot(w, true, t + 1);
    CHECK(authenticate_vote(old, list(), 3, t + 2, cfg.cutoff) == RejectReason::RevokedBallot);
  }
  SUBCASE("signature under the committed key only") {
    auto& w = el.add_voter();
    auto rec = el.vote(w, 1, t);
    ledger::VoteRecord bad = rec;
    bad.choice = 2;
    CHECK(authenticate_vote(bad, list(), 3, t, cfg.cutoff) == RejectReason::BadSignature);
    // A valid signature from an uncommitted key on the right digest.
    auto other = sig::OtsKeyPair::generate(el.voter_entropy);
    ledger::VoteRecord swapped = rec;
    swapped.signer_public = other.public_key();
    swapped.signature = other.sign(rec.signing_payload());
    CHECK(authenticate_vote(swapped, list(), 3, t, cfg.cutoff) == RejectReason::BadSignature);
  }
  SUBCASE("choice range") {
    auto& w = el.add_voter();
    CHECK(authenticate_vote(el.vote(w, 3, t), list(), 3, t, cfg.cutoff) == RejectReason::BadChoice);
  }
  SUBCASE("cutoff applies to cast_at and receipt") {
    auto& w = el.add_voter();
    auto rec = el.vote(w, 0, cfg.cutoff);
    CHECK_FALSE(authenticate_vote(rec, list(), 3, cfg.cutoff, cfg.cutoff));
    CHECK(authenticate_vote(rec, list(), 3, cfg.cutoff + 1, cfg.cutoff) == RejectReason::AfterCutoff);
    auto& x = el.add_voter();
    CHECK(authenticate_vote(el.vote(x, 0, cfg.cutoff + 1), list(), 3, cfg.cutoff, cfg.cutoff) ==
          RejectReason::AfterCutoff);
  }
}

TEST_CASE("submission wire form") {
  fixture::Election el;
  auto& v = el.add_voter();
  const auto s = VoteSubmission::make(v.vid, v.bid, 2, el.config.voting_open + 1, *v.key);
  const auto back = VoteSubmission::decode(s.encode());
  CHECK(back.to_record() == s.to_record());
  CHECK(VoteSubmission::from_json(s.to_json()).to_record() == s.to_record());
  CHECK(s.to_record().ballot_digest == authority::ballot_digest(v.vid, v.bid));
  Bytes enc = s.encode();
  enc.pop_back();
  CHECK_THROWS_AS(VoteSubmission::decode(enc), Error);
}

TEST_CASE("pool keeps arrival order and requeues at the front") {
  fixture::Election el;
  VotePool pool;
  for (int i = 0; i < 4; ++i) pool.add(el.forged(0, i), 100 + i);
  auto a = pool.pop_front();
  auto b = pool.pop_front();
  CHECK(a.arrival == 100);
  pool.requeue_front({a, b});
  REQUIRE(pool.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(pool.pending()[i].arrival == 100 + i);
}

TEST_CASE("proposal filters the pool and respects the slot") {
  fixture::Election el;
  for (int i = 0; i < 3; ++i) el.add_voter();
  const Millis t = el.config.voting_open + 10;
  VotePool pool;
  pool.add(el.vote(el.voters[0], 0, t), t + 1);
  pool.add(el.forged(1, t), t + 2);
  pool.add(el.vote(el.voters[1], 5, t), t + 3);
  pool.add(el.vote(el.voters[2], 2, t), t + 4);
  const auto roster = MinerRoster::from_config(el.config);
  const auto list = el.va.publish_commitments();

  CHECK(code_of([&] { propose_block(pool, el.chain, 1, roster, 0, list, el.config, t + 50); }) ==
        ErrorCode::NotYourSlot);
  CHECK(pool.size() == 4);

  const Proposal p = propose_block(pool, el.chain, 0, roster, 0, list, el.config, t + 50);
  CHECK(pool.empty());
  REQUIRE(p.block.votes.size() == 2);
  CHECK(p.block.votes[0].choice == 0);
  CHECK(p.block.votes[1].choice == 2);
  REQUIRE(p.rejected.size() == 2);
  CHECK(p.rejected[0].reason == RejectReason::InvalidBallot);
  CHECK(p.rejected[1].reason == RejectReason::BadChoice);
  CHECK(p.rejected[1].arrival == t + 3);
  CHECK(p.block.height == 1);
  CHECK(p.block.prev_hash == el.chain.tip_hash());
  CHECK(p.block.body_hash == ledger::body_hash(p.block.votes));

  KeyRing keys(7, el.config.qkd, 1);
  const auto out = endorse_and_commit(p, roster, el.chain, list, el.config, keys, pool);
  CHECK(out.committed);
  CHECK(out.approvals == 7);
  CHECK(out.chain.size() == 2);
  CHECK(ledger::validate_chain(out.chain).valid);
  const auto& ends = out.chain.tip().endorsements;
  REQUIRE(ends.size() == 7);
  for (const auto& e : ends) CHECK(e.tag.has_value() == (e.miner_id != 0));
}

TEST_CASE("block cap") {
  auto cfg = ElectionConfig::example();
  cfg.max_votes_per_block = 2;
  fixture::Election el(cfg);
  for (int i = 0; i < 5; ++i) el.add_voter();
  VotePool pool;
  for (int i = 0; i < 5; ++i) pool.add(el.vote(el.voters[i], 0, cfg.voting_open + i), cfg.voting_open + 10 + i);
  const auto roster = MinerRoster::from_config(cfg);
  const Proposal p = propose_block(pool, el.chain, 0, roster, 0, el.va.commitments(), cfg, cfg.voting_open + 100);
  CHECK(p.block.votes.size() == 2);
  CHECK(pool.size() == 3);
}

TEST_CASE("commit needs a strict majority of the full roster") {
  fixture::Election el;
  el.add_voter();
  const Millis t = el.config.voting_open + 10;
  VotePool pool;
  pool.add(el.vote(el.voters[0], 1, t), t + 1);
  auto roster = MinerRoster::from_config(el.config);
  const auto list = el.va.publish_commitments();
  KeyRing keys(7, el.config.qkd, 2);

  SUBCASE("four of seven available") {
    for (std::uint32_t m : {4u, 5u, 6u}) roster.set_available(m, false);
    const Proposal p = propose_block(pool, el.chain, 0, roster, 0, list, el.config, t + 50);
    const auto out = endorse_and_commit(p, roster, el.chain, list, el.config, keys, pool);
    CHECK(out.committed);
    CHECK(out.approvals == 4);
    CHECK(pool.empty());
  }
  SUBCASE("three of seven available orphans and requeues") {
    for (std::uint32_t m : {3u, 4u, 5u, 6u}) roster.set_available(m, false);
    const Proposal p = propose_block(pool, el.chain, 0, roster, 0, list, el.config, t + 50);
    CHECK(pool.empty());
    const auto out = endorse_and_commit(p, roster, el.chain, list, el.config, keys, pool);
    CHECK_FALSE(out.committed);
    CHECK(out.approvals == 3);
    REQUIRE(out.orphan);
    CHECK(out.orphan->roster_size == 7);
    CHECK(out.chain.size() == 1);
    REQUIRE(pool.size() == 1);
    CHECK(pool.pending()[0].arrival == t + 1);
  }
}

TEST_CASE("finalize ignores bad tags, duplicates and foreign digests") {
  fixture::Election el;
  el.add_voter();
  const Millis t = el.config.voting_open + 10;
  VotePool pool;
  pool.add(el.vote(el.voters[0], 1, t), t + 1);
  const auto roster = MinerRoster::from_config(el.config);
  const auto list = el.va.publish_commitments();
  KeyRing keys(7, el.config.qkd, 3);
  const Proposal p = propose_block(pool, el.chain, 0, roster, 0, list, el.config, t + 50);

  std::vector<ledger::Endorsement> ends;
  for (std::uint32_t m = 0; m < 4; ++m) ends.push_back(endorse(m, p.block, el.chain, list, el.config, keys));
  CHECK(finalize_block(el.chain, p.block, ends, roster, keys).committed);

  SUBCASE("forged tag") {
    ends[3].tag->value ^= 1;
    CHECK_FALSE(finalize_block(el.chain, p.block, ends, roster, keys).committed);
  }
  SUBCASE("same miner twice") {
    ends[3] = ends[2];
    CHECK_FALSE(finalize_block(el.chain, p.block, ends, roster, keys).committed);
  }
  SUBCASE("endorsement for another block") {
    ends[3].block_digest[0] ^= 1;
    CHECK_FALSE(finalize_block(el.chain, p.block, ends, roster, keys).committed);
  }
  SUBCASE("proposer missing") {
    ends[0] = endorse(4, p.block, el.chain, list, el.config, keys);
    CHECK_FALSE(finalize_block(el.chain, p.block, ends, roster, keys).committed);
  }
}

TEST_CASE("malicious proposer with a forged vote is orphaned") {
  fixture::Election el;
  for (int i = 0; i < 3; ++i) el.add_voter();
  const Millis t = el.config.voting_open + 10;
  VotePool pool;
  for (int i = 0; i < 3; ++i) pool.add(el.vote(el.voters[i], 0, t), t + 1 + i);
  const auto roster = MinerRoster::from_config(el.config);
  const auto list = el.va.publish_commitments();
  KeyRing keys(7, el.config.qkd, 4);

  Proposal p = propose_block(pool, el.chain, 0, roster, 0, list, el.config, t + 50);
  REQUIRE(p.block.votes.size() == 3);
  auto votes = p.block.votes;
  votes.push_back(el.forged(1, t));
  p.block = assemble_block(el.chain, 0, votes, t + 50);

  std::vector<ledger::Endorsement> ends;
  ends.push_back({0, ledger::block_hash(p.block), ledger::Verdict::Approve, std::nullopt});
  for (std::uint32_t m = 1; m < 7; ++m) ends.push_back(endorse(m, p.block, el.chain, list, el.config, keys));
  const auto out = finalize_block(el.chain, p.block, ends, roster, keys);
  CHECK_FALSE(out.committed);
  CHECK(out.rejections >= 4);
  CHECK(out.rejections == 6);
  CHECK(out.approvals == 1);

  pool.requeue_front(p.included);
  CHECK(pool.size() == 3);
  // The honest votes go through on the next slot.
  const Proposal q = propose_block(pool, el.chain, 1, roster, 1, list, el.config, t + 1050);
  const auto ok = endorse_and_commit(q, roster, el.chain, list, el.config, keys, pool);
  CHECK(ok.committed);
  CHECK(ok.chain.vote_count() == 3);
}

TEST_CASE("empty blocks are not endorsed") {
  fixture::Election el;
  const auto roster = MinerRoster::from_config(el.config);
  KeyRing keys(7, el.config.qkd, 5);
  const Block b = assemble_block(el.chain, 0, {}, el.config.voting_open + 1);
  CHECK(endorse(1, b, el.chain, el.va.commitments(), el.config, keys).verdict == ledger::Verdict::Reject);
}

TEST_CASE("flush_pool rejects every leftover") {
  fixture::Election el;
  el.add_voter();
  VotePool pool;
  pool.add(el.vote(el.voters[0], 0, el.config.cutoff - 5), el.config.cutoff - 1);
  pool.add(el.forged(0, el.config.cutoff - 5), el.config.cutoff - 1);
  const auto rej = flush_pool(pool, el.va.commitments(), el.config, 2);
  REQUIRE(rej.size() == 2);
  CHECK(rej[0].reason == RejectReason::AfterCutoff);
  CHECK(rej[1].reason == RejectReason::InvalidBallot);
  CHECK(pool.empty());
}

TEST_CASE("key ring re-establishes exhausted directions") {
  KeyRing keys(2, QkdSettings{}, 6, 8 + 2 * 16);
  const Bytes msg{1, 2, 3};
  for (int i = 0; i < 5; ++i) {
    const auto tag = keys.tag(0, 1, msg);
    CHECK(keys.verify(0, 1, msg, tag));
    CHECK_FALSE(keys.verify(1, 0, msg, tag));
  }
  CHECK(keys.rekeys() >= 1);
}
