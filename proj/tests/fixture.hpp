#pragma once

// Small election built directly on the authority, used by the consensus,
// tally and audit tests.

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <doctest.h>

#include "qvote/audit.hpp"
#include "qvote/hash.hpp"

namespace fixture {

using namespace qvote;

inline bool any_voter(std::string_view c) { return c.starts_with("cred-"); }

struct Voter {
  std::string credential;
  qkd::LinkEnd link;
  entropy::Id256 vid;
  entropy::Id256 bid;
  std::optional<sig::OtsKeyPair> key;
};

inline entropy::Id256 open_id(qkd::LinkEnd& link, const qkd::SealedMessage& m) {
  const auto bytes = link.open(m);
  REQUIRE(bytes.has_value());
  REQUIRE(bytes->size() == 32);
  std::array<std::uint8_t, 32> raw{};
  std::copy(bytes->begin(), bytes->end(), raw.begin());
  return entropy::Id256(raw);
}

class Election {
 public:
  explicit Election(ElectionConfig cfg = ElectionConfig::example(), std::uint64_t seed = 5)
      : config(std::move(cfg)),
        va(config, entropy::EntropySource::seeded(seed)),
        voter_entropy(entropy::EntropySource::seeded(seed + 1000)) {}

  /// Registers (before the deadline) and takes a first ballot at voting_open.
  Voter& add_voter(bool with_ballot = true) {
    const std::string cred = "cred-" + std::to_string(voters.size());
    authority::Registration reg = va.register_voter(cred, any_voter, 0);
    Voter v{cred, std::move(reg.voter_end), {}, {}, std::nullopt};
    v.vid = open_id(v.link, reg.vid_package);
    voters.push_back(std::move(v));
    if (with_ballot) ballot(voters.back(), false, config.voting_open);
    return voters.back();
  }

  void ballot(Voter& v, bool reissue, Millis now) {
    v.key.emplace(sig::OtsKeyPair::generate(voter_entropy));
    const auto req = authority::BallotRequest::make(v.link, v.vid, v.key->public_key().fingerprint(), reissue);
    const auto issue = reissue ? va.reissue_ballot(req, now) : va.issue_ballot(req, now);
    v.bid = open_id(v.link, issue.bid_package);
  }

  ledger::VoteRecord vote(Voter& v, std::uint32_t choice, Millis cast_at) {
    return consensus::VoteSubmission::make(v.vid, v.bid, choice, cast_at, *v.key).to_record();
  }

  /// A record under a key unrelated to any commitment.
  ledger::VoteRecord forged(std::uint32_t choice, Millis cast_at) {
    auto key = sig::OtsKeyPair::generate(voter_entropy);
    const auto vid = entropy::generate_id(voter_entropy);
    const auto bid = entropy::generate_id(voter_entropy);
    return consensus::VoteSubmission::make(vid, bid, choice, cast_at, key).to_record();
  }

  /// Appends the votes as one block every miner approves, without running
  /// the miners' checks, so tally tests can place any record on chain.
  void commit(std::vector<ledger::VoteRecord> votes, Millis now) {
    const auto n = static_cast<std::uint32_t>(config.miners.size());
    const std::uint32_t miner = static_cast<std::uint32_t>((chain.size() - 1) % n);
    ledger::Block b = consensus::assemble_block(chain, miner, std::move(votes), now);
    const Digest d = ledger::block_hash(b);
    for (std::uint32_t m = 0; m < n; ++m) {
      ledger::Endorsement e{m, d, ledger::Verdict::Approve, std::nullopt};
      if (m != miner) e.tag = keys.tag(m, miner, ledger::Endorsement::tagged_bytes(m, d, e.verdict));
      b.endorsements.push_back(e);
    }
    ledger::seal_endorsements(b);
    chain = chain.append(std::move(b));
  }

  ElectionConfig config;
  authority::VotingAuthority va;
  entropy::EntropySource voter_entropy;
  std::deque<Voter> voters;  // stable references across add_voter
  ledger::Chain chain{config};
  consensus::KeyRing keys{config.miners.size(), config.qkd, 77};
};

}  // namespace fixture
