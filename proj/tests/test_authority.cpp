#include <doctest.h>

#include <algorithm>
#include <functional>
#include <set>

#include "fixture.hpp"

using namespace qvote;
using namespace qvote::authority;
using fixture::open_id;

namespace {

std::optional<ErrorCode> code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

bool contains(const Bytes& hay, std::span<const std::uint8_t> needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

TEST_CASE("ballot digest is SHA-256 over vid then bid") {
  auto e = entropy::EntropySource::seeded(1);
  const auto vid = entropy::generate_id(e), bid = entropy::generate_id(e);
  Bytes cat(vid.bytes().begin(), vid.bytes().end());
  cat.insert(cat.end(), bid.bytes().begin(), bid.bytes().end());
  CHECK(ballot_digest(vid, bid) == sha256(cat));
  CHECK(ballot_digest(vid, bid) != ballot_digest(bid, vid));
}

TEST_CASE("registration") {
  fixture::Election el;
  auto& a = el.add_voter(false);
  auto& b = el.add_voter(false);
  CHECK(a.vid != b.vid);
  CHECK(el.va.voter_count() == 2);
  CHECK(el.va.commitments().size() == 0);

  CHECK(code_of([&] { el.va.register_voter("cred-0", fixture::any_voter, 1); }) == ErrorCode::AlreadyRegistered);
  CHECK(code_of([&] { el.va.register_voter("bogus", fixture::any_voter, 1); }) == ErrorCode::CredentialRejected);
  CHECK(code_of([&] { el.va.register_voter("cred-9", fixture::any_voter, el.config.registration_deadline); }) ==
        ErrorCode::RegistrationClosed);

  const auto vids = el.va.registered_vids();
  CHECK(vids.size() == 2);
  CHECK(std::count(vids.begin(), vids.end(), a.vid) == 1);
}

TEST_CASE("ballot issuance publishes one active commitment") {
  fixture::Election el;
  auto& v = el.add_voter();
  const auto& list = el.va.commitments();
  REQUIRE(list.size() == 1);
  const Commitment& c = list.entries()[0];
  CHECK(c.digest == ballot_digest(v.vid, v.bid));
  CHECK(c.ots_public_digest == v.key->public_key().fingerprint());
  CHECK(c.active());
  CHECK(c.published_at == el.config.voting_open);
  CHECK(list.find(c.digest) == &list.entries()[0]);
  CHECK(v.bid != v.vid);
}

TEST_CASE("ballot request errors") {
  fixture::Election el;
  auto& v = el.add_voter(false);
  const Digest fp{};

  SUBCASE("outside the voting window") {
    auto req = BallotRequest::make(v.link, v.vid, fp, false);
    CHECK(code_of([&] { el.va.issue_ballot(req, el.config.voting_open - 1); }) == ErrorCode::ElectionClosed);
  }
  SUBCASE("after cutoff") {
    auto req = BallotRequest::make(v.link, v.vid, fp, false);
    CHECK(code_of([&] { el.va.issue_ballot(req, el.config.cutoff + 1); }) == ErrorCode::ElectionClosed);
  }
  SUBCASE("unknown vid") {
    auto e = entropy::EntropySource::seeded(99);
    auto req = BallotRequest::make(v.link, entropy::generate_id(e), fp, false);
    CHECK(code_of([&] { el.va.issue_ballot(req, el.config.voting_open); }) == ErrorCode::NotRegistered);
  }
  SUBCASE("tag made for a different request") {
    auto req = BallotRequest::make(v.link, v.vid, fp, true);
    CHECK(code_of([&] { el.va.issue_ballot(req, el.config.voting_open); }) == ErrorCode::CredentialRejected);
  }
  SUBCASE("reissue without a ballot") {
    auto req = BallotRequest::make(v.link, v.vid, fp, true);
    CHECK(code_of([&] { el.va.reissue_ballot(req, el.config.voting_open); }) == ErrorCode::NoActiveBallot);
  }
  SUBCASE("second plain ballot") {
    el.ballot(v, false, el.config.voting_open);
    auto req = BallotRequest::make(v.link, v.vid, fp, false);
    CHECK(code_of([&] { el.va.issue_ballot(req, el.config.voting_open); }) == ErrorCode::BallotAlreadyActive);
  }
}

TEST_CASE("three reissues leave one active and three revoked") {
  fixture::Election el;
  auto& v = el.add_voter();
  std::vector<entropy::Id256> bids{v.bid};
  for (int i = 1; i <= 3; ++i) {
    el.ballot(v, true, el.config.voting_open + i * 100);
    bids.push_back(v.bid);
  }
  const auto& list = el.va.commitments();
  REQUIRE(list.size() == 4);
  CHECK(list.active_count() == 1);
  for (std::size_t i = 0; i < 4; ++i) {
    const Commitment* c = list.find(ballot_digest(v.vid, bids[i]));
    REQUIRE(c != nullptr);
    CHECK(c->active() == (i == 3));
    if (i < 3) {
      CHECK(c->revoked_at == el.config.voting_open + static_cast<Millis>(i + 1) * 100);
    }
  }
}

TEST_CASE("commitment soundness over many voters") {
  fixture::Election el;
  for (int i = 0; i < 30; ++i) el.add_voter();
  for (int i = 0; i < 30; i += 3) el.ballot(el.voters[i], true, el.config.voting_open + 5);
  const auto& list = el.va.commitments();
  CHECK(list.size() == 40);
  CHECK(list.active_count() == 30);
  // Each voter's current pair is published and active; nothing else is.
  std::set<Digest> current;
  for (auto& v : el.voters) {
    const Digest d = ballot_digest(v.vid, v.bid);
    current.insert(d);
    REQUIRE(list.find(d));
    CHECK(list.find(d)->active());
  }
  for (const auto& c : list.entries()) CHECK(c.active() == (current.count(c.digest) == 1));
}

TEST_CASE("commitment list file round trip and append-only rules") {
  fixture::Election el;
  for (int i = 0; i < 4; ++i) el.add_voter();
  el.ballot(el.voters[1], true, el.config.voting_open + 7);
  const CommitmentList& list = el.va.commitments();
  const CommitmentList back = CommitmentList::from_file(list.to_file());
  CHECK(back == list);
  CHECK(back.digest() == list.digest());
  CHECK(back.digest() == sha256(list.to_file()));

  CommitmentList copy = list;
  CHECK(code_of([&] { copy.append(list.entries()[0]); }) == ErrorCode::InvalidArgument);
  const Digest revoked = list.entries()[1].digest;
  CHECK_FALSE(list.entries()[1].active());
  CHECK(code_of([&] { copy.revoke(revoked, 1); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { copy.revoke(Digest{}, 1); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { CommitmentList::from_file("nonsense\n"); }) == ErrorCode::MalformedInput);
}

TEST_CASE("sealed voter database opens with a quorum only") {
  fixture::Election el;
  for (int i = 0; i < 6; ++i) el.add_voter();
  el.ballot(el.voters[2], true, el.config.voting_open + 3);
  const EncryptedDb db = el.va.seal_database(3, 5);
  CHECK(db.trustee_shares.shares.size() == 5);

  for (const auto& v : el.voters) {
    CHECK_FALSE(contains(db.ciphertext, v.vid.bytes()));
    CHECK_FALSE(contains(db.ciphertext, as_bytes(v.vid.to_hex())));
    CHECK_FALSE(contains(db.ciphertext, as_bytes(v.credential)));
  }

  const auto records = open_database(db, db.trustee_shares.subset({0, 2, 4}));
  REQUIRE(records.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& r = records[i];
    const auto& v = el.voters[i];
    CHECK(r.credential_id == v.credential);
    CHECK(r.vid == v.vid);
    REQUIRE(r.active_bid);
    CHECK(*r.active_bid == v.bid);
    CHECK(r.revoked_bids.size() == (i == 2 ? 1u : 0u));
  }
  CHECK(open_database(db, db.trustee_shares.subset({1, 3, 4})) == records);
  CHECK(code_of([&] { open_database(db, db.trustee_shares.subset({0, 1})); }) == ErrorCode::InsufficientShares);

  // JSON header plus separately stored shares.
  const auto text = db.to_json().dump();
  const auto shares = sss::from_share_file(sss::to_share_file(db.trustee_shares, "e"));
  const EncryptedDb back = EncryptedDb::from_json(nlohmann::json::parse(text), shares);
  CHECK(open_database(back, back.trustee_shares.subset({0, 1, 2})) == records);

  EncryptedDb wrong = db;
  wrong.key_checksum[0] ^= 1;
  CHECK(code_of([&] { open_database(wrong, db.trustee_shares.subset({0, 1, 2})); }) == ErrorCode::KeyChecksumMismatch);
}

TEST_CASE("sealing needs voters and a sane threshold") {
  fixture::Election el;
  CHECK(code_of([&] { el.va.seal_database(3, 5); }) == ErrorCode::InvalidArgument);
  el.add_voter();
  CHECK(code_of([&] { el.va.seal_database(4, 3); }) == ErrorCode::BadThreshold);
  CHECK(code_of([&] { el.va.seal_database(0, 3); }) == ErrorCode::BadThreshold);
}

TEST_CASE("vid package does not open on another voter's link") {
  fixture::Election el;
  auto r1 = el.va.register_voter("cred-a", fixture::any_voter, 0);
  auto r2 = el.va.register_voter("cred-b", fixture::any_voter, 0);
  CHECK_FALSE(r2.voter_end.open(r1.vid_package).has_value());
  CHECK(r1.voter_end.open(r1.vid_package).has_value());
}
