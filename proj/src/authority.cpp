#include "qvote/authority.hpp"

#include <sstream>

#include "qvote/codec.hpp"
#include "qvote/hash.hpp"

namespace qvote::authority {

Digest ballot_digest(const Id256& vid, const Id256& bid) {
  Sha256 h;
  h.update(vid.bytes()).update(bid.bytes());
  return h.finish();
}

std::string_view to_string(CommitmentStatus s) { return s == CommitmentStatus::Active ? "active" : "revoked"; }

// ---- commitment list -------------------------------------------------------

std::size_t CommitmentList::active_count() const {
  std::size_t n = 0;
  for (const auto& c : entries_) n += c.active() ? 1 : 0;
  return n;
}

const Commitment* CommitmentList::find(const Digest& digest) const {
  auto it = index_.find(digest);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

void CommitmentList::append(const Commitment& c) {
  if (index_.count(c.digest)) throw Error(ErrorCode::InvalidArgument, "commitment already published");
  index_.emplace(c.digest, entries_.size());
  entries_.push_back(c);
}

void CommitmentList::revoke(const Digest& digest, Millis at) {
  auto it = index_.find(digest);
  if (it == index_.end()) throw Error(ErrorCode::InvalidArgument, "unknown commitment");
  Commitment& c = entries_[it->second];
  if (!c.active()) throw Error(ErrorCode::InvalidArgument, "commitment already revoked");
  c.status = CommitmentStatus::Revoked;
  c.revoked_at = at;
}

std::string CommitmentList::to_file() const {
  std::ostringstream os;
  for (const auto& c : entries_) {
    os << to_hex(c.digest) << ' ' << to_hex(c.ots_public_digest) << ' ' << to_string(c.status) << ' '
       << c.published_at << ' ';
    if (c.revoked_at) {
      os << *c.revoked_at;
    } else {
      os << '-';
    }
    os << '\n';
  }
  return os.str();
}

CommitmentList CommitmentList::from_file(std::string_view text) {
  CommitmentList list;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string digest, ots, status, revoked;
    Millis published = 0;
    if (!(ls >> digest >> ots >> status >> published >> revoked)) {
      throw Error(ErrorCode::MalformedInput, "bad commitment record: " + line);
    }
    Commitment c;
    c.digest = digest_from_hex(digest);
    c.ots_public_digest = digest_from_hex(ots);
    c.published_at = published;
    if (status == "active") {
      c.status = CommitmentStatus::Active;
      if (revoked != "-") throw Error(ErrorCode::MalformedInput, "active commitment with revocation time");
    } else if (status == "revoked") {
      c.status = CommitmentStatus::Revoked;
      try {
        c.revoked_at = std::stoll(revoked);
      } catch (const std::exception&) {
        throw Error(ErrorCode::MalformedInput, "bad revocation time: " + revoked);
      }
    } else {
      throw Error(ErrorCode::MalformedInput, "bad commitment status: " + status);
    }
    list.append(c);
  }
  return list;
}

Digest CommitmentList::digest() const { return sha256(to_file()); }

// ---- ballot requests -------------------------------------------------------

Bytes BallotRequest::signed_bytes(const Id256& vid, const Digest& ots_public_digest, bool reissue) {
  codec::Writer w;
  w.str(reissue ? "qvote-reballot-request" : "qvote-ballot-request").bytes(vid.bytes()).bytes(ots_public_digest);
  return w.take();
}

BallotRequest BallotRequest::make(qkd::LinkEnd& voter_end, const Id256& vid, const Digest& ots_public_digest,
                                  bool reissue) {
  return BallotRequest{vid, ots_public_digest, voter_end.tag(signed_bytes(vid, ots_public_digest, reissue))};
}

// ---- encrypted database ----------------------------------------------------

namespace {

Bytes keystream_xor(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
  Bytes out(data.begin(), data.end());
  std::array<std::uint8_t, 8> counter{};
  for (std::size_t block = 0; block * 32 < out.size(); ++block) {
    for (int i = 0; i < 8; ++i) counter[i] = static_cast<std::uint8_t>(block >> (56 - 8 * i));
    Sha256 h;
    const Digest ks = h.update(key).update(counter).finish();
    for (std::size_t i = 0; i < 32 && block * 32 + i < out.size(); ++i) out[block * 32 + i] ^= ks[i];
  }
  return out;
}

Bytes encode_records(const std::vector<VoterRecord>& records) {
  codec::Writer w;
  w.str("qvote-voter-db-v1").u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    w.str(r.credential_id).bytes(r.vid.bytes());
    w.u8(r.active_bid ? 1 : 0);
    if (r.active_bid) w.bytes(r.active_bid->bytes());
    w.u32(static_cast<std::uint32_t>(r.revoked_bids.size()));
    for (const auto& b : r.revoked_bids) w.bytes(b.bytes());
    w.bytes(r.ots_public_digest);
  }
  return w.take();
}

Id256 read_id(codec::Reader& r) { return Id256(r.digest()); }

std::vector<VoterRecord> decode_records(std::span<const std::uint8_t> data) {
  codec::Reader r(data);
  if (r.str() != "qvote-voter-db-v1") throw Error(ErrorCode::MalformedInput, "not a voter database");
  const std::uint32_t n = r.u32();
  std::vector<VoterRecord> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    VoterRecord rec;
    rec.credential_id = r.str();
    rec.vid = read_id(r);
    if (r.u8() != 0) rec.active_bid = read_id(r);
    const std::uint32_t revoked = r.u32();
    for (std::uint32_t k = 0; k < revoked; ++k) rec.revoked_bids.push_back(read_id(r));
    rec.ots_public_digest = r.digest();
    out.push_back(std::move(rec));
  }
  r.expect_done();
  return out;
}

}  // namespace

nlohmann::json EncryptedDb::to_json() const {
  return {{"key_checksum", to_hex(key_checksum)}, {"ciphertext", to_hex(ciphertext)}};
}

EncryptedDb EncryptedDb::from_json(const nlohmann::json& j, sss::ShareSet shares) {
  EncryptedDb db;
  db.key_checksum = digest_from_hex(j.at("key_checksum").get<std::string>());
  db.ciphertext = from_hex(j.at("ciphertext").get<std::string>());
  db.trustee_shares = std::move(shares);
  return db;
}

std::vector<VoterRecord> open_database(const EncryptedDb& db, const sss::ShareSet& quorum) {
  const Bytes key = sss::reconstruct(quorum);
  if (sha256(key) != db.key_checksum) throw Error(ErrorCode::KeyChecksumMismatch, "reconstructed key is wrong");
  return decode_records(keystream_xor(key, db.ciphertext));
}

// ---- authority -------------------------------------------------------------

VotingAuthority::VotingAuthority(ElectionConfig config, entropy::EntropySource qrng)
    : config_(std::move(config)), qrng_(std::move(qrng)) {
  config_.validate();
}

Registration VotingAuthority::register_voter(std::string_view credential, const CredentialVerifier& verifier,
                                             Millis now) {
  if (now >= config_.registration_deadline) throw Error(ErrorCode::RegistrationClosed, "registration deadline passed");
  if (by_credential_.count(credential)) throw Error(ErrorCode::AlreadyRegistered, "credential already registered");
  if (!verifier || !verifier(credential)) throw Error(ErrorCode::CredentialRejected, "credential did not verify");

  Id256 vid = entropy::generate_id(qrng_);
  while (by_vid_.count(vid)) vid = entropy::generate_id(qrng_);

  qkd::Link link = qkd::establish_link(config_.qkd.link_params(kVoterPadBytes, kVoterAuthBytes), qrng_);
  qkd::SealedMessage package = link.a.seal(vid.bytes());

  VoterRecord rec{std::string(credential), vid, std::nullopt, {}, {}};
  by_credential_.emplace(std::string(credential), records_.size());
  by_vid_.emplace(vid, records_.size());
  records_.push_back(Entry{std::move(rec), std::move(link.a)});
  return Registration{std::move(link.b), std::move(package)};
}

VotingAuthority::Entry& VotingAuthority::checked_entry(const BallotRequest& request, bool reissue, Millis now) {
  auto it = by_vid_.find(request.vid);
  if (it == by_vid_.end()) throw Error(ErrorCode::NotRegistered, "unknown VID");
  if (now < config_.voting_open || now > config_.cutoff) throw Error(ErrorCode::ElectionClosed, "voting window closed");
  Entry& entry = records_[it->second];
  if (!entry.va_end.check(BallotRequest::signed_bytes(request.vid, request.ots_public_digest, reissue), request.tag)) {
    throw Error(ErrorCode::CredentialRejected, "ballot request failed authentication");
  }
  return entry;
}

BallotIssue VotingAuthority::issue(Entry& entry, const Digest& ots_public_digest, Millis now) {
  Id256 bid = entropy::generate_id(qrng_);
  Digest digest = ballot_digest(entry.record.vid, bid);
  while (commitments_.find(digest) != nullptr) {
    bid = entropy::generate_id(qrng_);
    digest = ballot_digest(entry.record.vid, bid);
  }
  qkd::SealedMessage package = entry.va_end.seal(bid.bytes());
  Commitment c{digest, ots_public_digest, CommitmentStatus::Active, now, std::nullopt};
  commitments_.append(c);
  entry.record.active_bid = bid;
  entry.record.ots_public_digest = ots_public_digest;
  return BallotIssue{std::move(package), c};
}

BallotIssue VotingAuthority::issue_ballot(const BallotRequest& request, Millis now) {
  Entry& entry = checked_entry(request, false, now);
  if (entry.record.active_bid) throw Error(ErrorCode::BallotAlreadyActive, "use reissue to replace a ballot");
  return issue(entry, request.ots_public_digest, now);
}

BallotIssue VotingAuthority::reissue_ballot(const BallotRequest& request, Millis now) {
  Entry& entry = checked_entry(request, true, now);
  if (!entry.record.active_bid) throw Error(ErrorCode::NoActiveBallot, "no ballot to replace");
  const Id256 old = *entry.record.active_bid;
  commitments_.revoke(ballot_digest(entry.record.vid, old), now);
  entry.record.revoked_bids.push_back(old);
  entry.record.active_bid.reset();
  return issue(entry, request.ots_public_digest, now);
}

EncryptedDb VotingAuthority::seal_database(std::uint32_t k, std::uint32_t n) {
  if (records_.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to seal");
  if (k < 1 || k > n || n > sss::kMaxShares) throw Error(ErrorCode::BadThreshold, "bad trustee threshold");
  std::vector<VoterRecord> plain;
  plain.reserve(records_.size());
  for (const auto& e : records_) plain.push_back(e.record);

  const Bytes key = qrng_.next_bytes(32);
  EncryptedDb db;
  db.ciphertext = keystream_xor(key, encode_records(plain));
  db.key_checksum = sha256(key);
  db.trustee_shares = sss::split(key, k, n, qrng_);
  return db;
}

std::vector<Id256> VotingAuthority::registered_vids() const {
  std::vector<Id256> out;
  for (const auto& e : records_) out.push_back(e.record.vid);
  return out;
}

}  // namespace qvote::authority
