#include "qvote/gateway.hpp"

#include <charconv>
#include <chrono>
#include <fstream>

#include "qvote/simnet.hpp"

namespace qvote::gateway {

using entropy::Id256;

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::CredentialRejected: return 403;
    case ErrorCode::NotRegistered: return 404;
    case ErrorCode::AlreadyRegistered:
    case ErrorCode::RegistrationClosed:
    case ErrorCode::ElectionClosed:
    case ErrorCode::BallotAlreadyActive:
    case ErrorCode::NoActiveBallot:
    case ErrorCode::ElectionOpen: return 409;
    case ErrorCode::KeyExhausted: return 429;
    default: return 400;
  }
}

ApiResponse from_error(const Error& e) {
  const std::string_view code = to_string(e.code());
  std::string reason = e.what();
  if (reason.starts_with(code) && reason.compare(code.size(), 2, ": ") == 0) reason.erase(0, code.size() + 2);
  return ApiResponse::error(status_for(e.code()), code, reason);
}

std::string path_segment(std::string_view path, std::string_view prefix) {
  return std::string(path.substr(prefix.size()));
}

qkd::WcTag tag_from_json(const nlohmann::json& j) {
  return {j.at("mask_index").get<std::uint32_t>(), j.at("value").get<std::uint64_t>()};
}

nlohmann::json tag_to_json(const qkd::WcTag& t) { return {{"mask_index", t.mask_index}, {"value", t.value}}; }

void write_file(const std::filesystem::path& path, std::string_view data) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Id256 open_id(qkd::LinkEnd& link, const nlohmann::json& package) {
  const auto opened = link.open(qkd::SealedMessage::from_json(package));
  if (!opened || opened->size() != 32) {
    throw Error(ErrorCode::CredentialRejected, "package failed authentication on the voter link");
  }
  std::array<std::uint8_t, 32> raw{};
  std::copy(opened->begin(), opened->end(), raw.begin());
  return Id256(raw);
}

}  // namespace

Millis system_now() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

bool accept_test_token(std::string_view credential) {
  return credential.size() > 6 && credential.starts_with("voter-");
}

ApiResponse ApiResponse::error(int status, std::string_view code, const std::string& reason) {
  return {status, {{"code", code}, {"reason", reason}}};
}

LiveElection::LiveElection(ElectionConfig config, Clock clock, std::filesystem::path data_dir,
                           authority::CredentialVerifier verifier)
    : config_((config.validate(), std::move(config))),
      clock_(std::move(clock)),
      data_dir_(std::move(data_dir)),
      verifier_(std::move(verifier)),
      va_(config_, entropy::EntropySource::beamsplitter(0.5, entropy::derive_seed(config_.rng_seed, "va"))),
      roster_(consensus::MinerRoster::from_config(config_)),
      keys_(config_.miners.size(), config_.qkd, entropy::derive_seed(config_.rng_seed, "miners")),
      chain_(config_),
      slots_(simnet::slot_times(config_)) {
  if (!data_dir_.empty()) {
    std::filesystem::create_directories(data_dir_);
    write_file(data_dir_ / "config.json", config_.to_json().dump(2));
    persist_chain();
  }
}

ApiResponse LiveElection::handle(std::string_view method, std::string_view path, const Query& query,
                                 std::string_view body) {
  try {
    if (method == "POST") {
      const nlohmann::json j = body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body);
      if (path == "/register") return register_voter(j);
      if (path == "/ballot") return ballot(j, false);
      if (path == "/reballot") return ballot(j, true);
      if (path == "/vote") return vote(j);
    } else if (method == "GET") {
      if (path == "/chain") return chain();
      if (path == "/commitments") return commitments();
      if (path == "/verify") return verify(query);
      if (path == "/tally") return tally();
      if (path == "/audit") return audit();
      if (path == "/status") return status();
      if (path.starts_with("/block/")) {
        const std::string h = path_segment(path, "/block/");
        std::uint64_t height = 0;
        const auto [p, ec] = std::from_chars(h.data(), h.data() + h.size(), height);
        if (ec != std::errc{} || p != h.data() + h.size()) {
          return ApiResponse::error(400, "MalformedInput", "block height must be a decimal integer");
        }
        return block(height);
      }
    } else {
      return ApiResponse::error(405, "MethodNotAllowed", std::string(method) + " is not supported");
    }
    return ApiResponse::error(404, "NotFound", "no route for " + std::string(method) + " " + std::string(path));
  } catch (const nlohmann::json::exception& e) {
    return ApiResponse::error(400, "MalformedInput", e.what());
  } catch (const Error& e) {
    return from_error(e);
  }
}

ApiResponse LiveElection::register_voter(const nlohmann::json& body) {
  const std::string credential = body.at("credential").get<std::string>();
  std::lock_guard lock(mu_);
  try {
    authority::Registration reg = va_.register_voter(credential, verifier_, clock_());
    // Simulated QKD handshake: the voter's endpoint of the freshly established
    // link rides along with the one-time-pad encrypted VID.
    return {200,
            {{"election_id", config_.election_id},
             {"candidates", config_.candidates},
             {"vid_package", reg.vid_package.to_json()},
             {"qkd_session", reg.voter_end.to_json()}}};
  } catch (const Error& e) {
    return from_error(e);
  }
}

ApiResponse LiveElection::ballot(const nlohmann::json& body, bool reissue) {
  const authority::BallotRequest request{Id256::from_hex(body.at("vid").get<std::string>()),
                                         digest_from_hex(body.at("ots").get<std::string>()),
                                         tag_from_json(body.at("tag"))};
  std::lock_guard lock(mu_);
  try {
    const Millis now = clock_();
    authority::BallotIssue issue = reissue ? va_.reissue_ballot(request, now) : va_.issue_ballot(request, now);
    return {200, {{"bid_package", issue.bid_package.to_json()}, {"commitment", to_hex(issue.commitment.digest)}}};
  } catch (const Error& e) {
    return from_error(e);
  }
}

ApiResponse LiveElection::vote(const nlohmann::json& body) {
  const consensus::VoteSubmission sub = consensus::VoteSubmission::from_json(body);
  const ledger::VoteRecord record = sub.to_record();
  std::lock_guard lock(mu_);
  const Millis now = clock_();
  if (sub.cast_at > now + kCastSkewMs || sub.cast_at < now - kCastSkewMs) {
    return ApiResponse::error(422, "BadTimestamp",
                              "cast_at " + std::to_string(sub.cast_at) + " is more than 60 s from service time " +
                                  std::to_string(now));
  }
  const auto verdict =
      consensus::authenticate_vote(record, va_.commitments(), config_.candidates.size(), now, config_.cutoff);
  if (verdict || final_tally_) {
    const auto reason = verdict.value_or(consensus::RejectReason::AfterCutoff);
    return ApiResponse::error(422, consensus::to_string(reason), "vote rejected at submission");
  }
  pool_.add(record, now);
  return {202, {{"status", "queued"}, {"ballot_digest", to_hex(record.ballot_digest)}, {"received_at", now}}};
}

ApiResponse LiveElection::chain() const {
  std::unique_lock lock(mu_);
  const ledger::Chain snapshot = chain_;
  lock.unlock();
  return {200, ledger::chain_to_json(snapshot)};
}

ApiResponse LiveElection::block(std::uint64_t height) const {
  std::unique_lock lock(mu_);
  if (height >= chain_.size()) {
    return ApiResponse::error(404, "NotFound", "chain height is " + std::to_string(chain_.size() - 1));
  }
  const ledger::Block b = chain_.at(height);
  lock.unlock();
  return {200, ledger::block_to_json(b)};
}

ApiResponse LiveElection::commitments() const {
  std::unique_lock lock(mu_);
  const authority::CommitmentList list = va_.publish_commitments();
  lock.unlock();
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& c : list.entries()) {
    entries.push_back({{"digest", to_hex(c.digest)},
                       {"ots", to_hex(c.ots_public_digest)},
                       {"status", c.active() ? "active" : "revoked"},
                       {"published_at", c.published_at},
                       {"revoked_at", c.revoked_at ? nlohmann::json(*c.revoked_at) : nlohmann::json(nullptr)}});
  }
  return {200,
          {{"digest", to_hex(list.digest())},
           {"count", list.size()},
           {"active", list.active_count()},
           {"entries", entries}}};
}

ApiResponse LiveElection::verify(const Query& query) const {
  const auto vid = query.find("vid");
  const auto bid = query.find("bid");
  if (vid == query.end() || bid == query.end()) {
    return ApiResponse::error(400, "MalformedInput", "vid and bid query parameters are required");
  }
  const Id256 v = Id256::from_hex(vid->second);
  const Id256 b = Id256::from_hex(bid->second);
  std::unique_lock lock(mu_);
  const ledger::Chain snapshot = chain_;
  const authority::CommitmentList list = va_.publish_commitments();
  const std::optional<tally::TallyResult> final_result = final_tally_;
  lock.unlock();
  const tally::TallyResult result = final_result ? *final_result : tally::tally(snapshot, list, config_);
  nlohmann::json out = audit::inclusions_to_json(audit::verify_my_vote(snapshot, result, v, b));
  out["final"] = final_result.has_value();
  return {200, out};
}

ApiResponse LiveElection::tally() const {
  std::lock_guard lock(mu_);
  if (!final_tally_) return ApiResponse::error(409, "ElectionOpen", "the tally is published after the cutoff");
  return {200, final_tally_->to_json()};
}

ApiResponse LiveElection::audit() const {
  std::unique_lock lock(mu_);
  if (!final_tally_) return ApiResponse::error(409, "ElectionOpen", "the audit runs on the published tally");
  const ledger::Chain snapshot = chain_;
  const authority::CommitmentList list = *final_commitments_;
  const tally::TallyResult announced = *final_tally_;
  const audit::MinerLogs logs{rejections_, orphans_};
  lock.unlock();
  return {200, audit::audit_election(snapshot, list, announced, config_, {}, &logs).to_json()};
}

ApiResponse LiveElection::status() const {
  std::lock_guard lock(mu_);
  const Millis now = clock_();
  std::string phase = "voting";
  if (now < config_.registration_deadline) {
    phase = "registration";
  } else if (final_tally_) {
    phase = "closed";
  } else if (now > config_.cutoff) {
    phase = "closing";
  } else if (now < config_.voting_open) {
    phase = "waiting";
  }
  nlohmann::json j = {{"election_id", config_.election_id},
                      {"candidates", config_.candidates},
                      {"now", now},
                      {"phase", phase},
                      {"registration_deadline", config_.registration_deadline},
                      {"voting_open", config_.voting_open},
                      {"cutoff", config_.cutoff},
                      {"slot_period", config_.slot_period},
                      {"height", chain_.size() - 1},
                      {"tip", to_hex(chain_.tip_hash())},
                      {"pending_votes", pool_.size()},
                      {"registered", va_.voter_count()},
                      {"commitments", va_.commitments().size()},
                      {"orphans", orphans_.size()}};
  j["next_slot"] = next_slot_ < slots_.size() ? nlohmann::json(slots_[next_slot_]) : nlohmann::json(nullptr);
  return {200, j};
}

std::size_t LiveElection::advance() {
  std::lock_guard lock(mu_);
  const Millis now = clock_();
  std::size_t ran = 0;
  // A slot runs once its start time has strictly passed, so a vote received
  // exactly at the cutoff still reaches the final slot.
  while (next_slot_ < slots_.size() && slots_[next_slot_] < now) {
    run_slot(slots_[next_slot_++]);
    ++ran;
  }
  if (next_slot_ == slots_.size() && !final_tally_) close();
  return ran;
}

bool LiveElection::closed() const {
  std::lock_guard lock(mu_);
  return final_tally_.has_value();
}

void LiveElection::run_slot(Millis at) {
  const std::uint64_t turn = rotation_.turn();
  const std::uint32_t proposer = rotation_.next(roster_);
  if (pool_.empty()) return;
  consensus::Proposal p =
      consensus::propose_block(pool_, chain_, proposer, roster_, turn, va_.commitments(), config_, at);
  rejections_.insert(rejections_.end(), p.rejected.begin(), p.rejected.end());
  if (p.block.votes.empty()) return;
  consensus::CommitOutcome out =
      consensus::endorse_and_commit(p, roster_, chain_, va_.commitments(), config_, keys_, pool_);
  if (out.committed) {
    chain_ = std::move(out.chain);
    persist_chain();
  } else if (out.orphan) {
    orphans_.push_back(*out.orphan);
  }
}

void LiveElection::close() {
  const auto late = consensus::flush_pool(pool_, va_.commitments(), config_, ledger::kGenesisMiner);
  rejections_.insert(rejections_.end(), late.begin(), late.end());
  final_commitments_ = va_.publish_commitments();
  final_tally_ = tally::tally(chain_, *final_commitments_, config_);
  if (data_dir_.empty()) return;
  persist_chain();
  write_file(data_dir_ / "tally.json", final_tally_->to_json().dump(2));
  if (va_.voter_count() > 0) {
    const authority::EncryptedDb db = va_.seal_database(config_.trustee_threshold, config_.trustee_count);
    write_file(data_dir_ / "voterdb.json", db.to_json().dump(2));
    write_file(data_dir_ / "shares.txt", sss::to_share_file(db.trustee_shares, config_.election_id));
  }
}

void LiveElection::persist_chain() const {
  if (data_dir_.empty()) return;
  const Bytes bin = ledger::encode_chain(chain_);
  write_file(data_dir_ / "chain.bin", {reinterpret_cast<const char*>(bin.data()), bin.size()});
  write_file(data_dir_ / "commitments.txt", va_.commitments().to_file());
}

// ---- voter session ---------------------------------------------------------

VoterSession VoterSession::from_registration(const nlohmann::json& response) {
  VoterSession s;
  s.election_id = response.at("election_id").get<std::string>();
  s.candidates = response.at("candidates").get<std::vector<std::string>>();
  s.link.emplace(qkd::LinkEnd::from_json(response.at("qkd_session")));
  s.vid = open_id(*s.link, response.at("vid_package"));
  return s;
}

nlohmann::json VoterSession::ballot_request(bool reissue, entropy::EntropySource& entropy) {
  if (!link) throw Error(ErrorCode::NotRegistered, "session has no voter link");
  key.emplace(sig::OtsKeyPair::generate(entropy));
  const auto req = authority::BallotRequest::make(*link, vid, key->public_key().fingerprint(), reissue);
  return {{"vid", vid.to_hex()}, {"ots", to_hex(req.ots_public_digest)}, {"tag", tag_to_json(req.tag)}};
}

void VoterSession::accept_ballot(const nlohmann::json& response) {
  if (!link) throw Error(ErrorCode::NotRegistered, "session has no voter link");
  bid = open_id(*link, response.at("bid_package"));
}

nlohmann::json VoterSession::vote(std::uint32_t choice, Millis cast_at) {
  if (!bid || !key) throw Error(ErrorCode::NoActiveBallot, "request a ballot first");
  return consensus::VoteSubmission::make(vid, *bid, choice, cast_at, *key).to_json();
}

nlohmann::json VoterSession::to_json() const {
  nlohmann::json j = {{"server", server}, {"election_id", election_id}, {"candidates", candidates}, {"vid", vid.to_hex()}};
  if (link) j["link"] = link->to_json();
  if (bid) j["bid"] = bid->to_hex();
  if (key) j["key"] = key->export_json();
  return j;
}

VoterSession VoterSession::from_json(const nlohmann::json& j) {
  VoterSession s;
  s.server = j.value("server", "");
  s.election_id = j.at("election_id").get<std::string>();
  s.candidates = j.at("candidates").get<std::vector<std::string>>();
  s.vid = Id256::from_hex(j.at("vid").get<std::string>());
  if (j.contains("link")) s.link.emplace(qkd::LinkEnd::from_json(j["link"]));
  if (j.contains("bid")) s.bid = Id256::from_hex(j["bid"].get<std::string>());
  if (j.contains("key")) s.key.emplace(sig::OtsKeyPair::import_json(j["key"]));
  return s;
}

}  // namespace qvote::gateway
