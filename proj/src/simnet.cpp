#include "qvote/simnet.hpp"

#include <fstream>

#include "qvote/hash.hpp"

namespace qvote::simnet {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ScenarioInvalid, what); }

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::uint64_t draw(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
  return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

Millis draw_ms(std::mt19937_64& rng, Millis lo, Millis hi) {
  return static_cast<Millis>(draw(rng, static_cast<std::uint64_t>(lo), static_cast<std::uint64_t>(hi)));
}

bool chance(std::mt19937_64& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

std::string voter_name(std::size_t i) { return "voter:" + std::to_string(i); }
std::string miner_name(std::uint32_t m) { return "miner:" + std::to_string(m); }

Bytes json_bytes(const nlohmann::json& j) {
  const std::string s = j.dump();
  return Bytes(s.begin(), s.end());
}

nlohmann::json bytes_json(const Bytes& b) { return nlohmann::json::parse(b.begin(), b.end()); }

Bytes encode_endorsement(const ledger::Endorsement& e) {
  codec::Writer w;
  w.u32(e.miner_id).bytes(e.block_digest).u8(static_cast<std::uint8_t>(e.verdict)).u8(e.tag ? 1 : 0);
  if (e.tag) w.u32(e.tag->mask_index).u64(e.tag->value);
  return w.take();
}

ledger::Endorsement decode_endorsement(const Bytes& b) {
  codec::Reader r(b);
  ledger::Endorsement e;
  e.miner_id = r.u32();
  e.block_digest = r.digest();
  e.verdict = r.u8() ? ledger::Verdict::Approve : ledger::Verdict::Reject;
  if (r.u8()) {
    qkd::WcTag t;
    t.mask_index = r.u32();
    t.value = r.u64();
    e.tag = t;
  }
  r.expect_done();
  return e;
}

}  // namespace

// ---- configuration ---------------------------------------------------------

void NetConfig::validate() const {
  if (latency_min < 0 || latency_max < latency_min) invalid("latency range must satisfy 0 <= min <= max");
  if (!is_probability(drop_prob)) invalid("drop_prob must lie in [0,1]");
  if (!is_probability(adversary.replay_votes)) invalid("replay_votes must lie in [0,1]");
  if (!is_probability(adversary.tamper_in_flight)) invalid("tamper_in_flight must lie in [0,1]");
}

nlohmann::json NetConfig::to_json() const {
  return {{"latency_ms", {latency_min, latency_max}},
          {"drop_prob", drop_prob},
          {"adversary",
           {{"replay_votes", adversary.replay_votes},
            {"flood_duplicates", adversary.flood_duplicates},
            {"tamper_in_flight", adversary.tamper_in_flight}}},
          {"seed", seed}};
}

NetConfig NetConfig::from_json(const nlohmann::json& j) {
  NetConfig n;
  if (j.contains("latency_ms")) {
    const auto& l = j["latency_ms"];
    if (!l.is_array() || l.size() != 2) invalid("latency_ms must be [min, max]");
    n.latency_min = l[0].get<Millis>();
    n.latency_max = l[1].get<Millis>();
  }
  n.drop_prob = j.value("drop_prob", n.drop_prob);
  if (j.contains("adversary")) {
    const auto& a = j["adversary"];
    n.adversary.replay_votes = a.value("replay_votes", 0.0);
    n.adversary.flood_duplicates = a.value("flood_duplicates", std::size_t{0});
    n.adversary.tamper_in_flight = a.value("tamper_in_flight", 0.0);
  }
  n.seed = j.value("seed", n.seed);
  n.validate();
  return n;
}

std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::Register: return "register";
    case MessageKind::VidPackage: return "vid_package";
    case MessageKind::BallotRequest: return "ballot_request";
    case MessageKind::ReballotRequest: return "reballot_request";
    case MessageKind::BidPackage: return "bid_package";
    case MessageKind::Vote: return "vote";
    case MessageKind::BlockProposal: return "block_proposal";
    case MessageKind::Endorsement: return "endorsement";
  }
  return "vote";
}

nlohmann::json LogEntry::to_json() const {
  nlohmann::json j = {{"seq", seq},   {"sent_at", sent_at},         {"from", from},
                      {"to", to},     {"kind", to_string(kind)},   {"size", size},
                      {"payload", to_hex(payload_digest)}};
  j["arrives_at"] = arrives_at ? nlohmann::json(*arrives_at) : nlohmann::json(nullptr);
  if (tampered) j["tampered"] = true;
  if (injected) j["injected"] = true;
  return j;
}

// ---- transport -------------------------------------------------------------

Network::Network(const NetConfig& config) : config_(config), rng_(entropy::derive_seed(config.seed, "net")) {
  config_.validate();
}

Millis Network::latency() { return draw_ms(rng_, config_.latency_min, config_.latency_max); }

std::optional<Millis> Network::deliver(Message& msg, Millis now) {
  LogEntry e;
  e.seq = log_.size();
  e.sent_at = now;
  e.from = msg.from;
  e.to = msg.to;
  e.kind = msg.kind;
  e.size = msg.payload.size();
  e.payload_digest = sha256(msg.payload);
  if (!msg.reliable && chance(rng_, config_.drop_prob)) {
    log_.push_back(std::move(e));
    return std::nullopt;
  }
  if (!msg.reliable && msg.kind == MessageKind::Vote && chance(rng_, config_.adversary.tamper_in_flight) &&
      msg.payload.size() > consensus::VoteSubmission::kSignedFieldsOffset) {
    const std::size_t span = msg.payload.size() - consensus::VoteSubmission::kSignedFieldsOffset;
    const std::size_t byte = consensus::VoteSubmission::kSignedFieldsOffset + draw(rng_, 0, span - 1);
    msg.payload[byte] ^= static_cast<std::uint8_t>(1u << draw(rng_, 0, 7));
    e.tampered = true;
  }
  const Millis arrival = now + latency();
  e.arrives_at = arrival;
  log_.push_back(std::move(e));
  return arrival;
}

Millis Network::inject(const Message& msg, Millis now) {
  LogEntry e;
  e.seq = log_.size();
  e.sent_at = now;
  e.from = msg.from;
  e.to = msg.to;
  e.kind = msg.kind;
  e.size = msg.payload.size();
  e.payload_digest = sha256(msg.payload);
  e.injected = true;
  const Millis arrival = now + latency();
  e.arrives_at = arrival;
  log_.push_back(std::move(e));
  return arrival;
}

void EventLoop::at(Millis time, std::function<void()> fn) {
  if (time < now_) throw Error(ErrorCode::InvalidArgument, "cannot schedule into the past");
  queue_.push(Event{time, seq_++, std::move(fn)});
}

void EventLoop::run() {
  while (!queue_.empty()) {
    Event e = queue_.top();
    queue_.pop();
    now_ = e.time;
    ++processed_;
    e.fn();
  }
}

// ---- scenarios -------------------------------------------------------------

std::size_t Scenario::voter_count() const {
  std::size_t n = 0;
  for (const auto& g : voters) n += g.count;
  return n;
}

void Scenario::validate() const {
  try {
    election.validate();
  } catch (const Error& e) {
    invalid(std::string("election: ") + e.what());
  }
  net.validate();
  const std::size_t ncand = election.candidates.size();
  for (const auto& g : voters) {
    if (g.choice >= ncand) invalid("voter choice " + std::to_string(g.choice) + " is not a candidate");
    if (g.coerced_choice && *g.coerced_choice >= ncand) invalid("coerced choice is not a candidate");
  }
  for (const auto& u : unavailable) {
    if (u.miner >= election.miners.size()) invalid("unavailability names an unknown miner");
    if (u.from_slot > u.to_slot) invalid("unavailability window is reversed");
  }
  if (faults.malicious_proposer && faults.malicious_proposer->miner >= election.miners.size()) {
    invalid("malicious proposer is not on the roster");
  }
  const Millis period = election.slot_period;
  if (4 * net.latency_max >= period) invalid("a round trip must fit in half a slot period");
  if (election.cutoff - election.voting_open < 12 * period) invalid("the voting window must span at least 12 slots");
  const auto n = static_cast<Millis>(voter_count());
  if (n > 0 && 2 * election.registration_deadline / (n + 2) <= net.latency_max) {
    invalid("registration window too short for " + std::to_string(n) + " voters");
  }
}

nlohmann::json Scenario::to_json() const {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : voters) {
    nlohmann::json j = {{"count", g.count}, {"choice", g.choice}};
    if (g.coerced_choice) j["coerced_choice"] = *g.coerced_choice;
    if (g.late) j["late"] = true;
    if (g.duplicates) j["duplicates"] = g.duplicates;
    if (g.abstain) j["abstain"] = true;
    groups.push_back(std::move(j));
  }
  nlohmann::json un = nlohmann::json::array();
  for (const auto& u : unavailable) un.push_back({{"miner", u.miner}, {"from_slot", u.from_slot}, {"to_slot", u.to_slot}});
  nlohmann::json f = {{"forged_votes", faults.forged_votes}};
  if (faults.malicious_proposer) {
    f["malicious_proposer"] = {{"miner", faults.malicious_proposer->miner}, {"forged", faults.malicious_proposer->forged}};
  }
  return {{"name", name}, {"election", election.to_json()}, {"voters", groups},
          {"unavailable", un}, {"faults", f},                 {"net", net.to_json()}};
}

Scenario Scenario::from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    s.name = j.value("name", s.name);
    nlohmann::json election = ElectionConfig::example().to_json();
    if (j.contains("election")) election.merge_patch(j["election"]);
    try {
      s.election = ElectionConfig::from_json(election);
    } catch (const Error& e) {
      invalid(std::string("election: ") + e.what());
    }
    auto choice_of = [&](const nlohmann::json& c) -> std::uint32_t {
      if (c.is_number_unsigned()) return c.get<std::uint32_t>();
      const auto name = c.get<std::string>();
      const auto& cands = s.election.candidates;
      const auto it = std::find(cands.begin(), cands.end(), name);
      if (it == cands.end()) invalid("unknown candidate '" + name + "'");
      return static_cast<std::uint32_t>(it - cands.begin());
    };
    for (const auto& g : j.value("voters", nlohmann::json::array())) {
      VoterGroup v;
      v.count = g.at("count").get<std::size_t>();
      v.choice = choice_of(g.at("choice"));
      if (g.contains("coerced_choice")) v.coerced_choice = choice_of(g["coerced_choice"]);
      v.late = g.value("late", false);
      v.duplicates = g.value("duplicates", std::size_t{0});
      v.abstain = g.value("abstain", false);
      s.voters.push_back(v);
    }
    for (const auto& u : j.value("unavailable", nlohmann::json::array())) {
      s.unavailable.push_back(
          {u.at("miner").get<std::uint32_t>(), u.at("from_slot").get<std::uint64_t>(), u.at("to_slot").get<std::uint64_t>()});
    }
    if (j.contains("faults")) {
      const auto& f = j["faults"];
      s.faults.forged_votes = f.value("forged_votes", std::size_t{0});
      if (f.contains("malicious_proposer")) {
        const auto& m = f["malicious_proposer"];
        s.faults.malicious_proposer = MaliciousProposer{m.at("miner").get<std::uint32_t>(), m.value("forged", std::size_t{1})};
      }
    }
    if (j.contains("net")) s.net = NetConfig::from_json(j["net"]);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("scenario: ") + e.what());
  }
}

Scenario Scenario::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open scenario file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    invalid(path.string() + ": " + e.what());
  }
  Scenario s = from_json(j);
  if (!j.contains("name")) s.name = path.stem().string();
  return s;
}

void Scenario::reseed(std::uint64_t seed) {
  election.rng_seed = seed;
  net.seed = seed;
}

std::vector<Millis> slot_times(const ElectionConfig& config) {
  std::vector<Millis> out;
  for (Millis t = config.voting_open; t <= config.cutoff; t += config.slot_period) out.push_back(t);
  if (out.empty() || out.back() != config.cutoff) out.push_back(config.cutoff);
  return out;
}

sig::OtsSignature sign_again(const sig::OtsKeyPair& key, std::span<const std::uint8_t> message) {
  const Digest d = sha256(message);
  sig::OtsSignature s;
  for (std::size_t i = 0; i < sig::kDigestBits; ++i) s.revealed[i] = key.secret()[2 * i + (sig::digest_bit(d, i) ? 1 : 0)];
  return s;
}

// ---- transcript ------------------------------------------------------------

Digest Transcript::digest() const {
  Sha256 h;
  auto part = [&](std::string_view label, std::span<const std::uint8_t> data) {
    codec::Writer w;
    w.str(label).u64(data.size());
    h.update(w.data()).update(data);
  };
  part("chain", ledger::encode_chain(chain));
  part("commitments", as_bytes(commitments.to_file()));
  part("tally", as_bytes(tally.to_json().dump()));
  part("audit", as_bytes(audit.to_json().dump()));
  std::string log;
  for (const auto& m : messages) log += m.to_json().dump() + "\n";
  part("messages", as_bytes(log));
  return h.finish();
}

void Transcript::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, std::string_view data) {
    std::ofstream out(dir / name, std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + (dir / name).string());
  };
  put("chain.json", ledger::chain_to_json(chain).dump(1));
  const Bytes bin = ledger::encode_chain(chain);
  put("chain.bin", {reinterpret_cast<const char*>(bin.data()), bin.size()});
  put("commitments.txt", commitments.to_file());
  put("tally.json", tally.to_json().dump(2));
  put("audit.json", audit.to_json().dump(2));
  std::string lines;
  for (const auto& m : messages) lines += m.to_json().dump() + "\n";
  put("messages.jsonl", lines);
  lines.clear();
  for (const auto& r : rejections) lines += consensus::rejection_to_json(r).dump() + "\n";
  put("rejections.jsonl", lines);
  lines.clear();
  for (const auto& o : orphans) lines += consensus::orphan_to_json(o).dump() + "\n";
  put("orphans.jsonl", lines);
  put("config.json", config.to_json().dump(2));
  put("voterdb.json", sealed_db.to_json().dump(2));
  put("shares.txt", sss::to_share_file(sealed_db.trustee_shares, config.election_id));
  put("digest.txt", to_hex(digest()) + "\n");
}

// ---- the election run ------------------------------------------------------

namespace {

class Runner {
 public:
  Runner(const Scenario& scenario, const NetConfig& net)
      : sc_(scenario),
        cfg_(scenario.election),
        net_(net),
        script_(entropy::derive_seed(net.seed, "script")),
        va_(cfg_, entropy::EntropySource::beamsplitter(0.5, entropy::derive_seed(cfg_.rng_seed, "va"))),
        roster_(consensus::MinerRoster::from_config(cfg_)),
        keys_(cfg_.miners.size(), cfg_.qkd, entropy::derive_seed(cfg_.rng_seed, "miners")),
        chain_(cfg_),
        forger_(entropy::EntropySource::seeded(entropy::derive_seed(cfg_.rng_seed, "forger"))) {}

  Transcript run();

 private:
  struct Voter {
    VoterTrace trace;
    const VoterGroup* group = nullptr;
    entropy::EntropySource entropy;
    std::optional<qkd::LinkEnd> link;
    std::optional<sig::OtsKeyPair> key;
    bool reballoted = false;
  };

  Millis now() const { return loop_.now(); }
  Millis span() const { return cfg_.cutoff - cfg_.voting_open; }

  void send(Message msg, std::function<void(const Message&)> on_arrival);
  void schedule_voters();
  void on_vid(std::size_t i, const Message& m);
  void request_ballot(std::size_t i, bool reissue);
  void on_bid(std::size_t i, const Message& m);
  void cast(std::size_t i, std::uint32_t choice);
  void cast_duplicates(std::size_t i, Millis first_cast_at, std::uint32_t first_choice, Millis earliest_claim);
  void on_vote(const Message& m);
  void send_forgeries();
  consensus::VoteSubmission forge();
  void on_slot(std::uint64_t slot);
  void on_decision();

  const Scenario& sc_;
  ElectionConfig cfg_;
  Network net_;
  std::mt19937_64 script_;
  EventLoop loop_;
  authority::VotingAuthority va_;
  consensus::MinerRoster roster_;
  consensus::Rotation rotation_;
  consensus::KeyRing keys_;
  consensus::VotePool pool_;
  ledger::Chain chain_;
  entropy::EntropySource forger_;
  std::vector<Voter> voters_;

  struct InFlight {
    consensus::Proposal proposal;
    std::vector<ledger::Endorsement> endorsements;
  };
  std::optional<InFlight> inflight_;
  bool malicious_done_ = false;

  std::vector<std::uint32_t> proposers_;
  std::vector<consensus::Rejection> rejections_;
  std::vector<consensus::Orphan> orphans_;
};

void Runner::send(Message msg, std::function<void(const Message&)> on_arrival) {
  const auto arrival = net_.deliver(msg, now());
  if (!arrival) return;
  loop_.at(*arrival, [msg = std::move(msg), fn = std::move(on_arrival)] { fn(msg); });
}

void Runner::schedule_voters() {
  const std::size_t n = sc_.voter_count();
  std::size_t i = 0;
  for (const auto& g : sc_.voters) {
    for (std::size_t k = 0; k < g.count; ++k, ++i) {
      Voter v{VoterTrace{}, &g, entropy::EntropySource::seeded(entropy::derive_seed(cfg_.rng_seed, "voter", i)),
              std::nullopt, std::nullopt, false};
      char buf[32];
      std::snprintf(buf, sizeof buf, "voter-credential-%05zu", i);
      v.trace.credential = buf;
      voters_.push_back(std::move(v));
      const Millis t = cfg_.registration_deadline * static_cast<Millis>(i + 1) / static_cast<Millis>(n + 2);
      loop_.at(t, [this, i] {
        Message m{voter_name(i), "va", MessageKind::Register, Bytes(voters_[i].trace.credential.begin(),
                                                                   voters_[i].trace.credential.end()), true};
        send(std::move(m), [this, i](const Message& msg) {
          const std::string cred(msg.payload.begin(), msg.payload.end());
          auto verifier = [](std::string_view c) { return c.starts_with("voter-credential-"); };
          authority::Registration reg = va_.register_voter(cred, verifier, now());
          // The link end arrives over the simulated quantum channel itself.
          voters_[i].link.emplace(std::move(reg.voter_end));
          send(Message{"va", voter_name(i), MessageKind::VidPackage, json_bytes(reg.vid_package.to_json()), true},
               [this, i](const Message& pkg) { on_vid(i, pkg); });
        });
      });
    }
  }
}

void Runner::on_vid(std::size_t i, const Message& m) {
  Voter& v = voters_[i];
  const auto opened = v.link->open(qkd::SealedMessage::from_json(bytes_json(m.payload)));
  if (!opened || opened->size() != 32) throw Error(ErrorCode::InvalidArgument, "voter could not open its VID");
  std::array<std::uint8_t, 32> raw{};
  std::copy(opened->begin(), opened->end(), raw.begin());
  v.trace.vid = entropy::Id256(raw);
  v.trace.registered = true;
  const Millis t = cfg_.voting_open + draw_ms(script_, 0, span() / 6);
  loop_.at(t, [this, i] { request_ballot(i, false); });
}

void Runner::request_ballot(std::size_t i, bool reissue) {
  Voter& v = voters_[i];
  v.key.emplace(sig::OtsKeyPair::generate(v.entropy));
  const auto req = authority::BallotRequest::make(*v.link, v.trace.vid, v.key->public_key().fingerprint(), reissue);
  const nlohmann::json body = {{"vid", req.vid.to_hex()},
                               {"ots", to_hex(req.ots_public_digest)},
                               {"tag", {{"mask_index", req.tag.mask_index}, {"value", req.tag.value}}}};
  send(Message{voter_name(i), "va", reissue ? MessageKind::ReballotRequest : MessageKind::BallotRequest,
               json_bytes(body), true},
       [this, i, reissue](const Message& msg) {
         const auto j = bytes_json(msg.payload);
         authority::BallotRequest r{entropy::Id256::from_hex(j.at("vid").get<std::string>()),
                                    digest_from_hex(j.at("ots").get<std::string>()),
                                    qkd::WcTag{j["tag"].at("mask_index").get<std::uint32_t>(),
                                               j["tag"].at("value").get<std::uint64_t>()}};
         const authority::BallotIssue issue = reissue ? va_.reissue_ballot(r, now()) : va_.issue_ballot(r, now());
         send(Message{"va", voter_name(i), MessageKind::BidPackage, json_bytes(issue.bid_package.to_json()), true},
              [this, i](const Message& pkg) { on_bid(i, pkg); });
       });
}

void Runner::on_bid(std::size_t i, const Message& m) {
  Voter& v = voters_[i];
  const auto opened = v.link->open(qkd::SealedMessage::from_json(bytes_json(m.payload)));
  if (!opened || opened->size() != 32) throw Error(ErrorCode::InvalidArgument, "voter could not open its BID");
  std::array<std::uint8_t, 32> raw{};
  std::copy(opened->begin(), opened->end(), raw.begin());
  v.trace.bids.push_back(entropy::Id256(raw));

  const VoterGroup& g = *v.group;
  if (g.abstain) return;
  const Millis w = span();
  if (g.late) {
    loop_.at(cfg_.cutoff + draw_ms(script_, 1, 2 * cfg_.slot_period), [this, i] { cast(i, voters_[i].group->choice); });
    return;
  }
  if (g.coerced_choice && !v.reballoted) {
    // Coerced vote first, then the free re-vote under a fresh ballot.
    const Millis t = now() + draw_ms(script_, 1, w / 6);
    loop_.at(t, [this, i] {
      cast(i, *voters_[i].group->coerced_choice);
      voters_[i].reballoted = true;
      loop_.at(now() + draw_ms(script_, 1, span() / 12), [this, i] { request_ballot(i, true); });
    });
    return;
  }
  const Millis t = now() + draw_ms(script_, 1, g.coerced_choice ? w / 6 : w / 3);
  loop_.at(t, [this, i] {
    const Millis bid_time = now();
    cast(i, voters_[i].group->choice);
    voters_[i].trace.intended = voters_[i].group->choice;
    if (voters_[i].group->duplicates > 0) cast_duplicates(i, now(), voters_[i].group->choice, bid_time);
  });
}

void Runner::cast(std::size_t i, std::uint32_t choice) {
  Voter& v = voters_[i];
  const auto sub = consensus::VoteSubmission::make(v.trace.vid, v.trace.bids.back(), choice, now(), *v.key);
  send(Message{voter_name(i), "pool", MessageKind::Vote, sub.encode(), false},
       [this](const Message& msg) { on_vote(msg); });
}

void Runner::cast_duplicates(std::size_t i, Millis first_cast_at, std::uint32_t first_choice, Millis earliest_claim) {
  // The voter turns adversary: extra copies under the same ballot, each with
  // its own claimed time and choice, signed from the exported key material.
  Millis best_at = first_cast_at;
  std::optional<std::uint32_t> best_choice = first_choice;
  const std::size_t ncand = cfg_.candidates.size();
  for (std::size_t d = 0; d < voters_[i].group->duplicates; ++d) {
    const Millis claim = draw_ms(script_, earliest_claim - cfg_.slot_period, first_cast_at + span() / 6);
    const auto choice = static_cast<std::uint32_t>(draw(script_, 0, ncand - 1));
    const Millis send_at = now() + draw_ms(script_, 1, span() / 6);
    if (claim < best_at) {
      best_at = claim;
      best_choice = choice;
    } else if (claim == best_at && choice != best_choice) {
      best_choice = std::nullopt;  // decided by chain order
    }
    loop_.at(send_at, [this, i, claim, choice] {
      Voter& v = voters_[i];
      consensus::VoteSubmission s{v.trace.vid, v.trace.bids.back(), choice, claim, {}, v.key->public_key()};
      s.signature = sign_again(*v.key, ledger::VoteRecord::signing_payload(
                                           authority::ballot_digest(s.vid, s.bid), choice, claim));
      send(Message{voter_name(i), "pool", MessageKind::Vote, s.encode(), false},
           [this](const Message& msg) { on_vote(msg); });
    });
  }
  voters_[i].trace.intended = best_choice;
}

void Runner::on_vote(const Message& m) {
  const auto sub = consensus::VoteSubmission::decode(m.payload);
  pool_.add(sub.to_record(), now());
  const Adversary& adv = net_.config().adversary;
  if (m.from != "adversary" && chance(net_.rng(), adv.replay_votes)) {
    const Millis t = now() + draw_ms(net_.rng(), cfg_.slot_period, 5 * cfg_.slot_period);
    for (std::size_t c = 0; c < 1 + adv.flood_duplicates; ++c) {
      loop_.at(t, [this, payload = m.payload] {
        Message copy{"adversary", "pool", MessageKind::Vote, payload, false};
        const Millis arrival = net_.inject(copy, now());
        loop_.at(arrival, [this, copy] { on_vote(copy); });
      });
    }
  }
}

consensus::VoteSubmission Runner::forge() {
  sig::OtsKeyPair key = sig::OtsKeyPair::generate(forger_);
  const auto vid = entropy::generate_id(forger_);
  const auto bid = entropy::generate_id(forger_);
  const auto choice = static_cast<std::uint32_t>(forger_.uniform(cfg_.candidates.size()));
  return consensus::VoteSubmission::make(vid, bid, choice, now(), key);
}

void Runner::send_forgeries() {
  for (std::size_t f = 0; f < sc_.faults.forged_votes; ++f) {
    loop_.at(cfg_.voting_open + draw_ms(script_, 0, span() / 2), [this] {
      send(Message{"forger", "pool", MessageKind::Vote, forge().encode(), false},
           [this](const Message& msg) { on_vote(msg); });
    });
  }
}

void Runner::on_slot(std::uint64_t slot) {
  for (std::uint32_t m = 0; m < roster_.size(); ++m) {
    bool up = true;
    for (const auto& u : sc_.unavailable) {
      if (u.miner == m && slot >= u.from_slot && slot <= u.to_slot) up = false;
    }
    roster_.set_available(m, up);
  }
  const std::uint64_t turn = rotation_.turn();
  const std::uint32_t proposer = rotation_.next(roster_);
  proposers_.push_back(proposer);

  const auto& mal = sc_.faults.malicious_proposer;
  const bool malicious = mal && mal->miner == proposer && !malicious_done_;
  if (pool_.empty() && !malicious) return;

  consensus::Proposal p =
      consensus::propose_block(pool_, chain_, proposer, roster_, turn, va_.commitments(), cfg_, now());
  rejections_.insert(rejections_.end(), p.rejected.begin(), p.rejected.end());
  if (malicious) {
    malicious_done_ = true;
    std::vector<ledger::VoteRecord> votes = p.block.votes;
    for (std::size_t f = 0; f < mal->forged; ++f) {
      const auto rec = forge().to_record();
      votes.push_back(rec);
      p.included.push_back({rec, now()});
    }
    p.block = consensus::assemble_block(chain_, proposer, std::move(votes), now());
  }
  if (p.block.votes.empty()) return;

  inflight_.emplace();
  inflight_->proposal = std::move(p);
  const ledger::Block& block = inflight_->proposal.block;
  ledger::Endorsement self = consensus::endorse(proposer, block, chain_, va_.commitments(), cfg_, keys_);
  if (malicious) self.verdict = ledger::Verdict::Approve;
  inflight_->endorsements.push_back(self);

  const Bytes encoded = ledger::encode_block(block);
  for (std::uint32_t m = 0; m < roster_.size(); ++m) {
    if (m == proposer || !roster_.available[m]) continue;
    send(Message{miner_name(proposer), miner_name(m), MessageKind::BlockProposal, encoded, false},
         [this, m, proposer](const Message& msg) {
           const ledger::Block b = ledger::decode_block(msg.payload);
           const ledger::Endorsement e = consensus::endorse(m, b, chain_, va_.commitments(), cfg_, keys_);
           send(Message{miner_name(m), miner_name(proposer), MessageKind::Endorsement, encode_endorsement(e), false},
                [this](const Message& reply) {
                  if (inflight_) inflight_->endorsements.push_back(decode_endorsement(reply.payload));
                });
         });
  }
  loop_.at(now() + cfg_.slot_period / 2, [this] { on_decision(); });
}

void Runner::on_decision() {
  InFlight f = std::move(*inflight_);
  inflight_.reset();
  consensus::CommitOutcome out = consensus::finalize_block(chain_, f.proposal.block, f.endorsements, roster_, keys_);
  if (out.committed) {
    chain_ = std::move(out.chain);
  } else {
    orphans_.push_back(*out.orphan);
    pool_.requeue_front(std::move(f.proposal.included));
  }
}

Transcript Runner::run() {
  schedule_voters();
  send_forgeries();
  const auto slots = slot_times(cfg_);
  for (std::uint64_t k = 0; k < slots.size(); ++k) loop_.at(slots[k], [this, k] { on_slot(k); });
  loop_.run();

  const std::uint32_t last = proposers_.empty() ? ledger::kGenesisMiner : proposers_.back();
  const auto late = consensus::flush_pool(pool_, va_.commitments(), cfg_, last);
  rejections_.insert(rejections_.end(), late.begin(), late.end());

  authority::CommitmentList commitments = va_.publish_commitments();
  tally::TallyResult result = tally::tally(chain_, commitments, cfg_);
  audit::KnownSecrets secrets;
  for (const auto& v : voters_) secrets.credentials.push_back(v.trace.credential);
  secrets.vids = va_.registered_vids();
  const audit::MinerLogs logs{rejections_, orphans_};
  audit::AuditReport report = audit::audit_election(chain_, commitments, result, cfg_, secrets, &logs);

  Transcript t{.scenario = sc_.name,
               .config = cfg_,
               .chain = chain_,
               .commitments = std::move(commitments),
               .tally = std::move(result),
               .audit = std::move(report),
               .messages = net_.log(),
               .proposers = proposers_,
               .rejections = rejections_,
               .orphans = orphans_,
               .sealed_db = va_.voter_count() > 0 ? va_.seal_database(cfg_.trustee_threshold, cfg_.trustee_count)
                                                  : authority::EncryptedDb{},
               .voters = {},
               .secrets = std::move(secrets)};
  for (auto& v : voters_) t.voters.push_back(std::move(v.trace));
  return t;
}

}  // namespace

Transcript run_scenario(const Scenario& scenario, const NetConfig& net) {
  Scenario s = scenario;
  s.net = net;
  s.validate();
  Runner runner(s, net);
  return runner.run();
}

}  // namespace qvote::simnet
