#include "qvote/config.hpp"

#include <set>

#include "qvote/codec.hpp"
#include "qvote/hash.hpp"

namespace qvote {

std::string_view to_string(Representation r) {
  switch (r) {
    case Representation::CandidatePool: return "candidate_pool";
    case Representation::VotingPool: return "voting_pool";
    case Representation::CivilSociety: return "civil_society";
    case Representation::Independent: return "independent";
  }
  return "independent";
}

Representation representation_from_string(std::string_view s) {
  if (s == "candidate_pool") return Representation::CandidatePool;
  if (s == "voting_pool") return Representation::VotingPool;
  if (s == "civil_society") return Representation::CivilSociety;
  if (s == "independent") return Representation::Independent;
  throw Error(ErrorCode::MalformedInput, "unknown representation '" + std::string(s) + "'");
}

qkd::LinkParams QkdSettings::link_params(std::size_t pad_bytes, std::size_t auth_bytes) const {
  qkd::LinkParams p;
  p.channel.noise_prob = noise_prob;
  p.bb84 = {pulses, qber_abort_threshold, sample_fraction};
  p.pad_bytes = pad_bytes;
  p.auth_bytes = auth_bytes;
  return p;
}

void ElectionConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (election_id.empty() || election_id.find_first_of(" \t\r\n") != std::string::npos) {
    fail("election_id must be a nonempty token without whitespace");
  }
  if (candidates.empty()) fail("at least one candidate is required");
  if (!(registration_deadline <= voting_open && voting_open < cutoff)) {
    fail("times must satisfy registration_deadline <= voting_open < cutoff");
  }
  if (slot_period <= 0) fail("slot_period must be positive");
  if (miners.size() < 3) fail("the miner roster needs at least 3 miners");
  std::set<std::string> names;
  for (const auto& m : miners) {
    if (!names.insert(m.name).second) fail("duplicate miner name '" + m.name + "'");
  }
  if (trustee_threshold < 1 || trustee_threshold > trustee_count || trustee_count > 255) {
    fail("trustees must satisfy 1 <= k <= n <= 255");
  }
  if (max_votes_per_block == 0 || max_votes_per_block > kMaxVotesPerBlock) fail("max_votes_per_block must be 1..1000");
  qkd::ChannelModel{qkd.noise_prob, qkd::NoEavesdropper{}}.validate();
}

Digest ElectionConfig::digest() const {
  codec::Writer w;
  w.str("qvote-election-config-v1").str(election_id).u32(static_cast<std::uint32_t>(candidates.size()));
  for (const auto& c : candidates) w.str(c);
  w.i64(registration_deadline).i64(voting_open).i64(cutoff).i64(slot_period);
  w.u32(static_cast<std::uint32_t>(miners.size()));
  for (const auto& m : miners) w.str(m.name).str(to_string(m.representation));
  w.u32(trustee_threshold).u32(trustee_count);
  w.str(std::to_string(qkd.noise_prob)).u64(qkd.pulses);
  w.str(std::to_string(qkd.qber_abort_threshold)).str(std::to_string(qkd.sample_fraction));
  w.u64(rng_seed).u64(max_votes_per_block);
  return sha256(w.data());
}

nlohmann::json ElectionConfig::to_json() const {
  nlohmann::json miners_json = nlohmann::json::array();
  for (const auto& m : miners) miners_json.push_back({{"name", m.name}, {"representation", to_string(m.representation)}});
  return {{"election_id", election_id},
          {"candidates", candidates},
          {"registration_deadline", registration_deadline},
          {"voting_open", voting_open},
          {"cutoff", cutoff},
          {"slot_period", slot_period},
          {"miners", miners_json},
          {"trustee_threshold", trustee_threshold},
          {"trustee_count", trustee_count},
          {"qkd",
           {{"noise_prob", qkd.noise_prob},
            {"pulses", qkd.pulses},
            {"qber_abort_threshold", qkd.qber_abort_threshold},
            {"sample_fraction", qkd.sample_fraction}}},
          {"rng_seed", rng_seed},
          {"max_votes_per_block", max_votes_per_block}};
}

ElectionConfig ElectionConfig::from_json(const nlohmann::json& j) {
  try {
    ElectionConfig c;
    c.election_id = j.value("election_id", c.election_id);
    c.candidates = j.at("candidates").get<std::vector<std::string>>();
    c.registration_deadline = j.at("registration_deadline").get<Millis>();
    c.voting_open = j.at("voting_open").get<Millis>();
    c.cutoff = j.at("cutoff").get<Millis>();
    c.slot_period = j.value("slot_period", c.slot_period);
    for (const auto& m : j.at("miners")) {
      c.miners.push_back({m.at("name").get<std::string>(),
                          representation_from_string(m.value("representation", std::string("independent")))});
    }
    c.trustee_threshold = j.value("trustee_threshold", c.trustee_threshold);
    c.trustee_count = j.value("trustee_count", c.trustee_count);
    if (j.contains("qkd")) {
      const auto& q = j["qkd"];
      c.qkd.noise_prob = q.value("noise_prob", c.qkd.noise_prob);
      c.qkd.pulses = q.value("pulses", c.qkd.pulses);
      c.qkd.qber_abort_threshold = q.value("qber_abort_threshold", c.qkd.qber_abort_threshold);
      c.qkd.sample_fraction = q.value("sample_fraction", c.qkd.sample_fraction);
    }
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.max_votes_per_block = j.value("max_votes_per_block", c.max_votes_per_block);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("election config: ") + e.what());
  }
}

ElectionConfig ElectionConfig::example() {
  ElectionConfig c;
  c.election_id = "example";
  c.candidates = {"alice", "bob", "carol"};
  c.registration_deadline = 10'000;
  c.voting_open = 10'000;
  c.cutoff = 70'000;
  c.miners = {{"m0", Representation::CandidatePool}, {"m1", Representation::CandidatePool},
              {"m2", Representation::VotingPool},    {"m3", Representation::VotingPool},
              {"m4", Representation::CivilSociety},  {"m5", Representation::CivilSociety},
              {"m6", Representation::Independent}};
  c.rng_seed = 1;
  return c;
}

}  // namespace qvote
