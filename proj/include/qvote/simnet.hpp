#pragma once

// Deterministic election simulator. Parties exchange messages over a virtual
// clock; latency, loss and the network adversary draw from an environment
// generator seeded separately from the protocol's entropy sources.

#include <filesystem>
#include <functional>
#include <queue>
#include <random>

#include "qvote/audit.hpp"

namespace qvote::simnet {

struct Adversary {
  double replay_votes = 0.0;          // chance a delivered vote is replayed later
  std::size_t flood_duplicates = 0;   // extra copies sent with every replay
  double tamper_in_flight = 0.0;      // chance a vote has one signed bit flipped in transit

  bool active() const { return replay_votes > 0 || tamper_in_flight > 0; }
};

struct NetConfig {
  Millis latency_min = 5;
  Millis latency_max = 50;
  double drop_prob = 0.0;
  Adversary adversary;
  std::uint64_t seed = 0;

  /// Throws ScenarioInvalid.
  void validate() const;
  nlohmann::json to_json() const;
  static NetConfig from_json(const nlohmann::json& j);
};

enum class MessageKind {
  Register,
  VidPackage,
  BallotRequest,
  ReballotRequest,
  BidPackage,
  Vote,
  BlockProposal,
  Endorsement,
};

std::string_view to_string(MessageKind k);

/// Payload plus routing. Endpoints are names such as "va", "voter:12",
/// "miner:3" or "pool".
struct Message {
  std::string from;
  std::string to;
  MessageKind kind = MessageKind::Vote;
  Bytes payload;
  /// Pre-voting traffic runs over the reliable QKD-authenticated links.
  bool reliable = false;
};

struct LogEntry {
  std::uint64_t seq = 0;
  Millis sent_at = 0;
  std::optional<Millis> arrives_at;  // nullopt: dropped
  std::string from;
  std::string to;
  MessageKind kind = MessageKind::Vote;
  std::size_t size = 0;
  Digest payload_digest{};
  bool tampered = false;
  bool injected = false;  // sent by the network adversary

  nlohmann::json to_json() const;
};

/// Message transport under the environment generator.
class Network {
 public:
  explicit Network(const NetConfig& config);

  /// Samples latency and loss, applies in-flight tampering to votes, and
  /// logs the attempt. Returns the arrival time or nullopt if dropped.
  std::optional<Millis> deliver(Message& msg, Millis now);
  /// Logs a message the adversary injects; injected traffic is not dropped.
  Millis inject(const Message& msg, Millis now);

  std::mt19937_64& rng() { return rng_; }
  const std::vector<LogEntry>& log() const { return log_; }
  const NetConfig& config() const { return config_; }

 private:
  Millis latency();

  NetConfig config_;
  std::mt19937_64 rng_;
  std::vector<LogEntry> log_;
};

/// Single-threaded discrete-event loop ordered by (time, insertion).
class EventLoop {
 public:
  void at(Millis time, std::function<void()> fn);
  /// Runs until the queue is empty. Time never moves backwards.
  void run();
  Millis now() const { return now_; }
  std::size_t processed() const { return processed_; }

 private:
  struct Event {
    Millis time;
    std::uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  Millis now_ = 0;
  std::uint64_t seq_ = 0;
  std::size_t processed_ = 0;
};

struct VoterGroup {
  std::size_t count = 0;
  std::uint32_t choice = 0;
  /// Casts this choice first, then re-ballots and casts `choice`.
  std::optional<std::uint32_t> coerced_choice;
  bool late = false;             // casts after the cutoff
  std::size_t duplicates = 0;    // extra self-signed copies under the same ballot
  bool abstain = false;          // registers and takes a ballot, never casts
};

struct Unavailability {
  std::uint32_t miner = 0;
  std::uint64_t from_slot = 0;  // inclusive
  std::uint64_t to_slot = 0;    // inclusive
};

struct MaliciousProposer {
  std::uint32_t miner = 0;
  std::size_t forged = 1;  // forged votes slipped into its first block
};

struct Faults {
  std::size_t forged_votes = 0;  // random (vid, bid) pairs sent to the pool
  std::optional<MaliciousProposer> malicious_proposer;
};

struct Scenario {
  std::string name = "scenario";
  ElectionConfig election;
  std::vector<VoterGroup> voters;
  std::vector<Unavailability> unavailable;
  Faults faults;
  NetConfig net;

  std::size_t voter_count() const;
  /// Throws ScenarioInvalid naming the first problem.
  void validate() const;
  nlohmann::json to_json() const;
  /// The "election" object is merged over ElectionConfig::example().
  static Scenario from_json(const nlohmann::json& j);
  static Scenario load(const std::filesystem::path& path);
  /// Overrides both the protocol seed and the network seed.
  void reseed(std::uint64_t seed);
};

/// Ground truth kept by the harness for checking, never published.
struct VoterTrace {
  std::string credential;
  entropy::Id256 vid;
  std::vector<entropy::Id256> bids;  // in issue order; last is active
  std::optional<std::uint32_t> intended;  // choice that should count
  bool registered = false;
};

struct Transcript {
  std::string scenario;
  ElectionConfig config;
  ledger::Chain chain;
  authority::CommitmentList commitments;
  tally::TallyResult tally;
  audit::AuditReport audit;
  std::vector<LogEntry> messages;
  std::vector<std::uint32_t> proposers;  // per slot
  std::vector<consensus::Rejection> rejections;
  std::vector<consensus::Orphan> orphans;
  authority::EncryptedDb sealed_db;
  std::vector<VoterTrace> voters;
  audit::KnownSecrets secrets;

  /// SHA-256 over the binary chain, commitment file, tally, audit report and
  /// message log.
  Digest digest() const;
  /// chain.json, chain.bin, commitments.txt, tally.json, audit.json,
  /// messages.jsonl, rejections.jsonl, orphans.jsonl, voterdb.json,
  /// shares.txt, digest.txt.
  void write(const std::filesystem::path& dir) const;
};

/// Registration, ballots, casting (with re-votes), DPoS commitment, cutoff,
/// tally and audit, all on the virtual clock. Throws ScenarioInvalid.
Transcript run_scenario(const Scenario& scenario, const NetConfig& net);
inline Transcript run_scenario(const Scenario& scenario) { return run_scenario(scenario, scenario.net); }

/// Slot start times: voting_open + k * period up to the cutoff, plus the
/// cutoff itself when it is not on the grid.
std::vector<Millis> slot_times(const ElectionConfig& config);

/// Adversary helper: assembles a signature from exported key material for a
/// key that has already signed.
sig::OtsSignature sign_again(const sig::OtsKeyPair& key, std::span<const std::uint8_t> message);

}  // namespace qvote::simnet
