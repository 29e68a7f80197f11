#pragma once

// Live single-host election behind an HTTP/JSON surface, plus the voter-side
// session the CLI keeps on disk.

#include <filesystem>
#include <iosfwd>
#include <mutex>

#include "qvote/audit.hpp"

namespace qvote::gateway {

using Clock = std::function<Millis()>;

/// Milliseconds since the Unix epoch.
Millis system_now();

/// Test tokens only: anything of the form "voter-<non-empty>".
bool accept_test_token(std::string_view credential);

/// Maximum distance between a client's claimed cast_at and the service clock.
inline constexpr Millis kCastSkewMs = 60'000;

struct ApiResponse {
  int status = 200;
  nlohmann::json body;

  static ApiResponse error(int status, std::string_view code, const std::string& reason);
};

using Query = std::map<std::string, std::string, std::less<>>;

/// One election instance. Mutations are serialized on an internal mutex;
/// reads copy an immutable snapshot under the lock and serialize outside it.
class LiveElection {
 public:
  LiveElection(ElectionConfig config, Clock clock, std::filesystem::path data_dir = {},
               authority::CredentialVerifier verifier = accept_test_token);

  /// Routes "POST /register", "GET /block/3" and so on.
  ApiResponse handle(std::string_view method, std::string_view path, const Query& query, std::string_view body);

  ApiResponse register_voter(const nlohmann::json& body);
  ApiResponse ballot(const nlohmann::json& body, bool reissue);
  ApiResponse vote(const nlohmann::json& body);
  ApiResponse chain() const;
  ApiResponse block(std::uint64_t height) const;
  ApiResponse commitments() const;
  ApiResponse verify(const Query& query) const;
  ApiResponse tally() const;
  ApiResponse audit() const;
  ApiResponse status() const;

  /// Runs every block slot due by the clock; after the final slot drains the
  /// pool and publishes the result. Returns the number of slots processed.
  std::size_t advance();
  bool closed() const;

  const ElectionConfig& config() const { return config_; }

 private:
  void run_slot(Millis at);
  void close();
  void persist_chain() const;

  ElectionConfig config_;
  Clock clock_;
  std::filesystem::path data_dir_;
  authority::CredentialVerifier verifier_;

  mutable std::mutex mu_;
  authority::VotingAuthority va_;
  consensus::MinerRoster roster_;
  consensus::Rotation rotation_;
  consensus::KeyRing keys_;
  consensus::VotePool pool_;
  ledger::Chain chain_;
  std::vector<Millis> slots_;
  std::size_t next_slot_ = 0;
  std::vector<consensus::Rejection> rejections_;
  std::vector<consensus::Orphan> orphans_;
  std::optional<authority::CommitmentList> final_commitments_;
  std::optional<tally::TallyResult> final_tally_;
};

/// Blocks serving `election` until stop() is called from another thread.
/// Throws BindFailure.
class Server {
 public:
  explicit Server(LiveElection& election);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); also advances block slots every `tick_ms`.
  void listen(Millis tick_ms = 200);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Minimal JSON-over-HTTP client; a null body posts "{}". Transport failures
/// yield status 0.
ApiResponse http_request(const std::string& base_url, std::string_view method, const std::string& path,
                         const nlohmann::json& body = nullptr);

/// Voter-side state: link keys, vid, current bid and one-time key. Never
/// leaves the client except inside signed submissions.
struct VoterSession {
  std::string server;
  std::string election_id;
  std::vector<std::string> candidates;
  std::optional<qkd::LinkEnd> link;
  entropy::Id256 vid;
  std::optional<entropy::Id256> bid;
  std::optional<sig::OtsKeyPair> key;

  /// Opens the VID package from a /register response.
  static VoterSession from_registration(const nlohmann::json& response);
  /// Draws a fresh one-time key and returns the tagged /ballot or /reballot body.
  nlohmann::json ballot_request(bool reissue, entropy::EntropySource& entropy);
  /// Opens the BID package from a /ballot or /reballot response.
  void accept_ballot(const nlohmann::json& response);
  /// Signs a vote. Throws NoActiveBallot without a ballot, OneTimeKeyReuse on a second vote.
  nlohmann::json vote(std::uint32_t choice, Millis cast_at);

  nlohmann::json to_json() const;
  static VoterSession from_json(const nlohmann::json& j);
};

/// Command-line entry point; returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qvote::gateway
