#include <doctest.h>

#include <atomic>
#include <thread>

#include "qvote/gateway.hpp"

using namespace qvote;
using namespace qvote::gateway;

namespace {

struct Harness {
  Millis now = 0;
  LiveElection election;
  entropy::EntropySource client_entropy = entropy::EntropySource::seeded(42);

  explicit Harness(std::filesystem::path dir = {})
      : election(ElectionConfig::example(), [this] { return now; }, std::move(dir)) {}

  ApiResponse post(std::string_view path, const nlohmann::json& body) {
    return election.handle("POST", path, {}, body.dump());
  }
  ApiResponse get(std::string_view path, Query q = {}) { return election.handle("GET", path, q, ""); }

  VoterSession enrol(const std::string& credential) {
    const auto r = post("/register", {{"credential", credential}});
    REQUIRE(r.status == 200);
    return VoterSession::from_registration(r.body);
  }
  void take_ballot(VoterSession& s, bool reissue = false) {
    const auto r = post(reissue ? "/reballot" : "/ballot", s.ballot_request(reissue, client_entropy));
    REQUIRE(r.status == 200);
    s.accept_ballot(r.body);
  }
};

std::string code(const ApiResponse& r) { return r.body.value("code", ""); }

}  // namespace

TEST_CASE("fresh service has only the genesis block") {
  Harness h;
  const auto c = h.get("/chain");
  CHECK(c.status == 200);
  CHECK(c.body["blocks"].size() == 1);
  CHECK(h.get("/block/0").status == 200);
  CHECK(h.get("/block/1").status == 404);
  CHECK(h.get("/block/x").status == 400);
  const auto s = h.get("/status");
  CHECK(s.body["phase"] == "registration");
  CHECK(s.body["height"] == 0);
  CHECK(h.get("/commitments").body["count"] == 0);
}

TEST_CASE("routing and input errors") {
  Harness h;
  CHECK(h.get("/nope").status == 404);
  CHECK(h.election.handle("DELETE", "/chain", {}, "").status == 405);
  CHECK(h.election.handle("POST", "/register", {}, "{not json").status == 400);
  CHECK(h.post("/register", nlohmann::json::object()).status == 400);
  CHECK(h.get("/verify").status == 400);
}

TEST_CASE("registration") {
  Harness h;
  h.enrol("voter-a");
  const auto again = h.post("/register", {{"credential", "voter-a"}});
  CHECK(again.status == 409);
  CHECK(code(again) == "AlreadyRegistered");
  CHECK(h.post("/register", {{"credential", "mallory"}}).status == 403);
  h.now = h.election.config().registration_deadline;
  const auto late = h.post("/register", {{"credential", "voter-b"}});
  CHECK(late.status == 409);
  CHECK(code(late) == "RegistrationClosed");
}

TEST_CASE("full voting day under a manual clock") {
  const auto dir = std::filesystem::temp_directory_path() / "qvote_test_gateway_data";
  std::filesystem::remove_all(dir);
  Harness h(dir);
  const auto& cfg = h.election.config();
  auto alice = h.enrol("voter-alice");
  auto bob = h.enrol("voter-bob");
  auto carol = h.enrol("voter-carol");

  auto early = h.post("/ballot", alice.ballot_request(false, h.client_entropy));
  CHECK(early.status == 409);
  CHECK(code(early) == "ElectionClosed");

  h.now = cfg.voting_open;
  h.take_ballot(alice);
  h.take_ballot(bob);
  h.take_ballot(carol);
  auto dup = h.post("/ballot", alice.ballot_request(false, h.client_entropy));
  CHECK(code(dup) == "BallotAlreadyActive");
  // The rejected request replaced the client's key; get a ballot for it.
  h.take_ballot(alice, true);
  CHECK(h.get("/commitments").body["active"] == 3);

  h.now += 100;
  auto tampered = alice.vote(0, h.now);
  tampered["choice"] = 1;
  const auto bad = h.post("/vote", tampered);
  CHECK(bad.status == 422);
  CHECK(code(bad) == "BadSignature");

  // Alice's key is spent now; coerced-then-free pattern for her.
  h.take_ballot(alice, true);
  CHECK(h.post("/vote", alice.vote(2, h.now)).status == 202);

  VoterSession stranger = VoterSession::from_json(bob.to_json());
  auto ghost = entropy::EntropySource::seeded(5);
  stranger.bid = entropy::generate_id(ghost);
  stranger.key.emplace(sig::OtsKeyPair::generate(ghost));
  const auto forged = h.post("/vote", stranger.vote(0, h.now));
  CHECK(forged.status == 422);
  CHECK(code(forged) == "InvalidBallot");

  const auto skew = h.post("/vote", bob.vote(1, h.now + kCastSkewMs + 1));
  CHECK(skew.status == 422);
  CHECK(code(skew) == "BadTimestamp");
  h.take_ballot(bob, true);
  CHECK(h.post("/vote", bob.vote(1, h.now)).status == 202);

  CHECK(h.get("/tally").status == 409);
  CHECK(code(h.get("/tally")) == "ElectionOpen");
  CHECK(h.get("/audit").status == 409);

  // Reads never change anything.
  const auto c1 = h.get("/chain").body;
  const auto s1 = h.get("/status").body;
  for (int i = 0; i < 3; ++i) {
    h.get("/commitments");
    h.get("/verify", {{"vid", alice.vid.to_hex()}, {"bid", alice.bid->to_hex()}});
  }
  CHECK(h.get("/chain").body == c1);
  CHECK(h.get("/status").body == s1);
  CHECK(s1["pending_votes"] == 2);

  h.now = cfg.voting_open + 1;
  CHECK(h.election.advance() == 1);
  CHECK(h.get("/status").body["height"] == 1);
  const auto v = h.get("/verify", {{"vid", alice.vid.to_hex()}, {"bid", alice.bid->to_hex()}});
  CHECK(v.body["found"] == true);
  CHECK(v.body["final"] == false);
  CHECK(v.body["records"][0]["counted"] == true);
  CHECK(h.election.advance() == 0);

  h.now = cfg.cutoff + 1;
  h.election.advance();
  CHECK(h.election.closed());
  CHECK(h.get("/status").body["phase"] == "closed");
  const auto t = h.get("/tally");
  REQUIRE(t.status == 200);
  CHECK(t.body["counts"] == nlohmann::json::array({0, 1, 1}));
  const auto a = h.get("/audit");
  REQUIRE(a.status == 200);
  CHECK(a.body["recount_matches_announced"] == true);
  CHECK(a.body["chain"]["valid"] == true);
  const auto after = h.post("/vote", carol.vote(0, h.now));
  CHECK(after.status == 422);
  CHECK(code(after) == "AfterCutoff");
  CHECK(h.get("/verify", {{"vid", bob.vid.to_hex()}, {"bid", bob.bid->to_hex()}}).body["final"] == true);

  for (const char* f : {"chain.bin", "commitments.txt", "config.json", "tally.json", "voterdb.json", "shares.txt"}) {
    CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("voter session survives a JSON round trip") {
  Harness h;
  auto s = h.enrol("voter-x");
  h.now = h.election.config().voting_open;
  h.take_ballot(s);
  auto back = VoterSession::from_json(nlohmann::json::parse(s.to_json().dump()));
  CHECK(back.vid == s.vid);
  CHECK(back.bid == s.bid);
  CHECK(h.post("/vote", back.vote(1, h.now)).status == 202);
  // The spent key stays spent after another round trip.
  auto again = VoterSession::from_json(back.to_json());
  CHECK_THROWS_AS(again.vote(1, h.now), Error);
  VoterSession empty;
  CHECK_THROWS_AS(empty.vote(0, 0), Error);
}

TEST_CASE("real HTTP on an ephemeral port") {
  std::atomic<Millis> now{0};
  LiveElection election(ElectionConfig::example(), [&] { return now.load(); });
  Server server(election);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread t([&] { server.listen(20); });
  const std::string url = "http://127.0.0.1:" + std::to_string(port);

  auto status = http_request(url, "GET", "/status");
  CHECK(status.status == 200);
  CHECK(status.body["phase"] == "registration");
  const auto reg = http_request(url, "POST", "/register", {{"credential", "voter-net"}});
  REQUIRE(reg.status == 200);
  auto session = VoterSession::from_registration(reg.body);
  CHECK(http_request(url, "POST", "/register", {{"credential", "voter-net"}}).status == 409);
  CHECK(http_request(url, "GET", "/missing").status == 404);

  now = ElectionConfig::example().voting_open;
  auto e = entropy::EntropySource::seeded(1);
  const auto bal = http_request(url, "POST", "/ballot", session.ballot_request(false, e));
  REQUIRE(bal.status == 200);
  session.accept_ballot(bal.body);
  CHECK(http_request(url, "POST", "/vote", session.vote(0, now)).status == 202);

  // The ticker thread runs the slot once the clock passes it.
  now = ElectionConfig::example().voting_open + 1;
  bool committed = false;
  for (int i = 0; i < 200 && !committed; ++i) {
    committed = http_request(url, "GET", "/status").body["height"] == 1;
    if (!committed) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  CHECK(committed);

  server.stop();
  t.join();
  CHECK(http_request(url, "GET", "/status").status == 0);
}

TEST_CASE("binding a taken port fails") {
  LiveElection election(ElectionConfig::example(), [] { return Millis{0}; });
  Server a(election);
  const int port = a.bind("127.0.0.1", 0);
  Server b(election);
  try {
    b.bind("127.0.0.1", port);
    FAIL("second bind succeeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BindFailure);
  }
}
