#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qvote/gateway.hpp"
#include "qvote/simnet.hpp"

namespace qvote::gateway {

namespace {

constexpr int kFailure = 1;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
}

VoterSession load_session(const std::string& path) { return VoterSession::from_json(nlohmann::json::parse(read_text(path))); }

void save_session(const std::string& path, const VoterSession& s) { write_text(path, s.to_json().dump(1) + "\n"); }

int report(const ApiResponse& r, std::ostream& out, std::ostream& err) {
  if (r.status >= 200 && r.status < 300) {
    out << r.body.dump(2) << "\n";
    return 0;
  }
  err << "error " << r.status << ": " << r.body.value("code", "Unknown") << " (" << r.body.value("reason", "") << ")\n";
  return kFailure;
}

std::uint32_t parse_choice(const std::string& text, const std::vector<std::string>& candidates) {
  const auto it = std::find(candidates.begin(), candidates.end(), text);
  if (it != candidates.end()) return static_cast<std::uint32_t>(it - candidates.begin());
  std::uint32_t v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidArgument, "choice '" + text + "' is neither a candidate name nor an index");
  }
  return v;
}

struct Published {
  ElectionConfig config;
  std::optional<ledger::Chain> chain;
  std::string chain_error;
  authority::CommitmentList commitments;
  std::optional<tally::TallyResult> announced;
};

Published load_published(const std::filesystem::path& dir) {
  Published p;
  p.config = ElectionConfig::from_json(nlohmann::json::parse(read_text(dir / "config.json")));
  p.commitments = authority::CommitmentList::from_file(read_text(dir / "commitments.txt"));
  try {
    const std::string bin = read_text(dir / "chain.bin");
    p.chain = ledger::decode_chain(as_bytes(bin));
  } catch (const Error& e) {
    p.chain_error = e.what();
  }
  if (std::filesystem::exists(dir / "tally.json")) {
    p.announced = tally::TallyResult::from_json(nlohmann::json::parse(read_text(dir / "tally.json")));
  }
  return p;
}

int offline_tally(const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
  const Published p = load_published(dir);
  if (!p.chain) {
    err << "ChainInvalid: " << p.chain_error << "\n";
    return kFailure;
  }
  out << tally::tally(*p.chain, p.commitments, p.config).to_json().dump(2) << "\n";
  return 0;
}

int offline_audit(const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
  const Published p = load_published(dir);
  if (!p.chain) {
    out << nlohmann::json{{"clean", false},
                          {"findings", {{{"kind", "ChainInvalid"}, {"detail", "chain file does not decode: " + p.chain_error}}}}}
               .dump(2)
        << "\n";
    err << "finding: ChainInvalid (chain file does not decode)\n";
    return kFailure;
  }
  if (!p.announced) {
    err << "no tally.json in " << dir.string() << "; nothing announced to audit\n";
    return kFailure;
  }
  const audit::AuditReport r = audit::audit_election(*p.chain, p.commitments, *p.announced, p.config);
  out << r.to_json().dump(2) << "\n";
  for (const auto& f : r.findings) {
    err << "finding: " << f.kind << (f.height ? " at height " + std::to_string(*f.height) : "") << " (" << f.detail
        << ")\n";
  }
  return r.clean() ? 0 : kFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Blockchain voting with simulated quantum key distribution"};
  app.require_subcommand(1);

  // init
  std::string init_out = "election.json";
  std::string init_id = "election";
  std::vector<std::string> init_candidates = {"alice", "bob", "carol"};
  std::size_t init_miners = 7;
  double reg_minutes = 10, vote_minutes = 60;
  Millis slot_ms = 5000;
  std::optional<Millis> start_ms;
  std::uint64_t init_seed = 1;
  std::uint32_t threshold = 3, trustees = 5;
  auto* init = app.add_subcommand("init", "Write an election configuration");
  init->add_option("--out", init_out, "Output path")->capture_default_str();
  init->add_option("--id", init_id, "Election id")->capture_default_str();
  init->add_option("--candidates", init_candidates, "Candidate names")->delimiter(',');
  init->add_option("--miners", init_miners, "Number of authorized miners")->capture_default_str()->check(CLI::Range(3, 255));
  init->add_option("--registration-minutes", reg_minutes, "Registration window")->capture_default_str();
  init->add_option("--voting-minutes", vote_minutes, "Voting window")->capture_default_str();
  init->add_option("--slot-ms", slot_ms, "Block slot period")->capture_default_str();
  init->add_option("--start", start_ms, "Start time in Unix milliseconds (default: now)");
  init->add_option("--seed", init_seed, "Protocol entropy seed")->capture_default_str();
  init->add_option("--threshold", threshold, "Trustee quorum")->capture_default_str();
  init->add_option("--trustees", trustees, "Trustee count")->capture_default_str();

  // simulate
  std::string scenario_path;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario under the virtual clock");
  simulate->add_option("scenario", scenario_path, "Scenario file")->required();
  simulate->add_option("--seed", sim_seed, "Override both protocol and network seeds");
  simulate->add_option("--out", sim_out, "Write the transcript directory here");

  // serve
  std::string config_path = "election.json";
  std::string bind_host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
  auto* serve = app.add_subcommand("serve", "Run the live election service");
  serve->add_option("--config", config_path, "Election configuration")->capture_default_str();
  serve->add_option("--bind", bind_host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (0 picks one)")->capture_default_str();
  serve->add_option("--data", data_dir, "Directory for published artifacts");

  // voter commands
  std::string server_url;
  std::string session_path = "session.json";
  std::string credential;
  std::string choice_text;
  std::optional<Millis> cast_at;
  auto add_voter_opts = [&](CLI::App* sub) {
    sub->add_option("--server", server_url, "Service URL, e.g. http://127.0.0.1:8080");
    sub->add_option("--session", session_path, "Voter session file")->capture_default_str();
  };
  auto* reg = app.add_subcommand("register", "Register and receive a VID");
  add_voter_opts(reg);
  reg->add_option("--credential", credential, "Credential token")->required();
  auto* bal = app.add_subcommand("ballot", "Request a ballot");
  add_voter_opts(bal);
  auto* rebal = app.add_subcommand("reballot", "Revoke the current ballot and request a new one");
  add_voter_opts(rebal);
  auto* vote = app.add_subcommand("vote", "Sign and submit a vote");
  add_voter_opts(vote);
  vote->add_option("--choice", choice_text, "Candidate name or index")->required();
  vote->add_option("--cast-at", cast_at, "Claimed cast time in Unix milliseconds (default: now)");

  std::string vid_hex, bid_hex;
  auto* verify = app.add_subcommand("verify", "Find a ballot on the chain");
  add_voter_opts(verify);
  verify->add_option("--vid", vid_hex, "VID hex (default: from session)");
  verify->add_option("--bid", bid_hex, "BID hex (default: from session)");

  std::string pub_dir;
  auto* tally_cmd = app.add_subcommand("tally", "Show the tally from a service or recount a data directory");
  tally_cmd->add_option("--server", server_url, "Service URL");
  tally_cmd->add_option("--data", pub_dir, "Data or transcript directory");
  auto* audit_cmd = app.add_subcommand("audit", "Audit a service or a data directory");
  audit_cmd->add_option("--server", server_url, "Service URL");
  audit_cmd->add_option("--data", pub_dir, "Data or transcript directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  auto server_for = [&](const VoterSession* s) {
    if (!server_url.empty()) return server_url;
    if (s && !s->server.empty()) return s->server;
    throw Error(ErrorCode::InvalidArgument, "--server is required");
  };

  try {
    if (init->parsed()) {
      ElectionConfig c = ElectionConfig::example();
      c.election_id = init_id;
      c.candidates = init_candidates;
      c.miners.clear();
      for (std::size_t i = 0; i < init_miners; ++i) {
        c.miners.push_back({"m" + std::to_string(i), static_cast<Representation>(i % 4)});
      }
      const Millis start = start_ms.value_or(system_now());
      c.registration_deadline = start + static_cast<Millis>(reg_minutes * 60'000);
      c.voting_open = c.registration_deadline;
      c.cutoff = c.voting_open + static_cast<Millis>(vote_minutes * 60'000);
      c.slot_period = slot_ms;
      c.rng_seed = init_seed;
      c.trustee_threshold = threshold;
      c.trustee_count = trustees;
      c.validate();
      write_text(init_out, c.to_json().dump(2) + "\n");
      out << "wrote " << init_out << "\n";
      return 0;
    }

    if (simulate->parsed()) {
      simnet::Scenario s = simnet::Scenario::load(scenario_path);
      if (sim_seed) s.reseed(*sim_seed);
      const simnet::Transcript t = simnet::run_scenario(s);
      if (!sim_out.empty()) t.write(sim_out);
      std::map<std::string, std::size_t> kinds;
      for (const auto& f : t.audit.findings) ++kinds[f.kind];
      out << nlohmann::json{{"scenario", t.scenario},
                            {"digest", to_hex(t.digest())},
                            {"height", t.chain.size() - 1},
                            {"counts", t.tally.to_json().at("by_candidate")},
                            {"orphans", t.orphans.size()},
                            {"findings", kinds}}
                 .dump(2)
          << "\n";
      return 0;
    }

    if (serve->parsed()) {
      const ElectionConfig c = ElectionConfig::from_json(nlohmann::json::parse(read_text(config_path)));
      LiveElection election(c, system_now, data_dir);
      Server server(election);
      const int bound = server.bind(bind_host, port);
      out << "listening on http://" << bind_host << ":" << bound << "\n" << std::flush;
      server.listen();
      return 0;
    }

    if (reg->parsed()) {
      const std::string url = server_for(nullptr);
      const ApiResponse r = http_request(url, "POST", "/register", nlohmann::json{{"credential", credential}});
      if (r.status != 200) return report(r, out, err);
      VoterSession s = VoterSession::from_registration(r.body);
      s.server = url;
      save_session(session_path, s);
      out << "registered; session saved to " << session_path << "\n";
      return 0;
    }

    if (bal->parsed() || rebal->parsed()) {
      const bool reissue = rebal->parsed();
      VoterSession s = load_session(session_path);
      entropy::EntropySource entropy = entropy::EntropySource::beamsplitter();
      const nlohmann::json body = s.ballot_request(reissue, entropy);
      // The link pad and tag masks advanced; keep them even if the request fails.
      const ApiResponse r = http_request(server_for(&s), "POST", reissue ? "/reballot" : "/ballot", body);
      if (r.status != 200) {
        s.key = std::move(load_session(session_path).key);
        save_session(session_path, s);
        return report(r, out, err);
      }
      s.accept_ballot(r.body);
      save_session(session_path, s);
      out << "ballot received; commitment " << r.body.value("commitment", "") << "\n";
      return 0;
    }

    if (vote->parsed()) {
      VoterSession s = load_session(session_path);
      const std::uint32_t choice = parse_choice(choice_text, s.candidates);
      const nlohmann::json body = s.vote(choice, cast_at.value_or(system_now()));
      save_session(session_path, s);  // the one-time key is now spent
      const ApiResponse r = http_request(server_for(&s), "POST", "/vote", body);
      if (r.status == 422) {
        err << "rejected: " << r.body.value("code", "Unknown") << "\n";
        return kFailure;
      }
      return report(r, out, err);
    }

    if (verify->parsed()) {
      std::optional<VoterSession> s;
      if (vid_hex.empty() || bid_hex.empty()) {
        s = load_session(session_path);
        if (!s->bid) throw Error(ErrorCode::NoActiveBallot, "session holds no ballot");
        vid_hex = s->vid.to_hex();
        bid_hex = s->bid->to_hex();
      }
      const ApiResponse r =
          http_request(server_for(s ? &*s : nullptr), "GET", "/verify?vid=" + vid_hex + "&bid=" + bid_hex);
      return report(r, out, err);
    }

    if (tally_cmd->parsed() || audit_cmd->parsed()) {
      const bool is_audit = audit_cmd->parsed();
      if (!pub_dir.empty()) return is_audit ? offline_audit(pub_dir, out, err) : offline_tally(pub_dir, out, err);
      const ApiResponse r = http_request(server_for(nullptr), "GET", is_audit ? "/audit" : "/tally");
      if (is_audit && r.status == 200 && !r.body.value("clean", false)) {
        out << r.body.dump(2) << "\n";
        for (const auto& f : r.body["findings"]) err << "finding: " << f.value("kind", "") << "\n";
        return kFailure;
      }
      return report(r, out, err);
    }
  } catch (const Error& e) {
    err << to_string(e.code()) << ": " << e.what() << "\n";
    return kFailure;
  } catch (const nlohmann::json::exception& e) {
    err << "MalformedInput: " << e.what() << "\n";
    return kFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace qvote::gateway
