#include "qvote/audit.hpp"

#include <algorithm>
#include <functional>

namespace qvote::audit {

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty() || needle.size() > haystack.size()) return 0;
  std::size_t n = 0;
  const std::boyer_moore_horspool_searcher searcher(needle.begin(), needle.end());
  auto it = haystack.begin();
  while (true) {
    it = std::search(it, haystack.end(), searcher);
    if (it == haystack.end()) break;
    ++n;
    ++it;
  }
  return n;
}

std::string_view as_view(const std::array<std::uint8_t, 32>& raw) {
  return {reinterpret_cast<const char*>(raw.data()), raw.size()};
}

}  // namespace

std::size_t scan_for_secrets(const std::vector<std::string_view>& artifacts, const KnownSecrets& secrets,
                             std::vector<Finding>* findings) {
  std::size_t hits = 0;
  auto scan = [&](std::string_view needle, const std::string& label) {
    for (std::size_t a = 0; a < artifacts.size(); ++a) {
      const std::size_t n = count_occurrences(artifacts[a], needle);
      if (n == 0) continue;
      hits += n;
      if (findings) {
        findings->push_back({"AnonymityLeak", label + " appears in public artifact " + std::to_string(a), {}});
      }
    }
  };
  for (const auto& c : secrets.credentials) scan(c, "credential '" + c + "'");
  for (const auto& vid : secrets.vids) {
    const std::string hex = vid.to_hex();
    scan(hex, "vid " + hex.substr(0, 12) + "...");
    scan(as_view(vid.bytes()), "raw vid " + hex.substr(0, 12) + "...");
  }
  return hits;
}

AuditReport audit_election(const ledger::Chain& chain, const authority::CommitmentList& commitments,
                           const tally::TallyResult& announced, const ElectionConfig& config,
                           const KnownSecrets& known, const MinerLogs* logs) {
  AuditReport r;
  r.notes.push_back(
      "The voting authority can link votes to voters while it holds its voter database in the clear; this "
      "audit assumes the database was sealed under the trustee quorum and cannot observe that.");

  r.chain = ledger::validate_chain(chain);
  if (!r.chain.valid) {
    r.findings.push_back({"ChainInvalid", r.chain.reason, r.chain.first_bad_height});
  }

  // Record-level checks run even on a broken chain so the report still says
  // what the stored records look like.
  for (std::size_t h = 1; h < chain.size(); ++h) {
    const ledger::Block& b = chain.at(h);
    for (const auto& v : b.votes) {
      const authority::Commitment* c = commitments.find(v.ballot_digest);
      if (c == nullptr) {
        ++r.commitment_invalid;
        continue;
      }
      ++r.commitment_valid;
      const bool ok = v.signer_public.fingerprint() == c->ots_public_digest &&
                      sig::verify(v.signer_public, v.signing_payload(), v.signature);
      ++(ok ? r.signatures_ok : r.signatures_bad);
    }
    std::size_t approvals = 0;
    for (const auto& e : b.endorsements) {
      if (e.miner_id < config.miners.size() && e.verdict == ledger::Verdict::Approve) ++approvals;
    }
    if (approvals < config.miners.size() / 2 + 1) {
      r.findings.push_back({"WeakEndorsement",
                            std::to_string(approvals) + " approvals of " + std::to_string(config.miners.size()), h});
    }
  }

  if (r.chain.valid) {
    r.recount = tally::tally(chain, commitments, config);
    const tally::TallyResult& rc = *r.recount;
    r.recount_matches_announced = rc.counts == announced.counts && rc.total_counted == announced.total_counted &&
                                  rc.total_cast == announced.total_cast && rc.chain_tip == announced.chain_tip &&
                                  rc.commitments_digest == announced.commitments_digest &&
                                  rc.candidates == announced.candidates;
    if (!r.recount_matches_announced) {
      std::string detail = "recount";
      for (auto c : rc.counts) detail += " " + std::to_string(c);
      detail += " vs announced";
      for (auto c : announced.counts) detail += " " + std::to_string(c);
      r.findings.push_back({"RecountMismatch", detail, {}});
    }
    for (const auto& rej : rc.rejected) {
      r.findings.push_back({std::string(tally::to_string(rej.reason)),
                            "record " + std::to_string(rej.at.index) + " digest " +
                                to_hex(rej.ballot_digest).substr(0, 16),
                            rej.at.height});
    }
  } else {
    r.findings.push_back({"RecountMismatch", "announced result cannot be reproduced from an invalid chain", {}});
  }

  if (logs) {
    for (const auto& rej : logs->rejections) {
      r.findings.push_back({std::string(consensus::to_string(rej.reason)),
                            "rejected at proposal by miner " + std::to_string(rej.miner_id) + ", digest " +
                                to_hex(rej.ballot_digest).substr(0, 16),
                            {}});
    }
    for (const auto& o : logs->orphans) {
      r.findings.push_back({"OrphanBlock",
                            "miner " + std::to_string(o.miner_id) + " block " + to_hex(o.block_digest).substr(0, 16) +
                                ": " + std::to_string(o.approvals) + " approvals, " + std::to_string(o.rejections) +
                                " rejections",
                            o.height});
    }
  }

  if (!known.credentials.empty() || !known.vids.empty()) {
    const std::string json_text = ledger::chain_to_json(chain).dump();
    const Bytes binary = ledger::encode_chain(chain);
    const std::string commitments_text = commitments.to_file();
    const std::string tally_text = announced.to_json().dump();
    const std::vector<std::string_view> artifacts = {
        json_text, {reinterpret_cast<const char*>(binary.data()), binary.size()}, commitments_text, tally_text};
    r.anonymity_hits = scan_for_secrets(artifacts, known, &r.findings);
    r.anonymity_ok = r.anonymity_hits == 0;
  }
  return r;
}

nlohmann::json AuditReport::to_json() const {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& x : findings) {
    nlohmann::json j = {{"kind", x.kind}, {"detail", x.detail}};
    if (x.height) j["height"] = *x.height;
    f.push_back(std::move(j));
  }
  nlohmann::json chain_j = {{"valid", chain.valid}};
  if (chain.first_bad_height) {
    chain_j["first_bad_height"] = *chain.first_bad_height;
    chain_j["reason"] = chain.reason;
  }
  nlohmann::json out = {{"chain", chain_j},
                        {"recount_matches_announced", recount_matches_announced},
                        {"commitment_check", {{"valid", commitment_valid}, {"invalid", commitment_invalid}}},
                        {"signature_check", {{"ok", signatures_ok}, {"bad", signatures_bad}}},
                        {"anonymity_scan", {{"ok", anonymity_ok}, {"hits", anonymity_hits}}},
                        {"findings", f},
                        {"notes", notes},
                        {"clean", clean()}};
  if (recount) out["recount"] = recount->counts;
  return out;
}

std::vector<Inclusion> verify_my_vote(const ledger::Chain& chain, const tally::TallyResult& result,
                                      const entropy::Id256& vid, const entropy::Id256& bid) {
  const Digest d = authority::ballot_digest(vid, bid);
  std::vector<Inclusion> found;
  for (std::size_t h = 1; h < chain.size(); ++h) {
    const auto& votes = chain.at(h).votes;
    for (std::size_t i = 0; i < votes.size(); ++i) {
      if (votes[i].ballot_digest != d) continue;
      const tally::Locator at{h, static_cast<std::uint32_t>(i)};
      found.push_back({at, result.find_counted(at) != nullptr});
    }
  }
  return found;
}

nlohmann::json inclusions_to_json(const std::vector<Inclusion>& found) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : found) arr.push_back({{"height", f.at.height}, {"index", f.at.index}, {"counted", f.counted}});
  return {{"found", !found.empty()}, {"records", arr}};
}

}  // namespace qvote::audit
