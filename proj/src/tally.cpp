#include "qvote/tally.hpp"

#include <algorithm>
#include <tuple>
#include <unordered_map>

namespace qvote::tally {

std::string_view to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::Counted: return "Counted";
    case RecordStatus::Duplicate: return "Duplicate";
    case RecordStatus::InvalidBallot: return "InvalidBallot";
    case RecordStatus::RevokedBallot: return "RevokedBallot";
    case RecordStatus::BadSignature: return "BadSignature";
    case RecordStatus::BadChoice: return "BadChoice";
    case RecordStatus::AfterCutoff: return "AfterCutoff";
  }
  return "InvalidBallot";
}

namespace {

RecordStatus status_from_string(std::string_view s) {
  for (auto r : {RecordStatus::Counted, RecordStatus::Duplicate, RecordStatus::InvalidBallot,
                 RecordStatus::RevokedBallot, RecordStatus::BadSignature, RecordStatus::BadChoice,
                 RecordStatus::AfterCutoff}) {
    if (to_string(r) == s) return r;
  }
  throw Error(ErrorCode::MalformedInput, "unknown record status '" + std::string(s) + "'");
}

RecordStatus from_reject(consensus::RejectReason r) {
  switch (r) {
    case consensus::RejectReason::InvalidBallot: return RecordStatus::InvalidBallot;
    case consensus::RejectReason::RevokedBallot: return RecordStatus::RevokedBallot;
    case consensus::RejectReason::BadSignature: return RecordStatus::BadSignature;
    case consensus::RejectReason::BadChoice: return RecordStatus::BadChoice;
    case consensus::RejectReason::AfterCutoff: return RecordStatus::AfterCutoff;
  }
  return RecordStatus::InvalidBallot;
}

}  // namespace

const CountedVote* TallyResult::find_counted(const Locator& at) const {
  for (const auto& c : counted) {
    if (c.at == at) return &c;
  }
  return nullptr;
}

TallyResult tally(const ledger::Chain& chain, const authority::CommitmentList& commitments,
                  const ElectionConfig& config) {
  const ledger::ChainVerdict verdict = ledger::validate_chain(chain);
  if (!verdict.valid) {
    throw Error(ErrorCode::ChainInvalid,
                "invalid at height " + std::to_string(verdict.first_bad_height.value_or(0)) + ": " + verdict.reason);
  }

  TallyResult out;
  out.candidates = config.candidates;
  out.counts.assign(config.candidates.size(), 0);
  out.chain_tip = chain.tip_hash();
  out.commitments_digest = commitments.digest();

  struct Valid {
    Locator at;
    const ledger::VoteRecord* vote;
  };
  std::vector<Valid> valid;
  std::unordered_map<Digest, std::size_t, DigestHash> winner;  // digest -> index into valid

  for (std::size_t h = 1; h < chain.size(); ++h) {
    const auto& votes = chain.at(h).votes;
    for (std::size_t i = 0; i < votes.size(); ++i) {
      const ledger::VoteRecord& v = votes[i];
      const Locator at{h, static_cast<std::uint32_t>(i)};
      ++out.total_cast;
      // The cast time stands in for the receipt time: the record was on chain
      // before tallying, so only the claimed time can exceed the cutoff.
      const auto reason =
          consensus::authenticate_vote(v, commitments, config.candidates.size(), v.cast_at, config.cutoff);
      if (reason) {
        out.rejected.push_back({v.ballot_digest, at, from_reject(*reason)});
        continue;
      }
      valid.push_back({at, &v});
      auto [it, fresh] = winner.emplace(v.ballot_digest, valid.size() - 1);
      if (!fresh) {
        const Valid& cur = valid[it->second];
        // Chain order already breaks ties, so a strictly earlier cast wins.
        if (v.cast_at < cur.vote->cast_at) it->second = valid.size() - 1;
      }
    }
  }

  for (std::size_t k = 0; k < valid.size(); ++k) {
    const Valid& c = valid[k];
    if (winner.at(c.vote->ballot_digest) == k) {
      out.counted.push_back({c.vote->ballot_digest, c.at, c.vote->choice, c.vote->cast_at});
      ++out.counts[c.vote->choice];
      ++out.total_counted;
    } else {
      out.rejected.push_back({c.vote->ballot_digest, c.at, RecordStatus::Duplicate});
    }
  }
  std::sort(out.rejected.begin(), out.rejected.end(), [](const RejectedVote& a, const RejectedVote& b) {
    return std::tie(a.at.height, a.at.index) < std::tie(b.at.height, b.at.index);
  });
  return out;
}

nlohmann::json TallyResult::to_json() const {
  nlohmann::json c = nlohmann::json::object();
  nlohmann::json counts_arr = nlohmann::json::array();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    c[candidates[i]] = counts[i];
    counts_arr.push_back(counts[i]);
  }
  nlohmann::json counted_j = nlohmann::json::array();
  for (const auto& v : counted) {
    counted_j.push_back({{"ballot_digest", to_hex(v.ballot_digest)},
                         {"height", v.at.height},
                         {"index", v.at.index},
                         {"choice", v.choice},
                         {"cast_at", v.cast_at}});
  }
  nlohmann::json rejected_j = nlohmann::json::array();
  for (const auto& v : rejected) {
    rejected_j.push_back({{"ballot_digest", to_hex(v.ballot_digest)},
                          {"height", v.at.height},
                          {"index", v.at.index},
                          {"reason", to_string(v.reason)}});
  }
  return {{"candidates", candidates},
          {"counts", counts_arr},
          {"by_candidate", c},
          {"counted", counted_j},
          {"rejected", rejected_j},
          {"total_cast", total_cast},
          {"total_counted", total_counted},
          {"chain_tip", to_hex(chain_tip)},
          {"commitments_digest", to_hex(commitments_digest)}};
}

TallyResult TallyResult::from_json(const nlohmann::json& j) {
  TallyResult t;
  t.candidates = j.at("candidates").get<std::vector<std::string>>();
  t.counts = j.at("counts").get<std::vector<std::uint64_t>>();
  if (t.counts.size() != t.candidates.size()) throw Error(ErrorCode::MalformedInput, "counts/candidates mismatch");
  for (const auto& v : j.at("counted")) {
    t.counted.push_back({digest_from_hex(v.at("ballot_digest").get<std::string>()),
                         {v.at("height").get<std::uint64_t>(), v.at("index").get<std::uint32_t>()},
                         v.at("choice").get<std::uint32_t>(),
                         v.at("cast_at").get<Millis>()});
  }
  for (const auto& v : j.at("rejected")) {
    t.rejected.push_back({digest_from_hex(v.at("ballot_digest").get<std::string>()),
                          {v.at("height").get<std::uint64_t>(), v.at("index").get<std::uint32_t>()},
                          status_from_string(v.at("reason").get<std::string>())});
  }
  t.total_cast = j.at("total_cast").get<std::uint64_t>();
  t.total_counted = j.at("total_counted").get<std::uint64_t>();
  t.chain_tip = digest_from_hex(j.at("chain_tip").get<std::string>());
  t.commitments_digest = digest_from_hex(j.at("commitments_digest").get<std::string>());
  return t;
}

}  // namespace qvote::tally
