#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "qvote/common.hpp"
#include "qvote/qkd.hpp"

namespace qvote {

/// Which constituency a miner represents.
enum class Representation { CandidatePool, VotingPool, CivilSociety, Independent };

std::string_view to_string(Representation r);
Representation representation_from_string(std::string_view s);

struct MinerSpec {
  std::string name;
  Representation representation = Representation::Independent;
};

struct QkdSettings {
  double noise_prob = 0.0;
  std::size_t pulses = 4096;
  double qber_abort_threshold = qkd::kDefaultQberThreshold;
  double sample_fraction = qkd::kDefaultSampleFraction;

  qkd::LinkParams link_params(std::size_t pad_bytes, std::size_t auth_bytes) const;
};

inline constexpr std::size_t kMaxVotesPerBlock = 1000;

struct ElectionConfig {
  std::string election_id = "election";
  std::vector<std::string> candidates;
  Millis registration_deadline = 0;
  Millis voting_open = 0;
  Millis cutoff = 0;
  Millis slot_period = 1000;
  std::vector<MinerSpec> miners;
  std::uint32_t trustee_threshold = 3;
  std::uint32_t trustee_count = 5;
  QkdSettings qkd;
  std::uint64_t rng_seed = 0;
  std::size_t max_votes_per_block = kMaxVotesPerBlock;

  /// Throws InvalidArgument describing the first violated constraint.
  void validate() const;
  /// SHA-256 over the canonical encoding of every field.
  Digest digest() const;

  nlohmann::json to_json() const;
  static ElectionConfig from_json(const nlohmann::json& j);

  /// Three candidates, seven miners across the four constituencies, 3-of-5
  /// trustees; times in milliseconds from zero.
  static ElectionConfig example();
};

}  // namespace qvote
