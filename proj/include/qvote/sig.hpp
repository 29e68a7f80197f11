#pragma once

// Lamport one-time signatures over SHA-256. A key signs exactly one message:
// the signature reveals, for each of the 256 digest bits, the preimage that
// bit selects.

#include <nlohmann/json.hpp>

#include "qvote/entropy.hpp"

namespace qvote::sig {

inline constexpr std::size_t kDigestBits = 256;

using Preimage = std::array<std::uint8_t, 32>;

struct OtsPublicKey {
  /// digests[2*i + b] = H(secret[i][b])
  std::vector<Digest> digests = std::vector<Digest>(2 * kDigestBits);

  const Digest& at(std::size_t i, bool bit) const { return digests[2 * i + (bit ? 1 : 0)]; }
  /// SHA-256 over the 512 concatenated digests; published in commitments.
  Digest fingerprint() const;

  /// 512 hex digests.
  nlohmann::json to_json() const;
  static OtsPublicKey from_json(const nlohmann::json& j);

  bool operator==(const OtsPublicKey&) const = default;
};

struct OtsSignature {
  std::vector<Preimage> revealed = std::vector<Preimage>(kDigestBits);

  /// 256 hex preimages.
  nlohmann::json to_json() const;
  static OtsSignature from_json(const nlohmann::json& j);

  bool operator==(const OtsSignature&) const = default;
};

class OtsKeyPair {
 public:
  static OtsKeyPair generate(entropy::EntropySource& entropy);

  OtsKeyPair(OtsKeyPair&&) = default;
  OtsKeyPair& operator=(OtsKeyPair&&) = default;
  OtsKeyPair(const OtsKeyPair&) = delete;
  OtsKeyPair& operator=(const OtsKeyPair&) = delete;

  const OtsPublicKey& public_key() const { return public_; }
  bool used() const { return used_; }

  /// Throws OneTimeKeyReuse on any call after the first.
  OtsSignature sign(std::span<const std::uint8_t> message);

  /// Client-side persistence of the key, including its used flag.
  nlohmann::json export_json() const;
  static OtsKeyPair import_json(const nlohmann::json& j);

  /// Read-only view of the preimages: secret[2*i + b].
  const std::vector<Preimage>& secret() const { return secret_; }

 private:
  OtsKeyPair() = default;

  std::vector<Preimage> secret_;
  OtsPublicKey public_;
  bool used_ = false;
};

bool verify(const OtsPublicKey& public_key, std::span<const std::uint8_t> message, const OtsSignature& signature);

/// Bit i of SHA-256(message), MSB-first.
bool digest_bit(const Digest& d, std::size_t i);

}  // namespace qvote::sig
