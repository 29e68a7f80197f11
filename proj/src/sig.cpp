#include "qvote/sig.hpp"

#include <algorithm>

#include "qvote/hash.hpp"

namespace qvote::sig {

namespace {

template <typename Array>
Array array_from_hex(const std::string& hex) {
  const Bytes raw = from_hex(hex);
  Array out;
  if (raw.size() != out.size()) throw Error(ErrorCode::MalformedInput, "expected 32-byte value");
  std::copy(raw.begin(), raw.end(), out.begin());
  return out;
}

}  // namespace

bool digest_bit(const Digest& d, std::size_t i) { return (d[i / 8] >> (7 - i % 8)) & 1u; }

Digest OtsPublicKey::fingerprint() const {
  Sha256 h;
  for (const auto& d : digests) h.update(d);
  return h.finish();
}

nlohmann::json OtsPublicKey::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : digests) arr.push_back(to_hex(d));
  return arr;
}

OtsPublicKey OtsPublicKey::from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 * kDigestBits) {
    throw Error(ErrorCode::MalformedInput, "public key must be 512 hex digests");
  }
  OtsPublicKey pk;
  for (std::size_t i = 0; i < j.size(); ++i) pk.digests[i] = array_from_hex<Digest>(j[i].get<std::string>());
  return pk;
}

nlohmann::json OtsSignature::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : revealed) arr.push_back(to_hex(p));
  return arr;
}

OtsSignature OtsSignature::from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != kDigestBits) {
    throw Error(ErrorCode::MalformedInput, "signature must be 256 hex preimages");
  }
  OtsSignature s;
  for (std::size_t i = 0; i < j.size(); ++i) s.revealed[i] = array_from_hex<Preimage>(j[i].get<std::string>());
  return s;
}

OtsKeyPair OtsKeyPair::generate(entropy::EntropySource& entropy) {
  OtsKeyPair kp;
  kp.secret_.resize(2 * kDigestBits);
  const Bytes raw = entropy.next_bytes(kp.secret_.size() * 32);
  for (std::size_t i = 0; i < kp.secret_.size(); ++i) {
    std::copy_n(raw.begin() + static_cast<std::ptrdiff_t>(32 * i), 32, kp.secret_[i].begin());
    kp.public_.digests[i] = sha256(kp.secret_[i]);
  }
  return kp;
}

OtsSignature OtsKeyPair::sign(std::span<const std::uint8_t> message) {
  if (used_) throw Error(ErrorCode::OneTimeKeyReuse, "one-time key already signed a message");
  used_ = true;
  const Digest d = sha256(message);
  OtsSignature s;
  for (std::size_t i = 0; i < kDigestBits; ++i) s.revealed[i] = secret_[2 * i + (digest_bit(d, i) ? 1 : 0)];
  return s;
}

nlohmann::json OtsKeyPair::export_json() const {
  nlohmann::json secret = nlohmann::json::array();
  for (const auto& p : secret_) secret.push_back(to_hex(p));
  return {{"secret", secret}, {"used", used_}};
}

OtsKeyPair OtsKeyPair::import_json(const nlohmann::json& j) {
  const auto& secret = j.at("secret");
  if (!secret.is_array() || secret.size() != 2 * kDigestBits) {
    throw Error(ErrorCode::MalformedInput, "secret key must be 512 hex preimages");
  }
  OtsKeyPair kp;
  kp.secret_.resize(2 * kDigestBits);
  for (std::size_t i = 0; i < kp.secret_.size(); ++i) {
    kp.secret_[i] = array_from_hex<Preimage>(secret[i].get<std::string>());
    kp.public_.digests[i] = sha256(kp.secret_[i]);
  }
  kp.used_ = j.at("used").get<bool>();
  return kp;
}

bool verify(const OtsPublicKey& public_key, std::span<const std::uint8_t> message, const OtsSignature& signature) {
  if (signature.revealed.size() != kDigestBits || public_key.digests.size() != 2 * kDigestBits) return false;
  const Digest d = sha256(message);
  for (std::size_t i = 0; i < kDigestBits; ++i) {
    if (sha256(signature.revealed[i]) != public_key.at(i, digest_bit(d, i))) return false;
  }
  return true;
}

}  // namespace qvote::sig
