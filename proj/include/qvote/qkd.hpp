#pragma once

// BB84 over a simulated qubit channel, Wegman-Carter authentication for the
// classical side, and one-time-pad payload encryption with QKD key bits.
//
// Bases are encoded as bits: 0 = rectilinear (+), 1 = diagonal (x).

#include <optional>
#include <variant>

#include <nlohmann/json.hpp>

#include "qvote/entropy.hpp"

namespace qvote::qkd {

using entropy::BitString;
using entropy::EntropySource;

struct NoEavesdropper {};
struct InterceptResend {
  double fraction = 1.0;  // probability that each pulse is attacked
};

struct ChannelModel {
  double noise_prob = 0.0;
  std::variant<NoEavesdropper, InterceptResend> eavesdropper = NoEavesdropper{};

  void validate() const;
};

struct SiftResult {
  std::vector<std::size_t> positions;
  BitString bits;
};

/// Keeps the positions where both parties chose the same basis.
SiftResult sift(const BitString& alice_bases, const BitString& bob_bases, const BitString& bob_bits);

/// Hamming distance over length.
double estimate_qber(const BitString& alice_sample, const BitString& bob_sample);

struct Delivered {
  BitString key;  // sender side
};
struct Aborted {
  std::string reason;
};

inline constexpr double kDefaultQberThreshold = 0.11;
inline constexpr double kDefaultSampleFraction = 0.5;
inline constexpr std::size_t kMinPulses = 64;
inline constexpr std::size_t kMinKeyBits = 16;

struct Bb84Session {
  std::size_t pulses = 0;
  BitString alice_bits, alice_bases, bob_bases, bob_bits;
  std::vector<std::size_t> sifted_positions;
  BitString sifted_key;  // Alice's bits at sifted positions
  BitString bob_sifted;
  std::vector<std::size_t> sample_indices;  // indices into the sifted key, ascending
  double qber_estimate = 0.0;
  std::variant<Delivered, Aborted> outcome;
  BitString bob_key;  // receiver side of the delivered key; equals the key on an error-free channel

  bool delivered() const { return std::holds_alternative<Delivered>(outcome); }
  const BitString& key() const { return std::get<Delivered>(outcome).key; }

  /// Audit record: counts, hex-packed bases, qber and outcome.
  nlohmann::json transcript() const;
};

Bb84Session run_bb84(std::size_t pulses, const ChannelModel& channel, EntropySource& entropy,
                     double qber_abort_threshold = kDefaultQberThreshold,
                     double sample_fraction = kDefaultSampleFraction);

struct Bb84Params {
  std::size_t pulses = 4096;
  double qber_abort_threshold = kDefaultQberThreshold;
  double sample_fraction = kDefaultSampleFraction;
};

/// Runs BB84 sessions until at least min_bits of key are shared. A delivered
/// session whose two ends disagree (detected by comparing key digests) is
/// discarded, as is an aborted one. Throws KeyEstablishmentFailed after
/// max_sessions attempts.
BitString establish_shared_key(std::size_t min_bits, const ChannelModel& channel, const Bb84Params& params,
                               EntropySource& entropy, std::size_t max_sessions = 32);

// ---- Wegman-Carter ---------------------------------------------------------

struct WcTag {
  std::uint32_t mask_index = 0;
  std::uint64_t value = 0;

  bool operator==(const WcTag&) const = default;
};

/// Polynomial-evaluation universal hash over GF(2^64 - 59), masked with a
/// fresh 64-bit one-time pad per tag. The first 64 key bits are the hash
/// point; every further 64 bits is one mask.
class AuthKey {
 public:
  explicit AuthKey(std::span<const std::uint8_t> key_material);

  std::size_t capacity() const { return masks_.size(); }
  std::size_t usage_counter() const { return used_; }
  std::size_t remaining() const { return masks_.size() - used_; }

  nlohmann::json to_json() const;
  static AuthKey from_json(const nlohmann::json& j);

 private:
  friend WcTag wc_tag(AuthKey&, std::span<const std::uint8_t>);
  friend bool wc_verify(const AuthKey&, std::span<const std::uint8_t>, const WcTag&);

  Bytes material_;
  std::uint64_t point_ = 0;
  std::vector<std::uint64_t> masks_;
  std::size_t used_ = 0;
};

inline constexpr std::size_t kMinAuthKeyBytes = 32;
inline constexpr std::uint64_t kWcPrime = 0xFFFFFFFFFFFFFFC5ull;  // 2^64 - 59

/// Consumes the next mask. Throws KeyExhausted when none remain.
WcTag wc_tag(AuthKey& key, std::span<const std::uint8_t> message);
bool wc_verify(const AuthKey& key, std::span<const std::uint8_t> message, const WcTag& tag);

/// Unmasked polynomial hash, exposed for tests.
std::uint64_t poly_hash(std::uint64_t point, std::span<const std::uint8_t> message);

// ---- one-time pad ----------------------------------------------------------

struct Ciphertext {
  std::size_t offset = 0;  // first pad byte used
  Bytes data;
};

/// Pad of QKD key bytes. Every byte is used at most once; the cursor only
/// moves forward.
class OneTimePad {
 public:
  OneTimePad() = default;
  explicit OneTimePad(const BitString& key_bits);

  std::size_t size() const { return key_.size(); }
  std::size_t remaining() const { return key_.size() - cursor_; }
  std::size_t cursor() const { return cursor_; }
  void extend(const BitString& key_bits);

  /// Throws KeyExhausted if the pad cannot cover the payload.
  Ciphertext encrypt(std::span<const std::uint8_t> payload);
  /// Decrypts with the segment named by the ciphertext; segments behind the
  /// cursor are refused with KeyExhausted.
  Bytes decrypt(const Ciphertext& ct);

  nlohmann::json to_json() const;
  static OneTimePad from_json(const nlohmann::json& j);

 private:
  Bytes key_;
  std::size_t cursor_ = 0;
};

// ---- secure link -----------------------------------------------------------

/// Encrypted, authenticated message: payload one-time padded, tag computed
/// over the plaintext so that a receiver with a diverging pad notices.
struct SealedMessage {
  Ciphertext ciphertext;
  WcTag tag;

  nlohmann::json to_json() const;
  static SealedMessage from_json(const nlohmann::json& j);
};

/// One endpoint of a two-party link: pad bytes from QKD and a pre-shared
/// authentication key per direction.
class LinkEnd {
 public:
  LinkEnd(OneTimePad pad, AuthKey send_auth, AuthKey recv_auth)
      : pad_(std::move(pad)), send_auth_(std::move(send_auth)), recv_auth_(std::move(recv_auth)) {}

  SealedMessage seal(std::span<const std::uint8_t> plaintext);
  /// nullopt when the tag does not verify (tampering or pad divergence).
  std::optional<Bytes> open(const SealedMessage& msg);

  WcTag tag(std::span<const std::uint8_t> message) { return wc_tag(send_auth_, message); }
  bool check(std::span<const std::uint8_t> message, const WcTag& t) const { return wc_verify(recv_auth_, message, t); }

  const OneTimePad& pad() const { return pad_; }

  /// Full endpoint state; this is key material and stays with its owner.
  nlohmann::json to_json() const;
  static LinkEnd from_json(const nlohmann::json& j);

 private:
  OneTimePad pad_;
  AuthKey send_auth_;
  AuthKey recv_auth_;
};

struct Link {
  LinkEnd a;
  LinkEnd b;
};

struct LinkParams {
  ChannelModel channel;
  Bb84Params bb84;
  std::size_t pad_bytes = 256;
  std::size_t auth_bytes = 136;  // hash point + 16 masks per direction
};

/// Establishes pad bytes via BB84 and draws the pre-shared authentication
/// material from the same entropy source.
Link establish_link(const LinkParams& params, EntropySource& entropy);

}  // namespace qvote::qkd
