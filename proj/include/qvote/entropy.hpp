#pragma once

// Randomness for the protocol: the voting authority's QRNG is modelled as a
// single-photon beamsplitter with two detectors, where exactly one detector
// clicks per photon. Each click is one output bit.

#include <compare>
#include <random>
#include <variant>

#include "qvote/common.hpp"

namespace qvote::entropy {

/// A sequence of bits, one per element. Packs MSB-first when rendered.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t n, bool value = false) : bits_(n, value ? 1 : 0) {}

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }
  void push_back(bool v) { bits_.push_back(v ? 1 : 0); }
  void reserve(std::size_t n) { bits_.reserve(n); }
  void append(const BitString& other) { bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end()); }

  std::size_t count_ones() const;

  /// Packs the bits MSB-first; a trailing partial byte is zero padded.
  Bytes pack() const;
  static BitString unpack(std::span<const std::uint8_t> bytes, std::size_t nbits);

  /// Lowercase hex of pack(); the bit length travels separately.
  std::string to_hex() const;
  static BitString from_hex(std::string_view hex, std::size_t nbits);
  /// Parses a literal such as "0101".
  static BitString from_string(std::string_view zeros_and_ones);
  std::string to_string() const;

  bool operator==(const BitString&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct SimulatedBeamsplitter {
  double detector_bias = 0.5;  // probability that the "1" detector clicks
  std::uint64_t seed = 0;      // drives the simulated photon outcomes
};
struct SeededTestSource {
  std::uint64_t seed = 0;
};
struct ConstantSource {
  bool bit = false;
};

using SourceKind = std::variant<SimulatedBeamsplitter, SeededTestSource, ConstantSource>;

/// Stateful bit stream. Consecutive reads continue the stream; nothing is
/// ever replayed. Single owner, movable, not copyable.
class EntropySource {
 public:
  static EntropySource beamsplitter(double detector_bias, std::uint64_t seed);
  /// Beamsplitter seeded from std::random_device, for live use.
  static EntropySource beamsplitter(double detector_bias = 0.5);
  static EntropySource seeded(std::uint64_t seed);
  static EntropySource constant(bool bit);

  EntropySource(EntropySource&&) = default;
  EntropySource& operator=(EntropySource&&) = default;
  EntropySource(const EntropySource&) = delete;
  EntropySource& operator=(const EntropySource&) = delete;

  const SourceKind& kind() const { return kind_; }

  bool next_bit();
  BitString next_bits(std::size_t n);
  /// Next 8n bits of the stream packed MSB-first.
  Bytes next_bytes(std::size_t n);
  std::uint64_t next_u64();
  /// Uniform integer in [0, bound) by rejection sampling; bound >= 1.
  std::uint64_t uniform(std::uint64_t bound);

  std::uint64_t bits_consumed() const { return consumed_; }

 private:
  explicit EntropySource(SourceKind kind);

  std::uint64_t fresh_word();

  SourceKind kind_;
  std::mt19937_64 engine_;
  std::uint64_t word_ = 0;
  int left_ = 0;
  std::uint64_t consumed_ = 0;
};

/// 256-bit identifier used for both VIDs and BIDs.
class Id256 {
 public:
  Id256() = default;
  explicit Id256(const std::array<std::uint8_t, 32>& bytes) : bytes_(bytes) {}

  static Id256 from_hex(std::string_view hex);
  std::string to_hex() const { return qvote::to_hex(bytes_); }
  const std::array<std::uint8_t, 32>& bytes() const { return bytes_; }
  static constexpr std::size_t kBits = 256;

  auto operator<=>(const Id256&) const = default;

 private:
  std::array<std::uint8_t, 32> bytes_{};
};

Id256 generate_id(EntropySource& source);

struct HealthReport {
  bool monobit_pass = false;
  bool runs_pass = false;
  std::size_t sample_size = 0;
  double ones_fraction = 0.0;
  std::size_t runs = 0;
  double runs_z = 0.0;
};

inline constexpr std::size_t kMinHealthSample = 100;

/// Monobit and runs tests at the 3-sigma level. Throws SampleTooSmall below
/// kMinHealthSample bits.
HealthReport health_check(const BitString& sample);

/// Deterministic seed derivation so one scenario seed can feed many
/// independent streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index = 0);

}  // namespace qvote::entropy
