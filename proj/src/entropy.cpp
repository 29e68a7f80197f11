#include "qvote/entropy.hpp"

#include <algorithm>
#include <cmath>

#include "qvote/hash.hpp"

namespace qvote::entropy {

std::size_t BitString::count_ones() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Bytes BitString::pack() const {
  Bytes out((bits_.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return out;
}

BitString BitString::unpack(std::span<const std::uint8_t> bytes, std::size_t nbits) {
  if (nbits > bytes.size() * 8) throw Error(ErrorCode::LengthMismatch, "not enough bytes for bit count");
  BitString out(nbits);
  for (std::size_t i = 0; i < nbits; ++i) out.set(i, (bytes[i / 8] >> (7 - i % 8)) & 1u);
  return out;
}

std::string BitString::to_hex() const { return qvote::to_hex(pack()); }

BitString BitString::from_hex(std::string_view hex, std::size_t nbits) {
  const Bytes raw = qvote::from_hex(hex);
  if (raw.size() != (nbits + 7) / 8) throw Error(ErrorCode::LengthMismatch, "hex length does not match bit count");
  return unpack(raw, nbits);
}

BitString BitString::from_string(std::string_view s) {
  BitString out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw Error(ErrorCode::MalformedInput, "bit literal must be 0/1");
    out.push_back(c == '1');
  }
  return out;
}

std::string BitString::to_string() const {
  std::string out(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i) out[i] = bits_[i] ? '1' : '0';
  return out;
}

EntropySource::EntropySource(SourceKind kind) : kind_(kind) {
  if (auto* b = std::get_if<SimulatedBeamsplitter>(&kind_)) {
    if (!(b->detector_bias >= 0.0 && b->detector_bias <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "detector bias must lie in [0,1]");
    }
    engine_.seed(b->seed);
  } else if (auto* s = std::get_if<SeededTestSource>(&kind_)) {
    engine_.seed(s->seed);
  }
}

EntropySource EntropySource::beamsplitter(double detector_bias, std::uint64_t seed) {
  return EntropySource(SimulatedBeamsplitter{detector_bias, seed});
}

EntropySource EntropySource::beamsplitter(double detector_bias) {
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  return EntropySource(SimulatedBeamsplitter{detector_bias, seed});
}

EntropySource EntropySource::seeded(std::uint64_t seed) { return EntropySource(SeededTestSource{seed}); }

EntropySource EntropySource::constant(bool bit) { return EntropySource(ConstantSource{bit}); }

// One word of 64 detector outcomes, consumed MSB-first.
std::uint64_t EntropySource::fresh_word() {
  if (auto* c = std::get_if<ConstantSource>(&kind_)) return c->bit ? ~std::uint64_t{0} : 0;
  if (auto* b = std::get_if<SimulatedBeamsplitter>(&kind_); b != nullptr && b->detector_bias != 0.5) {
    // One photon per bit; the "1" detector clicks with probability bias.
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    std::uint64_t w = 0;
    for (int i = 0; i < 64; ++i) {
      const double u = static_cast<double>(engine_() >> 11) * kScale;
      w = (w << 1) | (u < b->detector_bias ? 1u : 0u);
    }
    return w;
  }
  return engine_();
}

bool EntropySource::next_bit() {
  if (left_ == 0) {
    word_ = fresh_word();
    left_ = 64;
  }
  --left_;
  ++consumed_;
  return (word_ >> left_) & 1u;
}

BitString EntropySource::next_bits(std::size_t n) {
  BitString out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(next_bit());
  return out;
}

std::uint64_t EntropySource::next_u64() {
  if (left_ == 0) {
    consumed_ += 64;
    return fresh_word();
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 64; ++i) v = (v << 1) | (next_bit() ? 1u : 0u);
  return v;
}

Bytes EntropySource::next_bytes(std::size_t n) {
  Bytes out(n);
  std::size_t i = 0;
  while (i < n) {
    if (left_ == 0 && n - i >= 8) {
      const std::uint64_t w = next_u64();
      for (int k = 0; k < 8; ++k) out[i++] = static_cast<std::uint8_t>(w >> (56 - 8 * k));
      continue;
    }
    std::uint8_t byte = 0;
    for (int k = 0; k < 8; ++k) byte = static_cast<std::uint8_t>((byte << 1) | (next_bit() ? 1 : 0));
    out[i++] = byte;
  }
  return out;
}

std::uint64_t EntropySource::uniform(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::InvalidArgument, "uniform bound must be >= 1");
  if (bound == 1) return 0;
  int bits = 0;
  while (bits < 64 && (std::uint64_t{1} << bits) < bound) ++bits;
  // A constant source would never terminate; fall back to a modular draw.
  const bool degenerate = std::holds_alternative<ConstantSource>(kind_);
  for (;;) {
    std::uint64_t v = 0;
    for (int i = 0; i < bits; ++i) v = (v << 1) | (next_bit() ? 1u : 0u);
    if (v < bound) return v;
    if (degenerate) return v % bound;
  }
}

Id256 Id256::from_hex(std::string_view hex) {
  if (hex.size() != 64) throw Error(ErrorCode::MalformedInput, "Id256 must be 64 hex characters");
  const Bytes raw = qvote::from_hex(hex);
  std::array<std::uint8_t, 32> b{};
  std::copy(raw.begin(), raw.end(), b.begin());
  return Id256(b);
}

Id256 generate_id(EntropySource& source) {
  const Bytes raw = source.next_bytes(32);
  std::array<std::uint8_t, 32> b{};
  std::copy(raw.begin(), raw.end(), b.begin());
  return Id256(b);
}

HealthReport health_check(const BitString& sample) {
  const std::size_t n = sample.size();
  if (n < kMinHealthSample) {
    throw Error(ErrorCode::SampleTooSmall, "need at least " + std::to_string(kMinHealthSample) + " bits");
  }
  HealthReport r;
  r.sample_size = n;
  const double len = static_cast<double>(n);
  const double pi = static_cast<double>(sample.count_ones()) / len;
  r.ones_fraction = pi;
  r.monobit_pass = std::abs(pi - 0.5) <= 3.0 * std::sqrt(0.25 / len);

  std::size_t runs = 1;
  for (std::size_t i = 1; i < n; ++i) runs += sample[i] != sample[i - 1] ? 1 : 0;
  r.runs = runs;
  const double spread = pi * (1.0 - pi);
  if (spread == 0.0) {
    r.runs_pass = false;
    r.runs_z = INFINITY;
  } else {
    r.runs_z = std::abs(static_cast<double>(runs) - 2.0 * len * spread) / (2.0 * std::sqrt(len) * spread);
    r.runs_pass = r.runs_z <= 3.0;
  }
  return r;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index) {
  Sha256 h;
  std::array<std::uint8_t, 16> nums{};
  for (int i = 0; i < 8; ++i) {
    nums[i] = static_cast<std::uint8_t>(base >> (56 - 8 * i));
    nums[8 + i] = static_cast<std::uint8_t>(index >> (56 - 8 * i));
  }
  h.update(nums).update(label);
  const Digest d = h.finish();
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
  return v;
}

}  // namespace qvote::entropy
