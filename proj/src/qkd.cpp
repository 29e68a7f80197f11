#include "qvote/qkd.hpp"

#include <algorithm>
#include <cmath>

#include "qvote/hash.hpp"

namespace qvote::qkd {

namespace {

bool bernoulli(EntropySource& src, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  return static_cast<double>(src.next_u64() >> 11) * kScale < p;
}

void check_unit_interval(double v, const char* what) {
  if (!(v > 0.0 && v < 1.0)) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must lie in (0,1)");
}

using u128 = unsigned __int128;

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::uint64_t>((static_cast<u128>(a) * b) % kWcPrime);
}

std::uint64_t addmod(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::uint64_t>((static_cast<u128>(a) + b) % kWcPrime);
}

std::uint64_t read_be64(std::span<const std::uint8_t> b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

void ChannelModel::validate() const {
  if (!(noise_prob >= 0.0 && noise_prob <= 0.5)) throw Error(ErrorCode::InvalidArgument, "noise_prob must lie in [0,0.5]");
  if (auto* ir = std::get_if<InterceptResend>(&eavesdropper)) {
    if (!(ir->fraction >= 0.0 && ir->fraction <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "intercept fraction must lie in [0,1]");
    }
  }
}

SiftResult sift(const BitString& alice_bases, const BitString& bob_bases, const BitString& bob_bits) {
  if (alice_bases.size() != bob_bases.size() || bob_bases.size() != bob_bits.size()) {
    throw Error(ErrorCode::LengthMismatch, "bases and bits must have equal lengths");
  }
  SiftResult r;
  for (std::size_t i = 0; i < alice_bases.size(); ++i) {
    if (alice_bases[i] == bob_bases[i]) {
      r.positions.push_back(i);
      r.bits.push_back(bob_bits[i]);
    }
  }
  return r;
}

double estimate_qber(const BitString& alice_sample, const BitString& bob_sample) {
  if (alice_sample.size() != bob_sample.size()) throw Error(ErrorCode::LengthMismatch, "sample lengths differ");
  if (alice_sample.empty()) throw Error(ErrorCode::EmptySample, "cannot estimate QBER of an empty sample");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < alice_sample.size(); ++i) errors += alice_sample[i] != bob_sample[i] ? 1 : 0;
  return static_cast<double>(errors) / static_cast<double>(alice_sample.size());
}

Bb84Session run_bb84(std::size_t pulses, const ChannelModel& channel, EntropySource& entropy,
                     double qber_abort_threshold, double sample_fraction) {
  if (pulses < kMinPulses) throw Error(ErrorCode::InvalidArgument, "BB84 needs at least 64 pulses");
  check_unit_interval(qber_abort_threshold, "qber_abort_threshold");
  check_unit_interval(sample_fraction, "sample_fraction");
  channel.validate();

  const auto* attack = std::get_if<InterceptResend>(&channel.eavesdropper);

  Bb84Session s;
  s.pulses = pulses;
  s.alice_bits.reserve(pulses);
  s.alice_bases.reserve(pulses);
  s.bob_bases.reserve(pulses);
  s.bob_bits.reserve(pulses);

  for (std::size_t i = 0; i < pulses; ++i) {
    const bool a_bit = entropy.next_bit();
    const bool a_basis = entropy.next_bit();
    bool q_basis = a_basis;
    bool q_bit = a_bit;

    if (attack != nullptr && bernoulli(entropy, attack->fraction)) {
      // Intercept-resend: measure in a random basis, re-prepare the outcome.
      const bool e_basis = entropy.next_bit();
      const bool e_bit = e_basis == q_basis ? q_bit : entropy.next_bit();
      q_basis = e_basis;
      q_bit = e_bit;
    }

    const bool b_basis = entropy.next_bit();
    bool b_bit = b_basis == q_basis ? q_bit : entropy.next_bit();
    if (bernoulli(entropy, channel.noise_prob)) b_bit = !b_bit;

    s.alice_bits.push_back(a_bit);
    s.alice_bases.push_back(a_basis);
    s.bob_bases.push_back(b_basis);
    s.bob_bits.push_back(b_bit);
  }

  SiftResult sifted = sift(s.alice_bases, s.bob_bases, s.bob_bits);
  s.sifted_positions = std::move(sifted.positions);
  s.bob_sifted = std::move(sifted.bits);
  for (std::size_t p : s.sifted_positions) s.sifted_key.push_back(s.alice_bits[p]);

  const std::size_t total = s.sifted_positions.size();
  const auto sample_size = static_cast<std::size_t>(std::llround(sample_fraction * static_cast<double>(total)));
  if (sample_size == 0 || total - sample_size < kMinKeyBits) {
    throw Error(ErrorCode::InsufficientSiftedBits,
                std::to_string(total) + " sifted bits leave fewer than " + std::to_string(kMinKeyBits) + " key bits");
  }

  // Partial Fisher-Yates over the sifted indices.
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  for (std::size_t i = 0; i < sample_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(entropy.uniform(total - i));
    std::swap(order[i], order[j]);
  }
  s.sample_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sample_size));
  std::sort(s.sample_indices.begin(), s.sample_indices.end());

  std::vector<bool> sampled(total, false);
  BitString alice_sample, bob_sample;
  for (std::size_t idx : s.sample_indices) {
    sampled[idx] = true;
    alice_sample.push_back(s.sifted_key[idx]);
    bob_sample.push_back(s.bob_sifted[idx]);
  }
  s.qber_estimate = estimate_qber(alice_sample, bob_sample);

  if (s.qber_estimate > qber_abort_threshold) {
    s.outcome = Aborted{"qber " + std::to_string(s.qber_estimate) + " exceeds threshold " +
                        std::to_string(qber_abort_threshold)};
    return s;
  }

  BitString key;
  for (std::size_t i = 0; i < total; ++i) {
    if (sampled[i]) continue;
    key.push_back(s.sifted_key[i]);
    s.bob_key.push_back(s.bob_sifted[i]);
  }
  s.outcome = Delivered{std::move(key)};
  return s;
}

nlohmann::json Bb84Session::transcript() const {
  nlohmann::json j;
  j["pulses"] = pulses;
  j["alice_bases"] = alice_bases.to_hex();
  j["bob_bases"] = bob_bases.to_hex();
  j["sifted"] = sifted_positions.size();
  j["sampled"] = sample_indices.size();
  j["qber"] = qber_estimate;
  if (delivered()) {
    j["outcome"] = "delivered";
    j["key_bits"] = key().size();
  } else {
    j["outcome"] = "aborted";
    j["reason"] = std::get<Aborted>(outcome).reason;
  }
  return j;
}

BitString establish_shared_key(std::size_t min_bits, const ChannelModel& channel, const Bb84Params& params,
                               EntropySource& entropy, std::size_t max_sessions) {
  BitString shared;
  for (std::size_t attempt = 0; attempt < max_sessions && shared.size() < min_bits; ++attempt) {
    Bb84Session s;
    try {
      s = run_bb84(params.pulses, channel, entropy, params.qber_abort_threshold, params.sample_fraction);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientSiftedBits) throw;
      continue;
    }
    if (!s.delivered()) continue;
    // Key confirmation: both ends publish a digest of their half.
    if (sha256(s.key().pack()) != sha256(s.bob_key.pack()) || s.key().size() != s.bob_key.size()) continue;
    shared.append(s.key());
  }
  if (shared.size() < min_bits) {
    throw Error(ErrorCode::KeyEstablishmentFailed,
                "only " + std::to_string(shared.size()) + " of " + std::to_string(min_bits) + " key bits agreed");
  }
  return shared;
}

// ---- Wegman-Carter ---------------------------------------------------------

AuthKey::AuthKey(std::span<const std::uint8_t> key_material) {
  if (key_material.size() < kMinAuthKeyBytes) {
    throw Error(ErrorCode::InvalidArgument, "authentication key needs at least 256 bits");
  }
  material_.assign(key_material.begin(), key_material.end());
  point_ = read_be64(key_material.first(8)) % kWcPrime;
  for (std::size_t off = 8; off + 8 <= key_material.size(); off += 8) {
    masks_.push_back(read_be64(key_material.subspan(off, 8)) % kWcPrime);
  }
}

nlohmann::json AuthKey::to_json() const { return {{"material", to_hex(material_)}, {"used", used_}}; }

AuthKey AuthKey::from_json(const nlohmann::json& j) {
  AuthKey k(from_hex(j.at("material").get<std::string>()));
  k.used_ = j.at("used").get<std::size_t>();
  if (k.used_ > k.masks_.size()) throw Error(ErrorCode::MalformedInput, "usage counter exceeds capacity");
  return k;
}

std::uint64_t poly_hash(std::uint64_t point, std::span<const std::uint8_t> message) {
  // 7-byte blocks stay below the prime; the length closes the polynomial.
  std::uint64_t h = 0;
  for (std::size_t off = 0; off < message.size(); off += 7) {
    std::uint64_t block = 0;
    const std::size_t n = std::min<std::size_t>(7, message.size() - off);
    for (std::size_t i = 0; i < n; ++i) block = (block << 8) | message[off + i];
    h = mulmod(addmod(h, block), point);
  }
  return mulmod(addmod(h, static_cast<std::uint64_t>(message.size())), point);
}

WcTag wc_tag(AuthKey& key, std::span<const std::uint8_t> message) {
  if (key.used_ >= key.masks_.size()) throw Error(ErrorCode::KeyExhausted, "authentication key has no unused masks");
  const auto index = static_cast<std::uint32_t>(key.used_++);
  return WcTag{index, addmod(poly_hash(key.point_, message), key.masks_[index])};
}

bool wc_verify(const AuthKey& key, std::span<const std::uint8_t> message, const WcTag& tag) {
  if (tag.mask_index >= key.masks_.size()) return false;
  return addmod(poly_hash(key.point_, message), key.masks_[tag.mask_index]) == tag.value;
}

// ---- one-time pad ----------------------------------------------------------

OneTimePad::OneTimePad(const BitString& key_bits) { extend(key_bits); }

void OneTimePad::extend(const BitString& key_bits) {
  // Only whole bytes are usable.
  const std::size_t whole = key_bits.size() / 8 * 8;
  BitString trimmed;
  trimmed.reserve(whole);
  for (std::size_t i = 0; i < whole; ++i) trimmed.push_back(key_bits[i]);
  const Bytes packed = trimmed.pack();
  key_.insert(key_.end(), packed.begin(), packed.end());
}

Ciphertext OneTimePad::encrypt(std::span<const std::uint8_t> payload) {
  if (payload.size() > remaining()) {
    throw Error(ErrorCode::KeyExhausted, "pad has " + std::to_string(remaining()) + " bytes, payload needs " +
                                             std::to_string(payload.size()));
  }
  Ciphertext ct{cursor_, Bytes(payload.size())};
  for (std::size_t i = 0; i < payload.size(); ++i) ct.data[i] = payload[i] ^ key_[cursor_ + i];
  cursor_ += payload.size();
  return ct;
}

Bytes OneTimePad::decrypt(const Ciphertext& ct) {
  if (ct.offset < cursor_ || ct.offset + ct.data.size() > key_.size()) {
    throw Error(ErrorCode::KeyExhausted, "ciphertext names a consumed or missing pad segment");
  }
  Bytes out(ct.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ct.data[i] ^ key_[ct.offset + i];
  cursor_ = ct.offset + ct.data.size();
  return out;
}

nlohmann::json OneTimePad::to_json() const { return {{"key", to_hex(key_)}, {"cursor", cursor_}}; }

OneTimePad OneTimePad::from_json(const nlohmann::json& j) {
  OneTimePad p;
  p.key_ = from_hex(j.at("key").get<std::string>());
  p.cursor_ = j.at("cursor").get<std::size_t>();
  if (p.cursor_ > p.key_.size()) throw Error(ErrorCode::MalformedInput, "pad cursor beyond key");
  return p;
}

// ---- secure link -----------------------------------------------------------

nlohmann::json SealedMessage::to_json() const {
  return {{"offset", ciphertext.offset},
          {"ciphertext", to_hex(ciphertext.data)},
          {"tag_index", tag.mask_index},
          {"tag", tag.value}};
}

SealedMessage SealedMessage::from_json(const nlohmann::json& j) {
  SealedMessage m;
  m.ciphertext.offset = j.at("offset").get<std::size_t>();
  m.ciphertext.data = from_hex(j.at("ciphertext").get<std::string>());
  m.tag.mask_index = j.at("tag_index").get<std::uint32_t>();
  m.tag.value = j.at("tag").get<std::uint64_t>();
  return m;
}

SealedMessage LinkEnd::seal(std::span<const std::uint8_t> plaintext) {
  SealedMessage m;
  m.tag = wc_tag(send_auth_, plaintext);
  m.ciphertext = pad_.encrypt(plaintext);
  return m;
}

std::optional<Bytes> LinkEnd::open(const SealedMessage& msg) {
  Bytes plain = pad_.decrypt(msg.ciphertext);
  if (!wc_verify(recv_auth_, plain, msg.tag)) return std::nullopt;
  return plain;
}

nlohmann::json LinkEnd::to_json() const {
  return {{"pad", pad_.to_json()}, {"send_auth", send_auth_.to_json()}, {"recv_auth", recv_auth_.to_json()}};
}

LinkEnd LinkEnd::from_json(const nlohmann::json& j) {
  return LinkEnd(OneTimePad::from_json(j.at("pad")), AuthKey::from_json(j.at("send_auth")),
                 AuthKey::from_json(j.at("recv_auth")));
}

Link establish_link(const LinkParams& params, EntropySource& entropy) {
  const BitString key = establish_shared_key(params.pad_bytes * 8, params.channel, params.bb84, entropy);
  const Bytes forward = entropy.next_bytes(params.auth_bytes);
  const Bytes backward = entropy.next_bytes(params.auth_bytes);
  OneTimePad pad(key);
  return Link{LinkEnd(pad, AuthKey(forward), AuthKey(backward)), LinkEnd(pad, AuthKey(backward), AuthKey(forward))};
}

}  // namespace qvote::qkd
