#include <doctest.h>

#include <random>

#include "qvote/hash.hpp"
#include "qvote/sig.hpp"

using namespace qvote;
using namespace qvote::sig;

namespace {

// Verifier written from the definition: H(revealed[i]) == public[i][bit_i].
bool oracle_verify(const OtsPublicKey& pk, const Bytes& m, const OtsSignature& s) {
  const Digest d = sha256(m);
  for (std::size_t i = 0; i < 256; ++i) {
    const bool bit = (d[i / 8] >> (7 - i % 8)) & 1;
    if (sha256(s.revealed[i]) != pk.digests[2 * i + bit]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("key generation") {
  auto e = entropy::EntropySource::seeded(1);
  const OtsKeyPair a = OtsKeyPair::generate(e);
  const OtsKeyPair b = OtsKeyPair::generate(e);
  CHECK(a.public_key() != b.public_key());
  CHECK(a.public_key().fingerprint() != b.public_key().fingerprint());
  for (std::size_t j = 0; j < 512; ++j) CHECK(a.public_key().digests[j] == sha256(a.secret()[j]));
  CHECK_FALSE(a.used());

  auto z1 = entropy::EntropySource::constant(false);
  auto z2 = entropy::EntropySource::constant(false);
  CHECK(OtsKeyPair::generate(z1).public_key() == OtsKeyPair::generate(z2).public_key());
}

TEST_CASE("completeness over 1000 random messages, and a second sign always fails") {
  auto e = entropy::EntropySource::seeded(2);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    OtsKeyPair kp = OtsKeyPair::generate(e);
    const Bytes m = e.next_bytes(1 + rng() % 100);
    const OtsSignature s = kp.sign(m);
    CHECK(verify(kp.public_key(), m, s));
    CHECK(oracle_verify(kp.public_key(), m, s));
    CHECK(kp.used());
    try {
      kp.sign(m);
      FAIL("second sign");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::OneTimeKeyReuse);
    }
  }
}

TEST_CASE("single-bit corruptions are rejected") {
  auto e = entropy::EntropySource::seeded(3);
  std::mt19937_64 rng(3);
  OtsKeyPair kp = OtsKeyPair::generate(e);
  const Bytes m = e.next_bytes(48);
  const OtsSignature s = kp.sign(m);
  SUBCASE("message flips") {
    for (int i = 0; i < 100; ++i) {
      Bytes bad = m;
      const std::size_t bit = rng() % (bad.size() * 8);
      bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      CHECK_FALSE(verify(kp.public_key(), bad, s));
    }
  }
  SUBCASE("signature flips") {
    for (int i = 0; i < 100; ++i) {
      OtsSignature bad = s;
      const std::size_t bit = rng() % (256 * 256);
      bad.revealed[bit / 256][(bit % 256) / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      CHECK_FALSE(verify(kp.public_key(), m, bad));
    }
  }
  SUBCASE("public key flips") {
    for (int i = 0; i < 100; ++i) {
      OtsPublicKey bad = kp.public_key();
      // Only the digests the signature is checked against matter.
      const Digest d = sha256(m);
      const std::size_t pos = rng() % 256;
      const std::size_t idx = 2 * pos + (digest_bit(d, pos) ? 1 : 0);
      bad.digests[idx][rng() % 32] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
      CHECK_FALSE(verify(bad, m, s));
    }
  }
}

TEST_CASE("differing digest bits reveal different preimages") {
  auto e = entropy::EntropySource::seeded(4);
  const OtsKeyPair kp = OtsKeyPair::generate(e);
  const Bytes m1 = {'a'}, m2 = {'b'};
  const Digest d1 = sha256(m1), d2 = sha256(m2);
  // Sign each message with a copy of the same key material.
  OtsKeyPair k1 = OtsKeyPair::import_json(kp.export_json());
  OtsKeyPair k2 = OtsKeyPair::import_json(kp.export_json());
  const OtsSignature s1 = k1.sign(m1), s2 = k2.sign(m2);
  for (std::size_t i = 0; i < 256; ++i) {
    CHECK((s1.revealed[i] != s2.revealed[i]) == (digest_bit(d1, i) != digest_bit(d2, i)));
  }
}

TEST_CASE("digest_bit is MSB-first") {
  Digest d{};
  d[0] = 0x80;
  d[31] = 0x01;
  CHECK(digest_bit(d, 0));
  CHECK_FALSE(digest_bit(d, 1));
  CHECK(digest_bit(d, 255));
}

TEST_CASE("serialization") {
  auto e = entropy::EntropySource::seeded(5);
  OtsKeyPair kp = OtsKeyPair::generate(e);
  const Bytes m = {1, 2, 3};
  const OtsSignature s = kp.sign(m);
  const auto pj = kp.public_key().to_json();
  CHECK(pj.size() == 512);
  CHECK(OtsPublicKey::from_json(pj) == kp.public_key());
  const auto sj = s.to_json();
  CHECK(sj.size() == 256);
  CHECK(OtsSignature::from_json(sj) == s);
  // The exported used flag survives, so a restored key still refuses to sign.
  OtsKeyPair restored = OtsKeyPair::import_json(kp.export_json());
  CHECK(restored.used());
  CHECK_THROWS_AS(restored.sign(m), Error);
}
