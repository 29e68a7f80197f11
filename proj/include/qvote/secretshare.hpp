#pragma once

// Shamir threshold sharing over the prime field GF(257). Each secret byte is
// one field element; each share carries one element per secret byte.

#include <string>

#include "qvote/entropy.hpp"

namespace qvote::sss {

inline constexpr std::uint32_t kFieldModulus = 257;
inline constexpr std::uint32_t kMaxShares = 255;

using Element = std::uint16_t;

struct Share {
  std::uint32_t index = 0;  // evaluation point, 1..n
  std::vector<Element> payload;

  bool operator==(const Share&) const = default;
};

struct ShareSet {
  std::uint32_t threshold = 0;
  std::uint32_t total = 0;
  std::uint32_t field_modulus = kFieldModulus;
  std::vector<Share> shares;

  /// Same threshold and modulus, only the shares at the given positions.
  ShareSet subset(std::initializer_list<std::size_t> positions) const;
  ShareSet subset(const std::vector<std::size_t>& positions) const;
};

/// Throws BadThreshold unless 1 <= k <= n <= 255, InvalidArgument on an empty secret.
ShareSet split(std::span<const std::uint8_t> secret, std::uint32_t k, std::uint32_t n, entropy::EntropySource& entropy);

/// Lagrange interpolation at zero. Throws DuplicateIndex, InsufficientShares
/// (fewer than the threshold), or MalformedInput when an interpolated element
/// falls outside the byte range (a corrupted share).
Bytes reconstruct(const ShareSet& shares);

/// Interpolates the given shares at zero without any threshold check.
std::vector<Element> interpolate_at_zero(std::span<const Share> shares);

// Field helpers, exposed for the enumeration tests.
Element field_add(Element a, Element b);
Element field_mul(Element a, Element b);
Element field_inv(Element a);

/// One line per trustee: "<election id> <index> <modulus> <threshold> <total> <hex>",
/// payload elements as 4 hex digits each.
std::string to_share_file(const ShareSet& set, std::string_view election_id);
ShareSet from_share_file(std::string_view text, std::string* election_id = nullptr);

}  // namespace qvote::sss
