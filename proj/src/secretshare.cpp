#include "qvote/secretshare.hpp"

#include <set>
#include <sstream>

namespace qvote::sss {

Element field_add(Element a, Element b) { return static_cast<Element>((a + b) % kFieldModulus); }

Element field_mul(Element a, Element b) {
  return static_cast<Element>((static_cast<std::uint32_t>(a) * b) % kFieldModulus);
}

Element field_inv(Element a) {
  if (a % kFieldModulus == 0) throw Error(ErrorCode::InvalidArgument, "zero has no inverse");
  // Fermat: a^(p-2).
  Element result = 1, base = static_cast<Element>(a % kFieldModulus);
  for (std::uint32_t e = kFieldModulus - 2; e > 0; e >>= 1) {
    if (e & 1u) result = field_mul(result, base);
    base = field_mul(base, base);
  }
  return result;
}

ShareSet ShareSet::subset(std::initializer_list<std::size_t> positions) const {
  return subset(std::vector<std::size_t>(positions));
}

ShareSet ShareSet::subset(const std::vector<std::size_t>& positions) const {
  ShareSet out{threshold, total, field_modulus, {}};
  for (std::size_t p : positions) out.shares.push_back(shares.at(p));
  return out;
}

ShareSet split(std::span<const std::uint8_t> secret, std::uint32_t k, std::uint32_t n,
               entropy::EntropySource& entropy) {
  if (k < 1 || k > n || n > kMaxShares) {
    throw Error(ErrorCode::BadThreshold, "need 1 <= k <= n <= 255, got k=" + std::to_string(k) + " n=" +
                                             std::to_string(n));
  }
  if (secret.empty()) throw Error(ErrorCode::InvalidArgument, "secret must be nonempty");

  ShareSet set{k, n, kFieldModulus, {}};
  set.shares.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    set.shares[i].index = i + 1;
    set.shares[i].payload.resize(secret.size());
  }
  std::vector<Element> coeffs(k);
  for (std::size_t e = 0; e < secret.size(); ++e) {
    coeffs[0] = secret[e];
    for (std::uint32_t c = 1; c < k; ++c) coeffs[c] = static_cast<Element>(entropy.uniform(kFieldModulus));
    for (auto& share : set.shares) {
      // Horner evaluation at x = index.
      const auto x = static_cast<Element>(share.index);
      Element y = 0;
      for (std::uint32_t c = k; c-- > 0;) y = field_add(field_mul(y, x), coeffs[c]);
      share.payload[e] = y;
    }
  }
  return set;
}

std::vector<Element> interpolate_at_zero(std::span<const Share> shares) {
  if (shares.empty()) return {};
  const std::size_t len = shares.front().payload.size();
  std::vector<Element> out(len, 0);
  for (std::size_t i = 0; i < shares.size(); ++i) {
    if (shares[i].payload.size() != len) throw Error(ErrorCode::LengthMismatch, "share payload lengths differ");
    // Lagrange basis at zero: prod_j x_j / (x_j - x_i).
    Element num = 1, den = 1;
    const auto xi = static_cast<Element>(shares[i].index % kFieldModulus);
    for (std::size_t j = 0; j < shares.size(); ++j) {
      if (j == i) continue;
      const auto xj = static_cast<Element>(shares[j].index % kFieldModulus);
      num = field_mul(num, xj);
      den = field_mul(den, static_cast<Element>((xj + kFieldModulus - xi) % kFieldModulus));
    }
    const Element basis = field_mul(num, field_inv(den));
    for (std::size_t e = 0; e < len; ++e) out[e] = field_add(out[e], field_mul(shares[i].payload[e], basis));
  }
  return out;
}

Bytes reconstruct(const ShareSet& set) {
  std::set<std::uint32_t> seen;
  for (const auto& s : set.shares) {
    if (!seen.insert(s.index).second) throw Error(ErrorCode::DuplicateIndex, "index " + std::to_string(s.index));
  }
  if (set.shares.size() < set.threshold || set.shares.empty()) {
    throw Error(ErrorCode::InsufficientShares, "have " + std::to_string(set.shares.size()) + ", need " +
                                                   std::to_string(set.threshold));
  }
  const std::vector<Element> elems = interpolate_at_zero(set.shares);
  Bytes out(elems.size());
  for (std::size_t i = 0; i < elems.size(); ++i) {
    if (elems[i] > 255) throw Error(ErrorCode::MalformedInput, "interpolated element outside byte range");
    out[i] = static_cast<std::uint8_t>(elems[i]);
  }
  return out;
}

std::string to_share_file(const ShareSet& set, std::string_view election_id) {
  std::ostringstream os;
  for (const auto& s : set.shares) {
    std::string hex;
    for (Element e : s.payload) {
      const std::uint8_t be[2] = {static_cast<std::uint8_t>(e >> 8), static_cast<std::uint8_t>(e & 0xff)};
      hex += to_hex(be);
    }
    os << election_id << ' ' << s.index << ' ' << set.field_modulus << ' ' << set.threshold << ' ' << set.total << ' '
       << hex << '\n';
  }
  return os.str();
}

ShareSet from_share_file(std::string_view text, std::string* election_id) {
  std::istringstream is{std::string(text)};
  ShareSet set;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, hex;
    std::uint32_t index = 0, modulus = 0, threshold = 0, total = 0;
    if (!(ls >> id >> index >> modulus >> threshold >> total >> hex) || modulus != kFieldModulus || hex.size() % 4) {
      throw Error(ErrorCode::MalformedInput, "bad share record: " + line);
    }
    if (first) {
      set.threshold = threshold;
      set.total = total;
      if (election_id != nullptr) *election_id = id;
      first = false;
    } else if (threshold != set.threshold || total != set.total) {
      throw Error(ErrorCode::MalformedInput, "share records disagree on threshold");
    }
    const Bytes raw = from_hex(hex);
    Share s{index, {}};
    for (std::size_t i = 0; i < raw.size(); i += 2) s.payload.push_back(static_cast<Element>((raw[i] << 8) | raw[i + 1]));
    set.shares.push_back(std::move(s));
  }
  return set;
}

}  // namespace qvote::sss
