#include "qvote/codec.hpp"

#include <algorithm>

namespace qvote::codec {

Writer& Writer::u8(std::uint8_t v) {
  out_.push_back(v);
  return *this;
}

Writer& Writer::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  return *this;
}

Writer& Writer::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  return *this;
}

Writer& Writer::bytes(std::span<const std::uint8_t> v) {
  u32(static_cast<std::uint32_t>(v.size()));
  return raw(v);
}

Writer& Writer::raw(std::span<const std::uint8_t> v) {
  out_.insert(out_.end(), v.begin(), v.end());
  return *this;
}

std::span<const std::uint8_t> Reader::raw(std::size_t n) {
  if (remaining() < n) throw Error(ErrorCode::MalformedInput, "truncated record");
  auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t Reader::u8() { return raw(1)[0]; }

std::uint32_t Reader::u32() {
  auto b = raw(4);
  std::uint32_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

std::uint64_t Reader::u64() {
  auto b = raw(8);
  std::uint64_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

Bytes Reader::bytes() {
  const std::uint32_t n = u32();
  auto b = raw(n);
  return Bytes(b.begin(), b.end());
}

std::string Reader::str() {
  const std::uint32_t n = u32();
  auto b = raw(n);
  return std::string(b.begin(), b.end());
}

Digest Reader::digest() {
  const std::uint32_t n = u32();
  if (n != 32) throw Error(ErrorCode::MalformedInput, "digest field must be 32 bytes");
  auto b = raw(32);
  Digest d;
  std::copy(b.begin(), b.end(), d.begin());
  return d;
}

void Reader::expect_done() const {
  if (!done()) throw Error(ErrorCode::MalformedInput, "trailing bytes in record");
}

}  // namespace qvote::codec
