#pragma once

// Canonical binary encoding shared by everything that gets hashed or signed:
// integers are big-endian fixed width, byte strings carry a u32 length prefix.

#include <span>
#include <string>
#include <string_view>

#include "qvote/common.hpp"

namespace qvote::codec {

class Writer {
 public:
  Writer& u8(std::uint8_t v);
  Writer& u32(std::uint32_t v);
  Writer& u64(std::uint64_t v);
  Writer& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
  Writer& bytes(std::span<const std::uint8_t> v);
  Writer& str(std::string_view v) { return bytes(as_bytes(v)); }
  /// Raw bytes without a length prefix.
  Writer& raw(std::span<const std::uint8_t> v);

  const Bytes& data() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  Bytes bytes();
  std::string str();
  Digest digest();
  std::span<const std::uint8_t> raw(std::size_t n);

  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }
  /// Throws MalformedInput unless every byte was consumed.
  void expect_done() const;

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace qvote::codec
