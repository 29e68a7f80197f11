#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qvote {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

/// Virtual-clock or service-clock time in milliseconds.
using Millis = std::int64_t;

enum class ErrorCode {
  InvalidArgument,
  MalformedInput,
  SampleTooSmall,
  LengthMismatch,
  EmptySample,
  InsufficientSiftedBits,
  KeyEstablishmentFailed,
  KeyExhausted,
  BadThreshold,
  InsufficientShares,
  DuplicateIndex,
  KeyChecksumMismatch,
  OneTimeKeyReuse,
  CredentialRejected,
  AlreadyRegistered,
  RegistrationClosed,
  NotRegistered,
  ElectionClosed,
  BallotAlreadyActive,
  NoActiveBallot,
  HeightMismatch,
  PrevHashMismatch,
  NoMinerAvailable,
  NotYourSlot,
  ChainInvalid,
  ScenarioInvalid,
  BindFailure,
  ElectionOpen,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(std::string_view hex);
Digest digest_from_hex(std::string_view hex);

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline constexpr Digest kZeroDigest{};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | d[i];
    return h;
  }
};

}  // namespace qvote
