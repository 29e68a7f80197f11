#include "qvote/common.hpp"

#include <algorithm>

namespace qvote {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::SampleTooSmall: return "SampleTooSmall";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::InsufficientSiftedBits: return "InsufficientSiftedBits";
    case ErrorCode::KeyEstablishmentFailed: return "KeyEstablishmentFailed";
    case ErrorCode::KeyExhausted: return "KeyExhausted";
    case ErrorCode::BadThreshold: return "BadThreshold";
    case ErrorCode::InsufficientShares: return "InsufficientShares";
    case ErrorCode::DuplicateIndex: return "DuplicateIndex";
    case ErrorCode::KeyChecksumMismatch: return "KeyChecksumMismatch";
    case ErrorCode::OneTimeKeyReuse: return "OneTimeKeyReuse";
    case ErrorCode::CredentialRejected: return "CredentialRejected";
    case ErrorCode::AlreadyRegistered: return "AlreadyRegistered";
    case ErrorCode::RegistrationClosed: return "RegistrationClosed";
    case ErrorCode::NotRegistered: return "NotRegistered";
    case ErrorCode::ElectionClosed: return "ElectionClosed";
    case ErrorCode::BallotAlreadyActive: return "BallotAlreadyActive";
    case ErrorCode::NoActiveBallot: return "NoActiveBallot";
    case ErrorCode::HeightMismatch: return "HeightMismatch";
    case ErrorCode::PrevHashMismatch: return "PrevHashMismatch";
    case ErrorCode::NoMinerAvailable: return "NoMinerAvailable";
    case ErrorCode::NotYourSlot: return "NotYourSlot";
    case ErrorCode::ChainInvalid: return "ChainInvalid";
    case ErrorCode::ScenarioInvalid: return "ScenarioInvalid";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::ElectionOpen: return "ElectionOpen";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
      code_(code) {}

std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.resize(data.size() * 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[2 * i] = kDigits[data[i] >> 4];
    out[2 * i + 1] = kDigits[data[i] & 0x0f];
  }
  return out;
}

namespace {

int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(ErrorCode::MalformedInput, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(ErrorCode::MalformedInput, "non-hex character");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

Digest digest_from_hex(std::string_view hex) {
  if (hex.size() != 64) throw Error(ErrorCode::MalformedInput, "digest must be 64 hex characters");
  const Bytes raw = from_hex(hex);
  Digest d;
  std::copy(raw.begin(), raw.end(), d.begin());
  return d;
}

}  // namespace qvote
