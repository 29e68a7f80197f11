#pragma once

#include <memory>
#include <span>

#include "qvote/common.hpp"

namespace qvote {

Digest sha256(std::span<const std::uint8_t> data);

inline Digest sha256(std::string_view data) { return sha256(as_bytes(data)); }

/// Incremental SHA-256 for inputs assembled from several pieces.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(Sha256&&) noexcept;
  Sha256& operator=(Sha256&&) noexcept;
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const std::uint8_t> data);
  Sha256& update(std::string_view data) { return update(as_bytes(data)); }
  Digest finish();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

}  // namespace qvote
