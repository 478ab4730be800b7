#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gradflip {

// Counter-based stream: draw k of (seed, id) is a pure function of the three,
// built only from integer arithmetic, so it is identical across platforms.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view id);

  std::uint64_t next_u64();
  // [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Inclusive range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();

  std::uint64_t draws() const { return counter_; }
  // Child stream for a sub-component, independent of this stream's position.
  RngStream fork(std::string_view sub_id) const;

 private:
  std::uint64_t seed_;
  std::string id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace gradflip
