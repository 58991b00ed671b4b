#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "aoi/errors.hpp"

namespace aoi {

/// Freshness index: either omega (never informed) or a non-negative step count.
class Freshness {
 public:
  Freshness() = default;
  static Freshness omega() { return Freshness(); }
  static Freshness of(std::int64_t v) {
    if (v < 0) throw MalformedBroadcast("freshness index must be non-negative");
    Freshness f;
    f.value_ = v;
    return f;
  }

  bool is_omega() const { return !value_.has_value(); }
  bool triggered() const { return value_.has_value(); }
  std::int64_t value() const {
    if (!value_) throw Error("freshness index is omega");
    return *value_;
  }
  Freshness next() const { return is_omega() ? omega() : of(*value_ + 1); }

  bool operator==(const Freshness&) const = default;

  std::string str() const { return value_ ? std::to_string(*value_) : std::string("omega"); }

 private:
  std::optional<std::int64_t> value_;
};

}  // namespace aoi
