#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace flock {

/// Opaque participant identifier. Ordered numerically; rendered as "n<k>".
struct NodeId {
  std::uint32_t value = 0;

  constexpr NodeId() = default;
  constexpr explicit NodeId(std::uint32_t v) : value(v) {}

  friend constexpr auto operator<=>(NodeId, NodeId) = default;

  std::string str() const { return "n" + std::to_string(value); }

  /// Parses the "n<k>" form; throws std::invalid_argument otherwise.
  static NodeId parse(std::string_view text);
};

}  // namespace flock

template <>
struct std::hash<flock::NodeId> {
  std::size_t operator()(flock::NodeId id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
