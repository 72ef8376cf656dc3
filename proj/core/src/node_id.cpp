#include "flock/node_id.hpp"

#include <charconv>
#include <stdexcept>

namespace flock {

NodeId NodeId::parse(std::string_view text) {
  if (text.size() < 2 || text.front() != 'n') {
    throw std::invalid_argument("malformed node id: " + std::string(text));
  }
  std::uint32_t value = 0;
  const auto* first = text.data() + 1;
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("malformed node id: " + std::string(text));
  }
  return NodeId{value};
}

}  // namespace flock
