#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flock/node_id.hpp"

namespace flock {

using Tokens = std::int64_t;

struct LedgerEvent {
  enum class Kind { kStake, kDelta };

  int round = 0;
  Kind kind = Kind::kStake;
  NodeId id;
  Tokens amount = 0;

  friend bool operator==(const LedgerEvent&, const LedgerEvent&) = default;
};

/// Integer token accounting for stakes, rewards and slashes.
///
/// Staking deposits into the system and raises the initial supply. Positive
/// deltas are minted; negative deltas are burned into the treasury, and a
/// slash never takes more than the account holds. After every transition
///
///   sum(staked) + treasury == initial_supply + minted_total
///
/// holds exactly. Every transition is appended to an event log, and
/// Ledger::replay over that log reproduces the state bit for bit.
class Ledger {
 public:
  using Deltas = std::map<NodeId, Tokens>;

  /// Deposits `amount` (> 0) for `id`, creating the account if needed.
  void stake(NodeId id, Tokens amount, int round = 0);

  /// Applies signed deltas atomically. Throws std::out_of_range when an id
  /// has no account; nothing is applied in that case.
  void apply_deltas(const Deltas& deltas, int round);

  /// Ids with staked >= min_stake in ascending order.
  std::vector<NodeId> eligible_set(Tokens min_stake) const;

  bool conservation_check() const;

  bool contains(NodeId id) const { return accounts_.contains(id); }
  Tokens staked(NodeId id) const;
  bool eligible(NodeId id, Tokens min_stake) const { return staked(id) >= min_stake; }

  Tokens treasury() const { return treasury_; }
  Tokens minted_total() const { return minted_total_; }
  Tokens initial_supply() const { return initial_supply_; }
  Tokens total_staked() const;

  const std::map<NodeId, Tokens>& accounts() const { return accounts_; }
  const std::vector<LedgerEvent>& events() const { return events_; }

  static Ledger replay(std::span<const LedgerEvent> events);

  friend bool operator==(const Ledger&, const Ledger&) = default;

  // Test hook for negative controls on the conservation check.
  void corrupt_treasury_for_testing(Tokens treasury) { treasury_ = treasury; }

 private:
  std::map<NodeId, Tokens> accounts_;
  Tokens treasury_ = 0;
  Tokens minted_total_ = 0;
  Tokens initial_supply_ = 0;
  std::vector<LedgerEvent> events_;
};

std::string to_string(LedgerEvent::Kind kind);

}  // namespace flock
