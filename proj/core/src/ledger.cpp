#include "flock/ledger.hpp"

#include <stdexcept>

namespace flock {
namespace {

Tokens checked_add(Tokens a, Tokens b) {
  Tokens out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw std::overflow_error("token arithmetic overflow");
  return out;
}

}  // namespace

std::string to_string(LedgerEvent::Kind kind) {
  return kind == LedgerEvent::Kind::kStake ? "stake" : "delta";
}

void Ledger::stake(NodeId id, Tokens amount, int round) {
  if (amount <= 0) throw std::invalid_argument("stake amount must be positive");
  const auto it = accounts_.find(id);
  const Tokens balance = checked_add(it == accounts_.end() ? 0 : it->second, amount);
  initial_supply_ = checked_add(initial_supply_, amount);
  accounts_[id] = balance;
  events_.push_back({round, LedgerEvent::Kind::kStake, id, amount});
}

void Ledger::apply_deltas(const Deltas& deltas, int round) {
  for (const auto& [id, delta] : deltas) {
    if (!accounts_.contains(id)) throw std::out_of_range("unknown account " + id.str());
  }
  for (const auto& [id, delta] : deltas) {
    Tokens& account = accounts_.at(id);
    if (delta >= 0) {
      account = checked_add(account, delta);
      minted_total_ = checked_add(minted_total_, delta);
    } else {
      // Saturating slash: -delta may exceed the balance.
      const Tokens wanted = delta == INT64_MIN ? INT64_MAX : -delta;
      const Tokens taken = wanted < account ? wanted : account;
      account -= taken;
      treasury_ = checked_add(treasury_, taken);
    }
    events_.push_back({round, LedgerEvent::Kind::kDelta, id, delta});
  }
}

std::vector<NodeId> Ledger::eligible_set(Tokens min_stake) const {
  std::vector<NodeId> out;
  for (const auto& [id, staked] : accounts_) {
    if (staked >= min_stake) out.push_back(id);
  }
  return out;
}

Tokens Ledger::staked(NodeId id) const {
  const auto it = accounts_.find(id);
  if (it == accounts_.end()) throw std::out_of_range("unknown account " + id.str());
  return it->second;
}

Tokens Ledger::total_staked() const {
  Tokens total = 0;
  for (const auto& [id, staked] : accounts_) total = checked_add(total, staked);
  return total;
}

bool Ledger::conservation_check() const {
  for (const auto& [id, staked] : accounts_) {
    if (staked < 0) return false;
  }
  if (treasury_ < 0 || minted_total_ < 0) return false;
  // Compare in 128 bits so a corrupted state cannot overflow the check.
  __extension__ using Int128 = __int128;
  Int128 lhs = treasury_;
  for (const auto& [id, staked] : accounts_) lhs += staked;
  const Int128 rhs = static_cast<Int128>(initial_supply_) + minted_total_;
  return lhs == rhs;
}

Ledger Ledger::replay(std::span<const LedgerEvent> events) {
  Ledger ledger;
  for (const auto& event : events) {
    if (event.kind == LedgerEvent::Kind::kStake) {
      ledger.stake(event.id, event.amount, event.round);
    } else {
      ledger.apply_deltas({{event.id, event.amount}}, event.round);
    }
  }
  return ledger;
}

}  // namespace flock
