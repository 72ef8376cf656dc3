#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "flock/adversary.hpp"
#include "flock/ledger.hpp"
#include "flock/model.hpp"
#include "flock/node_id.hpp"
#include "flock/task.hpp"

namespace flock {

struct ProtocolParams {
  double alpha = 0.05;  // reward coefficient
  double beta = 0.10;   // slash coefficient
  int threshold = 11;   // approvals needed to accept (T)
  int n_proposers = 10;
  int n_voters = 20;
  Tokens min_stake = 100;
  double kappa_timeout = 0.5;
  double rho = 0.1;
  int n_miners = 3;
  // Disabling the committee adopts every valid aggregate and settles nothing.
  bool committee_voting = true;
  // Voters use alpha/beta unless overridden.
  std::optional<double> voter_alpha;
  std::optional<double> voter_beta;

  double alpha_for_voters() const { return voter_alpha.value_or(alpha); }
  double beta_for_voters() const { return voter_beta.value_or(beta); }
};

/// Throws ConfigError naming the offending field.
void validate(const ProtocolParams& params);

struct Selection {
  std::vector<NodeId> proposers;
  std::vector<NodeId> voters;
};

/// Uniform sample without replacement: n_proposers proposers, then n_voters
/// voters from the remainder (partial Fisher-Yates over `eligible`). Both
/// lists are returned in ascending id order. nullopt when too few nodes are
/// eligible.
std::optional<Selection> select_participants(std::span<const NodeId> eligible, const ProtocolParams& params,
                                             std::uint64_t round_seed);

/// clamp((m_new - m_old) / (rho * (|m_old| + 1e-8)), -1, 1), where a metric
/// is the negated test MSE. Throws std::invalid_argument on non-finite input.
double score_vote(double m_new, double m_old, double rho);

struct Vote {
  NodeId voter;
  std::optional<double> score;  // nullopt: missing

  bool approves() const { return score && *score > 0.0; }
};

struct TallyResult {
  int approvals = 0;
  double score = 0.0;  // mean over all slots, missing counted as 0
  bool accepted = false;

  friend bool operator==(const TallyResult&, const TallyResult&) = default;
};

/// Throws std::invalid_argument unless votes.size() == n_voters.
TallyResult tally(std::span<const Vote> votes, const ProtocolParams& params);

/// Token deltas for every selected participant, computed from stakes at
/// round start. Proposers share the collective outcome; voters are paid by
/// direction match and distance from the aggregate score; anyone in
/// `unresponsive` takes the timeout slash instead.
Ledger::Deltas settle(const TallyResult& result, std::span<const Vote> votes, std::span<const NodeId> proposers,
                      std::span<const NodeId> voters, const std::set<NodeId>& unresponsive, const Ledger& ledger,
                      const ProtocolParams& params);

/// Timeout slash: -floor(beta * kappa_timeout * staked).
Tokens timeout_slash(Tokens staked, const ProtocolParams& params);

enum class RoundStatus { kCompleted, kInsufficientEligible, kNoSubmissions, kInvalidAggregation };
std::string to_string(RoundStatus status);

struct ParticipantOutcome {
  NodeId id;
  bool proposer = false;  // otherwise voter
  bool malicious = false;
  bool responsive = true;
  Tokens stake_before = 0;
  Tokens delta = 0;
};

/// Audit log of one training phase.
struct RoundRecord {
  std::uint64_t seed = 0;
  int round = 0;
  RoundStatus status = RoundStatus::kCompleted;
  std::vector<NodeId> proposers;
  std::vector<NodeId> voters;
  std::vector<std::optional<ParamVector>> submissions;  // aligned with proposers
  std::optional<ParamVector> published;
  bool valid = false;
  std::vector<Vote> votes;  // aligned with voters
  std::optional<TallyResult> tally;
  std::vector<ParticipantOutcome> outcomes;  // proposers then voters
  bool adopted = false;
  ParamVector global;  // global model after the round
  std::optional<double> oracle_mse;
  std::optional<double> mean_stake_honest;
  std::optional<double> mean_stake_malicious;
  std::vector<NodeId> evicted;  // fell below min_stake this round

  bool accepted() const { return tally && tally->accepted; }
};

struct Node {
  NodeId id;
  NodeBehavior behavior;
  ClientDataset train;
  ClientDataset test;
};

/// Nodes sorted by id.
struct Population {
  std::vector<Node> nodes;

  const Node& at(NodeId id) const;
  std::vector<NodeId> ids() const;
};

struct SimState {
  std::uint64_t seed = 0;  // run seed, copied into records
  int round = 0;           // rounds completed so far
  Ledger ledger;
  ParamVector global;
  ParamVector prev_global;
};

/// Executes one training phase: selection, proposals, aggregation and the
/// miner recompute check, committee voting, tally, and settlement. The
/// global model advances only when the aggregate is valid and accepted.
/// `oracle` (optional) is a held-out test set used for reporting only.
RoundRecord run_round(SimState& state, const Population& population, const TaskSpec& task,
                      const ProtocolParams& params, std::uint64_t round_seed,
                      const ClientDataset* oracle = nullptr);

}  // namespace flock
