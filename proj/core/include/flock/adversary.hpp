#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "flock/model.hpp"
#include "flock/node_id.hpp"
#include "flock/rng.hpp"
#include "flock/task.hpp"

namespace flock {

namespace strategy {
struct Honest {
  friend bool operator==(Honest, Honest) = default;
};
/// global + quantized N(0, sigma^2) per coordinate.
struct GaussianNoise {
  double sigma = 1.0;
  friend bool operator==(GaussianNoise, GaussianNoise) = default;
};
/// global - lambda * (honest_train(global) - global).
struct SignFlip {
  double lambda = 1.0;
  friend bool operator==(SignFlip, SignFlip) = default;
};
/// Honest training on negated targets.
struct LabelFlip {
  friend bool operator==(LabelFlip, LabelFlip) = default;
};
/// Resubmits the previous global model.
struct StaleDuplicate {
  friend bool operator==(StaleDuplicate, StaleDuplicate) = default;
};
/// Never submits.
struct Dropout {
  friend bool operator==(Dropout, Dropout) = default;
};
}  // namespace strategy

using ProposerStrategy = std::variant<strategy::Honest, strategy::GaussianNoise, strategy::SignFlip,
                                      strategy::LabelFlip, strategy::StaleDuplicate, strategy::Dropout>;

enum class VoterStrategy { kHonest, kInverter, kAlwaysApprove, kAlwaysReject, kAbstain };

bool is_honest(const ProposerStrategy& s);
inline bool is_honest(VoterStrategy s) { return s == VoterStrategy::kHonest; }

/// Throws std::invalid_argument when a strategy parameter is out of range.
void validate(const ProposerStrategy& s);

std::string name_of(const ProposerStrategy& s);
std::string name_of(VoterStrategy s);
std::optional<VoterStrategy> voter_strategy_from_name(std::string_view name);

/// A submission, or nullopt when the proposer is unresponsive.
std::optional<ParamVector> propose(const ProposerStrategy& s, const ParamVector& global,
                                   const ParamVector& prev_global, const ClientDataset& data,
                                   const TaskSpec& task, Rng& rng);

/// A score in [-1, 1], or nullopt for an abstention. Colluding voters in a
/// round where their group has a selected proposer always vote +1.
std::optional<double> vote(VoterStrategy s, double honest_score, bool colluding_round);

struct StrategyOverride {
  NodeId id;
  std::optional<ProposerStrategy> proposer;
  std::optional<VoterStrategy> voter;
};

/// Population composition. floor(l_p * N) nodes get the malicious proposer
/// strategy and floor(l_v * N) nodes get the malicious voter strategy,
/// both counted from the front of one seeded permutation, so the malicious
/// voters are a subset or superset of the malicious proposers. Overrides and
/// collusion groups are applied on top.
struct AdversarySpec {
  double l_p = 0.0;
  double l_v = 0.0;
  ProposerStrategy proposer_strategy = strategy::SignFlip{2.0};
  VoterStrategy voter_strategy = VoterStrategy::kInverter;
  std::vector<StrategyOverride> overrides;
  std::vector<std::vector<NodeId>> collusion_groups;
};

struct NodeBehavior {
  ProposerStrategy proposer = strategy::Honest{};
  VoterStrategy voter = VoterStrategy::kHonest;
  std::optional<std::size_t> collusion_group;

  bool malicious_proposer() const { return !is_honest(proposer) || collusion_group.has_value(); }
  bool malicious_voter() const { return !is_honest(voter) || collusion_group.has_value(); }
  bool malicious() const { return malicious_proposer() || malicious_voter(); }
};

/// Number of nodes that a ratio designates out of `population`.
std::size_t malicious_count(double ratio, std::size_t population);

/// Behaviors aligned with `population`. Throws std::invalid_argument on
/// ratios outside [0, 1), unknown ids, or a node in two collusion groups.
std::vector<NodeBehavior> assign_behaviors(const AdversarySpec& spec, std::span<const NodeId> population,
                                           std::uint64_t seed);

}  // namespace flock
