#include "flock/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "flock/error.hpp"
#include "flock/rng.hpp"

namespace flock {
namespace {

Tokens floor_tokens(double amount) {
  if (!(amount > 0.0)) return 0;
  const double floored = std::floor(amount);
  if (floored >= 0x1.0p63) return INT64_MAX;
  return static_cast<Tokens>(floored);
}

void require(bool ok, const char* field, const char* message) {
  if (!ok) throw ConfigError(field, message);
}

}  // namespace

void validate(const ProtocolParams& p) {
  require(p.alpha >= 0.0 && std::isfinite(p.alpha), "alpha", "must be finite and >= 0");
  require(p.beta >= 0.0 && std::isfinite(p.beta), "beta", "must be finite and >= 0");
  require(p.n_proposers >= 1, "N_p", "must be >= 1");
  require(p.n_voters >= 1, "N_v", "must be >= 1");
  require(p.threshold >= 1, "T", "must be a positive integer");
  require(p.threshold <= p.n_voters, "T", "must not exceed N_v");
  require(p.min_stake >= 1, "min_stake", "must be >= 1");
  require(p.kappa_timeout >= 0.0 && p.kappa_timeout <= 1.0, "kappa_timeout", "must be in [0, 1]");
  require(p.rho > 0.0 && std::isfinite(p.rho), "rho", "must be finite and > 0");
  require(p.n_miners >= 1, "n_miners", "must be >= 1");
  if (p.voter_alpha) require(*p.voter_alpha >= 0.0 && std::isfinite(*p.voter_alpha), "voter_alpha", "must be >= 0");
  if (p.voter_beta) require(*p.voter_beta >= 0.0 && std::isfinite(*p.voter_beta), "voter_beta", "must be >= 0");
}

std::optional<Selection> select_participants(std::span<const NodeId> eligible, const ProtocolParams& params,
                                             std::uint64_t round_seed) {
  const auto n_p = static_cast<std::size_t>(params.n_proposers);
  const auto n_v = static_cast<std::size_t>(params.n_voters);
  if (eligible.size() < n_p + n_v) return std::nullopt;

  std::vector<NodeId> pool(eligible.begin(), eligible.end());
  Rng rng(derive_seed(round_seed, tag::kSelection));
  for (std::size_t i = 0; i < n_p + n_v; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  Selection s;
  s.proposers.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_p));
  s.voters.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_p),
                  pool.begin() + static_cast<std::ptrdiff_t>(n_p + n_v));
  std::sort(s.proposers.begin(), s.proposers.end());
  std::sort(s.voters.begin(), s.voters.end());
  return s;
}

double score_vote(double m_new, double m_old, double rho) {
  if (!std::isfinite(m_new) || !std::isfinite(m_old)) throw std::invalid_argument("score_vote: non-finite metric");
  if (!(rho > 0.0)) throw std::invalid_argument("score_vote: rho must be > 0");
  const double raw = (m_new - m_old) / (rho * (std::fabs(m_old) + 1e-8));
  return std::clamp(raw, -1.0, 1.0);
}

TallyResult tally(std::span<const Vote> votes, const ProtocolParams& params) {
  if (votes.size() != static_cast<std::size_t>(params.n_voters)) {
    throw std::invalid_argument("tally: expected one slot per committee seat");
  }
  TallyResult out;
  double sum = 0.0;
  for (const auto& v : votes) {
    if (v.approves()) ++out.approvals;
    if (v.score) sum += *v.score;
  }
  out.score = sum / static_cast<double>(votes.size());
  out.accepted = out.approvals >= params.threshold;
  return out;
}

Tokens timeout_slash(Tokens staked, const ProtocolParams& params) {
  return -floor_tokens(params.beta * params.kappa_timeout * static_cast<double>(staked));
}

Ledger::Deltas settle(const TallyResult& result, std::span<const Vote> votes, std::span<const NodeId> proposers,
                      std::span<const NodeId> voters, const std::set<NodeId>& unresponsive, const Ledger& ledger,
                      const ProtocolParams& params) {
  Ledger::Deltas deltas;
  const double S = result.score;
  for (const NodeId p : proposers) {
    const auto stake = static_cast<double>(ledger.staked(p));
    if (unresponsive.contains(p)) {
      deltas[p] = timeout_slash(ledger.staked(p), params);
    } else if (result.accepted) {
      deltas[p] = floor_tokens(params.alpha * std::max(S, 0.0) * stake);
    } else {
      deltas[p] = -floor_tokens(params.beta * std::max(-S, 0.0) * stake);
    }
  }

  std::map<NodeId, std::optional<double>> score_of;
  for (const auto& v : votes) score_of[v.voter] = v.score;
  for (const NodeId v : voters) {
    const auto it = score_of.find(v);
    const bool missing = it == score_of.end() || !it->second;
    if (missing || unresponsive.contains(v)) {
      deltas[v] = timeout_slash(ledger.staked(v), params);
      continue;
    }
    const double s = *it->second;
    const double distance = std::fabs(s - S) / 2.0;
    const auto stake = static_cast<double>(ledger.staked(v));
    if ((s > 0.0) == result.accepted) {
      deltas[v] = floor_tokens(params.alpha_for_voters() * (1.0 - distance) * stake);
    } else {
      deltas[v] = -floor_tokens(params.beta_for_voters() * distance * stake);
    }
  }
  return deltas;
}

std::string to_string(RoundStatus status) {
  switch (status) {
    case RoundStatus::kCompleted: return "completed";
    case RoundStatus::kInsufficientEligible: return "insufficient_eligible";
    case RoundStatus::kNoSubmissions: return "no_submissions";
    case RoundStatus::kInvalidAggregation: return "invalid_aggregation";
  }
  return "unknown";
}

const Node& Population::at(NodeId id) const {
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                                   [](const Node& n, NodeId key) { return n.id < key; });
  if (it == nodes.end() || it->id != id) throw std::out_of_range("unknown node " + id.str());
  return *it;
}

std::vector<NodeId> Population::ids() const {
  std::vector<NodeId> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(n.id);
  return out;
}

RoundRecord run_round(SimState& state, const Population& population, const TaskSpec& task,
                      const ProtocolParams& params, std::uint64_t round_seed, const ClientDataset* oracle) {
  RoundRecord rec;
  rec.seed = state.seed;
  rec.round = ++state.round;

  auto finish = [&](Ledger::Deltas deltas) {
    for (auto& o : rec.outcomes) {
      const auto it = deltas.find(o.id);
      o.delta = it == deltas.end() ? 0 : it->second;
      deltas.emplace(o.id, o.delta);
    }
    state.ledger.apply_deltas(deltas, rec.round);
    for (const auto& o : rec.outcomes) {
      if (o.stake_before >= params.min_stake && state.ledger.staked(o.id) < params.min_stake) {
        rec.evicted.push_back(o.id);
      }
    }
    std::sort(rec.evicted.begin(), rec.evicted.end());
    double honest_sum = 0.0, malicious_sum = 0.0;
    std::size_t honest_n = 0, malicious_n = 0;
    for (const auto& node : population.nodes) {
      const auto stake = static_cast<double>(state.ledger.staked(node.id));
      if (node.behavior.malicious()) {
        malicious_sum += stake;
        ++malicious_n;
      } else {
        honest_sum += stake;
        ++honest_n;
      }
    }
    if (honest_n > 0) rec.mean_stake_honest = honest_sum / static_cast<double>(honest_n);
    if (malicious_n > 0) rec.mean_stake_malicious = malicious_sum / static_cast<double>(malicious_n);
    rec.global = state.global;
    if (oracle) rec.oracle_mse = evaluate(state.global, *oracle);
    return std::move(rec);
  };

  const auto eligible = state.ledger.eligible_set(params.min_stake);
  const auto selection = select_participants(eligible, params, round_seed);
  if (!selection) {
    rec.status = RoundStatus::kInsufficientEligible;
    return finish({});
  }
  rec.proposers = selection->proposers;
  rec.voters = selection->voters;
  for (const NodeId id : rec.proposers) {
    rec.outcomes.push_back({id, true, population.at(id).behavior.malicious_proposer(), true,
                            state.ledger.staked(id), 0});
  }
  for (const NodeId id : rec.voters) {
    rec.outcomes.push_back({id, false, population.at(id).behavior.malicious_voter(), true,
                            state.ledger.staked(id), 0});
  }

  // Step 1: local training.
  const std::uint64_t action_seed = derive_seed(round_seed, tag::kNodeAction);
  std::vector<ParamVector> received;
  std::set<NodeId> unresponsive;
  for (const NodeId id : rec.proposers) {
    const Node& node = population.at(id);
    Rng rng(derive_seed(action_seed, id.value));
    auto submission = propose(node.behavior.proposer, state.global, state.prev_global, node.train, task, rng);
    if (submission) {
      received.push_back(*submission);
    } else {
      unresponsive.insert(id);
    }
    rec.submissions.push_back(std::move(submission));
  }
  for (auto& o : rec.outcomes) o.responsive = !unresponsive.contains(o.id);

  Ledger::Deltas timeouts;
  for (const NodeId id : unresponsive) timeouts[id] = timeout_slash(state.ledger.staked(id), params);

  if (received.empty()) {
    rec.status = RoundStatus::kNoSubmissions;
    return finish(std::move(timeouts));
  }

  // Step 2: on-chain aggregation, checked by the other miners.
  rec.published = fedavg(received);
  rec.valid = validity_vote(received, *rec.published, params.n_miners);
  if (!rec.valid) {
    rec.status = RoundStatus::kInvalidAggregation;
    return finish(std::move(timeouts));
  }

  if (!params.committee_voting) {
    state.prev_global = state.global;
    state.global = *rec.published;
    rec.adopted = true;
    return finish({});
  }

  // Step 3: committee voting.
  std::set<std::size_t> active_groups;
  for (const NodeId id : rec.proposers) {
    if (const auto g = population.at(id).behavior.collusion_group) active_groups.insert(*g);
  }
  for (const NodeId id : rec.voters) {
    const Node& node = population.at(id);
    const double m_old = -evaluate(state.global, node.test);
    const double m_new = -evaluate(*rec.published, node.test);
    const double honest = score_vote(m_new, m_old, params.rho);
    const auto g = node.behavior.collusion_group;
    const bool colluding = g && active_groups.contains(*g);
    rec.votes.push_back({id, vote(node.behavior.voter, honest, colluding)});
    if (!rec.votes.back().score) unresponsive.insert(id);
  }
  for (auto& o : rec.outcomes) o.responsive = !unresponsive.contains(o.id);
  rec.tally = tally(rec.votes, params);

  // Step 4: reward / slash.
  auto deltas = settle(*rec.tally, rec.votes, rec.proposers, rec.voters, unresponsive, state.ledger, params);
  if (rec.tally->accepted) {
    state.prev_global = state.global;
    state.global = *rec.published;
    rec.adopted = true;
  }
  return finish(std::move(deltas));
}

}  // namespace flock
