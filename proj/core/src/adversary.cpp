#include "flock/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flock {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Rounds to the lattice and saturates at its limit.
std::int64_t to_lattice(double raw) {
  const double limit = static_cast<double>(ParamVector::kLimit);
  const double r = std::floor(raw + 0.5);
  return static_cast<std::int64_t>(std::clamp(r, -limit, limit));
}

}  // namespace

bool is_honest(const ProposerStrategy& s) { return std::holds_alternative<strategy::Honest>(s); }

void validate(const ProposerStrategy& s) {
  std::visit(overloaded{
                 [](const strategy::GaussianNoise& g) {
                   if (!(g.sigma > 0.0) || !std::isfinite(g.sigma)) {
                     throw std::invalid_argument("gaussian_noise sigma must be > 0");
                   }
                 },
                 [](const strategy::SignFlip& f) {
                   if (!(f.lambda > 0.0) || !std::isfinite(f.lambda)) {
                     throw std::invalid_argument("sign_flip lambda must be > 0");
                   }
                 },
                 [](const auto&) {},
             },
             s);
}

std::string name_of(const ProposerStrategy& s) {
  return std::visit(overloaded{
                        [](const strategy::Honest&) { return std::string("honest"); },
                        [](const strategy::GaussianNoise&) { return std::string("gaussian_noise"); },
                        [](const strategy::SignFlip&) { return std::string("sign_flip"); },
                        [](const strategy::LabelFlip&) { return std::string("label_flip"); },
                        [](const strategy::StaleDuplicate&) { return std::string("stale_duplicate"); },
                        [](const strategy::Dropout&) { return std::string("dropout"); },
                    },
                    s);
}

std::string name_of(VoterStrategy s) {
  switch (s) {
    case VoterStrategy::kHonest: return "honest";
    case VoterStrategy::kInverter: return "inverter";
    case VoterStrategy::kAlwaysApprove: return "always_approve";
    case VoterStrategy::kAlwaysReject: return "always_reject";
    case VoterStrategy::kAbstain: return "abstain";
  }
  return "unknown";
}

std::optional<VoterStrategy> voter_strategy_from_name(std::string_view name) {
  for (auto s : {VoterStrategy::kHonest, VoterStrategy::kInverter, VoterStrategy::kAlwaysApprove,
                 VoterStrategy::kAlwaysReject, VoterStrategy::kAbstain}) {
    if (name_of(s) == name) return s;
  }
  return std::nullopt;
}

std::optional<ParamVector> propose(const ProposerStrategy& s, const ParamVector& global,
                                   const ParamVector& prev_global, const ClientDataset& data,
                                   const TaskSpec& task, Rng& rng) {
  if (prev_global.dim() != global.dim()) throw std::invalid_argument("propose: dimension mismatch");
  return std::visit(
      overloaded{
          [&](const strategy::Honest&) -> std::optional<ParamVector> {
            return honest_train(global, data, task);
          },
          [&](const strategy::GaussianNoise& g) -> std::optional<ParamVector> {
            ParamVector out = global;
            for (std::size_t i = 0; i < out.dim(); ++i) {
              const double noise = g.sigma * rng.normal() * static_cast<double>(ParamVector::kScale);
              out[i] = to_lattice(static_cast<double>(out[i]) + noise);
            }
            return out;
          },
          [&](const strategy::SignFlip& f) -> std::optional<ParamVector> {
            const ParamVector trained = honest_train(global, data, task);
            ParamVector out = global;
            for (std::size_t i = 0; i < out.dim(); ++i) {
              const std::int64_t step = trained[i] - global[i];
              out[i] = saturate(global[i] - to_lattice(f.lambda * static_cast<double>(step)));
            }
            return out;
          },
          [&](const strategy::LabelFlip&) -> std::optional<ParamVector> {
            ClientDataset flipped = data;
            for (auto& y : flipped.targets) y = -y;
            return honest_train(global, flipped, task);
          },
          [&](const strategy::StaleDuplicate&) -> std::optional<ParamVector> { return prev_global; },
          [&](const strategy::Dropout&) -> std::optional<ParamVector> { return std::nullopt; },
      },
      s);
}

std::optional<double> vote(VoterStrategy s, double honest_score, bool colluding_round) {
  if (colluding_round) return 1.0;
  switch (s) {
    case VoterStrategy::kHonest: return honest_score;
    case VoterStrategy::kInverter: return -honest_score;
    case VoterStrategy::kAlwaysApprove: return 1.0;
    case VoterStrategy::kAlwaysReject: return -1.0;
    case VoterStrategy::kAbstain: return std::nullopt;
  }
  return std::nullopt;
}

std::size_t malicious_count(double ratio, std::size_t population) {
  // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(population) + 1e-9));
}

std::vector<NodeBehavior> assign_behaviors(const AdversarySpec& spec, std::span<const NodeId> population,
                                           std::uint64_t seed) {
  for (double ratio : {spec.l_p, spec.l_v}) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("malicious ratio must be in [0, 1)");
  }
  validate(spec.proposer_strategy);
  if (is_honest(spec.proposer_strategy) && spec.l_p > 0.0) {
    throw std::invalid_argument("l_p > 0 needs a non-honest proposer strategy");
  }
  if (is_honest(spec.voter_strategy) && spec.l_v > 0.0) {
    throw std::invalid_argument("l_v > 0 needs a non-honest voter strategy");
  }

  const std::size_t n = population.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(order[i - 1], order[j]);
  }

  std::vector<NodeBehavior> behaviors(n);
  const std::size_t n_proposers = malicious_count(spec.l_p, n);
  const std::size_t n_voters = malicious_count(spec.l_v, n);
  for (std::size_t k = 0; k < n; ++k) {
    auto& b = behaviors[order[k]];
    if (k < n_proposers) b.proposer = spec.proposer_strategy;
    if (k < n_voters) b.voter = spec.voter_strategy;
  }

  auto index_of = [&](NodeId id) {
    const auto it = std::find(population.begin(), population.end(), id);
    if (it == population.end()) throw std::invalid_argument("adversary references unknown node " + id.str());
    return static_cast<std::size_t>(it - population.begin());
  };
  for (const auto& o : spec.overrides) {
    auto& b = behaviors[index_of(o.id)];
    if (o.proposer) {
      validate(*o.proposer);
      b.proposer = *o.proposer;
    }
    if (o.voter) b.voter = *o.voter;
  }
  for (std::size_t g = 0; g < spec.collusion_groups.size(); ++g) {
    for (const NodeId id : spec.collusion_groups[g]) {
      auto& b = behaviors[index_of(id)];
      if (b.collusion_group && *b.collusion_group != g) {
        throw std::invalid_argument("node " + id.str() + " is in two collusion groups");
      }
      b.collusion_group = g;
    }
  }
  return behaviors;
}

}  // namespace flock
