#include "flock/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>

#include "flock/error.hpp"
#include "flock/rng.hpp"

namespace flock {
namespace {

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

Population build_population(const SimConfig& config, const TaskSpec& task, std::uint64_t run_seed) {
  std::vector<NodeId> ids;
  ids.reserve(static_cast<std::size_t>(config.population));
  for (int i = 0; i < config.population; ++i) ids.emplace_back(static_cast<std::uint32_t>(i));
  const auto behaviors = assign_behaviors(config.adversary, ids, derive_seed(run_seed, tag::kAssignment));
  const std::uint64_t train_root = derive_seed(run_seed, tag::kTrainData);
  const std::uint64_t test_root = derive_seed(run_seed, tag::kTestData);

  Population population;
  population.nodes.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    population.nodes.push_back({ids[i], behaviors[i],
                                generate_client_data(task, derive_seed(train_root, ids[i].value), DataRole::kTrain),
                                generate_client_data(task, derive_seed(test_root, ids[i].value), DataRole::kTest)});
  }
  return population;
}

template <class Fn>
void for_each_index(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::jthread> pool;
  const unsigned workers = std::min<std::size_t>(threads, count);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void validate(const SimConfig& c) {
  try {
    validate(c.protocol);
  } catch (const ConfigError& e) {
    throw ConfigError("protocol." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
  }
  require(c.rounds >= 1, "rounds", "must be >= 1");
  require(c.seed_count >= 1, "seeds", "must be >= 1");
  require(c.initial_stake >= 1, "initial_stake", "must be >= 1");
  require(c.oracle_test_size >= 1, "oracle_test_size", "must be >= 1");
  require(c.population >= c.protocol.n_proposers + c.protocol.n_voters, "population",
          "must be >= N_p + N_v");
  require(c.task.dim >= 1, "task.dim", "must be >= 1");
  require(c.task.noise_sigma >= 0.0 && std::isfinite(c.task.noise_sigma), "task.noise_sigma", "must be >= 0");
  require(c.task.n_train >= 1, "task.n_train", "must be >= 1");
  require(c.task.n_test >= 1, "task.n_test", "must be >= 1");
  require(c.task.lr > 0.0 && std::isfinite(c.task.lr), "task.lr", "must be > 0");
  require(c.task.local_steps >= 1, "task.local_steps", "must be >= 1");
  require(c.adversary.l_p >= 0.0 && c.adversary.l_p < 1.0, "adversary.l_p", "must be in [0, 1)");
  require(c.adversary.l_v >= 0.0 && c.adversary.l_v < 1.0, "adversary.l_v", "must be in [0, 1)");
  try {
    validate(c.adversary.proposer_strategy);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("adversary.proposer_strategy", e.what());
  }
  require(!(is_honest(c.adversary.proposer_strategy) && c.adversary.l_p > 0.0), "adversary.proposer_strategy",
          "must be malicious when l_p > 0");
  require(!(is_honest(c.adversary.voter_strategy) && c.adversary.l_v > 0.0), "adversary.voter_strategy",
          "must be malicious when l_v > 0");
  for (std::size_t i = 0; i < c.adversary.overrides.size(); ++i) {
    require(c.adversary.overrides[i].id.value < static_cast<std::uint32_t>(c.population),
            "adversary.overrides[" + std::to_string(i) + "].id", "unknown node");
  }
  std::map<NodeId, std::size_t> group_of;
  for (std::size_t g = 0; g < c.adversary.collusion_groups.size(); ++g) {
    const std::string field = "adversary.collusion_groups[" + std::to_string(g) + "]";
    require(!c.adversary.collusion_groups[g].empty(), field, "must not be empty");
    for (const NodeId id : c.adversary.collusion_groups[g]) {
      require(id.value < static_cast<std::uint32_t>(c.population), field, "unknown node " + id.str());
      const auto [it, inserted] = group_of.emplace(id, g);
      require(inserted || it->second == g, field, id.str() + " already belongs to another group");
    }
  }
}

std::uint64_t run_seed_of(const SimConfig& config, int seed_index) {
  return derive_seed(config.base_seed, static_cast<std::uint64_t>(seed_index));
}

std::string to_string(Role role) { return role == Role::kProposer ? "proposer" : "voter"; }
std::string to_string(Honesty honesty) { return honesty == Honesty::kHonest ? "honest" : "malicious"; }

ReturnEstimate estimate_expected_return(std::span<const RoundRecord> records, Role role, Honesty honesty) {
  std::vector<double> samples;
  const bool want_proposer = role == Role::kProposer;
  const bool want_malicious = honesty == Honesty::kMalicious;
  for (const auto& rec : records) {
    for (const auto& o : rec.outcomes) {
      if (o.proposer != want_proposer || o.malicious != want_malicious || o.stake_before <= 0) continue;
      samples.push_back(static_cast<double>(o.delta) / static_cast<double>(o.stake_before));
    }
  }
  ReturnEstimate est{role, honesty, samples.size(), 0.0, 0.0, 0.0};
  if (samples.empty()) return est;
  // Sorting fixes the summation order, so any record order gives the same bits.
  std::sort(samples.begin(), samples.end());
  double sum = 0.0;
  for (const double s : samples) sum += s;
  const auto n = static_cast<double>(samples.size());
  est.mean = sum / n;
  if (samples.size() > 1) {
    double ss = 0.0;
    for (const double s : samples) ss += (s - est.mean) * (s - est.mean);
    est.std_err = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  est.ci95 = 1.96 * est.std_err;
  return est;
}

EstimateSet estimate_all(std::span<const RoundRecord> records) {
  return {estimate_expected_return(records, Role::kProposer, Honesty::kHonest),
          estimate_expected_return(records, Role::kProposer, Honesty::kMalicious),
          estimate_expected_return(records, Role::kVoter, Honesty::kHonest),
          estimate_expected_return(records, Role::kVoter, Honesty::kMalicious)};
}

const ReturnEstimate& find_estimate(const EstimateSet& set, Role role, Honesty honesty) {
  for (const auto& e : set) {
    if (e.role == role && e.honesty == honesty) return e;
  }
  throw std::logic_error("estimate set is missing a class");
}

SeedRun run_single_seed(const SimConfig& config, int seed_index) {
  const std::uint64_t run_seed = run_seed_of(config, seed_index);
  const TaskSpec task = make_task(config.task, derive_seed(run_seed, tag::kTruth));
  const Population population = build_population(config, task, run_seed);
  const ClientDataset oracle = generate_client_data(task, derive_seed(run_seed, tag::kOracle), DataRole::kTest,
                                                    static_cast<std::size_t>(config.oracle_test_size));

  SimState state;
  state.seed = run_seed;
  state.global = ParamVector::zeros(static_cast<std::size_t>(config.task.dim));
  state.prev_global = state.global;
  for (const auto& node : population.nodes) state.ledger.stake(node.id, config.initial_stake, 0);

  SeedRun out;
  out.seed = run_seed;
  out.records.reserve(static_cast<std::size_t>(config.rounds));
  const std::uint64_t round_root = derive_seed(run_seed, tag::kRounds);
  for (int r = 1; r <= config.rounds; ++r) {
    out.records.push_back(run_round(state, population, task, config.protocol,
                                    derive_seed(round_root, static_cast<std::uint64_t>(r)), &oracle));
  }
  out.final_global = state.global;
  out.final_oracle_mse = evaluate(state.global, oracle);
  out.ledger = std::move(state.ledger);
  return out;
}

std::vector<RoundRecord> SimulationResult::all_records() const {
  std::vector<RoundRecord> out;
  for (const auto& s : seeds) out.insert(out.end(), s.records.begin(), s.records.end());
  return out;
}

SimulationResult run_simulation(const SimConfig& config) {
  validate(config);
  SimulationResult result;
  result.seeds.resize(static_cast<std::size_t>(config.seed_count));
  for_each_index(result.seeds.size(), config.threads,
                 [&](std::size_t i) { result.seeds[i] = run_single_seed(config, static_cast<int>(i)); });
  result.estimates = estimate_all(result.all_records());
  return result;
}

std::vector<SimConfig> SweepGrid::points(const SimConfig& base) const {
  auto axis = [](const auto& values, auto fallback) {
    using T = decltype(fallback);
    return values.empty() ? std::vector<T>{fallback} : std::vector<T>(values.begin(), values.end());
  };
  std::vector<SimConfig> out;
  for (const double a : axis(alpha, base.protocol.alpha)) {
    for (const double b : axis(beta, base.protocol.beta)) {
      for (const int t : axis(threshold, base.protocol.threshold)) {
        for (const double lp : axis(l_p, base.adversary.l_p)) {
          for (const double lv : axis(l_v, base.adversary.l_v)) {
            SimConfig c = base;
            c.protocol.alpha = a;
            c.protocol.beta = b;
            c.protocol.threshold = t;
            c.adversary.l_p = lp;
            c.adversary.l_v = lv;
            out.push_back(std::move(c));
          }
        }
      }
    }
  }
  return out;
}

std::vector<SweepPoint> sweep(const SimConfig& base, const SweepGrid& grid) {
  if (grid.empty()) throw std::invalid_argument("sweep grid has no axes");
  std::vector<SweepPoint> out;
  for (SimConfig& point : grid.points(base)) {
    const auto result = run_simulation(point);
    out.push_back({std::move(point), result.estimates});
  }
  return out;
}

EvictionCurve eviction_curve(std::span<const RoundRecord> records, Tokens min_stake) {
  struct Acc {
    double honest = 0.0, malicious = 0.0;
    int honest_n = 0, malicious_n = 0;
  };
  std::map<int, Acc> by_round;
  EvictionCurve curve;
  for (const auto& rec : records) {
    Acc& acc = by_round[rec.round];
    if (rec.mean_stake_honest) {
      acc.honest += *rec.mean_stake_honest;
      ++acc.honest_n;
    }
    if (rec.mean_stake_malicious) {
      acc.malicious += *rec.mean_stake_malicious;
      ++acc.malicious_n;
    }
    for (const NodeId id : rec.evicted) curve.evictions.push_back({rec.seed, id, rec.round});
  }
  for (const auto& [round, acc] : by_round) {
    curve.rounds.push_back(round);
    curve.honest.push_back(acc.honest_n ? std::optional(acc.honest / acc.honest_n) : std::nullopt);
    curve.malicious.push_back(acc.malicious_n ? std::optional(acc.malicious / acc.malicious_n) : std::nullopt);
    if (!curve.first_malicious_below_min && curve.malicious.back() &&
        *curve.malicious.back() < static_cast<double>(min_stake)) {
      curve.first_malicious_below_min = round;
    }
  }
  std::sort(curve.evictions.begin(), curve.evictions.end(), [](const auto& a, const auto& b) {
    return std::tie(a.round, a.seed, a.id) < std::tie(b.round, b.seed, b.id);
  });
  return curve;
}

}  // namespace flock
