#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flock/adversary.hpp"
#include "flock/ledger.hpp"
#include "flock/protocol.hpp"
#include "flock/task.hpp"

namespace flock {

struct SimConfig {
  int population = 100;  // N
  int rounds = 200;
  int seed_count = 20;
  std::uint64_t base_seed = 42;
  Tokens initial_stake = 1000;
  int oracle_test_size = 1024;
  ProtocolParams protocol;
  TaskConfig task;
  AdversarySpec adversary = [] {
    AdversarySpec a;
    a.l_p = 0.3;
    a.l_v = 0.3;
    return a;
  }();
  unsigned threads = 1;  // seeds run in parallel; results do not depend on it
};

/// Throws ConfigError with a dotted field path.
void validate(const SimConfig& config);

std::uint64_t run_seed_of(const SimConfig& config, int seed_index);

enum class Role { kProposer, kVoter };
enum class Honesty { kHonest, kMalicious };
std::string to_string(Role role);
std::string to_string(Honesty honesty);

/// Mean per-selected-round token delta divided by the stake held at round
/// start. Standard error is the sample standard deviation over sqrt(n);
/// ci95 uses the normal approximation (1.96 standard errors).
struct ReturnEstimate {
  Role role = Role::kProposer;
  Honesty honesty = Honesty::kHonest;
  std::size_t samples = 0;
  double mean = 0.0;
  double std_err = 0.0;
  double ci95 = 0.0;

  bool has_data() const { return samples > 0; }
};

using EstimateSet = std::array<ReturnEstimate, 4>;  // (proposer, voter) x (honest, malicious)

ReturnEstimate estimate_expected_return(std::span<const RoundRecord> records, Role role, Honesty honesty);
EstimateSet estimate_all(std::span<const RoundRecord> records);
const ReturnEstimate& find_estimate(const EstimateSet& set, Role role, Honesty honesty);

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<RoundRecord> records;
  Ledger ledger;
  ParamVector final_global;
  std::optional<double> final_oracle_mse;
};

/// One seed of a run. Deterministic in (config, seed_index).
SeedRun run_single_seed(const SimConfig& config, int seed_index);

struct SimulationResult {
  std::vector<SeedRun> seeds;  // in seed order
  EstimateSet estimates;

  std::vector<RoundRecord> all_records() const;
};

SimulationResult run_simulation(const SimConfig& config);

/// Axes left empty keep the base config's value. Points are enumerated with
/// alpha outermost, then beta, T, l_p and l_v innermost.
struct SweepGrid {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<int> threshold;
  std::vector<double> l_p;
  std::vector<double> l_v;

  bool empty() const { return alpha.empty() && beta.empty() && threshold.empty() && l_p.empty() && l_v.empty(); }
  std::vector<SimConfig> points(const SimConfig& base) const;
};

struct SweepPoint {
  SimConfig config;
  EstimateSet estimates;
};

/// One run_simulation per grid point, all sharing the base seeds. Throws
/// std::invalid_argument on an empty grid or an axis with no values.
std::vector<SweepPoint> sweep(const SimConfig& base, const SweepGrid& grid);

/// The l_p values of the expected-reward curve.
inline constexpr std::array<double, 5> kFigure2Lp = {0.0, 0.1, 0.2, 0.3, 0.4};

struct EvictionCurve {
  std::vector<int> rounds;
  std::vector<std::optional<double>> honest;     // mean over seeds of class mean stake
  std::vector<std::optional<double>> malicious;
  std::optional<int> first_malicious_below_min;  // first round with mean malicious stake < min_stake
  struct Eviction {
    std::uint64_t seed;
    NodeId id;
    int round;
  };
  std::vector<Eviction> evictions;
};

EvictionCurve eviction_curve(std::span<const RoundRecord> records, Tokens min_stake);

}  // namespace flock
