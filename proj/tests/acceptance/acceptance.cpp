// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails. `acceptance NAME...` runs a subset.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flock/cli.hpp"
#include "flock/io.hpp"
#include "flock/rng.hpp"
#include "flock/sim.hpp"
#include "test_support.hpp"

namespace flock {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Replays a run's event log transition by transition, checking the
// conservation identity after each one.
bool conserved_at_every_transition(const Ledger& final_ledger, std::size_t& transitions) {
  Ledger l;
  const auto& events = final_ledger.events();
  std::size_t i = 0;
  while (i < events.size()) {
    const auto& ev = events[i];
    if (ev.kind == LedgerEvent::Kind::kStake) {
      l.stake(ev.id, ev.amount, ev.round);
      ++i;
    } else {
      Ledger::Deltas d;
      const int round = ev.round;
      for (; i < events.size() && events[i].kind == LedgerEvent::Kind::kDelta && events[i].round == round; ++i) {
        d[events[i].id] = events[i].amount;
      }
      l.apply_deltas(d, round);
    }
    ++transitions;
    if (!l.conservation_check()) return false;
    for (const auto& [id, s] : l.accounts()) {
      if (s < 0) return false;
    }
  }
  return l == final_ledger;
}

Outcome conservation() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(1);
  int failures = 0;
  for (int seq = 0; seq < 10000; ++seq) {
    Ledger l;
    const int n = 1 + static_cast<int>(gen() % 8);
    for (int i = 0; i < n; ++i) l.stake(NodeId(static_cast<std::uint32_t>(i)), 1 + static_cast<Tokens>(gen() % 5000));
    const int steps = 1 + static_cast<int>(gen() % 20);
    for (int s = 0; s < steps; ++s) {
      Ledger::Deltas d;
      for (int i = 0; i < n; ++i) {
        if (gen() % 3) d[NodeId(static_cast<std::uint32_t>(i))] = static_cast<Tokens>(gen() % 4001) - 2500;
      }
      l.apply_deltas(d, s + 1);
      if (!l.conservation_check()) ++failures;
    }
  }
  SimConfig c;
  const auto result = run_simulation(c);
  std::size_t transitions = 0;
  int bad_runs = 0;
  for (const auto& seed : result.seeds) bad_runs += conserved_at_every_transition(seed.ledger, transitions) ? 0 : 1;
  const double t = seconds_since(t0);
  return {failures == 0 && bad_runs == 0 && result.seeds.size() == 20 && t < 10.0,
          fmt("10000 random sequences (%d violations), %zu runs / %zu transitions (%d violations), %.1f s (limit 10 s)",
              failures, result.seeds.size(), transitions, bad_runs, t)};
}

Outcome aggregation_determinism() {
  std::mt19937_64 gen(2);
  int accepted = 0, perturbations = 0, perturbations_rejected = 0;
  for (int set = 0; set < 1000; ++set) {
    const std::size_t k = 1 + gen() % 12;
    const std::size_t dim = 1 + gen() % 16;
    std::vector<ParamVector> u;
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<std::int64_t> v(dim);
      for (auto& x : v) x = static_cast<std::int64_t>(gen() % (std::uint64_t{1} << 36)) - (std::int64_t{1} << 35);
      u.emplace_back(std::move(v));
    }
    const ParamVector published = fedavg(u);
    accepted += validity_vote(u, published, 3) ? 1 : 0;
    for (std::size_t j = 0; j < dim; ++j) {
      for (const std::int64_t delta : {std::int64_t{1}, std::int64_t{-1}}) {
        ParamVector p = published;
        p[j] += delta;
        ++perturbations;
        perturbations_rejected += validity_vote(u, p, 3) ? 0 : 1;
      }
    }
  }
  return {accepted == 1000 && perturbations_rejected == perturbations,
          fmt("%d/1000 recomputations approved, %d/%d single-coordinate perturbations rejected", accepted,
              perturbations_rejected, perturbations)};
}

Outcome tally_oracle() {
  const std::array<std::optional<double>, 3> values{std::optional<double>(-0.4), std::nullopt,
                                                    std::optional<double>(0.9)};
  int cases = 0, agree = 0;
  for (int threshold = 1; threshold <= 5; ++threshold) {
    ProtocolParams p;
    p.n_voters = 5;
    p.threshold = threshold;
    for (int code = 0; code < 243; ++code) {
      std::vector<Vote> votes;
      int c = code;
      for (std::uint32_t i = 0; i < 5; ++i, c /= 3) votes.push_back({NodeId(i), values[static_cast<std::size_t>(c % 3)]});
      // Brute force: count and sum straight from the pattern.
      int approvals = 0;
      double sum = 0.0;
      for (const auto& v : votes) {
        if (v.score.has_value() && *v.score > 0.0) ++approvals;
        sum += v.score.value_or(0.0);
      }
      const auto r = tally(votes, p);
      ++cases;
      agree += (r.approvals == approvals && r.accepted == (approvals >= threshold) && r.score == sum / 5.0) ? 1 : 0;
    }
  }
  return {agree == cases, fmt("%d/%d patterns agree (3^5 patterns x 5 thresholds)", agree, cases)};
}

Outcome gradient_check() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(77, seed));
    TaskConfig c;
    c.dim = 1 + static_cast<int>(rng.uniform_below(16));
    c.n_train = 4 + static_cast<int>(rng.uniform_below(128));
    const TaskSpec task = make_task(c, rng.next_u64());
    const ClientDataset d = generate_client_data(task, rng.next_u64(), DataRole::kTrain);
    std::vector<double> w(d.dim);
    for (auto& x : w) x = 2.0 * rng.normal();
    const auto g = mse_gradient(w, d);
    double diff = 0.0, norm_g = 0.0, norm_fd = 0.0;
    for (std::size_t j = 0; j < d.dim; ++j) {
      const double h = 1e-5 * std::max(1.0, std::fabs(w[j]));
      auto wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd = (mse(wp, d) - mse(wm, d)) / (2.0 * h);
      diff += (fd - g[j]) * (fd - g[j]);
      norm_g += g[j] * g[j];
      norm_fd += fd * fd;
    }
    const double rel = std::sqrt(diff) / std::max({std::sqrt(norm_g), std::sqrt(norm_fd), 1e-300});
    worst = std::max(worst, rel);
  }
  return {worst < 1e-6, fmt("max relative error %.2e over 100 instances (limit 1e-6)", worst)};
}

// Shared by the Figure-2 and eviction criteria.
struct Figure2Data {
  std::map<double, std::vector<SimulationResult>> by_lv;  // l_v -> one result per l_p
  std::map<double, double> seconds;
};

Figure2Data& figure2_data() {
  static Figure2Data data = [] {
    Figure2Data d;
    SimConfig base;
    for (const double lv : {base.adversary.l_v, 0.0}) {
      const auto t0 = Clock::now();
      for (const double lp : kFigure2Lp) {
        SimConfig c = base;
        c.adversary.l_p = lp;
        c.adversary.l_v = lv;
        d.by_lv[lv].push_back(run_simulation(c));
      }
      d.seconds[lv] = seconds_since(t0);
    }
    return d;
  }();
  return data;
}

Outcome figure2_shape() {
  const auto& data = figure2_data();
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [lv, results] : data.by_lv) {
    detail << "l_v=" << lv << ":";
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& e = find_estimate(results[i].estimates, Role::kProposer, Honesty::kHonest);
      detail << ' ' << fmt("%.5f(%.5f)", e.mean, e.std_err);
      if (i > 0) {
        const auto& prev = find_estimate(results[i - 1].estimates, Role::kProposer, Honesty::kHonest);
        const double allowed = 2.0 * std::hypot(e.std_err, prev.std_err);
        if (e.mean - prev.mean > allowed) {
          ok = false;
          detail << '!';
        }
      }
    }
    detail << "; ";
  }
  const double t = data.seconds.at(SimConfig{}.adversary.l_v);
  ok = ok && t < 120.0;
  detail << fmt("default curve (5 l_p x 20 seeds x 200 rounds) in %.1f s (limit 120 s)", t);
  return {ok, detail.str()};
}

Outcome incentive_separation() {
  const auto t0 = Clock::now();
  SimConfig base;
  base.adversary.l_p = 0.3;
  base.adversary.l_v = 0.3;
  SweepGrid grid;
  grid.alpha = {0.02, 0.05, 0.1};
  grid.beta = {0.05, 0.1, 0.2};
  grid.threshold = {11, 13, 15};
  int witnesses = 0;
  std::string first;
  for (const auto& point : sweep(base, grid)) {
    const auto& e = point.estimates;
    const auto& hp = find_estimate(e, Role::kProposer, Honesty::kHonest);
    const auto& mp = find_estimate(e, Role::kProposer, Honesty::kMalicious);
    const auto& hv = find_estimate(e, Role::kVoter, Honesty::kHonest);
    const auto& mv = find_estimate(e, Role::kVoter, Honesty::kMalicious);
    const bool separated = hp.mean - 2 * hp.std_err > 0 && hv.mean - 2 * hv.std_err > 0 &&
                           mp.mean + 2 * mp.std_err < 0 && mv.mean + 2 * mv.std_err < 0;
    if (separated) {
      ++witnesses;
      if (first.empty()) {
        first = fmt("alpha=%g beta=%g T=%d: honest P %.5f(%.5f) V %.5f(%.5f), malicious P %.5f(%.5f) V %.5f(%.5f)",
                    point.config.protocol.alpha, point.config.protocol.beta, point.config.protocol.threshold, hp.mean,
                    hp.std_err, hv.mean, hv.std_err, mp.mean, mp.std_err, mv.mean, mv.std_err);
      }
    }
  }
  const double t = seconds_since(t0);
  return {witnesses >= 1 && t < 600.0,
          fmt("%d/27 grid points separate by >= 2 SE; first %s; %.1f s (limit 600 s)", witnesses,
              first.empty() ? "none" : first.c_str(), t)};
}

Outcome defense_efficacy() {
  SimConfig with;
  with.adversary.l_p = 0.3;
  with.adversary.l_v = 0.0;
  SimConfig without = with;
  without.protocol.committee_voting = false;
  const auto a = run_simulation(with);
  const auto b = run_simulation(without);
  int wins = 0;
  double mse_with = 0.0, mse_without = 0.0;
  for (std::size_t s = 0; s < a.seeds.size(); ++s) {
    wins += *a.seeds[s].final_oracle_mse <= *b.seeds[s].final_oracle_mse ? 1 : 0;
    mse_with += *a.seeds[s].final_oracle_mse;
    mse_without += *b.seeds[s].final_oracle_mse;
  }
  const double n = static_cast<double>(a.seeds.size());
  return {wins >= 17, fmt("voting <= baseline in %d/20 paired seeds (need 17); mean final MSE %.4f vs %.4f", wins,
                          mse_with / n, mse_without / n)};
}

Outcome eviction() {
  const auto& data = figure2_data();
  SimConfig base;
  const auto& results = data.by_lv.at(base.adversary.l_v);
  std::size_t idx = 0;
  while (kFigure2Lp[idx] != base.adversary.l_p) ++idx;
  const auto& result = results[idx];
  int below = 0;
  std::optional<int> first_eviction;
  for (const auto& seed : result.seeds) {
    const auto& last = seed.records.back();
    below += *last.mean_stake_malicious < *last.mean_stake_honest ? 1 : 0;
  }
  const auto curve = eviction_curve(result.all_records(), base.protocol.min_stake);
  if (!curve.evictions.empty()) first_eviction = curve.evictions.front().round;
  std::optional<int> first_split;
  for (std::size_t i = 0; i < curve.rounds.size() && !first_split; ++i) {
    if (*curve.malicious[i] < *curve.honest[i]) first_split = curve.rounds[i];
  }
  return {below == 20,
          fmt("malicious mean stake below honest at round %d in %d/20 seeds; seed-averaged means split from round %s; "
              "first eviction round %s; mean malicious stake below min_stake from round %s; final means honest %.1f, "
              "malicious %.1f",
              base.rounds, below, first_split ? std::to_string(*first_split).c_str() : "never",
              first_eviction ? std::to_string(*first_eviction).c_str() : "none",
              curve.first_malicious_below_min ? std::to_string(*curve.first_malicious_below_min).c_str() : "never",
              *curve.honest.back(), *curve.malicious.back())};
}

Outcome replay() {
  testing::TempDir dir;
  std::ostringstream log, err;
  const auto run = [&](const std::string& out) {
    const std::string out_dir = (dir / out).string();
    const std::array<const char*, 5> argv{"flock-sim", "run", "--quiet", "--out", out_dir.c_str()};
    return cli::run_cli(static_cast<int>(argv.size()), argv.data(), log, err);
  };
  const int a = run("a");
  const int b = run("b");
  const std::string ra = testing::slurp(dir / "a" / "rounds.jsonl");
  const std::string rb = testing::slurp(dir / "b" / "rounds.jsonl");
  const bool same = !ra.empty() && ra == rb;
  return {a == 0 && b == 0 && same,
          fmt("default run twice: exit %d/%d, rounds.jsonl %zu bytes, %s", a, b, ra.size(),
              same ? "byte-identical" : "DIFFERENT")};
}

}  // namespace
}  // namespace flock

int main(int argc, char** argv) {
  using namespace flock;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"conservation", conservation},
      {"aggregation_determinism", aggregation_determinism},
      {"tally_oracle", tally_oracle},
      {"gradient_check", gradient_check},
      {"figure2_shape", figure2_shape},
      {"incentive_separation", incentive_separation},
      {"defense_efficacy", defense_efficacy},
      {"eviction", eviction},
      {"replay", replay},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
