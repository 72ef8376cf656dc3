#include "flock/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"

#include "flock/error.hpp"
#include "flock/io.hpp"
#include "flock/sim.hpp"

namespace flock::cli {
namespace {

namespace fs = std::filesystem;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulationAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

class OutFile {
 public:
  explicit OutFile(fs::path path) : path_(std::move(path)), out_(path_, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot write " + path_.string());
  }
  std::ostream& stream() { return out_; }
  void close() {
    out_.close();
    if (!out_) throw IoError("error writing " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

SimConfig load_config(const Options& opts) {
  SimConfig config = opts.config ? io::parse_config(read_file(*opts.config)) : SimConfig{};
  config.base_seed = opts.seed;
  validate(config);
  return config;
}

// Maps exceptions to exit codes with a one-line diagnostic.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const io::FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kIoError;
  } catch (const SimulationAbort& e) {
    err << "simulation aborted: " << e.what() << '\n';
    return kSimulationAbort;
  } catch (const std::exception& e) {
    err << "simulation aborted: " << e.what() << '\n';
    return kSimulationAbort;
  }
}

void write_rows(const fs::path& path, const std::vector<io::SweepRow>& rows) {
  OutFile f(path);
  io::write_sweep_csv(f.stream(), rows);
  f.close();
}

std::vector<io::SweepRow> run_grid(const std::vector<SimConfig>& points, const Options& opts, std::ostream& log) {
  for (const auto& p : points) validate(p);
  std::vector<io::SweepRow> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!opts.quiet) {
      log << "[" << (i + 1) << "/" << points.size() << "] alpha=" << p.protocol.alpha << " beta=" << p.protocol.beta
          << " T=" << p.protocol.threshold << " l_p=" << p.adversary.l_p << " l_v=" << p.adversary.l_v << '\n';
    }
    const auto result = run_simulation(p);
    const auto point_rows = io::sweep_rows(p, result.estimates);
    rows.insert(rows.end(), point_rows.begin(), point_rows.end());
  }
  return rows;
}

}  // namespace

int cmd_run(const Options& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const SimConfig config = load_config(opts);
    ensure_dir(opts.out);
    if (!opts.quiet) log << "running " << config.seed_count << " seeds x " << config.rounds << " rounds\n";
    const SimulationResult result = run_simulation(config);

    OutFile rounds(opts.out / "rounds.jsonl");
    OutFile ledger(opts.out / "ledger_events.jsonl");
    for (const auto& seed : result.seeds) {
      for (const auto& rec : seed.records) rounds.stream() << io::round_record_jsonl(rec) << '\n';
      for (const auto& ev : seed.ledger.events()) ledger.stream() << io::ledger_event_jsonl(ev, seed.seed) << '\n';
    }
    rounds.close();
    ledger.close();
    write_rows(opts.out / "estimates.csv", io::sweep_rows(config, result.estimates));
    const std::string report = io::summary_report(config, result);
    OutFile summary(opts.out / "summary.txt");
    summary.stream() << report;
    summary.close();
    OutFile resolved(opts.out / "config.resolved.json");
    resolved.stream() << io::config_to_json(config);
    resolved.close();
    if (!opts.quiet) log << report;

    bool any_completed = false;
    for (const auto& seed : result.seeds) {
      for (const auto& rec : seed.records) any_completed = any_completed || rec.status == RoundStatus::kCompleted;
    }
    if (!any_completed) throw SimulationAbort("no round completed (too few eligible nodes or no submissions)");
    return static_cast<int>(kOk);
  });
}

int cmd_sweep(const Options& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (!opts.grid) throw ConfigError("--grid", "sweep needs a grid file");
    const SimConfig base = load_config(opts);
    const SweepGrid grid = io::parse_grid(read_file(*opts.grid));
    ensure_dir(opts.out);
    write_rows(opts.out / "sweep.csv", run_grid(grid.points(base), opts, log));
    return static_cast<int>(kOk);
  });
}

int cmd_figure2(const Options& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const SimConfig base = load_config(opts);
    std::vector<double> curves = opts.figure2_l_v;
    if (curves.empty()) curves.push_back(base.adversary.l_v);
    std::vector<SimConfig> points;
    for (const double lv : curves) {
      SweepGrid grid;
      grid.l_p.assign(kFigure2Lp.begin(), kFigure2Lp.end());
      grid.l_v = {lv};
      for (auto& p : grid.points(base)) points.push_back(std::move(p));
    }
    ensure_dir(opts.out);
    write_rows(opts.out / "figure2.csv", run_grid(points, opts, log));
    return static_cast<int>(kOk);
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& log, std::ostream& err) {
  CLI::App app{"Staked federated-learning protocol simulator", "flock-sim"};
  app.require_subcommand(1);
  Options opts;
  std::string config, out = ".", grid;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON run config (defaults when omitted)");
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--seed", opts.seed, "base seed of the seed-derivation tree")->capture_default_str();
    sub->add_flag("--quiet", opts.quiet, "suppress progress output");
  };
  auto* run = app.add_subcommand("run", "simulate one configuration and write the round log, ledger and estimates");
  add_common(run);
  auto* sweep_cmd = app.add_subcommand("sweep", "run every point of a parameter grid and write sweep.csv");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--grid", grid, "JSON grid file")->required();
  auto* fig2 = app.add_subcommand("figure2", "sweep l_p over 0..0.4 and write figure2.csv");
  add_common(fig2);
  fig2->add_option("--l-v", opts.figure2_l_v, "l_v value per curve (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, log, err);
    return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kConfigError);
  }
  if (!config.empty()) opts.config = config;
  opts.out = out;
  if (!grid.empty()) opts.grid = grid;

  if (run->parsed()) return cmd_run(opts, log, err);
  if (sweep_cmd->parsed()) return cmd_sweep(opts, log, err);
  return cmd_figure2(opts, log, err);
}

}  // namespace flock::cli
