#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "flock/ledger.hpp"
#include "flock/protocol.hpp"
#include "flock/sim.hpp"

namespace flock::io {

inline constexpr std::string_view kConfigSchema = "flock-sim/config/1";
inline constexpr std::string_view kRoundsSchema = "flock-sim/rounds/1";
inline constexpr std::string_view kLedgerSchema = "flock-sim/ledger-events/1";
inline constexpr std::string_view kSummarySchema = "flock-sim/summary/1";
inline constexpr std::string_view kGridSchema = "flock-sim/grid/1";

// The sweep CSV has no comment line; this exact header is its version tag.
inline constexpr std::string_view kSweepHeader =
    "alpha,beta,T,N,N_p,N_v,l_p,l_v,role,honesty,mean_return,std_err,ci95,samples";

/// Malformed or mismatched input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a run config. The base seed is not part of the file; it comes
/// from the command line. Omitted keys keep their SimConfig defaults; unknown
/// keys, wrong types, a wrong "schema" value and failed validation all throw
/// ConfigError naming the dotted key path.
SimConfig parse_config(std::string_view json_text);
std::string config_to_json(const SimConfig& config);

/// {"schema": ..., "alpha": [..], "beta": [..], "T": [..], "l_p": [..], "l_v": [..]}
SweepGrid parse_grid(std::string_view json_text);

/// One JSON object per line, no trailing newline.
std::string round_record_jsonl(const RoundRecord& record);
std::string ledger_event_jsonl(const LedgerEvent& event, std::uint64_t seed);

/// Parses a line written by ledger_event_jsonl. Throws FormatError.
LedgerEvent parse_ledger_event_jsonl(std::string_view line);

struct SweepRow {
  double alpha = 0.0;
  double beta = 0.0;
  int threshold = 0;
  int population = 0;
  int n_proposers = 0;
  int n_voters = 0;
  double l_p = 0.0;
  double l_v = 0.0;
  Role role = Role::kProposer;
  Honesty honesty = Honesty::kHonest;
  // Empty for a class with no samples.
  std::optional<double> mean_return;
  std::optional<double> std_err;
  std::optional<double> ci95;
  std::size_t samples = 0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

/// Four rows in EstimateSet order.
std::vector<SweepRow> sweep_rows(const SimConfig& config, const EstimateSet& estimates);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
/// Throws FormatError on a header mismatch or a malformed row.
std::vector<SweepRow> read_sweep_csv(std::istream& in);

std::string summary_report(const SimConfig& config, const SimulationResult& result);

}  // namespace flock::io
