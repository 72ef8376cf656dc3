#include "flock/io.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "flock/error.hpp"

namespace flock::io {
namespace {

using nlohmann::json;
// Output keeps insertion order so files list fields as the types declare them.
using ojson = nlohmann::ordered_json;

// Walks one JSON object, remembering which keys were read so the rest can
// be rejected as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const json* find(std::string_view key) {
    seen_.insert(std::string(key));
    const auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void read(std::string_view key, T& out) {
    if (const json* v = find(key)) out = convert<T>(*v, field(key));
  }

  template <class T>
  void read(std::string_view key, std::optional<T>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else {
        out = convert<T>(*v, field(key));
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(field(key), "unknown key");
    }
  }

  template <class T>
  static T convert(const json& v, const std::string& field) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
      if (v.is_number_unsigned()) {
        const auto u = v.get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) throw ConfigError(field, "out of range");
        return static_cast<T>(u);
      }
      const auto i = v.get<std::int64_t>();
      if (std::is_unsigned_v<T> && i < 0) throw ConfigError(field, "must be non-negative");
      if (i < static_cast<std::int64_t>(std::numeric_limits<T>::min()) ||
          (std::is_signed_v<T> && i > static_cast<std::int64_t>(std::numeric_limits<T>::max()))) {
        throw ConfigError(field, "out of range");
      }
      return static_cast<T>(i);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(field, "expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field, "expected a string");
      return v.get<std::string>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

NodeId parse_node(const json& v, const std::string& field) {
  const auto text = ObjectReader::convert<std::string>(v, field);
  try {
    return NodeId::parse(text);
  } catch (const std::exception&) {
    throw ConfigError(field, "bad node id '" + text + "'");
  }
}

ProposerStrategy parse_proposer_strategy(const json& v, const std::string& field) {
  std::string kind;
  std::optional<double> sigma, lambda;
  if (v.is_string()) {
    kind = v.get<std::string>();
  } else {
    ObjectReader r(v, field);
    const json* k = r.find("kind");
    if (!k) throw ConfigError(field + ".kind", "missing");
    kind = ObjectReader::convert<std::string>(*k, field + ".kind");
    if (kind == "gaussian_noise") r.read("sigma", sigma);
    if (kind == "sign_flip") r.read("lambda", lambda);
    r.finish();
  }
  ProposerStrategy s;
  if (kind == "honest") {
    s = strategy::Honest{};
  } else if (kind == "gaussian_noise") {
    s = strategy::GaussianNoise{sigma.value_or(1.0)};
  } else if (kind == "sign_flip") {
    s = strategy::SignFlip{lambda.value_or(2.0)};
  } else if (kind == "label_flip") {
    s = strategy::LabelFlip{};
  } else if (kind == "stale_duplicate") {
    s = strategy::StaleDuplicate{};
  } else if (kind == "dropout") {
    s = strategy::Dropout{};
  } else {
    throw ConfigError(field, "unknown proposer strategy '" + kind + "'");
  }
  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
  return s;
}

VoterStrategy parse_voter_strategy(const json& v, const std::string& field) {
  const auto name = ObjectReader::convert<std::string>(v, field);
  const auto s = voter_strategy_from_name(name);
  if (!s) throw ConfigError(field, "unknown voter strategy '" + name + "'");
  return *s;
}

ojson proposer_strategy_json(const ProposerStrategy& s) {
  ojson j = {{"kind", name_of(s)}};
  if (const auto* g = std::get_if<strategy::GaussianNoise>(&s)) j["sigma"] = g->sigma;
  if (const auto* f = std::get_if<strategy::SignFlip>(&s)) j["lambda"] = f->lambda;
  return j;
}

void read_adversary(const json& j, AdversarySpec& a) {
  ObjectReader r(j, "adversary");
  r.read("l_p", a.l_p);
  r.read("l_v", a.l_v);
  if (const json* v = r.find("proposer_strategy")) a.proposer_strategy = parse_proposer_strategy(*v, r.field("proposer_strategy"));
  if (const json* v = r.find("voter_strategy")) a.voter_strategy = parse_voter_strategy(*v, r.field("voter_strategy"));
  if (const json* v = r.find("overrides")) {
    if (!v->is_array()) throw ConfigError("adversary.overrides", "expected an array");
    a.overrides.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string path = "adversary.overrides[" + std::to_string(i) + "]";
      ObjectReader o((*v)[i], path);
      StrategyOverride ov;
      const json* id = o.find("id");
      if (!id) throw ConfigError(path + ".id", "missing");
      ov.id = parse_node(*id, path + ".id");
      if (const json* p = o.find("proposer")) ov.proposer = parse_proposer_strategy(*p, path + ".proposer");
      if (const json* p = o.find("voter")) ov.voter = parse_voter_strategy(*p, path + ".voter");
      o.finish();
      a.overrides.push_back(std::move(ov));
    }
  }
  if (const json* v = r.find("collusion_groups")) {
    if (!v->is_array()) throw ConfigError("adversary.collusion_groups", "expected an array");
    a.collusion_groups.clear();
    for (std::size_t g = 0; g < v->size(); ++g) {
      const std::string path = "adversary.collusion_groups[" + std::to_string(g) + "]";
      if (!(*v)[g].is_array()) throw ConfigError(path, "expected an array of node ids");
      std::vector<NodeId> group;
      for (const auto& id : (*v)[g]) group.push_back(parse_node(id, path));
      a.collusion_groups.push_back(std::move(group));
    }
  }
  r.finish();
}

void check_schema(ObjectReader& r, std::string_view expected) {
  std::string schema(expected);
  r.read("schema", schema);
  if (schema != expected) {
    throw ConfigError("schema", "expected '" + std::string(expected) + "', got '" + schema + "'");
  }
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
}

template <class T>
std::vector<T> read_axis(ObjectReader& r, std::string_view key) {
  std::vector<T> out;
  if (const json* v = r.find(key)) {
    const std::string field = r.field(key);
    if (!v->is_array()) throw ConfigError(field, "expected an array");
    if (v->empty()) throw ConfigError(field, "axis has no values");
    for (std::size_t i = 0; i < v->size(); ++i) {
      out.push_back(ObjectReader::convert<T>((*v)[i], field + "[" + std::to_string(i) + "]"));
    }
  }
  return out;
}

ojson node_list(std::span<const NodeId> ids) {
  ojson out = ojson::array();
  for (const NodeId id : ids) out.push_back(id.str());
  return out;
}

ojson params_json(const ParamVector& p) { return ojson(p.values()); }

template <class T>
ojson optional_json(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::logic_error("format_double failed");
  return std::string(buf, end);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& cell, std::size_t line_no, std::string_view column) {
  T value{};
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw FormatError("line " + std::to_string(line_no) + ": bad value for " + std::string(column) + ": '" + cell + "'");
  }
  return value;
}

std::optional<double> parse_optional(const std::string& cell, std::size_t line_no, std::string_view column) {
  if (cell.empty()) return std::nullopt;
  return parse_number<double>(cell, line_no, column);
}

}  // namespace

SimConfig parse_config(std::string_view json_text) {
  const json root = parse_json(json_text);
  SimConfig c;
  ObjectReader r(root, "");
  check_schema(r, kConfigSchema);
  r.read("population", c.population);
  r.read("rounds", c.rounds);
  r.read("seeds", c.seed_count);
  r.read("initial_stake", c.initial_stake);
  r.read("oracle_test_size", c.oracle_test_size);
  r.read("threads", c.threads);
  if (const json* p = r.find("protocol")) {
    ObjectReader pr(*p, "protocol");
    auto& pp = c.protocol;
    pr.read("alpha", pp.alpha);
    pr.read("beta", pp.beta);
    pr.read("T", pp.threshold);
    pr.read("N_p", pp.n_proposers);
    pr.read("N_v", pp.n_voters);
    pr.read("min_stake", pp.min_stake);
    pr.read("kappa_timeout", pp.kappa_timeout);
    pr.read("rho", pp.rho);
    pr.read("n_miners", pp.n_miners);
    pr.read("committee_voting", pp.committee_voting);
    pr.read("voter_alpha", pp.voter_alpha);
    pr.read("voter_beta", pp.voter_beta);
    pr.finish();
  }
  if (const json* t = r.find("task")) {
    ObjectReader tr(*t, "task");
    tr.read("dim", c.task.dim);
    tr.read("noise_sigma", c.task.noise_sigma);
    tr.read("n_train", c.task.n_train);
    tr.read("n_test", c.task.n_test);
    tr.read("lr", c.task.lr);
    tr.read("local_steps", c.task.local_steps);
    tr.finish();
  }
  if (const json* a = r.find("adversary")) read_adversary(*a, c.adversary);
  r.finish();
  validate(c);
  return c;
}

std::string config_to_json(const SimConfig& c) {
  const auto& p = c.protocol;
  ojson protocol = {{"alpha", p.alpha},
                   {"beta", p.beta},
                   {"T", p.threshold},
                   {"N_p", p.n_proposers},
                   {"N_v", p.n_voters},
                   {"min_stake", p.min_stake},
                   {"kappa_timeout", p.kappa_timeout},
                   {"rho", p.rho},
                   {"n_miners", p.n_miners},
                   {"committee_voting", p.committee_voting},
                   {"voter_alpha", optional_json(p.voter_alpha)},
                   {"voter_beta", optional_json(p.voter_beta)}};
  ojson overrides = ojson::array();
  for (const auto& o : c.adversary.overrides) {
    ojson j = {{"id", o.id.str()}};
    if (o.proposer) j["proposer"] = proposer_strategy_json(*o.proposer);
    if (o.voter) j["voter"] = name_of(*o.voter);
    overrides.push_back(std::move(j));
  }
  ojson groups = ojson::array();
  for (const auto& g : c.adversary.collusion_groups) groups.push_back(node_list(g));
  ojson root = {
      {"schema", kConfigSchema},
      {"population", c.population},
      {"rounds", c.rounds},
      {"seeds", c.seed_count},
      {"initial_stake", c.initial_stake},
      {"oracle_test_size", c.oracle_test_size},
      {"threads", c.threads},
      {"protocol", std::move(protocol)},
      {"task",
       {{"dim", c.task.dim},
        {"noise_sigma", c.task.noise_sigma},
        {"n_train", c.task.n_train},
        {"n_test", c.task.n_test},
        {"lr", c.task.lr},
        {"local_steps", c.task.local_steps}}},
      {"adversary",
       {{"l_p", c.adversary.l_p},
        {"l_v", c.adversary.l_v},
        {"proposer_strategy", proposer_strategy_json(c.adversary.proposer_strategy)},
        {"voter_strategy", name_of(c.adversary.voter_strategy)},
        {"overrides", std::move(overrides)},
        {"collusion_groups", std::move(groups)}}},
  };
  return root.dump(2) + "\n";
}

SweepGrid parse_grid(std::string_view json_text) {
  const json root = parse_json(json_text);
  ObjectReader r(root, "");
  check_schema(r, kGridSchema);
  SweepGrid g;
  g.alpha = read_axis<double>(r, "alpha");
  g.beta = read_axis<double>(r, "beta");
  g.threshold = read_axis<int>(r, "T");
  g.l_p = read_axis<double>(r, "l_p");
  g.l_v = read_axis<double>(r, "l_v");
  r.finish();
  if (g.empty()) throw ConfigError("<root>", "grid has no axes");
  return g;
}

std::string round_record_jsonl(const RoundRecord& rec) {
  ojson submissions = ojson::array();
  for (const auto& s : rec.submissions) submissions.push_back(s ? params_json(*s) : ojson(nullptr));
  ojson votes = ojson::array();
  for (const auto& v : rec.votes) votes.push_back({{"voter", v.voter.str()}, {"score", optional_json(v.score)}});
  ojson tally = nullptr;
  if (rec.tally) {
    tally = {{"approvals", rec.tally->approvals}, {"score", rec.tally->score}, {"accepted", rec.tally->accepted}};
  }
  ojson outcomes = ojson::array();
  for (const auto& o : rec.outcomes) {
    outcomes.push_back({{"id", o.id.str()},
                        {"role", o.proposer ? "proposer" : "voter"},
                        {"malicious", o.malicious},
                        {"responsive", o.responsive},
                        {"stake_before", o.stake_before},
                        {"delta", o.delta}});
  }
  ojson j = {{"schema", kRoundsSchema},
            {"seed", rec.seed},
            {"round", rec.round},
            {"status", to_string(rec.status)},
            {"proposers", node_list(rec.proposers)},
            {"voters", node_list(rec.voters)},
            {"submissions", std::move(submissions)},
            {"published", rec.published ? params_json(*rec.published) : ojson(nullptr)},
            {"valid", rec.valid},
            {"votes", std::move(votes)},
            {"tally", std::move(tally)},
            {"outcomes", std::move(outcomes)},
            {"adopted", rec.adopted},
            {"global", params_json(rec.global)},
            {"oracle_mse", optional_json(rec.oracle_mse)},
            {"mean_stake_honest", optional_json(rec.mean_stake_honest)},
            {"mean_stake_malicious", optional_json(rec.mean_stake_malicious)},
            {"evicted", node_list(rec.evicted)}};
  return j.dump();
}

std::string ledger_event_jsonl(const LedgerEvent& ev, std::uint64_t seed) {
  ojson j = {{"schema", kLedgerSchema},
            {"seed", seed},
            {"round", ev.round},
            {"event", to_string(ev.kind)},
            {"id", ev.id.str()},
            {"amount", ev.amount}};
  return j.dump();
}

LedgerEvent parse_ledger_event_jsonl(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("ledger event: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != kLedgerSchema) throw FormatError("ledger event: schema mismatch");
    LedgerEvent ev;
    ev.round = j.at("round").get<int>();
    const auto kind = j.at("event").get<std::string>();
    if (kind == "stake") {
      ev.kind = LedgerEvent::Kind::kStake;
    } else if (kind == "delta") {
      ev.kind = LedgerEvent::Kind::kDelta;
    } else {
      throw FormatError("ledger event: unknown event '" + kind + "'");
    }
    ev.id = NodeId::parse(j.at("id").get<std::string>());
    ev.amount = j.at("amount").get<Tokens>();
    return ev;
  } catch (const json::exception& e) {
    throw FormatError(std::string("ledger event: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("ledger event: ") + e.what());
  }
}

std::vector<SweepRow> sweep_rows(const SimConfig& c, const EstimateSet& estimates) {
  std::vector<SweepRow> rows;
  for (const auto& e : estimates) {
    SweepRow row{c.protocol.alpha, c.protocol.beta, c.protocol.threshold, c.population, c.protocol.n_proposers,
                 c.protocol.n_voters, c.adversary.l_p, c.adversary.l_v, e.role, e.honesty,
                 std::nullopt, std::nullopt, std::nullopt, e.samples};
    if (e.has_data()) {
      row.mean_return = e.mean;
      row.std_err = e.std_err;
      row.ci95 = e.ci95;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << kSweepHeader << '\n';
  for (const auto& r : rows) {
    out << format_double(r.alpha) << ',' << format_double(r.beta) << ',' << r.threshold << ',' << r.population << ','
        << r.n_proposers << ',' << r.n_voters << ',' << format_double(r.l_p) << ',' << format_double(r.l_v) << ','
        << to_string(r.role) << ',' << to_string(r.honesty) << ',' << format_optional(r.mean_return) << ','
        << format_optional(r.std_err) << ',' << format_optional(r.ci95) << ',' << r.samples << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("sweep csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSweepHeader) throw FormatError("sweep csv: unexpected header '" + line + "'");
  std::vector<SweepRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 14) throw FormatError("line " + std::to_string(line_no) + ": expected 14 columns");
    SweepRow r;
    r.alpha = parse_number<double>(cells[0], line_no, "alpha");
    r.beta = parse_number<double>(cells[1], line_no, "beta");
    r.threshold = parse_number<int>(cells[2], line_no, "T");
    r.population = parse_number<int>(cells[3], line_no, "N");
    r.n_proposers = parse_number<int>(cells[4], line_no, "N_p");
    r.n_voters = parse_number<int>(cells[5], line_no, "N_v");
    r.l_p = parse_number<double>(cells[6], line_no, "l_p");
    r.l_v = parse_number<double>(cells[7], line_no, "l_v");
    if (cells[8] == "proposer") {
      r.role = Role::kProposer;
    } else if (cells[8] == "voter") {
      r.role = Role::kVoter;
    } else {
      throw FormatError("line " + std::to_string(line_no) + ": bad role '" + cells[8] + "'");
    }
    if (cells[9] == "honest") {
      r.honesty = Honesty::kHonest;
    } else if (cells[9] == "malicious") {
      r.honesty = Honesty::kMalicious;
    } else {
      throw FormatError("line " + std::to_string(line_no) + ": bad honesty '" + cells[9] + "'");
    }
    r.mean_return = parse_optional(cells[10], line_no, "mean_return");
    r.std_err = parse_optional(cells[11], line_no, "std_err");
    r.ci95 = parse_optional(cells[12], line_no, "ci95");
    r.samples = parse_number<std::size_t>(cells[13], line_no, "samples");
    rows.push_back(r);
  }
  return rows;
}

std::string summary_report(const SimConfig& config, const SimulationResult& result) {
  std::ostringstream out;
  out << "# " << kSummarySchema << '\n';
  out << "population " << config.population << ", N_p " << config.protocol.n_proposers << ", N_v "
      << config.protocol.n_voters << ", T " << config.protocol.threshold << ", alpha " << config.protocol.alpha
      << ", beta " << config.protocol.beta << '\n';
  out << "l_p " << config.adversary.l_p << " (" << name_of(config.adversary.proposer_strategy) << "), l_v "
      << config.adversary.l_v << " (" << name_of(config.adversary.voter_strategy) << ")\n";
  out << "rounds " << config.rounds << " x seeds " << config.seed_count << ", base seed " << config.base_seed << "\n\n";

  std::map<RoundStatus, std::size_t> status_counts;
  std::size_t accepted = 0, total = 0;
  for (const auto& s : result.seeds) {
    for (const auto& r : s.records) {
      ++status_counts[r.status];
      accepted += r.accepted() ? 1 : 0;
      ++total;
    }
  }
  out << "rounds by status:";
  for (const auto& [status, n] : status_counts) out << ' ' << to_string(status) << '=' << n;
  out << "\naccepted " << accepted << " of " << total << "\n\n";

  out << "expected return per selected round (delta / stake)\n";
  out << std::left << std::setw(10) << "role" << std::setw(11) << "honesty" << std::right << std::setw(14) << "mean"
      << std::setw(14) << "std_err" << std::setw(10) << "samples" << '\n';
  for (const auto& e : result.estimates) {
    out << std::left << std::setw(10) << to_string(e.role) << std::setw(11) << to_string(e.honesty) << std::right;
    if (e.has_data()) {
      out << std::setprecision(6) << std::setw(14) << e.mean << std::setw(14) << e.std_err;
    } else {
      out << std::setw(14) << "no data" << std::setw(14) << "-";
    }
    out << std::setw(10) << e.samples << '\n';
  }

  double mse_sum = 0.0;
  std::size_t mse_n = 0;
  for (const auto& s : result.seeds) {
    if (s.final_oracle_mse) {
      mse_sum += *s.final_oracle_mse;
      ++mse_n;
    }
  }
  if (mse_n > 0) out << "\nfinal oracle MSE (mean over seeds) " << format_double(mse_sum / static_cast<double>(mse_n)) << '\n';

  const auto records = result.all_records();
  const auto curve = eviction_curve(records, config.protocol.min_stake);
  if (!curve.rounds.empty()) {
    const auto fmt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("n/a"); };
    out << "final mean stake: honest " << fmt(curve.honest.back()) << ", malicious " << fmt(curve.malicious.back())
        << '\n';
  }
  if (curve.first_malicious_below_min) {
    out << "mean malicious stake below min_stake from round " << *curve.first_malicious_below_min << '\n';
  } else {
    out << "mean malicious stake never fell below min_stake\n";
  }
  if (!curve.evictions.empty()) {
    const auto& first = curve.evictions.front();
    out << "first eviction: round " << first.round << " (" << first.id.str() << ", seed " << first.seed << "), "
        << curve.evictions.size() << " evictions in total\n";
  } else {
    out << "no evictions\n";
  }
  return out.str();
}

}  // namespace flock::io
