#pragma once

// CSV tables and JSON model files.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pwexp/distribution.hpp"
#include "pwexp/estimation.hpp"
#include "pwexp/prediction.hpp"
#include "pwexp/resampling.hpp"
#include "pwexp/simulation.hpp"
#include "pwexp/survdata.hpp"

namespace pwexp::io {

using json = nlohmann::json;

/// Raised for malformed input files and unknown column names.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  // Shortest representation that parses back to the same double.
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::optional<double> try_parse_number(std::string_view s) {
  if (s == "Inf" || s == "inf" || s == "+Inf") return kInf;
  if (s == "-Inf" || s == "-inf") return -kInf;
  if (s == "NA" || s == "NaN" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s.empty()) return std::nullopt;
  std::string buf(s);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) return std::nullopt;
  return v;
}

inline double parse_number(std::string_view s, std::string_view what) {
  auto v = try_parse_number(s);
  if (!v) throw FormatError("cannot parse '" + std::string(s) + "' as a number in " + std::string(what));
  return *v;
}

/// Comma-separated list of numbers, as used in command-line flags.
inline std::vector<double> parse_list(std::string_view s) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = s.find(',', pos);
    out.push_back(parse_number(s.substr(pos, comma - pos), "list"));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }

  std::size_t column(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw FormatError("column '" + std::string(name) + "' not found");
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  out.push_back(std::move(cell));
  return out;
}

}  // namespace detail

inline Table read_csv(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty CSV input");
  t.header = detail::split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto row = detail::split_csv_line(line);
    if (row.size() != t.header.size()) {
      throw FormatError("line " + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " fields, got " +
                        std::to_string(row.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_csv(std::ostream& out, const Table& t) {
  auto write_cell = [&](const std::string& c) {
    if (c.find_first_of(",\"\n") == std::string::npos) {
      out << c;
      return;
    }
    out << '"';
    for (char ch : c) out << (ch == '"' ? "\"\"" : std::string(1, ch));
    out << '"';
  };
  auto write_row = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out << ',';
      write_cell(r[i]);
    }
    out << '\n';
  };
  write_row(t.header);
  for (const auto& r : t.rows) write_row(r);
}

/// Column names for survival data. Empty optional names are not read.
struct ColumnMap {
  std::string time = "time";
  std::string event = "event";
  std::string rand_time = "randT";
  std::string follow_abs_time = "followT_abs";
  std::string censor_reason = "censor_reason";
};

/// Reads survival records. When the time column is missing and `followT`
/// exists (simulated trial files), that column is used. Calendar and reason
/// columns are optional.
inline SurvSample sample_from_table(const Table& t, const ColumnMap& cols) {
  std::size_t ti;
  if (auto i = t.find(cols.time)) {
    ti = *i;
  } else if (auto f = t.find("followT"); f && cols.time == "time") {
    ti = *f;
  } else {
    throw FormatError("column '" + cols.time + "' not found");
  }
  const std::size_t ei = t.column(cols.event);
  const auto ri = t.find(cols.rand_time);
  const auto fi = t.find(cols.follow_abs_time);
  const auto ci = t.find(cols.censor_reason);
  SurvSample s;
  s.records.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    SurvRecord r;
    r.time = parse_number(row[ti], cols.time);
    const double e = parse_number(row[ei], cols.event);
    if (e != 0.0 && e != 1.0) throw FormatError("event column must hold 0 or 1");
    r.event = static_cast<int>(e);
    if (ri) r.rand_time = parse_number(row[*ri], cols.rand_time);
    if (fi) r.follow_abs_time = parse_number(row[*fi], cols.follow_abs_time);
    if (ci) {
      try {
        r.reason = parse_censor_reason(row[*ci]);
      } catch (const std::invalid_argument& ex) {
        throw FormatError(ex.what());
      }
    } else if (std::isinf(r.time)) {
      r.reason = CensorReason::never_event;
    }
    if (!(r.time >= 0.0)) throw FormatError("times must be nonnegative");
    s.records.push_back(r);
  }
  return s;
}

// --- JSON -----------------------------------------------------------------

/// Non-finite numbers are stored as the strings "Inf", "-Inf" and "NaN".
inline json number_to_json(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v) == "NA" ? json("NaN") : json(format_number(v));
}

inline double number_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "Inf") return kInf;
    if (s == "-Inf") return -kInf;
    if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    throw FormatError("unexpected string '" + s + "' where a number was expected");
  }
  return j.get<double>();
}

inline json numbers_to_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_to_json(x));
  return a;
}

inline std::vector<double> numbers_from_json(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(number_from_json(x));
  return v;
}

inline json to_json(const FitResult& f) {
  json j;
  j["rates"] = numbers_to_json(f.model.rates());
  j["breakpoints"] = numbers_to_json(f.model.breakpoints());
  j["loglik"] = number_to_json(f.loglik);
  j["aic"] = number_to_json(f.aic);
  j["bic"] = number_to_json(f.bic);
  j["n_obs"] = f.n_obs;
  j["n_param"] = f.n_param;
  j["optimizer"] = f.optimizer;
  j["warnings"] = f.warnings;
  return j;
}

inline FitResult fit_from_json(const json& j) {
  try {
    PweModel m(numbers_from_json(j.at("rates")), numbers_from_json(j.at("breakpoints")));
    FitResult f = make_fit_result(std::move(m), number_from_json(j.at("loglik")),
                                  j.at("n_obs").get<std::size_t>(),
                                  j.value("optimizer", std::string("unknown")));
    if (j.contains("warnings")) f.warnings = j["warnings"].get<std::vector<std::string>>();
    return f;
  } catch (const json::exception& ex) {
    throw FormatError(std::string("malformed fit JSON: ") + ex.what());
  }
}

inline json to_json(const BootFit& b) {
  json j;
  j["seed"] = b.seed;
  j["nsim"] = b.nsim;
  j["replicates"] = json::array();
  for (const auto& r : b.replicates) j["replicates"].push_back(to_json(r));
  j["failures"] = json::array();
  for (const auto& f : b.failures) j["failures"].push_back({{"index", f.index}, {"message", f.message}});
  return j;
}

inline BootFit boot_from_json(const json& j) {
  try {
    BootFit b;
    b.seed = j.at("seed").get<std::uint64_t>();
    b.nsim = j.at("nsim").get<std::size_t>();
    for (const auto& r : j.at("replicates")) b.replicates.push_back(fit_from_json(r));
    if (j.contains("failures")) {
      for (const auto& f : j["failures"])
        b.failures.push_back({f.at("index").get<std::size_t>(), f.at("message").get<std::string>()});
    }
    return b;
  } catch (const json::exception& ex) {
    throw FormatError(std::string("malformed bootstrap JSON: ") + ex.what());
  }
}

/// A fit file or a bootstrap file, told apart by the `replicates` key.
inline ModelSet model_set_from_json(const json& j) {
  if (j.contains("replicates")) return ModelSet(boot_from_json(j));
  return ModelSet(fit_from_json(j));
}

// --- Tables ---------------------------------------------------------------

/// Trial records with the conventional column names. Group and stratum
/// columns appear only when the design has more than one of them.
inline Table trial_table(const std::vector<TrialRecord>& recs, const TrialDesign& design) {
  const bool groups = design.groups.size() > 1;
  const bool strata = design.strata.size() > 1;
  Table t;
  t.header = {"ID"};
  if (groups) t.header.push_back("group");
  if (strata) t.header.push_back("strata");
  for (const char* c : {"randT", "eventT", "dropT", "deathT", "censor_reason", "event", "censor",
                        "followT", "followT_abs"})
    t.header.push_back(c);
  for (const auto& r : recs) {
    std::vector<std::string> row{std::to_string(r.id)};
    if (groups) row.push_back(design.groups[r.group]);
    if (strata) row.push_back(design.strata[r.stratum]);
    row.push_back(format_number(r.randT));
    row.push_back(format_number(r.eventT));
    row.push_back(format_number(r.dropT));
    row.push_back(format_number(r.deathT));
    row.emplace_back(to_string(r.reason));
    row.push_back(std::to_string(r.event));
    row.push_back(std::to_string(r.censor));
    row.push_back(format_number(r.followT));
    row.push_back(format_number(r.followT_abs));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table km_table(const KmCurve& km) {
  Table t;
  t.header = {"time", "survival", "at_risk", "events"};
  t.rows.push_back({"0", "1", km.steps.empty() ? "NA" : std::to_string(km.steps.front().at_risk), "0"});
  for (const auto& s : km.steps)
    t.rows.push_back({format_number(s.time), format_number(s.survival), std::to_string(s.at_risk),
                      std::to_string(s.events)});
  return t;
}

/// Survival curve of a model on an even grid from 0 to `horizon`.
inline Table curve_table(const PweModel& m, double horizon, std::size_t points = 200) {
  Table t;
  t.header = {"time", "survival"};
  for (std::size_t i = 0; i <= points; ++i) {
    const double x = horizon * static_cast<double>(i) / static_cast<double>(points);
    t.rows.push_back({format_number(x), format_number(m.survival(x))});
  }
  return t;
}

inline Table event_table(const std::vector<EventRow>& rows) {
  Table t;
  t.header = {"time", "n_event", "lower", "upper"};
  for (const auto& r : rows)
    t.rows.push_back({format_number(r.time), format_number(r.n_event), format_number(r.lower),
                      format_number(r.upper)});
  return t;
}

inline Table timeline_table(const std::vector<TimelineRow>& rows) {
  Table t;
  t.header = {"n_event", "time", "lower", "upper"};
  for (const auto& r : rows)
    t.rows.push_back({format_number(r.n_event), format_number(r.time), format_number(r.lower),
                      format_number(r.upper)});
  return t;
}

inline Table followup_table(const FollowupSummary& s, bool by_group) {
  Table t;
  t.header = {"at"};
  if (by_group) t.header.push_back("group");
  for (const char* c : {"analysis_time", "n_event", "n_subject"}) t.header.push_back(c);
  for (const auto& n : s.stat_names) t.header.push_back(n);
  auto add = [&](const FollowupRow& r, const std::string& group) {
    std::vector<std::string> row{format_number(r.at)};
    if (by_group) row.push_back(group);
    row.push_back(format_number(r.analysis_time));
    row.push_back(format_number(r.events));
    row.push_back(format_number(r.subjects));
    for (double v : r.stats) row.push_back(format_number(v));
    t.rows.push_back(std::move(row));
  };
  for (const auto& r : s.overall) add(r, "all");
  if (by_group)
    for (const auto& r : s.by_group) add(r, r.group);
  return t;
}

}  // namespace pwexp::io
