#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pwexp/pwexp.hpp"

namespace pwexp::cli {

inline constexpr int kUsageError = 2;
inline constexpr int kModuleError = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Streams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

// Options shared by several subcommands.
struct Common {
  std::string in;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  io::ColumnMap cols;
};

struct FitFlags {
  std::size_t nbreak = 0;
  std::vector<double> fixed_breakpoints;
  std::string optimizer = "hybrid";
  std::size_t max_set = 10000;
  std::size_t min_pt_tail = 5;
  std::vector<double> exclude_int;
  std::string event_reason;
};

struct DesignFlags {
  std::size_t n = 0;
  std::optional<double> rand_rate;
  std::vector<double> rand_counts;
  double start = 0.0;
  std::vector<double> rates;
  std::vector<double> breaks;
  std::vector<std::string> groups{"all"};
  std::vector<double> allocation;
  std::vector<double> hr;
  std::vector<std::string> strata{"all"};
  std::vector<double> strata_weights;
  std::optional<double> drop_rate;
  std::vector<double> drop_rates, drop_breaks;
  std::vector<double> death_rates, death_breaks;
  bool iid_allocation = false;
};

inline void add_input(CLI::App* app, Common& c) {
  app->add_option("--in", c.in, "Input file ('-' for stdin)")->required();
}

inline void add_columns(CLI::App* app, Common& c) {
  app->add_option("--time-col", c.cols.time, "Time column")->capture_default_str();
  app->add_option("--event-col", c.cols.event, "Event indicator column")->capture_default_str();
  app->add_option("--rand-col", c.cols.rand_time, "Randomization time column")->capture_default_str();
  app->add_option("--follow-abs-col", c.cols.follow_abs_time, "Calendar end of follow-up column")
      ->capture_default_str();
  app->add_option("--reason-col", c.cols.censor_reason, "Censor reason column")->capture_default_str();
}

inline void add_fit_flags(CLI::App* app, FitFlags& f, Common& c) {
  app->add_option("--nbreak", f.nbreak, "Total number of change-points")->capture_default_str();
  app->add_option("--fixed-breakpoints,--breakpoints", f.fixed_breakpoints, "Known change-points")
      ->delimiter(',');
  app->add_option("--optimizer", f.optimizer, "bfs (alias mle), ols or hybrid")->capture_default_str();
  app->add_option("--max-set", f.max_set, "Maximum candidate combinations")->capture_default_str();
  app->add_option("--min-pt-tail", f.min_pt_tail, "Minimum events after the last change-point")
      ->capture_default_str();
  app->add_option("--exclude-int", f.exclude_int, "Interval lower[,upper] barred for change-points")
      ->delimiter(',')
      ->expected(1, 2);
  app->add_option("--event-reason", f.event_reason,
                  "Treat records with this censor reason as events (censoring model)");
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--threads", c.threads, "Worker threads")->capture_default_str();
}

inline void add_design_flags(CLI::App* app, DesignFlags& d, Common& c) {
  app->add_option("--n", d.n, "Total sample size (rate form)");
  app->add_option("--rand-rate", d.rand_rate, "Enrollment rate, subjects per month");
  app->add_option("--rand-counts", d.rand_counts, "Subjects enrolled in each month")->delimiter(',');
  app->add_option("--start", d.start, "Calendar start of enrollment")->capture_default_str();
  app->add_option("--rates", d.rates, "Event hazard rates of the reference group")
      ->delimiter(',')
      ->required();
  app->add_option("--breaks", d.breaks, "Event change-points")->delimiter(',');
  app->add_option("--groups", d.groups, "Group names")->delimiter(',');
  app->add_option("--allocation", d.allocation, "Allocation weight per group")->delimiter(',');
  app->add_option("--hr", d.hr, "Hazard ratio per group relative to --rates")->delimiter(',');
  app->add_option("--strata", d.strata, "Stratum names")->delimiter(',');
  app->add_option("--strata-weights", d.strata_weights, "Weight per stratum")->delimiter(',');
  app->add_option("--drop-rate", d.drop_rate, "Monthly drop-out probability");
  app->add_option("--drop-rates", d.drop_rates, "Drop-out hazard rates")->delimiter(',');
  app->add_option("--drop-breaks", d.drop_breaks, "Drop-out change-points")->delimiter(',');
  app->add_option("--death-rates", d.death_rates, "Death hazard rates")->delimiter(',');
  app->add_option("--death-breaks", d.death_breaks, "Death change-points")->delimiter(',');
  app->add_flag("--iid-allocation", d.iid_allocation, "Independent weighted allocation draws");
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--threads", c.threads, "Worker threads")->capture_default_str();
}

inline std::uint64_t require_seed(const Common& c, const std::string& what) {
  if (!c.seed) throw UsageError(what + " is randomized and needs --seed");
  return *c.seed;
}

inline AccrualPlan accrual_from(std::optional<double> rate, const std::vector<double>& counts,
                                std::size_t n, double start, const std::string& who) {
  if (rate && !counts.empty()) throw UsageError(who + ": give --rand-rate or --rand-counts, not both");
  if (rate) {
    if (n == 0 && who == "simulate") throw UsageError("simulate: --rand-rate needs --n");
    return AccrualPlan::from_rate(*rate, n, start);
  }
  if (!counts.empty()) {
    auto p = AccrualPlan::from_counts(counts, start);
    if (n > 0) {
      if (n > p.total) throw UsageError(who + ": --n exceeds the total of --rand-counts");
      p.total = n;
    }
    return p;
  }
  return AccrualPlan::from_rate(1.0, 0, start);
}

inline TrialDesign design_from(const DesignFlags& d) {
  TrialDesign design;
  design.enrollment = accrual_from(d.rand_rate, d.rand_counts, d.n, d.start, "simulate");
  if (!d.rand_rate && d.rand_counts.empty()) {
    throw UsageError("design needs --rand-rate with --n, or --rand-counts");
  }
  design.groups = d.groups;
  design.allocation = d.allocation.empty() ? std::vector<double>(d.groups.size(), 1.0) : d.allocation;
  design.strata = d.strata;
  design.strata_weights =
      d.strata_weights.empty() ? std::vector<double>(d.strata.size(), 1.0) : d.strata_weights;
  const auto hr = d.hr.empty() ? std::vector<double>(d.groups.size(), 1.0) : d.hr;
  if (hr.size() != d.groups.size()) throw UsageError("--hr needs one value per group");
  design.drop_rate = d.drop_rate;
  design.iid_allocation = d.iid_allocation;
  if (d.drop_rate && !d.drop_rates.empty()) {
    throw UsageError("give --drop-rate or --drop-rates, not both");
  }
  Sampler drop = d.drop_rates.empty() ? Sampler{} : pwe_sampler(PweModel(d.drop_rates, d.drop_breaks));
  Sampler death =
      d.death_rates.empty() ? Sampler{} : pwe_sampler(PweModel(d.death_rates, d.death_breaks));
  design.dists.resize(d.groups.size());
  for (std::size_t g = 0; g < d.groups.size(); ++g) {
    auto rates = d.rates;
    for (double& r : rates) r *= hr[g];
    const Sampler event = pwe_sampler(PweModel(rates, d.breaks));
    design.dists[g].assign(d.strata.size(), ArmDistributions{event, drop, death});
  }
  return design;
}

inline io::Table read_table(const std::string& path, std::istream& in) {
  if (path == "-") return io::read_csv(in);
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open '" + path + "'");
  return io::read_csv(f);
}

inline io::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open '" + path + "'");
  try {
    return io::json::parse(f);
  } catch (const io::json::exception& ex) {
    throw io::FormatError("'" + path + "' is not valid JSON: " + ex.what());
  }
}

/// Writes to --out when given, else to stdout.
inline void emit(const std::string& path, std::ostream& out, const std::string& text) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << text;
}

inline std::string csv_text(const io::Table& t) {
  std::ostringstream s;
  io::write_csv(s, t);
  return s.str();
}

/// Records the command line next to an output file so it can be rerun.
inline void write_manifest(const std::string& out_path, const std::string& sub,
                           const std::vector<std::string>& args, const Common& c) {
  if (out_path.empty() || out_path == "-") return;
  io::json m;
  m["subcommand"] = sub;
  m["argv"] = args;
  m["seed"] = c.seed ? io::json(*c.seed) : io::json(nullptr);
  m["threads"] = c.threads;
  emit(out_path + ".manifest.json", std::cout, m.dump(2) + "\n");
}

inline FitConfig fit_config(const FitFlags& f, const Common& c) {
  FitConfig cfg;
  cfg.nbreak = f.nbreak;
  cfg.fixed_breakpoints = f.fixed_breakpoints;
  try {
    cfg.optimizer = parse_optimizer(f.optimizer);
  } catch (const std::invalid_argument& ex) {
    throw UsageError(ex.what());
  }
  cfg.max_set = f.max_set;
  cfg.min_pt_tail = f.min_pt_tail;
  if (!f.exclude_int.empty()) {
    ExcludeInterval ex;
    ex.lower = f.exclude_int[0];
    if (f.exclude_int.size() > 1) ex.upper = f.exclude_int[1];
    cfg.exclude_int = ex;
  }
  cfg.threads = c.threads;
  const bool searches = f.nbreak > f.fixed_breakpoints.size();
  if (searches) cfg.seed = require_seed(c, "fitting with unknown change-points");
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

inline SurvSample load_sample(const Common& c, const FitFlags* f, std::istream& in) {
  auto table = read_table(c.in, in);
  auto s = io::sample_from_table(table, c.cols);
  if (f && !f->event_reason.empty()) {
    CensorReason target;
    try {
      target = parse_censor_reason(f->event_reason);
    } catch (const std::invalid_argument& ex) {
      throw UsageError(ex.what());
    }
    if (!table.find(c.cols.censor_reason)) {
      throw io::FormatError("--event-reason needs column '" + c.cols.censor_reason + "'");
    }
    for (auto& r : s.records) r.event = r.reason == target ? 1 : 0;
  }
  return s;
}

inline std::string summary_line(const FitResult& f) {
  std::ostringstream h, v;
  const auto& b = f.model.breakpoints();
  const auto& l = f.model.rates();
  for (std::size_t i = 0; i < b.size(); ++i) {
    h << "brk" << i + 1 << ' ';
    v << io::format_number(b[i]) << ' ';
  }
  for (std::size_t i = 0; i < l.size(); ++i) {
    h << "lam" << i + 1 << ' ';
    v << io::format_number(l[i]) << ' ';
  }
  h << "likelihood AIC BIC";
  v << io::format_number(f.loglik) << ' ' << io::format_number(f.aic) << ' '
    << io::format_number(f.bic);
  return h.str() + "\n" + v.str() + "\n";
}

inline double max_finite(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v)
    if (std::isfinite(x)) m = std::max(m, x);
  return m;
}

}  // namespace detail

/// Parses and executes one command line. Returns the process exit status.
inline int run(int argc, const char* const* argv, Streams io_streams) {
  using namespace detail;
  auto& out = io_streams.out;
  auto& err = io_streams.err;

  CLI::App app{"Piecewise exponential survival models: fitting, simulation and event prediction"};
  app.require_subcommand(1);
  Common c;
  FitFlags ff;
  DesignFlags df;

  auto* simulate = app.add_subcommand("simulate", "Simulate a complete trial");
  add_design_flags(simulate, df, c);
  simulate->add_option("--out", c.out, "Output CSV");

  double cut_time = 0.0;
  double cut_quantile = 0.0;
  auto* cut = app.add_subcommand("cut", "Re-censor a trial at a calendar cut-off");
  add_input(cut, c);
  add_columns(cut, c);
  cut->add_option("--out", c.out, "Output CSV");
  auto* cut_opt = cut->add_option("--cut", cut_time, "Calendar cut-off");
  cut->add_option("--cut-quantile", cut_quantile, "Cut at this quantile of randomization times")
      ->excludes(cut_opt);

  auto* km = app.add_subcommand("km", "Kaplan-Meier curve");
  add_input(km, c);
  add_columns(km, c);
  km->add_option("--out", c.out, "Output CSV");

  std::string curve_out;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a piecewise exponential model");
  add_input(fit_cmd, c);
  add_columns(fit_cmd, c);
  add_fit_flags(fit_cmd, ff, c);
  fit_cmd->add_option("--out", c.out, "Output JSON");
  fit_cmd->add_option("--curve-out", curve_out, "Fitted survival curve CSV");

  std::size_t nsim = 100;
  double test_fraction = 0.2;
  auto* cv = app.add_subcommand("cv", "Cross-validated log-likelihood");
  add_input(cv, c);
  add_columns(cv, c);
  add_fit_flags(cv, ff, c);
  cv->add_option("--nsim", nsim, "Repetitions")->capture_default_str();
  cv->add_option("--test-fraction", test_fraction, "Held-out fraction")->capture_default_str();
  cv->add_option("--out", c.out, "Output CSV");

  auto* boot = app.add_subcommand("boot", "Bootstrap refits");
  add_input(boot, c);
  add_columns(boot, c);
  add_fit_flags(boot, ff, c);
  boot->add_option("--nsim", nsim, "Replicates")->capture_default_str();
  boot->add_option("--out", c.out, "Output JSON");

  std::string event_model, censor_model;
  std::optional<double> analysis_time, future_start;
  std::optional<double> future_rate;
  std::vector<double> future_counts;
  std::size_t remaining = 0;
  double window = 24.0;
  std::size_t grid_points = 200;
  std::size_t n_each = 100;
  double alpha = 0.05;
  std::string kind = "predictive";
  std::vector<double> eval_at, targets;
  auto* predict = app.add_subcommand("predict", "Predict event counts or timelines");
  add_input(predict, c);
  add_columns(predict, c);
  predict->add_option("--event-model", event_model, "Event model JSON (fit or boot)")->required();
  predict->add_option("--censor-model", censor_model, "Censoring model JSON (fit or boot)");
  predict->add_option("--analysis-time", analysis_time, "Calendar analysis time (default: data cut)");
  predict->add_option("--rand-rate", future_rate, "Future enrollment rate per month");
  predict->add_option("--rand-counts", future_counts, "Future enrollment per month")->delimiter(',');
  predict->add_option("--remaining", remaining, "Subjects still to enroll");
  predict->add_option("--future-start", future_start, "Start of future enrollment (default: analysis time)");
  predict->add_option("--followup-window", window, "Months of follow-up after enrollment ends")
      ->capture_default_str();
  predict->add_option("--grid-points", grid_points, "Grid steps")->capture_default_str();
  predict->add_option("--n-each", n_each, "Iterations per parameter set")->capture_default_str();
  predict->add_option("--alpha", alpha, "1 - interval level")->capture_default_str();
  predict->add_option("--kind", kind, "predictive or confidence")->capture_default_str();
  auto* eval_opt = predict->add_option("--eval-at", eval_at, "Calendar times to report")->delimiter(',');
  predict->add_option("--targets", targets, "Event counts to time (timeline mode)")
      ->delimiter(',')
      ->excludes(eval_opt);
  predict->add_option("--seed", c.seed, "Random seed");
  predict->add_option("--threads", c.threads, "Worker threads")->capture_default_str();
  predict->add_option("--out", c.out, "Output CSV");

  std::vector<double> at;
  std::string type = "calendar";
  std::vector<std::string> stat_names{"mean", "median", "sum"};
  std::vector<std::string> endpoints{"cut", "drop_out"};
  bool by_group = false;
  std::size_t rep = 100;
  auto* followup = app.add_subcommand("followup", "Simulate events and follow-up at milestones");
  add_design_flags(followup, df, c);
  followup->add_option("--at", at, "Milestones")->delimiter(',')->required();
  followup->add_option("--type", type, "calendar, event or sample")->capture_default_str();
  followup->add_option("--stats", stat_names, "mean, median, sum, prop_<x>")->delimiter(',');
  followup->add_option("--endpoints", endpoints, "cut, drop_out, death, event")->delimiter(',');
  followup->add_flag("--by-group", by_group, "Also tabulate by group");
  followup->add_option("--rep", rep, "Simulated trials")->capture_default_str();
  followup->add_option("--out", c.out, "Output CSV");

  std::vector<double> d_rates, d_breaks, d_at;
  std::optional<double> given;
  std::string fn;
  std::size_t n_sample = 0;
  auto* dist = app.add_subcommand("dist", "Evaluate a piecewise exponential distribution");
  dist->add_option("--rates", d_rates, "Hazard rates")->delimiter(',')->required();
  dist->add_option("--breaks", d_breaks, "Change-points")->delimiter(',');
  dist->add_option("--at", d_at, "Evaluation points")->delimiter(',');
  dist->add_option("--given", given, "Condition on survival past this time");
  for (const char* f : {"survival", "cdf", "hazard", "cumhaz", "density", "quantile"}) {
    dist->add_flag_callback(std::string("--") + f, [&fn, f] {
      if (!fn.empty()) throw CLI::ValidationError("choose one function flag");
      fn = f;
    });
  }
  dist->add_option("--sample", n_sample, "Draw this many variates");
  dist->add_option("--seed", c.seed, "Random seed");

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (*simulate) {
      const auto seed = require_seed(c, "simulate");
      const auto design = design_from(df);
      const auto trial = simulate_trial(design, seed);
      emit(c.out, out, csv_text(io::trial_table(trial, design)));
      write_manifest(c.out, "simulate", args, c);
    } else if (*cut) {
      auto table = read_table(c.in, io_streams.in);
      const auto ri = table.column(c.cols.rand_time);
      const auto fi = table.column(c.cols.follow_abs_time);
      const auto ei = table.column(c.cols.event);
      std::size_t ti;
      if (auto i = table.find(c.cols.time)) {
        ti = *i;
      } else if (auto f = table.find("followT"); f && c.cols.time == "time") {
        ti = *f;
      } else {
        throw io::FormatError("column '" + c.cols.time + "' not found");
      }
      auto ci = table.find(c.cols.censor_reason);
      if (!ci) {
        table.header.push_back(c.cols.censor_reason);
        for (auto& row : table.rows) row.push_back("none");
        ci = table.header.size() - 1;
      }
      const auto censor_i = table.find("censor");
      double cut_at = cut_time;
      if (cut->count("--cut-quantile")) {
        std::vector<double> rand;
        for (const auto& row : table.rows) rand.push_back(io::parse_number(row[ri], c.cols.rand_time));
        cut_at = stats::quantile(rand, cut_quantile);
        err << "cut at " << io::format_number(cut_at) << "\n";
      } else if (!cut->count("--cut")) {
        throw UsageError("cut needs --cut or --cut-quantile");
      }
      io::Table kept;
      kept.header = table.header;
      for (auto row : table.rows) {
        SurvRecord r;
        r.time = io::parse_number(row[ti], c.cols.time);
        r.event = io::parse_number(row[ei], c.cols.event) != 0.0 ? 1 : 0;
        r.rand_time = io::parse_number(row[ri], c.cols.rand_time);
        r.follow_abs_time = io::parse_number(row[fi], c.cols.follow_abs_time);
        r.reason = parse_censor_reason(row[*ci]);
        if (!cut_record(r, cut_at)) continue;
        row[ti] = io::format_number(r.time);
        row[ei] = std::to_string(r.event);
        row[fi] = io::format_number(*r.follow_abs_time);
        row[*ci] = std::string(to_string(r.reason));
        if (censor_i && r.reason == CensorReason::cut) row[*censor_i] = "1";
        kept.rows.push_back(std::move(row));
      }
      emit(c.out, out, csv_text(kept));
      write_manifest(c.out, "cut", args, c);
    } else if (*km) {
      const auto s = load_sample(c, nullptr, io_streams.in);
      emit(c.out, out, csv_text(io::km_table(km_fit(s))));
      write_manifest(c.out, "km", args, c);
    } else if (*fit_cmd) {
      const auto s = load_sample(c, &ff, io_streams.in);
      const auto cfg = fit_config(ff, c);
      const auto f = pwexp::fit(s, cfg);
      for (const auto& w : f.warnings) err << "warning: " << w << "\n";
      const auto text = io::to_json(f).dump(2) + "\n";
      if (c.out.empty() || c.out == "-") {
        out << text;
        err << summary_line(f);
      } else {
        emit(c.out, out, text);
        out << summary_line(f);
        write_manifest(c.out, "fit", args, c);
      }
      if (!curve_out.empty()) {
        emit(curve_out, out, csv_text(io::curve_table(f.model, detail::max_finite(s.times()))));
      }
    } else if (*cv) {
      const auto s = load_sample(c, &ff, io_streams.in);
      const auto seed = require_seed(c, "cv");
      const auto cfg = fit_config(ff, c);
      const auto r = cv_loglik(s, cfg, nsim, seed, c.threads, test_fraction);
      for (const auto& f : r.failures)
        err << "warning: repetition " << f.index << " failed: " << f.message << "\n";
      io::Table t;
      t.header = {"cv_loglik"};
      for (double v : r.values) t.rows.push_back({io::format_number(v)});
      emit(c.out, out, csv_text(t));
      write_manifest(c.out, "cv", args, c);
    } else if (*boot) {
      const auto s = load_sample(c, &ff, io_streams.in);
      const auto seed = require_seed(c, "boot");
      const auto cfg = fit_config(ff, c);
      const auto b = boot_fit(s, cfg, nsim, seed, c.threads);
      for (const auto& f : b.failures)
        err << "warning: replicate " << f.index << " failed: " << f.message << "\n";
      emit(c.out, out, io::to_json(b).dump(2) + "\n");
      write_manifest(c.out, "boot", args, c);
    } else if (*predict) {
      const auto seed = require_seed(c, "predict");
      const auto s = load_sample(c, nullptr, io_streams.in);
      const auto ev = io::model_set_from_json(read_json(event_model));
      std::optional<ModelSet> cm;
      if (!censor_model.empty()) cm = io::model_set_from_json(read_json(censor_model));
      double t0 = 0.0;
      if (analysis_time) {
        t0 = *analysis_time;
      } else {
        std::vector<double> abs;
        for (const auto& r : s.records) {
          if (!r.follow_abs_time) throw io::FormatError("--analysis-time needed: no calendar column");
          abs.push_back(*r.follow_abs_time);
        }
        t0 = max_finite(abs);
      }
      if (future_rate && remaining == 0) throw UsageError("predict: --rand-rate needs --remaining");
      const auto plan = accrual_from(future_rate, future_counts, remaining,
                                     future_start.value_or(t0), "predict");
      const auto snap = snapshot_from_sample(s, t0, plan);
      IntervalKind k;
      if (kind == "predictive") {
        k = IntervalKind::predictive;
      } else if (kind == "confidence") {
        k = IntervalKind::confidence;
      } else {
        throw UsageError("--kind must be predictive or confidence");
      }
      if (k == IntervalKind::confidence && !ev.bootstrap && !(cm && cm->bootstrap)) {
        throw UsageError("--kind confidence needs a bootstrap model file (run boot first)");
      }
      const auto grid = default_grid(snap, window, grid_points);
      const auto ens = predict_events(ev, cm, snap, grid, n_each, seed, c.threads);
      std::string text;
      if (!targets.empty()) {
        const auto rows = timeline_for_events(ens, targets, alpha, k);
        for (const auto& r : rows)
          if (!r.note.empty()) err << "note: " << r.note << "\n";
        text = csv_text(io::timeline_table(rows));
      } else {
        text = csv_text(io::event_table(event_interval(ens, eval_at.empty() ? grid : eval_at, alpha, k)));
      }
      emit(c.out, out, text);
      write_manifest(c.out, "predict", args, c);
    } else if (*followup) {
      FollowupOptions opt;
      opt.seed = require_seed(c, "followup");
      const auto design = design_from(df);
      opt.at = at;
      if (type == "calendar") {
        opt.type = MilestoneType::calendar;
      } else if (type == "event") {
        opt.type = MilestoneType::event;
      } else if (type == "sample") {
        opt.type = MilestoneType::sample;
      } else {
        throw UsageError("--type must be calendar, event or sample");
      }
      opt.stats.clear();
      for (const auto& n : stat_names) {
        if (n == "mean") {
          opt.stats.push_back(FollowupStat::mean());
        } else if (n == "median") {
          opt.stats.push_back(FollowupStat::median());
        } else if (n == "sum") {
          opt.stats.push_back(FollowupStat::sum());
        } else if (n.rfind("prop_", 0) == 0) {
          const auto x = io::try_parse_number(std::string_view(n).substr(5));
          if (!x) throw UsageError("cannot read threshold in '" + n + "'");
          opt.stats.push_back(FollowupStat::prop_above(*x, n));
        } else {
          throw UsageError("unknown statistic '" + n + "'");
        }
      }
      opt.endpoints.clear();
      for (const auto& e : endpoints) {
        if (e == "cut") {
          opt.endpoints.push_back(FollowupEndpoint::cut);
        } else if (e == "drop_out") {
          opt.endpoints.push_back(FollowupEndpoint::drop_out);
        } else if (e == "death") {
          opt.endpoints.push_back(FollowupEndpoint::death);
        } else if (e == "event") {
          opt.endpoints.push_back(FollowupEndpoint::event);
        } else {
          throw UsageError("unknown endpoint '" + e + "'");
        }
      }
      opt.by_group = by_group;
      opt.rep = rep;
      opt.threads = c.threads;
      const auto summary = sim_followup(design, opt);
      for (const auto& w : summary.warnings) err << "warning: " << w << "\n";
      emit(c.out, out, csv_text(io::followup_table(summary, by_group)));
      write_manifest(c.out, "followup", args, c);
    } else if (*dist) {
      const PweModel m(d_rates, d_breaks);
      std::ostringstream s;
      if (n_sample > 0) {
        if (!fn.empty()) throw UsageError("--sample cannot be combined with a function flag");
        Stream rng(require_seed(c, "dist --sample"));
        const auto draws = given ? m.conditional_sample(n_sample, *given, rng) : m.sample(n_sample, rng);
        for (double v : draws) s << io::format_number(v) << "\n";
      } else {
        if (fn.empty()) throw UsageError("dist needs a function flag or --sample");
        if (d_at.empty()) throw UsageError("dist needs --at");
        if (given && fn != "survival" && fn != "cdf" && fn != "quantile") {
          throw UsageError("--given applies to --survival, --cdf and --quantile");
        }
        for (double x : d_at) {
          double v = 0.0;
          if (fn == "survival") {
            v = given ? m.conditional_survival(x, *given) : m.survival(x);
          } else if (fn == "cdf") {
            v = given ? m.conditional_cdf(x, *given) : m.cdf(x);
          } else if (fn == "hazard") {
            v = m.hazard(x);
          } else if (fn == "cumhaz") {
            v = m.cumulative_hazard(x);
          } else if (fn == "density") {
            v = m.density(x);
          } else {
            v = given ? m.conditional_quantile(x, *given) : m.quantile(x);
          }
          s << io::format_number(v) << "\n";
        }
      }
      out << s.str();
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const io::FormatError& e) {
    err << "input error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kModuleError;
  }
  return 0;
}

}  // namespace pwexp::cli
