#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwexp/accrual.hpp"
#include "pwexp/distribution.hpp"
#include "pwexp/estimation.hpp"
#include "pwexp/resampling.hpp"
#include "pwexp/rng.hpp"
#include "pwexp/stats.hpp"
#include "pwexp/survdata.hpp"

namespace pwexp {

struct AtRiskSubject {
  double enroll_time;
  double elapsed;  // analysis_time - enroll_time
};

/// State of a trial at the analysis time: events so far, subjects still
/// event-free and under follow-up, and the enrollment still to come.
struct TrialSnapshot {
  double analysis_time = 0.0;
  std::size_t observed_events = 0;
  std::vector<AtRiskSubject> at_risk;
  AccrualPlan future;

  void validate() const {
    for (const auto& s : at_risk)
      if (!(s.elapsed >= 0.0)) throw std::invalid_argument("snapshot: negative elapsed follow-up");
    if (future.total > 0 && future.start < analysis_time) {
      throw std::invalid_argument("snapshot: future enrollment starts before the analysis time");
    }
  }
};

/// Builds a snapshot from cut data. Subjects count as at risk when they are
/// censored with reason `cut` or their follow-up reaches the analysis time.
inline TrialSnapshot snapshot_from_sample(const SurvSample& data, double analysis_time,
                                          AccrualPlan future) {
  TrialSnapshot s;
  s.analysis_time = analysis_time;
  s.future = std::move(future);
  const double eps = 1e-9 * std::max(1.0, std::abs(analysis_time));
  for (const auto& r : data.records) {
    if (r.event == 1) {
      ++s.observed_events;
      continue;
    }
    const bool reaches = r.follow_abs_time && *r.follow_abs_time >= analysis_time - eps;
    if (r.reason == CensorReason::cut || reaches) {
      if (!r.rand_time) throw std::invalid_argument("snapshot: at-risk record lacks rand_time");
      s.at_risk.push_back({*r.rand_time, std::max(0.0, analysis_time - *r.rand_time)});
    }
  }
  return s;
}

/// Parameter sets driving a prediction: one fitted model, or one per
/// bootstrap replicate.
struct ModelSet {
  std::vector<PweModel> models;
  bool bootstrap = false;

  ModelSet() = default;
  explicit ModelSet(PweModel m) : models{std::move(m)} {}
  explicit ModelSet(const FitResult& f) : models{f.model} {}
  explicit ModelSet(const BootFit& b) : bootstrap(true) {
    for (const auto& r : b.replicates) models.push_back(r.model);
    if (models.empty()) throw std::invalid_argument("ModelSet: bootstrap has no replicates");
  }
};

/// Per-parameter-set expected event curves and the individual predictive
/// draws behind them, all on a common calendar grid.
struct PredictionEnsemble {
  std::vector<double> grid;
  double analysis_time = 0.0;
  std::size_t observed_events = 0;
  std::size_t n_each = 0;
  bool bootstrap = false;
  std::vector<std::vector<double>> expected;    // one curve per parameter set
  std::vector<std::vector<double>> predictive;  // n_each curves per parameter set

  std::vector<double> point() const {
    std::vector<double> out(grid.size());
    std::vector<double> col(expected.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (std::size_t p = 0; p < expected.size(); ++p) col[p] = expected[p][g];
      out[g] = stats::mean(col);
    }
    return out;
  }
};

/// Analysis time followed by `points` equal steps up to the end of the
/// accrual plan plus `followup_window`.
inline std::vector<double> default_grid(const TrialSnapshot& snap, double followup_window,
                                        std::size_t points = 200) {
  const double horizon = std::max(snap.analysis_time, snap.future.end()) + followup_window;
  std::vector<double> grid(points + 1);
  for (std::size_t i = 0; i <= points; ++i)
    grid[i] = snap.analysis_time +
              (horizon - snap.analysis_time) * static_cast<double>(i) / static_cast<double>(points);
  return grid;
}

/// Monte Carlo event prediction. For each parameter set and each of the
/// n_each iterations, every at-risk subject gets event and censoring times
/// conditional on exceeding its elapsed follow-up, and every future subject
/// gets an enrollment time and unconditional times. The iteration's event
/// count curve is one predictive draw; their mean is the expected curve.
inline PredictionEnsemble predict_events(const ModelSet& event_model,
                                         const std::optional<ModelSet>& censor_model,
                                         const TrialSnapshot& snapshot,
                                         std::vector<double> grid, std::size_t n_each,
                                         std::uint64_t seed, unsigned threads = 1) {
  if (n_each < 1) throw std::invalid_argument("predict_events: n_each must be >= 1");
  if (event_model.models.empty()) throw std::invalid_argument("predict_events: no event model");
  if (censor_model && censor_model->models.empty()) {
    throw std::invalid_argument("predict_events: empty censoring model");
  }
  snapshot.validate();
  if (grid.empty()) throw std::invalid_argument("predict_events: empty grid");
  std::sort(grid.begin(), grid.end());
  const std::size_t n_sets = event_model.models.size();
  const std::size_t G = grid.size();
  const double t0 = snapshot.analysis_time;
  const auto D = static_cast<double>(snapshot.observed_events);

  PredictionEnsemble ens;
  ens.grid = grid;
  ens.analysis_time = t0;
  ens.observed_events = snapshot.observed_events;
  ens.n_each = n_each;
  ens.bootstrap = event_model.bootstrap || (censor_model && censor_model->bootstrap);
  ens.expected.assign(n_sets, std::vector<double>(G, D));
  ens.predictive.assign(n_sets * n_each, std::vector<double>(G, D));

  parallel_for(n_sets, threads, [&](std::size_t p) {
    const PweModel& ev = event_model.models[p];
    const PweModel* cm =
        censor_model ? &censor_model->models[p % censor_model->models.size()] : nullptr;
    std::vector<double> hist(G);
    std::vector<double> acc(G, 0.0);
    auto record = [&](double abs_time) {
      const auto g = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), abs_time) -
                                              grid.begin());
      if (g < G) hist[g] += 1.0;
    };
    for (std::size_t l = 0; l < n_each; ++l) {
      // Iteration l uses the same stream under every parameter set, so the
      // spread of expected curves reflects parameter uncertainty only.
      Stream rng(derive_seed(seed, l));
      std::fill(hist.begin(), hist.end(), 0.0);
      for (const auto& s : snapshot.at_risk) {
        const double t = ev.conditional_quantile(rng.uniform(), s.elapsed);
        const double c = cm ? cm->conditional_quantile(rng.uniform(), s.elapsed) : kInf;
        if (t < c) record(s.enroll_time + t);
      }
      const auto enroll = snapshot.future.draw(rng);
      for (double u : enroll) {
        const double t = ev.quantile(rng.uniform());
        const double c = cm ? cm->quantile(rng.uniform()) : kInf;
        if (t < c) record(u + t);
      }
      auto& curve = ens.predictive[p * n_each + l];
      double cum = D;
      for (std::size_t g = 0; g < G; ++g) {
        cum += grid[g] <= t0 ? 0.0 : hist[g];
        curve[g] = cum;
        acc[g] += cum - D;
      }
    }
    for (std::size_t g = 0; g < G; ++g)
      ens.expected[p][g] = D + acc[g] / static_cast<double>(n_each);
  });
  return ens;
}

inline double interpolate(const std::vector<double>& grid, const std::vector<double>& curve,
                          double t) {
  if (t <= grid.front()) return curve.front();
  if (t >= grid.back()) return curve.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), t) -
                                           grid.begin());
  const auto lo = hi - 1;
  const double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
  return curve[lo] + w * (curve[hi] - curve[lo]);
}

enum class IntervalKind { confidence, predictive };

struct EventRow {
  double time;
  double n_event;
  double lower;
  double upper;
};

struct TimelineRow {
  double n_event;
  double time;   // NaN when the target is never reached
  double lower;  // NaN when missing
  double upper;  // NaN when missing
  std::string note;
};

namespace detail {

inline const std::vector<std::vector<double>>& curves_for(const PredictionEnsemble& ens,
                                                          IntervalKind kind) {
  if (kind == IntervalKind::confidence) {
    if (!ens.bootstrap) {
      throw std::invalid_argument(
          "confidence intervals need a bootstrap ensemble (fit with boot first)");
    }
    return ens.expected;
  }
  return ens.predictive;
}

inline void check_level(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("alpha must lie in (0, 1]");
}

/// First time the curve reaches `target`, interpolated on the grid; +inf if
/// never.
inline double crossing(const std::vector<double>& grid, const std::vector<double>& curve,
                       double target) {
  if (curve.front() >= target) return grid.front();
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (curve[g] >= target) {
      const double w = (target - curve[g - 1]) / (curve[g] - curve[g - 1]);
      return grid[g - 1] + w * (grid[g] - grid[g - 1]);
    }
  }
  return kInf;
}

inline double finite_or_nan(double v) {
  return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Percentile-bootstrap bands of the event count at the given calendar
/// times: over expected curves (confidence) or over pooled predictive draws
/// (predictive). The point estimate is the mean of the same curves.
inline std::vector<EventRow> event_interval(const PredictionEnsemble& ens,
                                            const std::vector<double>& times, double alpha,
                                            IntervalKind kind) {
  detail::check_level(alpha);
  const auto& curves = detail::curves_for(ens, kind);
  std::vector<EventRow> out;
  std::vector<double> vals(curves.size());
  for (double t : times) {
    for (std::size_t i = 0; i < curves.size(); ++i) vals[i] = interpolate(ens.grid, curves[i], t);
    out.push_back({t, stats::mean(vals), stats::quantile(vals, alpha / 2.0),
                   stats::quantile(vals, 1.0 - alpha / 2.0)});
  }
  return out;
}

/// Calendar time at which each target event count is reached, with
/// percentile bands over per-curve crossing times. Targets not reached
/// within the grid give missing (NaN) entries.
inline std::vector<TimelineRow> timeline_for_events(const PredictionEnsemble& ens,
                                                    const std::vector<double>& targets,
                                                    double alpha, IntervalKind kind) {
  detail::check_level(alpha);
  const auto& curves = detail::curves_for(ens, kind);
  std::vector<double> mean_curve(ens.grid.size());
  {
    std::vector<double> col(curves.size());
    for (std::size_t g = 0; g < ens.grid.size(); ++g) {
      for (std::size_t i = 0; i < curves.size(); ++i) col[i] = curves[i][g];
      mean_curve[g] = stats::mean(col);
    }
  }
  const auto D = static_cast<double>(ens.observed_events);
  std::vector<TimelineRow> out;
  std::vector<double> cross(curves.size());
  for (double target : targets) {
    if (target <= D) {
      const double t0 = ens.analysis_time;
      out.push_back({target, t0, t0, t0,
                     target < D ? "target below observed events; analysis time returned" : ""});
      continue;
    }
    for (std::size_t i = 0; i < curves.size(); ++i)
      cross[i] = detail::crossing(ens.grid, curves[i], target);
    out.push_back({target, detail::finite_or_nan(detail::crossing(ens.grid, mean_curve, target)),
                   detail::finite_or_nan(stats::quantile(cross, alpha / 2.0)),
                   detail::finite_or_nan(stats::quantile(cross, 1.0 - alpha / 2.0)), ""});
  }
  return out;
}

}  // namespace pwexp
