#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwexp/accrual.hpp"
#include "pwexp/distribution.hpp"
#include "pwexp/rng.hpp"
#include "pwexp/stats.hpp"
#include "pwexp/survdata.hpp"

namespace pwexp {

/// Draws one latent time. An empty sampler means the time is never reached.
using Sampler = std::function<double(Stream&)>;

inline Sampler pwe_sampler(PweModel m) {
  return [m = std::move(m)](Stream& rng) { return m.quantile(rng.uniform()); };
}

inline Sampler exponential_sampler(double rate) { return pwe_sampler(PweModel::exponential(rate)); }

/// Monthly drop-out probability to a constant monthly hazard.
inline double drop_hazard(double monthly_probability) { return -std::log1p(-monthly_probability); }

struct ArmDistributions {
  Sampler event;
  Sampler drop;
  Sampler death;
};

struct TrialDesign {
  AccrualPlan enrollment;
  std::vector<std::string> groups{"all"};
  std::vector<double> allocation{1.0};
  std::vector<std::string> strata{"all"};
  std::vector<double> strata_weights{1.0};
  std::vector<std::vector<ArmDistributions>> dists;  // [group][stratum]
  /// Monthly drop-out probability, used for arms without a drop sampler.
  std::optional<double> drop_rate;
  /// Independent weighted draws instead of exact proportional allocation.
  bool iid_allocation = false;

  void validate() const {
    if (groups.size() != allocation.size() || groups.empty()) {
      throw std::invalid_argument("design: one allocation weight per group required");
    }
    if (strata.size() != strata_weights.size() || strata.empty()) {
      throw std::invalid_argument("design: one weight per stratum required");
    }
    for (double w : allocation)
      if (!(w > 0.0)) throw std::invalid_argument("design: allocation weights must be positive");
    for (double w : strata_weights)
      if (!(w > 0.0)) throw std::invalid_argument("design: strata weights must be positive");
    if (drop_rate && !(*drop_rate >= 0.0 && *drop_rate < 1.0)) {
      throw std::invalid_argument("design: drop_rate must lie in [0, 1)");
    }
    if (dists.size() != groups.size()) {
      throw std::invalid_argument("design: distributions needed for every group");
    }
    for (const auto& g : dists)
      if (g.size() != strata.size()) {
        throw std::invalid_argument("design: distributions needed for every stratum");
      }
  }
};

struct TrialRecord {
  std::size_t id = 0;
  std::size_t group = 0;
  std::size_t stratum = 0;
  double randT = 0.0;
  double eventT = kInf;
  double dropT = kInf;
  double deathT = kInf;
  double followT = kInf;
  double followT_abs = kInf;
  int event = 0;
  int censor = 0;
  CensorReason reason = CensorReason::never_event;
};

namespace detail {

/// Picks the category whose realized share lags its target share most.
inline std::size_t most_behind(const std::vector<double>& weights,
                               const std::vector<std::size_t>& counts, std::size_t placed) {
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  std::size_t best = 0;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double gap = weights[i] / wsum * static_cast<double>(placed + 1) -
                       static_cast<double>(counts[i]);
    if (gap > best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

inline std::size_t weighted_draw(const std::vector<double>& weights, Stream& rng) {
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  double u = rng.uniform() * wsum;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

inline double draw_or_never(const Sampler& s, Stream& rng) { return s ? s(rng) : kInf; }

}  // namespace detail

inline TrialRecord finalize_record(TrialRecord r) {
  r.followT = std::min({r.eventT, r.dropT, r.deathT});
  r.followT_abs = r.randT + r.followT;
  r.event = 0;
  r.censor = 0;
  if (std::isinf(r.followT)) {
    r.reason = CensorReason::never_event;
  } else if (r.followT == r.eventT) {
    r.event = 1;
    r.reason = CensorReason::none;
  } else {
    r.censor = 1;
    r.reason = r.followT == r.dropT ? CensorReason::drop_out : CensorReason::death;
  }
  return r;
}

/// Simulates one fully followed trial (no data cut).
inline std::vector<TrialRecord> simulate_trial(const TrialDesign& design, std::uint64_t seed) {
  design.validate();
  Stream rng(seed);
  const auto enroll = design.enrollment.draw(rng);
  const Sampler default_drop =
      design.drop_rate && *design.drop_rate > 0.0 ? exponential_sampler(drop_hazard(*design.drop_rate))
                                                  : Sampler{};
  std::vector<TrialRecord> out;
  out.reserve(enroll.size());
  std::vector<std::size_t> strata_counts(design.strata.size(), 0);
  std::vector<std::vector<std::size_t>> group_counts(design.strata.size(),
                                                     std::vector<std::size_t>(design.groups.size(), 0));
  for (std::size_t j = 0; j < enroll.size(); ++j) {
    TrialRecord r;
    r.id = j + 1;
    r.randT = enroll[j];
    if (design.iid_allocation) {
      r.stratum = detail::weighted_draw(design.strata_weights, rng);
      r.group = detail::weighted_draw(design.allocation, rng);
    } else {
      r.stratum = detail::most_behind(design.strata_weights, strata_counts, j);
      const auto& gc = group_counts[r.stratum];
      std::size_t placed = 0;
      for (auto c : gc) placed += c;
      r.group = detail::most_behind(design.allocation, gc, placed);
    }
    ++strata_counts[r.stratum];
    ++group_counts[r.stratum][r.group];
    const auto& arm = design.dists[r.group][r.stratum];
    r.eventT = detail::draw_or_never(arm.event, rng);
    r.dropT = detail::draw_or_never(arm.drop ? arm.drop : default_drop, rng);
    r.deathT = detail::draw_or_never(arm.death, rng);
    out.push_back(finalize_record(r));
  }
  return out;
}

/// Records as a SurvSample carrying calendar fields (for cut_data).
inline SurvSample to_sample(const std::vector<TrialRecord>& trial) {
  SurvSample s;
  s.records.reserve(trial.size());
  for (const auto& r : trial)
    s.records.push_back({r.followT, r.event, r.randT, r.followT_abs, r.reason});
  return s;
}

enum class MilestoneType { calendar, event, sample };

/// Which latent times end follow-up for the follow-up statistics.
enum class FollowupEndpoint { cut, drop_out, death, event };

struct FollowupStat {
  std::string name;
  std::function<double(std::span<const double>)> fn;

  static FollowupStat mean() { return {"mean", [](auto x) { return stats::mean(x); }}; }
  static FollowupStat median() { return {"median", [](auto x) { return stats::median(x); }}; }
  static FollowupStat sum() { return {"sum", [](auto x) { return stats::sum(x); }}; }
  /// Proportion of follow-up times >= threshold.
  static FollowupStat prop_above(double threshold, std::string name) {
    return {std::move(name), [threshold](std::span<const double> x) {
              if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
              std::size_t k = 0;
              for (double v : x) k += v >= threshold ? 1 : 0;
              return static_cast<double>(k) / static_cast<double>(x.size());
            }};
  }
};

struct FollowupOptions {
  std::vector<double> at;
  MilestoneType type = MilestoneType::calendar;
  std::vector<FollowupStat> stats{FollowupStat::mean(), FollowupStat::median(),
                                  FollowupStat::sum()};
  bool by_group = false;
  std::size_t rep = 1;
  std::uint64_t seed = 0;
  std::vector<FollowupEndpoint> endpoints{FollowupEndpoint::cut, FollowupEndpoint::drop_out};
  unsigned threads = 1;
};

struct FollowupRow {
  double at = 0.0;
  std::string group;  // empty for the all-subjects table
  double analysis_time = 0.0;
  double events = 0.0;
  double subjects = 0.0;
  std::vector<double> stats;
};

struct FollowupSummary {
  std::vector<std::string> stat_names;
  std::vector<FollowupRow> overall;
  std::vector<FollowupRow> by_group;
  std::vector<std::string> warnings;
};

namespace detail {

struct Cell {
  double analysis_time = 0.0;
  double events = 0.0;
  double subjects = 0.0;
  std::vector<double> stats;
};

inline double follow_time(const TrialRecord& r, double cut,
                          const std::vector<FollowupEndpoint>& endpoints) {
  double t = kInf;
  for (auto e : endpoints) {
    switch (e) {
      case FollowupEndpoint::cut: t = std::min(t, cut - r.randT); break;
      case FollowupEndpoint::drop_out: t = std::min(t, r.dropT); break;
      case FollowupEndpoint::death: t = std::min(t, r.deathT); break;
      case FollowupEndpoint::event: t = std::min(t, r.eventT); break;
    }
  }
  return t;
}

}  // namespace detail

/// Calendar time at which a milestone is met in one simulated trial, or
/// nullopt when it is never met.
inline std::optional<double> milestone_time(const std::vector<TrialRecord>& trial,
                                            MilestoneType type, double at) {
  if (type == MilestoneType::calendar) return at;
  std::vector<double> times;
  for (const auto& r : trial) {
    if (type == MilestoneType::event) {
      if (r.event == 1) times.push_back(r.followT_abs);
    } else {
      times.push_back(r.randT);
    }
  }
  std::sort(times.begin(), times.end());
  const auto k = static_cast<std::size_t>(std::llround(at));
  if (k == 0) return 0.0;
  if (k > times.size()) return std::nullopt;
  return times[k - 1];
}

/// Simulates `rep` trials and averages, per milestone, the analysis time,
/// the event and subject counts at the cut and the follow-up statistics.
inline FollowupSummary sim_followup(const TrialDesign& design, const FollowupOptions& opt) {
  design.validate();
  if (opt.rep < 1) throw std::invalid_argument("sim_followup: rep must be >= 1");
  for (double a : opt.at)
    if (!(a > 0.0)) throw std::invalid_argument("sim_followup: milestones must be positive");
  const std::size_t M = opt.at.size();
  const std::size_t NG = design.groups.size();
  const std::size_t S = opt.stats.size();
  // cells[rep][milestone][0 = all, 1 + g = group g]
  std::vector<std::vector<std::vector<detail::Cell>>> cells(
      opt.rep, std::vector<std::vector<detail::Cell>>(M, std::vector<detail::Cell>(NG + 1)));
  std::vector<std::vector<bool>> unreached(opt.rep, std::vector<bool>(M, false));

  parallel_for(opt.rep, opt.threads, [&](std::size_t r) {
    const auto trial = simulate_trial(design, derive_seed(opt.seed, r));
    double horizon = 0.0;
    for (const auto& rec : trial) {
      if (std::isfinite(rec.followT_abs)) horizon = std::max(horizon, rec.followT_abs);
      horizon = std::max(horizon, rec.randT);
    }
    for (std::size_t m = 0; m < M; ++m) {
      auto t = milestone_time(trial, opt.type, opt.at[m]);
      if (!t) {
        unreached[r][m] = true;
        t = horizon;
      }
      const double cut = *t;
      std::vector<std::vector<double>> follow(NG + 1);
      std::vector<double> events(NG + 1, 0.0), subjects(NG + 1, 0.0);
      for (const auto& rec : trial) {
        if (rec.randT > cut) continue;
        const double ft = detail::follow_time(rec, cut, opt.endpoints);
        const double ev = rec.event == 1 && rec.followT_abs <= cut ? 1.0 : 0.0;
        for (std::size_t slot : {std::size_t{0}, rec.group + 1}) {
          subjects[slot] += 1.0;
          events[slot] += ev;
          follow[slot].push_back(ft);
        }
      }
      for (std::size_t slot = 0; slot <= NG; ++slot) {
        auto& c = cells[r][m][slot];
        c.analysis_time = cut;
        c.events = events[slot];
        c.subjects = subjects[slot];
        c.stats.resize(S);
        for (std::size_t s = 0; s < S; ++s)
          c.stats[s] = follow[slot].empty() ? std::numeric_limits<double>::quiet_NaN()
                                            : opt.stats[s].fn(follow[slot]);
      }
    }
  });

  FollowupSummary out;
  for (const auto& s : opt.stats) out.stat_names.push_back(s.name);
  for (std::size_t m = 0; m < M; ++m) {
    std::size_t missed = 0;
    for (std::size_t r = 0; r < opt.rep; ++r) missed += unreached[r][m] ? 1 : 0;
    if (missed > 0) {
      out.warnings.push_back("milestone " + std::to_string(opt.at[m]) + " not reached in " +
                             std::to_string(missed) + " of " + std::to_string(opt.rep) +
                             " replicates; end of follow-up used");
    }
    for (std::size_t slot = 0; slot <= NG; ++slot) {
      if (slot > 0 && !opt.by_group) break;
      FollowupRow row;
      row.at = opt.at[m];
      row.group = slot == 0 ? "" : design.groups[slot - 1];
      row.stats.assign(S, 0.0);
      std::vector<std::size_t> stat_n(S, 0);
      for (std::size_t r = 0; r < opt.rep; ++r) {
        const auto& c = cells[r][m][slot];
        row.analysis_time += c.analysis_time;
        row.events += c.events;
        row.subjects += c.subjects;
        for (std::size_t s = 0; s < S; ++s) {
          if (std::isnan(c.stats[s])) continue;
          row.stats[s] += c.stats[s];
          ++stat_n[s];
        }
      }
      const auto reps = static_cast<double>(opt.rep);
      row.analysis_time /= reps;
      row.events /= reps;
      row.subjects /= reps;
      for (std::size_t s = 0; s < S; ++s)
        row.stats[s] = stat_n[s] ? row.stats[s] / static_cast<double>(stat_n[s])
                                 : std::numeric_limits<double>::quiet_NaN();
      (slot == 0 ? out.overall : out.by_group).push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace pwexp
