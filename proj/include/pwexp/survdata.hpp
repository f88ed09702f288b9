#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pwexp {

enum class CensorReason { none, drop_out, death, never_event, cut };

inline std::string_view to_string(CensorReason r) {
  switch (r) {
    case CensorReason::none: return "none";
    case CensorReason::drop_out: return "drop_out";
    case CensorReason::death: return "death";
    case CensorReason::never_event: return "never_event";
    case CensorReason::cut: return "cut";
  }
  return "none";
}

inline CensorReason parse_censor_reason(std::string_view s) {
  if (s == "drop_out") return CensorReason::drop_out;
  if (s == "death") return CensorReason::death;
  if (s == "never_event") return CensorReason::never_event;
  if (s == "cut") return CensorReason::cut;
  if (s.empty() || s == "none" || s == "NA" || s == "<NA>") return CensorReason::none;
  throw std::invalid_argument("unknown censor reason '" + std::string(s) + "'");
}

/// One subject: time from randomization and event indicator, plus optional
/// calendar fields needed for data cuts.
struct SurvRecord {
  double time = 0.0;
  int event = 0;
  std::optional<double> rand_time;
  std::optional<double> follow_abs_time;
  CensorReason reason = CensorReason::none;
};

struct SurvSample {
  std::vector<SurvRecord> records;

  SurvSample() = default;
  explicit SurvSample(std::vector<SurvRecord> r) : records(std::move(r)) {}

  static SurvSample from_vectors(const std::vector<double>& times, const std::vector<int>& events) {
    if (times.size() != events.size()) {
      throw std::invalid_argument("times and events differ in length");
    }
    SurvSample s;
    s.records.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      s.records.push_back({times[i], events[i] != 0 ? 1 : 0, {}, {}, CensorReason::none});
    }
    return s;
  }

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  std::size_t event_count() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                  [](const SurvRecord& r) { return r.event == 1; }));
  }

  std::vector<double> times() const {
    std::vector<double> t;
    t.reserve(records.size());
    for (const auto& r : records) t.push_back(r.time);
    return t;
  }

  /// Sorted distinct event times.
  std::vector<double> distinct_event_times() const {
    std::vector<double> t;
    for (const auto& r : records)
      if (r.event == 1) t.push_back(r.time);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
  }

  /// Same records with every time multiplied by c (calendar fields untouched).
  SurvSample scaled(double c) const {
    SurvSample s = *this;
    for (auto& r : s.records) r.time *= c;
    return s;
  }
};

struct KmStep {
  double time;
  double survival;
  std::size_t at_risk;
  std::size_t events;
};

/// Product-limit estimate evaluated at distinct event times.
struct KmCurve {
  std::vector<KmStep> steps;

  /// Right-continuous step function value at t.
  double operator()(double t) const {
    double s = 1.0;
    for (const auto& st : steps) {
      if (st.time > t) break;
      s = st.survival;
    }
    return s;
  }
};

/// Kaplan-Meier estimator. Subjects censored at an event time are still in
/// the risk set for that event.
inline KmCurve km_fit(const SurvSample& data) {
  if (data.empty()) throw std::invalid_argument("km_fit: empty data");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.records[a].time < data.records[b].time;
  });
  KmCurve km;
  std::size_t at_risk = data.size();
  double s = 1.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = data.records[order[i]].time;
    std::size_t events = 0;
    std::size_t total = 0;
    while (i < order.size() && data.records[order[i]].time == t) {
      events += static_cast<std::size_t>(data.records[order[i]].event);
      ++total;
      ++i;
    }
    if (events > 0) {
      s *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
      km.steps.push_back({t, s, at_risk, events});
    }
    at_risk -= total;
  }
  return km;
}

/// Applies a calendar data cut to one record. Returns false when the subject
/// was randomized after the cut and must be dropped.
inline bool cut_record(SurvRecord& r, double cut) {
  if (!r.rand_time || !r.follow_abs_time) {
    throw std::invalid_argument("cut_data: records need rand_time and follow_abs_time");
  }
  if (*r.rand_time > cut) return false;
  if (*r.follow_abs_time > cut) {
    r.time = cut - *r.rand_time;
    r.event = 0;
    r.reason = CensorReason::cut;
    r.follow_abs_time = cut;
  }
  return true;
}

/// Truncates the data at calendar time `cut`: drops subjects randomized
/// after it and re-censors follow-up extending beyond it.
inline SurvSample cut_data(const SurvSample& data, double cut) {
  if (!(cut > 0.0)) throw std::invalid_argument("cut_data: cut must be positive");
  SurvSample out;
  out.records.reserve(data.size());
  for (auto r : data.records) {
    if (cut_record(r, cut)) out.records.push_back(r);
  }
  return out;
}

}  // namespace pwexp
