#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwexp/estimation.hpp"
#include "pwexp/rng.hpp"
#include "pwexp/survdata.hpp"

namespace pwexp {

struct ReplicateFailure {
  std::size_t index;
  std::string message;
};

struct BootFit {
  std::vector<FitResult> replicates;
  std::vector<ReplicateFailure> failures;
  FitConfig base_config;
  std::uint64_t seed = 0;
  std::size_t nsim = 0;
};

/// Draws the row indices of one resample of size n.
using Resampler = std::function<std::vector<std::size_t>(std::size_t n, Stream& rng)>;

inline std::vector<std::size_t> resample_with_replacement(std::size_t n, Stream& rng) {
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.index(n));
  return idx;
}

/// Case-resampling bootstrap. Replicate i uses the stream derive_seed(seed, i)
/// for both the resample and the fit, so results do not depend on thread
/// count or scheduling.
inline BootFit boot_fit(const SurvSample& data, const FitConfig& config, std::size_t nsim,
                        std::uint64_t seed, unsigned threads = 1,
                        const Resampler& resample = resample_with_replacement) {
  if (nsim < 1) throw std::invalid_argument("boot_fit: nsim must be >= 1");
  config.validate();
  std::vector<std::optional<FitResult>> fits(nsim);
  std::vector<std::string> errors(nsim);
  parallel_for(nsim, threads, [&](std::size_t i) {
    Stream rng(derive_seed(seed, i));
    const auto idx = resample(data.size(), rng);
    SurvSample s;
    s.records.reserve(idx.size());
    for (auto j : idx) s.records.push_back(data.records[j]);
    FitConfig cfg = config;
    cfg.seed = rng.bits();
    cfg.threads = 1;
    try {
      fits[i] = fit(s, cfg);
    } catch (const NoFeasibleModelError& e) {
      errors[i] = e.what();
    } catch (const EmptyPieceError& e) {
      errors[i] = e.what();
    } catch (const std::invalid_argument& e) {
      errors[i] = e.what();
    }
  });
  BootFit out;
  out.base_config = config;
  out.seed = seed;
  out.nsim = nsim;
  for (std::size_t i = 0; i < nsim; ++i) {
    if (fits[i])
      out.replicates.push_back(std::move(*fits[i]));
    else
      out.failures.push_back({i, errors[i]});
  }
  if (2 * out.failures.size() > nsim) {
    throw NoFeasibleModelError("boot_fit: " + std::to_string(out.failures.size()) + " of " +
                               std::to_string(nsim) + " replicates failed (first: " +
                               out.failures.front().message + ")");
  }
  return out;
}

struct CvResult {
  std::vector<double> values;
  std::vector<ReplicateFailure> failures;
  double split_fraction = 0.2;
};

/// Repeated random-split validation. Each repetition holds out
/// `test_fraction` of the events and of the censored records, fits on the
/// rest and scores the held-out records. Splits depend only on
/// (data size, event pattern, seed), so models compared with the same seed
/// see identical splits.
inline CvResult cv_loglik(const SurvSample& data, const FitConfig& config, std::size_t nsim,
                          std::uint64_t seed, unsigned threads = 1, double test_fraction = 0.2) {
  if (nsim < 1) throw std::invalid_argument("cv_loglik: nsim must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("cv_loglik: test fraction must lie in (0, 1)");
  }
  config.validate();
  std::vector<std::size_t> ev, cens;
  for (std::size_t i = 0; i < data.size(); ++i)
    (data.records[i].event == 1 ? ev : cens).push_back(i);
  const auto n_ev_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ev.size())));
  const auto n_cens_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(cens.size())));
  if (ev.size() - n_ev_test < config.nbreak + 1) {
    throw std::invalid_argument("cv_loglik: training split would keep too few events");
  }

  constexpr int kMaxRedraws = 5;
  std::vector<double> values(nsim, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> errors(nsim);
  parallel_for(nsim, threads, [&](std::size_t rep) {
    Stream rng(derive_seed(seed, rep));
    for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
      auto e = ev;
      auto c = cens;
      auto shuffle_head = [&](std::vector<std::size_t>& v, std::size_t k) {
        for (std::size_t i = 0; i < k; ++i) std::swap(v[i], v[i + rng.index(v.size() - i)]);
      };
      shuffle_head(e, n_ev_test);
      shuffle_head(c, n_cens_test);
      SurvSample train, test;
      for (std::size_t i = 0; i < e.size(); ++i)
        (i < n_ev_test ? test : train).records.push_back(data.records[e[i]]);
      for (std::size_t i = 0; i < c.size(); ++i)
        (i < n_cens_test ? test : train).records.push_back(data.records[c[i]]);
      FitConfig cfg = config;
      cfg.seed = rng.bits();
      cfg.threads = 1;
      try {
        const auto f = fit(train, cfg);
        values[rep] = loglik(f.model, test);
        return;
      } catch (const std::exception& ex) {
        errors[rep] = ex.what();
      }
    }
  });
  CvResult out;
  out.split_fraction = test_fraction;
  for (std::size_t i = 0; i < nsim; ++i) {
    if (std::isfinite(values[i]))
      out.values.push_back(values[i]);
    else
      out.failures.push_back({i, errors[i]});
  }
  return out;
}

}  // namespace pwexp
