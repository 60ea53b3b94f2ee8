// Seeded data generators for the five benchmark designs and the
// Monte-Carlo harness that aggregates repeated fits.
//
// Designs (d = index count, p = covariates; the true index matrix is
// already in identified form, upper block = identity):
//   s1: p=7 d=1, X std normal, T = Phi[5 eps {exp(3 b'X)+1} - 2],
//       eps ~ Exp(1), C = Phi(2 X2 + 2 X3) + U(0, c)
//   s2: p=7 d=1, X ~ U(0,1)^7, T = exp(b'X + eps), eps ~ Exp(1),
//       C ~ U(0, c)
//   s3: p=10 d=1, X ~ U(0,1)^10, T = exp{5 - 10 (1 - b'X)^2 + eps},
//       eps ~ N(0,1), C = U(0, c) (X4 + X5)
//   s4: p=6 d=2, X ~ U(0,1)^6, T = exp{5 - 10 sum_j (1 - b_j'X)^2 + eps},
//       eps ~ N(0,1), C ~ U(0, c)
//   s5: p=6 d=2, X std normal, hazard t sum_j exp(b_j'X), so
//       T = sqrt(2 E / sum_j exp(b_j'X)) with E ~ Exp(1); C ~ U(0, c)
//
// Per observation the stream is consumed in a fixed order: p covariate
// draws, one for eps/E, one for the censoring uniform (drawn even when
// censoring is off, so the same seed yields the same survival data at
// every censoring level). In every design the censoring time is affine
// in the constant c, C = base + c * slope with slope >= 0, so the
// empirical censoring rate is monotone in c and bisection calibrates it.
//
// The c constants for the published 20%/40% targets were calibrated
// once at n = 10000 and are frozen below; other targets calibrate on
// the fly.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "censdr/inference.hpp"
#include "censdr/normal.hpp"
#include "censdr/pipeline.hpp"
#include "censdr/rng.hpp"
#include "censdr/survdata.hpp"
#include "censdr/threads.hpp"

namespace censdr {

enum class StudyId { s1, s2, s3, s4, s5 };

inline std::string study_name(StudyId id) {
  switch (id) {
    case StudyId::s1: return "s1";
    case StudyId::s2: return "s2";
    case StudyId::s3: return "s3";
    case StudyId::s4: return "s4";
    case StudyId::s5: return "s5";
  }
  return "?";
}

inline std::optional<StudyId> parse_study(const std::string& s) {
  std::string t = s;
  if (!t.empty() && (t[0] == 's' || t[0] == 'S')) t.erase(0, 1);
  if (t.size() != 1 || t[0] < '1' || t[0] > '5') return std::nullopt;
  return static_cast<StudyId>(t[0] - '1');
}

inline int study_p(StudyId id) {
  switch (id) {
    case StudyId::s1:
    case StudyId::s2: return 7;
    case StudyId::s3: return 10;
    case StudyId::s4:
    case StudyId::s5: return 6;
  }
  return 0;
}

inline int study_d(StudyId id) {
  return (id == StudyId::s4 || id == StudyId::s5) ? 2 : 1;
}

inline Eigen::Index study_default_n(StudyId id) {
  switch (id) {
    case StudyId::s1: return 100;
    case StudyId::s2: return 500;
    default: return 200;
  }
}

inline Eigen::MatrixXd study_true_beta(StudyId id) {
  switch (id) {
    case StudyId::s1: {
      Eigen::MatrixXd b(7, 1);
      b << 1, 0, -1, 0, 1, 0, -1;
      return b;
    }
    case StudyId::s2: {
      Eigen::MatrixXd b(7, 1);
      b << 1, 1.3, -1.3, 1, -0.5, 0.5, -0.5;
      return b;
    }
    case StudyId::s3: {
      Eigen::MatrixXd b(10, 1);
      b << 1, -0.6, 0, -0.3, -0.1, 0, 0.1, 0.3, 0, 0.6;
      return b;
    }
    case StudyId::s4:
    case StudyId::s5: {
      Eigen::MatrixXd b(6, 2);
      b << 1, 0,
           0, 1,
           2.75, -3.125,
           -0.75, -1.125,
           -1, 1,
           2, -2;
      return b;
    }
  }
  throw std::invalid_argument("unknown study id");
}

struct StudySpec {
  StudyId study = StudyId::s1;
  Eigen::Index n = 0;  // 0 means the published default
  // Censoring time is base + censor_param * slope; nullopt disables
  // censoring entirely (C = +inf).
  std::optional<double> censor_param;
  std::uint64_t seed = 1;
};

namespace detail {

// Everything random about one dataset, before the censoring constant
// is applied.
struct RawDraws {
  Eigen::MatrixXd x;
  Eigen::VectorXd t;
  Eigen::VectorXd cbase;
  Eigen::VectorXd cslope;
};

inline RawDraws gen_raw(StudyId id, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_raw: need n >= 1");
  const int p = study_p(id);
  const Eigen::MatrixXd beta = study_true_beta(id);
  RawDraws out;
  out.x.resize(n, p);
  out.t.resize(n);
  out.cbase = Eigen::VectorXd::Zero(n);
  out.cslope.resize(n);
  CounterRng rng = CounterRng(seed).derive(0x64617461 /* data */);
  const bool normal_x = (id == StudyId::s1 || id == StudyId::s5);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j)
      out.x(i, j) = normal_x ? rng.normal() : rng.uniform01();
    const Eigen::VectorXd xi = out.x.row(i).transpose();
    switch (id) {
      case StudyId::s1: {
        const double eps = rng.exponential();
        const double idx = beta.col(0).dot(xi);
        out.t[i] = normal_cdf(5.0 * eps * (std::exp(3.0 * idx) + 1.0) - 2.0);
        out.cbase[i] = normal_cdf(2.0 * out.x(i, 1) + 2.0 * out.x(i, 2));
        out.cslope[i] = rng.uniform01();
        break;
      }
      case StudyId::s2: {
        const double eps = rng.exponential();
        out.t[i] = std::exp(beta.col(0).dot(xi) + eps);
        out.cslope[i] = rng.uniform01();
        break;
      }
      case StudyId::s3: {
        const double eps = rng.normal();
        const double idx = beta.col(0).dot(xi);
        out.t[i] = std::exp(5.0 - 10.0 * (1.0 - idx) * (1.0 - idx) + eps);
        out.cslope[i] = rng.uniform01() * (out.x(i, 3) + out.x(i, 4));
        break;
      }
      case StudyId::s4: {
        const double eps = rng.normal();
        double s = 0.0;
        for (int m = 0; m < 2; ++m) {
          const double dm = 1.0 - beta.col(m).dot(xi);
          s += dm * dm;
        }
        out.t[i] = std::exp(5.0 - 10.0 * s + eps);
        out.cslope[i] = rng.uniform01();
        break;
      }
      case StudyId::s5: {
        const double e = rng.exponential();
        const double rate =
            std::exp(beta.col(0).dot(xi)) + std::exp(beta.col(1).dot(xi));
        out.t[i] = std::sqrt(2.0 * e / rate);
        out.cslope[i] = rng.uniform01();
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

// One dataset drawn from the study's design. true_beta, when given,
// receives the identified index matrix used to generate the data.
inline SurvivalDataset gen_study(const StudySpec& spec,
                                 Eigen::MatrixXd* true_beta = nullptr) {
  const Eigen::Index n = spec.n > 0 ? spec.n : study_default_n(spec.study);
  if (spec.censor_param && !(*spec.censor_param > 0.0))
    throw std::invalid_argument("gen_study: censor_param must be positive");
  const detail::RawDraws raw = detail::gen_raw(spec.study, n, spec.seed);
  SurvivalDataset data;
  data.covariates = raw.x;
  data.times.resize(n);
  data.events.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = spec.censor_param
                         ? raw.cbase[i] + *spec.censor_param * raw.cslope[i]
                         : std::numeric_limits<double>::infinity();
    data.times[i] = std::min(raw.t[i], c);
    data.events[i] = raw.t[i] <= c ? 1 : 0;
  }
  if (true_beta) *true_beta = study_true_beta(spec.study);
  return data;
}

// Fraction censored at constant c, on one fixed seeded draw.
inline double empirical_censoring_rate(StudyId id, double c, Eigen::Index n,
                                       std::uint64_t seed) {
  const detail::RawDraws raw = detail::gen_raw(id, n, seed);
  Eigen::Index censored = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (raw.t[i] > raw.cbase[i] + c * raw.cslope[i]) ++censored;
  return static_cast<double>(censored) / static_cast<double>(n);
}

// Bisection on the (monotone decreasing) censoring rate. Throws when
// the target is outside the achievable range.
inline double calibrate_censoring(StudyId id, double target,
                                  Eigen::Index n = 10000,
                                  std::uint64_t seed = 20259,
                                  double rate_tol = 0.002) {
  if (!(target > 0.0 && target < 1.0))
    throw std::invalid_argument("calibrate_censoring: target in (0,1) required");
  const detail::RawDraws raw = detail::gen_raw(id, n, seed);
  auto rate = [&](double c) {
    Eigen::Index censored = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (raw.t[i] > raw.cbase[i] + c * raw.cslope[i]) ++censored;
    return static_cast<double>(censored) / static_cast<double>(n);
  };
  // Geometric bracketing: the workable constants sit on wildly
  // different scales per study (some designs produce times across many
  // decades), so the search must be multiplicative.
  double lo = 1e-300;
  if (rate(lo) < target)
    throw std::runtime_error("calibrate_censoring: target rate above the "
                             "design's maximum for " + study_name(id));
  double hi = 1.0;
  int guard = 0;
  while (rate(hi) > target) {
    hi *= 2.0;
    if (++guard > 2000)
      throw std::runtime_error("calibrate_censoring: no bracket found");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double r = rate(mid);
    if (std::fabs(r - target) <= rate_tol) return mid;
    (r > target ? lo : hi) = mid;
    if (hi / lo < 1.0 + 1e-12) break;
  }
  return std::sqrt(lo * hi);
}

// Constants frozen from calibrate_censoring at n=10000 for the
// published 20%/40% targets; anything else calibrates on the fly.
inline double censoring_constant(StudyId id, double target_rate) {
  struct Entry { StudyId id; double rate; double c; };
  static constexpr Entry table[] = {
      {StudyId::s1, 0.20, 2.0347136196967073},
      {StudyId::s1, 0.40, 1.0507852339397035},
      {StudyId::s2, 0.20, 47.559191440871054},
      {StudyId::s2, 0.40, 17.681381028695156},
      {StudyId::s3, 0.20, 307.29753028192886},
      {StudyId::s3, 0.40, 66.283125337781584},
      {StudyId::s4, 0.20, 3.4911519371724423e-19},
      {StudyId::s4, 0.40, 1.8105582430271216e-36},
      {StudyId::s5, 0.20, 2.2376115904643572},
      {StudyId::s5, 0.40, 0.93871591224580742},
  };
  for (const auto& e : table)
    if (e.id == id && std::fabs(e.rate - target_rate) < 1e-9) return e.c;
  return calibrate_censoring(id, target_rate);
}

struct McRep {
  int rep = 0;
  bool ok = false;         // fit produced an estimate (no exception)
  bool converged = false;
  Eigen::VectorXd beta_free;  // original scale, vec order
  double lambda_max = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd se;         // empty unless requested
  Eigen::VectorXi covered;    // 1/0 per free coefficient; -1 unknown
  std::string error;
};

struct McSummary {
  StudySpec spec;
  int reps = 0;
  int failures = 0;
  int non_converged = 0;
  Eigen::VectorXd true_free;        // vec order
  Eigen::VectorXd mean_beta;
  Eigen::VectorXd bias;             // |mean - true|
  Eigen::VectorXd sd;
  Eigen::VectorXd median_abs_error;
  Eigen::VectorXd mean_se;          // NaN when not recorded
  Eigen::VectorXd coverage;         // NaN when not recorded
  double lambda_max_mean = 0.0;
  double lambda_max_sd = 0.0;
  double elapsed_seconds = 0.0;
  std::vector<McRep> detail;
};

// Repeated generate-and-fit with derived per-replication seeds.
// Replications run in parallel; each inner fit stays single-threaded
// and results are reduced in replication order, so the summary is
// independent of the thread count.
inline McSummary run_monte_carlo(const StudySpec& spec, int reps,
                                 const FitConfig& base_cfg,
                                 bool record_se = false, int nthreads = 1) {
  if (reps < 1) throw std::invalid_argument("run_monte_carlo: need reps >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::MatrixXd beta_true = study_true_beta(spec.study);
  const int p = study_p(spec.study);
  const int d = study_d(spec.study);
  const Eigen::Index q = p - d;
  const Eigen::Index nfree = q * d;

  McSummary out;
  out.spec = spec;
  out.reps = reps;
  out.true_free.resize(nfree);
  for (int m = 0; m < d; ++m)
    out.true_free.segment(m * q, q) = beta_true.col(m).tail(q);

  out.detail.assign(static_cast<std::size_t>(reps), McRep{});
  parallel_for(0, reps, nthreads, [&](long r) {
    McRep& rec = out.detail[static_cast<std::size_t>(r)];
    rec.rep = static_cast<int>(r) + 1;
    StudySpec rep_spec = spec;
    rep_spec.seed = CounterRng(spec.seed)
                        .derive(0x726570 /* rep */)
                        .derive(static_cast<std::uint64_t>(r) + 1)
                        .next_u64();
    try {
      const SurvivalDataset data = gen_study(rep_spec);
      AnalysisOptions opt;
      opt.fit = base_cfg;
      opt.fit.d = d;
      opt.fit.seed = rep_spec.seed;
      opt.fit.nthreads = 1;
      opt.with_inference = record_se;
      const Analysis a = analyze(data, opt);
      rec.ok = true;
      rec.converged = a.fit.converged;
      rec.beta_free.resize(nfree);
      for (int m = 0; m < d; ++m)
        rec.beta_free.segment(m * q, q) = a.beta_orig.col(m).tail(q);
      rec.lambda_max = projection_distance(a.beta_orig, beta_true);
      if (record_se) {
        rec.se = a.se;
        rec.covered.resize(nfree);
        for (Eigen::Index k = 0; k < nfree; ++k) {
          if (!std::isfinite(a.ci.lower[k]) || !std::isfinite(a.ci.upper[k]))
            rec.covered[k] = -1;
          else
            rec.covered[k] = (out.true_free[k] >= a.ci.lower[k] &&
                              out.true_free[k] <= a.ci.upper[k])
                                 ? 1
                                 : 0;
        }
      }
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  });

  // Aggregate in replication order.
  std::vector<Eigen::VectorXd> betas;
  std::vector<double> lmaxes;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd se_sum = Eigen::VectorXd::Zero(nfree);
  Eigen::VectorXi se_count = Eigen::VectorXi::Zero(static_cast<int>(nfree));
  Eigen::VectorXd cover_sum = Eigen::VectorXd::Zero(nfree);
  Eigen::VectorXi cover_count = Eigen::VectorXi::Zero(static_cast<int>(nfree));
  for (const McRep& rec : out.detail) {
    if (!rec.ok) {
      ++out.failures;
      continue;
    }
    if (!rec.converged) ++out.non_converged;
    betas.push_back(rec.beta_free);
    lmaxes.push_back(rec.lambda_max);
    if (record_se && rec.se.size() == nfree) {
      for (Eigen::Index k = 0; k < nfree; ++k) {
        if (std::isfinite(rec.se[k])) {
          se_sum[k] += rec.se[k];
          ++se_count[static_cast<int>(k)];
        }
        if (rec.covered.size() == nfree && rec.covered[k] >= 0) {
          cover_sum[k] += rec.covered[k];
          ++cover_count[static_cast<int>(k)];
        }
      }
    }
  }
  const Eigen::Index m = static_cast<Eigen::Index>(betas.size());
  out.mean_beta = Eigen::VectorXd::Constant(nfree, nan);
  out.bias = out.mean_beta;
  out.sd = out.mean_beta;
  out.median_abs_error = out.mean_beta;
  out.mean_se = Eigen::VectorXd::Constant(nfree, nan);
  out.coverage = Eigen::VectorXd::Constant(nfree, nan);
  if (m > 0) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(nfree);
    for (const auto& b : betas) mean += b;
    mean /= static_cast<double>(m);
    out.mean_beta = mean;
    out.bias = (mean - out.true_free).cwiseAbs();
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(nfree);
    for (const auto& b : betas) ss += (b - mean).cwiseAbs2();
    out.sd = m > 1 ? Eigen::VectorXd((ss / static_cast<double>(m - 1)).cwiseSqrt())
                   : Eigen::VectorXd(Eigen::VectorXd::Zero(nfree));
    for (Eigen::Index k = 0; k < nfree; ++k) {
      std::vector<double> errs;
      errs.reserve(static_cast<std::size_t>(m));
      for (const auto& b : betas)
        errs.push_back(std::fabs(b[k] - out.true_free[k]));
      std::sort(errs.begin(), errs.end());
      out.median_abs_error[k] =
          m % 2 == 1 ? errs[static_cast<std::size_t>(m / 2)]
                     : 0.5 * (errs[static_cast<std::size_t>(m / 2 - 1)] +
                              errs[static_cast<std::size_t>(m / 2)]);
    }
    double lsum = 0.0;
    for (double v : lmaxes) lsum += v;
    out.lambda_max_mean = lsum / static_cast<double>(m);
    double lss = 0.0;
    for (double v : lmaxes) lss += (v - out.lambda_max_mean) * (v - out.lambda_max_mean);
    out.lambda_max_sd =
        m > 1 ? std::sqrt(lss / static_cast<double>(m - 1)) : 0.0;
    for (Eigen::Index k = 0; k < nfree; ++k) {
      if (se_count[static_cast<int>(k)] > 0)
        out.mean_se[k] = se_sum[k] / se_count[static_cast<int>(k)];
      if (cover_count[static_cast<int>(k)] > 0)
        out.coverage[k] = cover_sum[k] / cover_count[static_cast<int>(k)];
    }
  }
  out.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

}  // namespace censdr
