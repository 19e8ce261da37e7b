#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "wentropy/error.hpp"

namespace wentropy {

/// Coefficient of determination 1 - SSE/SST.
inline double r_squared(std::span<const double> y, std::span<const double> fitted) {
  if (y.size() != fitted.size() || y.empty())
    throw Error(ErrorKind::invalid_argument, "analysis", "r2 needs equal, non-empty series");
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sst = 0.0, sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sst += (y[i] - mean) * (y[i] - mean);
    sse += (y[i] - fitted[i]) * (y[i] - fitted[i]);
  }
  if (sst == 0.0) return sse == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - sse / sst;
}

struct LinearFit {
  double k = 0.0;
  double b = 0.0;
  double r2 = 0.0;
  std::size_t n_samples = 0;
};

/// Ordinary least squares y = k x + b.
inline LinearFit fit_linear(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorKind::invalid_argument, "analysis", "regressor and response differ in length");
  if (x.size() < 3) throw Error(ErrorKind::invalid_argument, "analysis", "linear fit needs at least 3 samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double scale = std::max(1.0, std::abs(mx));
  if (!(sxx > 1e-24 * n * scale * scale))
    throw Error(ErrorKind::numerical, "analysis", "degenerate regressor: s_f is constant over the trace");
  LinearFit f;
  f.k = sxy / sxx;
  f.b = my - f.k * mx;
  f.n_samples = x.size();
  std::vector<double> fitted(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) fitted[i] = f.k * x[i] + f.b;
  f.r2 = r_squared(y, fitted);
  return f;
}

/// Slope of the first differences of y against those of x.
inline double increment_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 4)
    throw Error(ErrorKind::invalid_argument, "analysis", "increment slope needs at least 4 paired samples");
  std::vector<double> dx(x.size() - 1), dy(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    dx[i] = x[i + 1] - x[i];
    dy[i] = y[i + 1] - y[i];
  }
  return fit_linear(dx, dy).k;
}

/// Least-squares slope of the first `count` samples, a rising-speed diagnostic.
inline double initial_slope(std::span<const double> t, std::span<const double> s, std::size_t count = 5) {
  count = std::min(count, t.size());
  if (count < 3) throw Error(ErrorKind::invalid_argument, "analysis", "initial slope needs at least 3 samples");
  return fit_linear(t.first(count), s.first(count)).k;
}

// ---------------------------------------------------------------------------
// Saturation law S(t) = A (1 - exp(-omega t))

struct SaturationModel {
  static double value(double t, double A, double omega) { return A * -std::expm1(-omega * t); }
  static std::array<double, 2> gradient(double t, double A, double omega) {
    return {-std::expm1(-omega * t), A * t * std::exp(-omega * t)};
  }
};

struct SaturationOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-10;
  bool plateau_window = true;
  double plateau_fraction = 0.1;  // averaging block, as a fraction of the samples
  double plateau_tolerance = 0.01;
};

struct SaturationFit {
  double A = 0.0;
  double omega = 0.0;
  double r2 = 0.0;
  double residual_norm = 0.0;
  double A_init = 0.0;
  double omega_init = 0.0;
  int iterations = 0;
  std::size_t window = 0;  // number of samples used
  double stationarity = 0.0;  // max_j |g_j . r| / (|g_j| |r|)
};

/// Raised when the saturation fit fails; carries the initializer values.
class FitFailure : public Error {
 public:
  FitFailure(const std::string& what, double A0, double omega0)
      : Error(ErrorKind::numerical, "analysis", what + " (initial A=" + fmt(A0) + ", omega=" + fmt(omega0) + ")"),
        A_init(A0),
        omega_init(omega0) {}
  double A_init;
  double omega_init;

 private:
  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }
};

/// End (exclusive) of the first plateau: the first i at which the means of
/// s[i, i+w) and s[i+w, i+2w) agree within `tolerance` relative, w being
/// `fraction` of the samples. Returns s.size() if there is none.
inline std::size_t plateau_window_end(std::span<const double> s, double fraction = 0.1, double tolerance = 0.01) {
  if (s.size() < 3) return s.size();
  const std::size_t w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(s.size() - 1))));
  for (std::size_t i = 0; i + 2 * w < s.size(); ++i) {
    double a = 0.0, b = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
      a += s[i + j];
      b += s[i + w + j];
    }
    a /= static_cast<double>(w);
    b /= static_cast<double>(w);
    if (b > 0.0 && std::abs(b - a) <= tolerance * std::abs(b)) return i + 2 * w + 1;
  }
  return s.size();
}

/// Cosine between the residual vector and each parameter gradient column;
/// zero at an exact least-squares stationary point.
inline double saturation_stationarity(std::span<const double> t, std::span<const double> s, double A, double omega) {
  double rr = 0.0;
  std::array<double, 2> gr{}, gg{};
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = s[i] - SaturationModel::value(t[i], A, omega);
    const auto g = SaturationModel::gradient(t[i], A, omega);
    rr += r * r;
    for (int j = 0; j < 2; ++j) {
      gr[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(j)] * r;
      gg[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(j)];
    }
  }
  if (rr == 0.0) return 0.0;
  double worst = 0.0;
  for (int j = 0; j < 2; ++j) {
    const auto js = static_cast<std::size_t>(j);
    if (gg[js] > 0.0) worst = std::max(worst, std::abs(gr[js]) / std::sqrt(gg[js] * rr));
  }
  return worst;
}

/// Damped Gauss-Newton fit of A (1 - e^{-omega t}). A starts at the plateau
/// mean and omega at a log-linear fit of ln((A - S)/A) over the rise.
inline SaturationFit fit_saturation(std::span<const double> t_all, std::span<const double> s_all,
                                    const SaturationOptions& opt = {}) {
  if (t_all.size() != s_all.size())
    throw Error(ErrorKind::invalid_argument, "analysis", "times and values differ in length");
  if (t_all.size() < 10) throw Error(ErrorKind::invalid_argument, "analysis", "saturation fit needs at least 10 samples");
  std::size_t end = opt.plateau_window ? plateau_window_end(s_all, opt.plateau_fraction, opt.plateau_tolerance)
                                       : s_all.size();
  end = std::max<std::size_t>(end, 10);
  const auto t = t_all.first(end);
  const auto s = s_all.first(end);

  SaturationFit fit;
  fit.window = end;
  const std::size_t tail = std::max<std::size_t>(1, end / 10);
  double A = 0.0;
  for (std::size_t i = end - tail; i < end; ++i) A += s[i];
  A /= static_cast<double>(tail);
  if (!(A > 0.0)) throw FitFailure("plateau mean is not positive", A, 0.0);

  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < end; ++i) {
    const double frac = (A - s[i]) / A;
    if (t[i] > 0.0 && frac > 0.05 && frac <= 1.0) {
      num += -std::log(frac) * t[i];
      den += t[i] * t[i];
    }
  }
  double omega = den > 0.0 ? num / den : 0.0;
  if (!(omega > 0.0)) omega = 1.0 / std::max(t[end - 1] / 3.0, 1e-12);
  fit.A_init = A;
  fit.omega_init = omega;

  auto sse_of = [&](double a, double w) {
    double e = 0.0;
    for (std::size_t i = 0; i < end; ++i) {
      const double r = s[i] - SaturationModel::value(t[i], a, w);
      e += r * r;
    }
    return e;
  };

  double sse = sse_of(A, omega);
  double lambda = 1e-3;
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iterations && !converged; ++it) {
    double h00 = 0, h01 = 0, h11 = 0, g0 = 0, g1 = 0;
    for (std::size_t i = 0; i < end; ++i) {
      const double r = s[i] - SaturationModel::value(t[i], A, omega);
      const auto g = SaturationModel::gradient(t[i], A, omega);
      h00 += g[0] * g[0];
      h01 += g[0] * g[1];
      h11 += g[1] * g[1];
      g0 += g[0] * r;
      g1 += g[1] * r;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
      const double a00 = h00 * (1.0 + lambda), a11 = h11 * (1.0 + lambda);
      const double det = a00 * a11 - h01 * h01;
      if (!(std::abs(det) > 0.0)) {
        lambda *= 10.0;
        continue;
      }
      const double dA = (a11 * g0 - h01 * g1) / det;
      const double dW = (a00 * g1 - h01 * g0) / det;
      const double nA = A + dA, nW = omega + dW;
      if (nA > 0.0 && nW > 0.0) {
        const double nsse = sse_of(nA, nW);
        if (nsse <= sse) {
          const double change = std::max(std::abs(dA) / std::abs(nA), std::abs(dW) / std::abs(nW));
          A = nA;
          omega = nW;
          sse = nsse;
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
          if (change < opt.relative_tolerance) converged = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // no descent direction left: already at the minimum to working precision
      converged = true;
    }
  }
  if (!converged) throw FitFailure("saturation fit did not converge in " + std::to_string(opt.max_iterations) + " iterations", fit.A_init, fit.omega_init);

  fit.A = A;
  fit.omega = omega;
  fit.iterations = it;
  fit.residual_norm = std::sqrt(sse);
  std::vector<double> model(end);
  for (std::size_t i = 0; i < end; ++i) model[i] = SaturationModel::value(t[i], A, omega);
  fit.r2 = r_squared(s, model);
  fit.stationarity = saturation_stationarity(t, s, A, omega);
  return fit;
}

// ---------------------------------------------------------------------------
// Regression period

enum class PeriodStatus { found, not_found, not_applicable };

inline const char* to_string(PeriodStatus s) {
  switch (s) {
    case PeriodStatus::found: return "found";
    case PeriodStatus::not_found: return "not_found";
    case PeriodStatus::not_applicable: return "not_applicable";
  }
  return "?";
}

struct PeriodResult {
  PeriodStatus status = PeriodStatus::not_applicable;
  double T = std::numeric_limits<double>::quiet_NaN();
  double epsilon_at_T = std::numeric_limits<double>::quiet_NaN();  // S(T) - S(0), signed
  double armed_at = std::numeric_limits<double>::quiet_NaN();
  double horizon = 0.0;
  double eps = 0.2;

  bool found() const noexcept { return status == PeriodStatus::found; }
};

/// Streaming two-phase detector: arms once S - S(0) >= eps, then reports the
/// first sample with |S - S(0)| < eps.
class PeriodScanner {
 public:
  explicit PeriodScanner(double eps = 0.2) {
    if (!(eps > 0.0)) throw Error(ErrorKind::invalid_argument, "analysis", "eps must be positive");
    result_.eps = eps;
  }

  /// Feeds one sample; returns true once the period is found.
  bool push(double t, double s) {
    if (result_.found()) return true;
    if (!started_) {
      started_ = true;
      t0_ = t;
      s0_ = s;
    }
    result_.horizon = t - t0_;
    if (!armed_) {
      if (s - s0_ >= result_.eps) {
        armed_ = true;
        result_.armed_at = t - t0_;
        result_.status = PeriodStatus::not_found;
      }
      return false;
    }
    if (std::abs(s - s0_) < result_.eps) {
      result_.status = PeriodStatus::found;
      result_.T = t - t0_;
      result_.epsilon_at_T = s - s0_;
      return true;
    }
    return false;
  }

  bool done() const noexcept { return result_.found(); }
  const PeriodResult& result() const noexcept { return result_; }

 private:
  PeriodResult result_;
  bool started_ = false;
  bool armed_ = false;
  double t0_ = 0.0;
  double s0_ = 0.0;
};

inline PeriodResult detect_period(std::span<const double> t, std::span<const double> s, double eps = 0.2) {
  if (t.size() != s.size() || t.empty())
    throw Error(ErrorKind::invalid_argument, "analysis", "period detection needs equal, non-empty series");
  PeriodScanner scanner(eps);
  for (std::size_t i = 0; i < t.size(); ++i)
    if (scanner.push(t[i], s[i])) break;
  return scanner.result();
}

/// Orders periods with not-found treated as longer than any found period
/// (its horizon is a lower bound). Not-applicable results do not compare.
inline bool period_less(const PeriodResult& a, const PeriodResult& b) {
  if (a.status == PeriodStatus::not_applicable || b.status == PeriodStatus::not_applicable) return false;
  if (a.found() && b.found()) return a.T < b.T;
  if (a.found()) return b.status == PeriodStatus::not_found;
  return false;
}

}  // namespace wentropy
