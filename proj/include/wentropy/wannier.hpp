#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "wentropy/error.hpp"

namespace wentropy {

using cplx = std::complex<double>;

/// Planck-cell tiling of single-site phase space plus the uniform real-space
/// grid every function is sampled on. Cell widths satisfy x0 * k0 = 2 pi.
struct PhaseGrid {
  double x0 = std::sqrt(2.0 * std::numbers::pi);
  double k0 = std::sqrt(2.0 * std::numbers::pi);
  double zeta = 0.9;  // Gaussian packet width
  int window_x = 2;   // jx in [-window_x, window_x]
  int window_k = 2;   // jk in [-window_k, window_k]
  double dx = 0.02;
  double half_extent = 24.0;  // grid covers [-L, L]

  std::size_t n_points() const { return static_cast<std::size_t>(std::llround(2.0 * half_extent / dx)) + 1; }
  double position(std::size_t i) const { return -half_extent + static_cast<double>(i) * dx; }
  double k_max() const { return window_k * k0; }
  std::size_t n_cells() const {
    return static_cast<std::size_t>((2 * window_x + 1) * (2 * window_k + 1));
  }

  /// Square cells x0 = k0 = sqrt(2 pi) with the given window.
  static PhaseGrid square(int window) {
    PhaseGrid g;
    g.window_x = g.window_k = window;
    return g;
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::invalid_argument, "wannier", what); };
    if (!(x0 > 0.0) || !(k0 > 0.0) || !(zeta > 0.0) || !(dx > 0.0) || !(half_extent > 0.0))
      fail("grid parameters must be positive");
    if (window_x < 0 || window_k < 0) fail("cell windows must be non-negative");
    if (std::abs(x0 * k0 - 2.0 * std::numbers::pi) > 1e-12)
      fail("cell area x0*k0 = " + std::to_string(x0 * k0) + " differs from 2*pi");
    double limit = zeta;
    if (window_k > 0) limit = std::min(limit, 1.0 / k_max());
    if (dx > limit / 8.0 + 1e-15)
      fail("grid spacing " + std::to_string(dx) + " exceeds resolution limit " + std::to_string(limit / 8.0));
    if (half_extent < window_x * x0 + 6.0 * zeta)
      fail("grid extent " + std::to_string(half_extent) + " is smaller than window_x*x0 + 6*zeta");
  }
};

struct PhaseCell {
  int jx = 0;
  int jk = 0;
  friend bool operator==(const PhaseCell&, const PhaseCell&) = default;
};

/// Cells in jx-major, jk-minor order.
inline std::vector<PhaseCell> phase_cells(const PhaseGrid& grid) {
  std::vector<PhaseCell> cells;
  for (int jx = -grid.window_x; jx <= grid.window_x; ++jx)
    for (int jk = -grid.window_k; jk <= grid.window_k; ++jk) cells.push_back({jx, jk});
  return cells;
}

/// Trapezoid weights on the uniform grid.
inline Eigen::VectorXd quadrature_weights(const PhaseGrid& grid) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid.n_points()), grid.dx);
  w[0] *= 0.5;
  w[w.size() - 1] *= 0.5;
  return w;
}

/// <f|g> by trapezoid quadrature.
inline cplx inner(const Eigen::VectorXd& weights, const Eigen::Ref<const Eigen::VectorXcd>& f,
                  const Eigen::Ref<const Eigen::VectorXcd>& g) {
  return (f.conjugate().array() * g.array() * weights.array()).sum();
}

/// Normalised packets g(x) = exp(-(x - jx x0)^2 / (4 zeta^2) + i jk k0 x), one
/// row per cell in phase_cells order.
inline Eigen::MatrixXcd build_gaussian_packets(const PhaseGrid& grid) {
  grid.validate();
  const auto cells = phase_cells(grid);
  const auto npts = static_cast<Eigen::Index>(grid.n_points());
  const auto weights = quadrature_weights(grid);
  const double exact_norm2 = std::sqrt(2.0 * std::numbers::pi) * grid.zeta;
  Eigen::MatrixXcd packets(static_cast<Eigen::Index>(cells.size()), npts);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const double centre = cells[c].jx * grid.x0;
    const double kc = cells[c].jk * grid.k0;
    Eigen::VectorXcd g(npts);
    for (Eigen::Index i = 0; i < npts; ++i) {
      const double x = grid.position(static_cast<std::size_t>(i));
      const double u = x - centre;
      g[i] = std::exp(-u * u / (4.0 * grid.zeta * grid.zeta)) * std::polar(1.0, kc * x);
    }
    const double norm2 = inner(weights, g, g).real();
    if (std::abs(norm2 - exact_norm2) > 1e-6 * exact_norm2)
      throw Error(ErrorKind::numerical, "wannier",
                  "packet normalisation quadrature error " + std::to_string(std::abs(norm2 / exact_norm2 - 1.0)) +
                      " exceeds 1e-6; refine dx or enlarge the grid");
    packets.row(static_cast<Eigen::Index>(c)) = g.transpose() / std::sqrt(norm2);
  }
  return packets;
}

inline Eigen::MatrixXcd gram_matrix(const Eigen::MatrixXcd& functions, const Eigen::VectorXd& weights) {
  return functions.conjugate() * weights.asDiagonal() * functions.transpose();
}

struct Orthogonalized {
  Eigen::MatrixXcd functions;  // rows
  double min_gram_eigenvalue = 0.0;
};

/// Symmetric orthogonalisation w = S^{-1/2} g: the orthonormal set closest to
/// the packets in the least-squares sense, independent of their order.
inline Orthogonalized orthogonalize(const Eigen::MatrixXcd& packets, const Eigen::VectorXd& weights) {
  const Eigen::MatrixXcd S = gram_matrix(packets, weights);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::numerical, "wannier", "Gram eigensolver failed");
  const double lambda_min = es.eigenvalues().minCoeff();
  if (!(lambda_min > 1e-10))
    throw Error(ErrorKind::numerical, "wannier",
                "packets are nearly linearly dependent (minimum Gram eigenvalue " + std::to_string(lambda_min) + ")");
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().array().rsqrt();
  const Eigen::MatrixXcd X = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();
  return {X.transpose() * packets, lambda_min};
}

/// Modified Gram-Schmidt in input order. Only kept to show that the result
/// depends on the ordering; not used by the frame.
inline Eigen::MatrixXcd orthogonalize_sequential(const Eigen::MatrixXcd& packets, const Eigen::VectorXd& weights) {
  Eigen::MatrixXcd out = packets;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const Eigen::VectorXcd wj = out.row(j).transpose();
      const Eigen::VectorXcd wi = out.row(i).transpose();
      out.row(i) -= inner(weights, wj, wi) * out.row(j);
    }
    const Eigen::VectorXcd wi = out.row(i).transpose();
    out.row(i) /= std::sqrt(inner(weights, wi, wi).real());
  }
  return out;
}

inline double max_gram_deviation(const Eigen::MatrixXcd& functions, const Eigen::VectorXd& weights) {
  const Eigen::MatrixXcd G = gram_matrix(functions, weights);
  return (G - Eigen::MatrixXcd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

/// Lowest two harmonic-oscillator eigenfunctions with length `ell`, sampled
/// on the grid and normalised by quadrature.
inline std::array<Eigen::VectorXcd, 2> oscillator_levels(const PhaseGrid& grid, double ell) {
  if (!(ell > 0.0)) throw Error(ErrorKind::invalid_argument, "wannier", "oscillator length must be positive");
  const auto npts = static_cast<Eigen::Index>(grid.n_points());
  const auto weights = quadrature_weights(grid);
  std::array<Eigen::VectorXcd, 2> phi{Eigen::VectorXcd(npts), Eigen::VectorXcd(npts)};
  for (Eigen::Index i = 0; i < npts; ++i) {
    const double u = grid.position(static_cast<std::size_t>(i)) / ell;
    const double g = std::exp(-0.5 * u * u);
    phi[0][i] = g;
    phi[1][i] = std::sqrt(2.0) * u * g;
  }
  const double edge = std::exp(-0.5 * std::pow(grid.half_extent / ell, 2)) * (1.0 + grid.half_extent / ell);
  if (edge > 1e-7)
    throw Error(ErrorKind::numerical, "wannier",
                "oscillator levels do not decay inside the grid; enlarge half_extent beyond " +
                    std::to_string(grid.half_extent));
  for (auto& p : phi) p /= std::sqrt(inner(weights, p, p).real());
  return phi;
}

/// One orthonormal function per Planck cell plus the projections
/// C[m][i] = <w_i|phi_m> of the two local levels.
struct WannierFrame {
  PhaseGrid grid;
  double oscillator_length = 2.5;
  std::vector<PhaseCell> cells;
  Eigen::MatrixXcd functions;  // one row per cell
  Eigen::MatrixXcd C;          // 2 x M
  std::array<double, 2> leakage{};
  double min_gram_eigenvalue = 0.0;

  std::size_t n_cells() const { return cells.size(); }
};

struct LevelProjection {
  Eigen::MatrixXcd C;
  std::array<double, 2> leakage{};
};

inline LevelProjection project_levels(const PhaseGrid& grid, const Eigen::MatrixXcd& wannier, double ell,
                                      double leakage_tolerance) {
  const auto weights = quadrature_weights(grid);
  const auto phi = oscillator_levels(grid, ell);
  LevelProjection out;
  out.C.resize(2, wannier.rows());
  for (int m = 0; m < 2; ++m) {
    for (Eigen::Index i = 0; i < wannier.rows(); ++i)
      out.C(m, i) = inner(weights, wannier.row(i).transpose(), phi[static_cast<std::size_t>(m)]);
    out.leakage[static_cast<std::size_t>(m)] = 1.0 - out.C.row(m).squaredNorm();
  }
  for (int m = 0; m < 2; ++m)
    if (out.leakage[static_cast<std::size_t>(m)] > leakage_tolerance)
      throw Error(ErrorKind::numerical, "wannier",
                  "level " + std::to_string(m) + " leaks " + std::to_string(out.leakage[static_cast<std::size_t>(m)]) +
                      " of its norm out of the cell window (tolerance " + std::to_string(leakage_tolerance) +
                      "); enlarge window_x/window_k");
  return out;
}

inline constexpr double kDefaultLeakageTolerance = 1e-3;

inline WannierFrame build_frame(const PhaseGrid& grid, double oscillator_length = 2.5,
                                double leakage_tolerance = kDefaultLeakageTolerance) {
  const auto packets = build_gaussian_packets(grid);
  const auto weights = quadrature_weights(grid);
  auto ortho = orthogonalize(packets, weights);
  auto levels = project_levels(grid, ortho.functions, oscillator_length, leakage_tolerance);
  WannierFrame f;
  f.grid = grid;
  f.oscillator_length = oscillator_length;
  f.cells = phase_cells(grid);
  f.functions = std::move(ortho.functions);
  f.min_gram_eigenvalue = ortho.min_gram_eigenvalue;
  f.C = std::move(levels.C);
  f.leakage = levels.leakage;
  return f;
}

// ---------------------------------------------------------------------------
// Macro operators

struct MacroDiagnostics {
  int order = 2;
  std::vector<double> mean_q;
  std::vector<double> mean_p;
  std::vector<double> dq;  // <(q - <q>)^i>^{1/i}
  std::vector<double> dp;
  Eigen::MatrixXd Q;  // diagonal in the Wannier basis
  Eigen::MatrixXd P;
};

namespace detail {

// real i-th root that keeps the sign of odd central moments
inline double signed_root(double v, int order) {
  const double r = std::pow(std::abs(v), 1.0 / order);
  return (v < 0.0 && order % 2 == 1) ? -r : r;
}

}  // namespace detail

/// Spreads of each Wannier function about its own centroid in position and
/// wavenumber. Momentum moments use the discrete Fourier transform of the
/// sampled function, i.e. p = -i d/dx applied spectrally.
inline MacroDiagnostics macro_spreads(const WannierFrame& frame, int order) {
  if (order < 2) throw Error(ErrorKind::invalid_argument, "wannier", "spread order must be at least 2");
  const auto& grid = frame.grid;
  const double nyquist = std::numbers::pi / grid.dx;
  if (grid.k_max() + 8.0 / (2.0 * grid.zeta) >= nyquist)
    throw Error(ErrorKind::numerical, "wannier",
                "cell window reaches k = " + std::to_string(grid.k_max()) + " near the grid Nyquist limit " +
                    std::to_string(nyquist) + "; refine dx");
  const auto weights = quadrature_weights(grid);
  const auto npts = static_cast<Eigen::Index>(grid.n_points());
  const auto M = static_cast<std::size_t>(frame.functions.rows());

  std::vector<double> kgrid(static_cast<std::size_t>(npts));
  for (Eigen::Index j = 0; j < npts; ++j) {
    const Eigen::Index s = j <= npts / 2 ? j : j - npts;
    kgrid[static_cast<std::size_t>(j)] = 2.0 * std::numbers::pi * static_cast<double>(s) / (static_cast<double>(npts) * grid.dx);
  }

  MacroDiagnostics d;
  d.order = order;
  d.mean_q.resize(M);
  d.mean_p.resize(M);
  d.dq.resize(M);
  d.dp.resize(M);
  Eigen::FFT<double> fft;
  for (std::size_t c = 0; c < M; ++c) {
    const Eigen::VectorXcd w = frame.functions.row(static_cast<Eigen::Index>(c)).transpose();
    Eigen::VectorXd density = w.cwiseAbs2().cwiseProduct(weights);
    density /= density.sum();
    double mq = 0.0;
    for (Eigen::Index i = 0; i < npts; ++i) mq += density[i] * grid.position(static_cast<std::size_t>(i));
    double cq = 0.0;
    for (Eigen::Index i = 0; i < npts; ++i)
      cq += density[i] * std::pow(grid.position(static_cast<std::size_t>(i)) - mq, order);

    std::vector<cplx> samples(w.data(), w.data() + w.size());
    std::vector<cplx> spectrum;
    fft.fwd(spectrum, samples);
    double total = 0.0, mp = 0.0;
    for (std::size_t j = 0; j < spectrum.size(); ++j) {
      const double a = std::norm(spectrum[j]);
      total += a;
      mp += a * kgrid[j];
    }
    mp /= total;
    double cp = 0.0;
    for (std::size_t j = 0; j < spectrum.size(); ++j) cp += std::norm(spectrum[j]) * std::pow(kgrid[j] - mp, order);
    cp /= total;

    d.mean_q[c] = mq;
    d.mean_p[c] = mp;
    d.dq[c] = detail::signed_root(cq, order);
    d.dp[c] = detail::signed_root(cp, order);
  }
  d.Q = Eigen::Map<const Eigen::VectorXd>(d.mean_q.data(), static_cast<Eigen::Index>(M)).asDiagonal();
  d.P = Eigen::Map<const Eigen::VectorXd>(d.mean_p.data(), static_cast<Eigen::Index>(M)).asDiagonal();
  return d;
}

// ---------------------------------------------------------------------------
// Export / import of the level projections

/// Coefficients needed downstream of the frame: cells, C and header values.
struct FrameCoefficients {
  PhaseGrid grid;
  double oscillator_length = 2.5;
  std::vector<PhaseCell> cells;
  Eigen::MatrixXcd C;
  std::array<double, 2> leakage{};

  static FrameCoefficients from(const WannierFrame& f) {
    return {f.grid, f.oscillator_length, f.cells, f.C, f.leakage};
  }
};

namespace detail {

inline std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_frame(std::ostream& os, const FrameCoefficients& f) {
  using detail::exact;
  os << "# wentropy-frame v1\n"
     << "# x0=" << exact(f.grid.x0) << '\n'
     << "# k0=" << exact(f.grid.k0) << '\n'
     << "# zeta=" << exact(f.grid.zeta) << '\n'
     << "# window=" << f.grid.window_x << ',' << f.grid.window_k << '\n'
     << "# dx=" << exact(f.grid.dx) << '\n'
     << "# L=" << exact(f.grid.half_extent) << '\n'
     << "# oscillator_length=" << exact(f.oscillator_length) << '\n'
     << "# leakage0=" << exact(f.leakage[0]) << '\n'
     << "# leakage1=" << exact(f.leakage[1]) << '\n'
     << "# m jx jk re im\n";
  for (int m = 0; m < 2; ++m)
    for (std::size_t i = 0; i < f.cells.size(); ++i) {
      const cplx c = f.C(m, static_cast<Eigen::Index>(i));
      os << m << ' ' << f.cells[i].jx << ' ' << f.cells[i].jk << ' ' << exact(c.real()) << ' ' << exact(c.imag())
         << '\n';
    }
}

inline FrameCoefficients read_frame(std::istream& in) {
  FrameCoefficients f;
  std::string line;
  auto bad = [](const std::string& what) { throw Error(ErrorKind::parse, "wannier", "frame file: " + what); };
  std::vector<std::array<double, 2>> values[2];
  std::vector<PhaseCell> cells[2];
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string val = line.substr(eq + 1);
      try {
        if (key == "x0") f.grid.x0 = std::stod(val);
        else if (key == "k0") f.grid.k0 = std::stod(val);
        else if (key == "zeta") f.grid.zeta = std::stod(val);
        else if (key == "window") {
          const auto comma = val.find(',');
          if (comma == std::string::npos) bad("window needs two values");
          f.grid.window_x = std::stoi(val.substr(0, comma));
          f.grid.window_k = std::stoi(val.substr(comma + 1));
        } else if (key == "dx") f.grid.dx = std::stod(val);
        else if (key == "L") f.grid.half_extent = std::stod(val);
        else if (key == "oscillator_length") f.oscillator_length = std::stod(val);
        else if (key == "leakage0") f.leakage[0] = std::stod(val);
        else if (key == "leakage1") f.leakage[1] = std::stod(val);
      } catch (const std::logic_error&) {
        bad("bad value for '" + key + "'");
      }
      continue;
    }
    std::istringstream row(line);
    int m = 0;
    PhaseCell c;
    double re = 0.0, im = 0.0;
    if (!(row >> m >> c.jx >> c.jk >> re >> im) || m < 0 || m > 1) bad("malformed row '" + line + "'");
    cells[m].push_back(c);
    values[m].push_back({re, im});
  }
  if (cells[0].empty() || cells[0] != cells[1]) bad("level rows are missing or inconsistent");
  if (cells[0] != phase_cells(f.grid)) bad("cell list does not match the window in the header");
  f.cells = cells[0];
  f.C.resize(2, static_cast<Eigen::Index>(f.cells.size()));
  for (int m = 0; m < 2; ++m)
    for (std::size_t i = 0; i < f.cells.size(); ++i)
      f.C(m, static_cast<Eigen::Index>(i)) = {values[m][i][0], values[m][i][1]};
  return f;
}

/// FNV-1a over the exported text; identifies a frame in trace headers.
inline std::string frame_hash(const FrameCoefficients& f) {
  std::ostringstream os;
  write_frame(os, f);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : os.str()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace wentropy
