#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wentropy/error.hpp"
#include "wentropy/fock.hpp"
#include "wentropy/parallel.hpp"

namespace wentropy {

/// Amplitudes over a Fock sector. The basis is shared, never copied.
struct QuantumState {
  std::shared_ptr<const FockBasis> basis;
  std::vector<cplx> amplitudes;

  double norm() const {
    double s = 0.0;
    for (const auto& a : amplitudes) s += std::norm(a);
    return std::sqrt(s);
  }
};

/// Single Fock basis state with the given sites occupied.
inline QuantumState fock_state(std::shared_ptr<const FockBasis> basis, std::span<const int> sites) {
  Bitmask s = 0;
  for (int site : sites) {
    if (site < 0 || site >= basis->n_sites())
      throw Error(ErrorKind::invalid_argument, "dynamics", "initial site " + std::to_string(site) + " out of range");
    if ((s >> site) & 1U)
      throw Error(ErrorKind::invalid_argument, "dynamics", "initial site " + std::to_string(site) + " repeated");
    s |= Bitmask{1} << site;
  }
  if (static_cast<int>(sites.size()) != basis->n_particles())
    throw Error(ErrorKind::invalid_argument, "dynamics", "number of initial sites differs from particle number");
  QuantumState psi{basis, std::vector<cplx>(basis->size())};
  psi.amplitudes[basis->index_of(s)] = 1.0;
  return psi;
}

inline double expectation(const SparseHamiltonian& h, std::span<const cplx> psi) {
  const auto hpsi = h.apply<cplx>(psi);
  cplx e{};
  for (std::size_t i = 0; i < psi.size(); ++i) e += std::conj(psi[i]) * hpsi[i];
  return e.real();
}

enum class PropagatorMode { spectral, krylov };
enum class PropagatorPolicy { automatic, spectral, krylov };

inline constexpr std::size_t kSpectralMaxDim = 4000;

struct KrylovOptions {
  int subspace_dim = 30;
  double tolerance = 1e-9;  // local error per unit time
};

/// e^{-iHt} (hbar = 1). Spectral mode keeps the full eigendecomposition;
/// Krylov mode keeps the Hamiltonian and propagates with Lanczos steps.
class Propagator {
 public:
  Propagator(std::shared_ptr<const SparseHamiltonian> h, PropagatorPolicy policy = PropagatorPolicy::automatic,
             KrylovOptions krylov = {})
      : h_(std::move(h)), krylov_(krylov) {
    if (krylov_.subspace_dim < 2 || !(krylov_.tolerance > 0.0))
      throw Error(ErrorKind::invalid_argument, "dynamics", "invalid Krylov options");
    mode_ = policy == PropagatorPolicy::spectral ? PropagatorMode::spectral
            : policy == PropagatorPolicy::krylov ? PropagatorMode::krylov
            : (h_->dim() <= kSpectralMaxDim ? PropagatorMode::spectral : PropagatorMode::krylov);
    if (mode_ == PropagatorMode::spectral) diagonalize();
  }

  PropagatorMode mode() const noexcept { return mode_; }
  std::size_t dim() const noexcept { return h_->dim(); }
  const SparseHamiltonian& hamiltonian() const noexcept { return *h_; }
  const KrylovOptions& krylov_options() const noexcept { return krylov_; }
  const Eigen::VectorXd& eigenvalues() const { return energies_; }
  const Eigen::MatrixXd& eigenvectors() const { return vectors_; }

  /// Coefficients of psi in the eigenbasis (spectral mode).
  Eigen::VectorXcd eigen_coefficients(std::span<const cplx> psi) const {
    require_spectral();
    check_dim(psi.size());
    Eigen::Map<const Eigen::VectorXcd> v(psi.data(), static_cast<Eigen::Index>(psi.size()));
    const Eigen::VectorXd vr = v.real(), vi = v.imag();
    const Eigen::VectorXd re = vectors_.transpose() * vr;
    const Eigen::VectorXd im = vectors_.transpose() * vi;
    Eigen::VectorXcd out(re.size());
    for (Eigen::Index k = 0; k < re.size(); ++k) out[k] = {re[k], im[k]};
    return out;
  }

  /// Rebuilds e^{-iHt} psi from its eigen-coefficients.
  std::vector<cplx> from_coefficients(const Eigen::VectorXcd& coeffs, double t) const {
    require_spectral();
    Eigen::VectorXcd phased(coeffs.size());
    for (Eigen::Index k = 0; k < coeffs.size(); ++k)
      phased[k] = coeffs[k] * std::polar(1.0, -energies_[k] * t);
    const Eigen::VectorXd pr = phased.real(), pi = phased.imag();
    const Eigen::VectorXd re = vectors_ * pr;
    const Eigen::VectorXd im = vectors_ * pi;
    std::vector<cplx> out(dim());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {re[static_cast<Eigen::Index>(i)], im[static_cast<Eigen::Index>(i)]};
    return out;
  }

  std::vector<cplx> evolve(std::span<const cplx> psi0, double t) const {
    check_dim(psi0.size());
    if (t == 0.0) return {psi0.begin(), psi0.end()};
    if (mode_ == PropagatorMode::spectral) return from_coefficients(eigen_coefficients(psi0), t);
    return krylov_evolve(psi0, t);
  }

  QuantumState evolve(const QuantumState& psi0, double t) const {
    return {psi0.basis, evolve(std::span<const cplx>(psi0.amplitudes), t)};
  }

 private:
  void check_dim(std::size_t n) const {
    if (n != h_->dim())
      throw Error(ErrorKind::invalid_argument, "dynamics",
                  "state of length " + std::to_string(n) + " does not match dimension " + std::to_string(h_->dim()));
  }
  void require_spectral() const {
    if (mode_ != PropagatorMode::spectral)
      throw Error(ErrorKind::invalid_argument, "dynamics", "operation requires spectral mode");
  }

  void diagonalize() {
    const auto n = static_cast<Eigen::Index>(h_->dim());
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : h_->entries()) {
      dense(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
      dense(static_cast<Eigen::Index>(e.col), static_cast<Eigen::Index>(e.row)) = e.value;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
    if (solver.info() != Eigen::Success)
      throw Error(ErrorKind::numerical, "dynamics", "eigensolver did not converge (dim " + std::to_string(n) + ")");
    energies_ = solver.eigenvalues();
    vectors_ = solver.eigenvectors();
  }

  struct LanczosBasis {
    std::vector<Eigen::VectorXcd> vectors;
    Eigen::VectorXd ritz_values;
    Eigen::MatrixXd ritz_vectors;  // eigenvectors of the tridiagonal matrix
    double next_beta = 0.0;        // residual coupling; 0 on happy breakdown
  };

  LanczosBasis lanczos(const Eigen::VectorXcd& start) const {
    const int m_max = std::min<int>(krylov_.subspace_dim, static_cast<int>(dim()));
    LanczosBasis lb;
    std::vector<double> alpha, beta;
    lb.vectors.push_back(start);
    Eigen::VectorXcd w(start.size());
    for (int j = 0; j < m_max; ++j) {
      const auto& vj = lb.vectors.back();
      h_->apply_into<cplx>(std::span<const cplx>(vj.data(), vj.size()), std::span<cplx>(w.data(), w.size()));
      alpha.push_back(vj.dot(w).real());
      // full reorthogonalisation, twice
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& vi : lb.vectors) w -= vi.dot(w) * vi;
      const double b = w.norm();
      if (b <= 1e-13 * std::max(1.0, std::abs(alpha.back())) || j + 1 == static_cast<int>(dim())) {
        lb.next_beta = 0.0;
        break;
      }
      if (j + 1 == m_max) {
        lb.next_beta = b;
        break;
      }
      beta.push_back(b);
      lb.vectors.push_back(w / b);
    }
    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) T(i, i) = alpha[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i + 1 < m; ++i) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    lb.ritz_values = es.eigenvalues();
    lb.ritz_vectors = es.eigenvectors();
    return lb;
  }

  static Eigen::VectorXcd small_exp(const LanczosBasis& lb, double tau) {
    const auto& Q = lb.ritz_vectors;
    Eigen::VectorXcd y(Q.rows());
    Eigen::VectorXcd c(Q.rows());
    for (Eigen::Index k = 0; k < Q.rows(); ++k) c[k] = Q(0, k) * std::polar(1.0, -lb.ritz_values[k] * tau);
    y = Q.cast<cplx>() * c;
    return y;
  }

  std::vector<cplx> krylov_evolve(std::span<const cplx> psi0, double t) const {
    Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(psi0.data(), static_cast<Eigen::Index>(psi0.size()));
    const double sign = t < 0 ? -1.0 : 1.0;
    double remaining = std::abs(t);
    double tau_try = remaining;
    const double min_step = 1e-10 * std::max(1.0, remaining);
    while (remaining > 0.0) {
      const double beta0 = v.norm();
      if (beta0 == 0.0) break;
      const auto lb = lanczos(v / beta0);
      double tau = std::min(tau_try, remaining);
      Eigen::VectorXcd y;
      for (;;) {
        y = small_exp(lb, sign * tau);
        const double err = beta0 * lb.next_beta * std::abs(y[y.size() - 1]);
        if (err <= krylov_.tolerance * tau) break;
        tau *= 0.5;
        if (tau < min_step)
          throw Error(ErrorKind::numerical, "dynamics",
                      "Krylov step size fell below " + std::to_string(min_step) +
                          "; increase the subspace dimension or relax the tolerance");
      }
      Eigen::VectorXcd next = Eigen::VectorXcd::Zero(v.size());
      for (std::size_t k = 0; k < lb.vectors.size(); ++k) next += y[static_cast<Eigen::Index>(k)] * lb.vectors[k];
      v = beta0 * next;
      remaining -= tau;
      if (remaining < 1e-14 * std::abs(t)) remaining = 0.0;
      tau_try = tau * 2.0;
    }
    return {v.data(), v.data() + v.size()};
  }

  std::shared_ptr<const SparseHamiltonian> h_;
  KrylovOptions krylov_;
  PropagatorMode mode_ = PropagatorMode::spectral;
  Eigen::VectorXd energies_;
  Eigen::MatrixXd vectors_;
};

/// Visits psi(k*dt) for k = 0..n_steps. Spectral mode evaluates each time
/// directly (and in parallel when workers > 1); Krylov mode composes steps.
/// visit(k, t, amplitudes) must only touch per-k state.
template <class Visit>
void for_each_sample(const Propagator& prop, const QuantumState& psi0, double dt, std::size_t n_steps,
                     Visit&& visit, int workers = 1) {
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dynamics", "sampling interval must be positive");
  if (prop.mode() == PropagatorMode::spectral) {
    const auto coeffs = prop.eigen_coefficients(psi0.amplitudes);
    parallel_for(n_steps + 1, workers, [&](std::size_t k) {
      const double t = static_cast<double>(k) * dt;
      const auto psi = k == 0 ? psi0.amplitudes : prop.from_coefficients(coeffs, t);
      visit(k, t, std::span<const cplx>(psi));
    });
    return;
  }
  std::vector<cplx> psi = psi0.amplitudes;
  for (std::size_t k = 0; k <= n_steps; ++k) {
    if (k > 0) psi = prop.evolve(psi, dt);
    visit(k, static_cast<double>(k) * dt, std::span<const cplx>(psi));
  }
}

struct Observer {
  std::string name;
  std::function<double(std::span<const cplx>)> fn;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // [observer][sample]
};

inline Trajectory sample_trajectory(const Propagator& prop, const QuantumState& psi0, double dt, std::size_t n_steps,
                                    std::span<const Observer> observers, int workers = 1) {
  Trajectory out;
  out.times.resize(n_steps + 1);
  out.values.assign(observers.size(), std::vector<double>(n_steps + 1));
  for_each_sample(
      prop, psi0, dt, n_steps,
      [&](std::size_t k, double t, std::span<const cplx> psi) {
        out.times[k] = t;
        for (std::size_t o = 0; o < observers.size(); ++o) {
          try {
            out.values[o][k] = observers[o].fn(psi);
          } catch (const std::exception& e) {
            throw Error(ErrorKind::numerical, "dynamics",
                        "observer '" + observers[o].name + "' failed at t=" + std::to_string(t) + ": " + e.what());
          }
        }
      },
      workers);
  return out;
}

}  // namespace wentropy
