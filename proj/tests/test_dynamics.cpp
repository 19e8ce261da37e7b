#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "wentropy/dynamics.hpp"

using namespace wentropy;

namespace {

struct Setup {
  std::shared_ptr<const FockBasis> basis;
  std::shared_ptr<const SparseHamiltonian> h;
};

Setup make(const LatticeGraph& g, int N, double J = 1.0, double U = 0.0) {
  auto b = std::make_shared<const FockBasis>(enumerate_basis(g.n_sites(), N));
  auto h = std::make_shared<const SparseHamiltonian>(build_hamiltonian(g, *b, J, U));
  return {b, h};
}

double distance(std::span<const cplx> a, std::span<const cplx> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST(Dynamics, FockStateValidation) {
  const auto s = make(build_chain(4), 2);
  const std::vector<int> ok{0, 2}, dup{1, 1}, range{0, 4}, count{1};
  const auto psi = fock_state(s.basis, ok);
  EXPECT_EQ(psi.amplitudes[s.basis->index_of(0b0101)], cplx(1.0));
  EXPECT_DOUBLE_EQ(psi.norm(), 1.0);
  EXPECT_THROW(fock_state(s.basis, dup), Error);
  EXPECT_THROW(fock_state(s.basis, range), Error);
  EXPECT_THROW(fock_state(s.basis, count), Error);
}

TEST(Dynamics, TwoSiteOscillationBothModes) {
  const auto s = make(build_chain(2), 1, 0.7);
  const std::vector<int> site0{0};
  const auto psi0 = fock_state(s.basis, site0);
  for (auto policy : {PropagatorPolicy::spectral, PropagatorPolicy::krylov}) {
    const Propagator prop(s.h, policy);
    for (double t = 0.0; t <= 20.0; t += 0.37) {
      const auto psi = prop.evolve(psi0, t);
      // site 0 is bit 0, state index 0
      EXPECT_NEAR(std::norm(psi.amplitudes[0]), std::pow(std::cos(0.7 * t), 2), 1e-9) << t;
    }
  }
}

TEST(Dynamics, SpectralAndKrylovAgree) {
  const auto s = make(build_ring(9), 3, 1.0, 0.6);
  const std::vector<int> sites{0, 1, 4};
  const auto psi0 = fock_state(s.basis, sites);
  const Propagator spectral(s.h, PropagatorPolicy::spectral);
  const Propagator krylov(s.h, PropagatorPolicy::krylov);
  EXPECT_EQ(krylov.mode(), PropagatorMode::krylov);
  for (double t : {0.3, 2.0, 7.5}) {
    const auto a = spectral.evolve(psi0, t), b = krylov.evolve(psi0, t);
    EXPECT_LT(distance(a.amplitudes, b.amplitudes), 1e-8) << t;
  }
}

TEST(Dynamics, NormEnergyAndTimeReversal) {
  const auto s = make(build_grid(3, 3), 4, 1.0, 0.8);
  const std::vector<int> sites{0, 2, 4, 8};
  const auto psi0 = fock_state(s.basis, sites);
  const double e0 = expectation(*s.h, psi0.amplitudes);
  for (auto policy : {PropagatorPolicy::spectral, PropagatorPolicy::krylov}) {
    const Propagator prop(s.h, policy);
    const auto psi = prop.evolve(psi0, 12.0);
    EXPECT_NEAR(psi.norm(), 1.0, 1e-10);
    EXPECT_NEAR(expectation(*s.h, psi.amplitudes), e0, 1e-8);
    const auto back = prop.evolve(psi.amplitudes, -12.0);
    EXPECT_LT(distance(back, psi0.amplitudes), 1e-8);
  }
}

TEST(Dynamics, AutomaticPolicyUsesKrylovForLargeSectors) {
  const auto big = make(build_chain(16), 5);  // 4368 states
  EXPECT_EQ(Propagator(big.h).mode(), PropagatorMode::krylov);
  const auto small = make(build_chain(8), 2);
  EXPECT_EQ(Propagator(small.h).mode(), PropagatorMode::spectral);
}

TEST(Dynamics, KrylovHandlesInvariantSubspace) {
  // two sites, one particle: the Krylov space closes after two vectors
  const auto s = make(build_chain(2), 1);
  const std::vector<int> site1{1};
  const Propagator prop(s.h, PropagatorPolicy::krylov);
  const auto psi = prop.evolve(fock_state(s.basis, site1), 1.3);
  EXPECT_NEAR(std::norm(psi.amplitudes[1]), std::pow(std::cos(1.3), 2), 1e-12);
}

TEST(Dynamics, SamplesIndependentOfWorkerCount) {
  const auto s = make(build_chain(8), 3);
  const std::vector<int> sites{0, 1, 2};
  const auto psi0 = fock_state(s.basis, sites);
  const Propagator prop(s.h);
  const std::vector<Observer> obs{{"p0", [](std::span<const cplx> v) { return std::norm(v[0]); }}};
  const auto a = sample_trajectory(prop, psi0, 0.1, 200, obs, 1);
  const auto b = sample_trajectory(prop, psi0, 0.1, 200, obs, 4);
  EXPECT_EQ(a.times, b.times);
  EXPECT_EQ(a.values, b.values);
  EXPECT_DOUBLE_EQ(a.times[37], 37 * 0.1);
}

TEST(Dynamics, ObserverFailureNamesObserverAndTime) {
  const auto s = make(build_chain(3), 1);
  const std::vector<int> site{0};
  const Propagator prop(s.h);
  const std::vector<Observer> obs{{"broken", [](std::span<const cplx>) -> double { throw std::runtime_error("boom"); }}};
  try {
    sample_trajectory(prop, fock_state(s.basis, site), 0.5, 3, obs, 1);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("broken"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
}

TEST(Dynamics, RejectsDimensionMismatch) {
  const auto s = make(build_chain(4), 2);
  const Propagator prop(s.h);
  std::vector<cplx> wrong(3);
  EXPECT_THROW(prop.evolve(wrong, 1.0), Error);
  EXPECT_THROW(Propagator(s.h, PropagatorPolicy::automatic, KrylovOptions{1, 1e-9}), Error);
}
