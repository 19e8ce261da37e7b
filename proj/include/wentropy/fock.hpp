#pragma once

#include <algorithm>
#include <bit>
#include <complex>
#include <cstdio>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wentropy/error.hpp"
#include "wentropy/lattice.hpp"

namespace wentropy {

using Bitmask = std::uint64_t;
using cplx = std::complex<double>;

inline constexpr int kMaxSites = 62;

/// Binomial coefficients up to kMaxSites, exact in 64 bits for the sizes used here.
inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

/// Hard-core occupation basis of a fixed particle-number sector. Bit i of a
/// state is the occupation of site i. States are strictly ascending, which
/// for equal popcount is colexicographic order, so a state's index is its
/// combinatorial rank.
class FockBasis {
 public:
  FockBasis() = default;

  int n_sites() const noexcept { return n_sites_; }
  int n_particles() const noexcept { return n_particles_; }
  std::size_t size() const noexcept { return states_.size(); }
  const std::vector<Bitmask>& states() const noexcept { return states_; }
  Bitmask state(std::size_t index) const { return states_.at(index); }

  bool contains(Bitmask s) const noexcept {
    return std::popcount(s) == n_particles_ && (s >> n_sites_) == 0;
  }

  /// Dense index of a state of this sector.
  std::size_t index_of(Bitmask s) const {
    if (!contains(s))
      throw Error(ErrorKind::invalid_argument, "fock", "bitmask is not a state of this sector");
    std::size_t rank = 0;
    int j = 0;
    while (s) {
      const int p = std::countr_zero(s);
      rank += binomial(p, j + 1);
      ++j;
      s &= s - 1;
    }
    return rank;
  }

  friend FockBasis enumerate_basis(int n, int N);

 private:
  int n_sites_ = 0;
  int n_particles_ = 0;
  std::vector<Bitmask> states_;
};

inline FockBasis enumerate_basis(int n, int N) {
  if (n < 1 || n > kMaxSites)
    throw Error(ErrorKind::invalid_argument, "fock", "site count out of range");
  if (N < 0 || N > n)
    throw Error(ErrorKind::invalid_argument, "fock",
                "particle count " + std::to_string(N) + " outside sector range [0," + std::to_string(n) + "]");
  FockBasis b;
  b.n_sites_ = n;
  b.n_particles_ = N;
  b.states_.reserve(binomial(n, N));
  if (N == 0) {
    b.states_.push_back(0);
    return b;
  }
  const Bitmask limit = Bitmask{1} << n;
  Bitmask s = (Bitmask{1} << N) - 1;
  while (s < limit) {
    b.states_.push_back(s);
    // next bit permutation (Gosper)
    const Bitmask c = s & (~s + 1);
    const Bitmask r = s + c;
    s = (((r ^ s) >> 2) / c) | r;
  }
  return b;
}

struct MatrixEntry {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Real symmetric hard-core Hamiltonian
///   H = -J sum_<ij> (b_i^+ b_j + h.c.) + U sum_<ij> n_i n_j
/// stored as upper triangle plus diagonal in ascending (row, col) order, with
/// a full CSR copy for matrix-vector products.
class SparseHamiltonian {
 public:
  std::size_t dim() const noexcept { return dim_; }
  double hopping() const noexcept { return J_; }
  double interaction() const noexcept { return U_; }
  const std::vector<MatrixEntry>& entries() const noexcept { return entries_; }

  template <class Scalar>
  std::vector<Scalar> apply(std::span<const Scalar> v) const {
    std::vector<Scalar> out(dim_);
    apply_into(v, std::span<Scalar>(out));
    return out;
  }

  template <class Scalar>
  void apply_into(std::span<const Scalar> v, std::span<Scalar> out) const {
    if (v.size() != dim_ || out.size() != dim_)
      throw Error(ErrorKind::invalid_argument, "fock",
                  "vector of length " + std::to_string(v.size()) + " applied to dimension " +
                      std::to_string(dim_));
    for (std::size_t r = 0; r < dim_; ++r) {
      Scalar acc{};
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += values_[k] * v[cols_[k]];
      out[r] = acc;
    }
  }

  std::vector<double> to_dense() const {
    std::vector<double> m(dim_ * dim_, 0.0);
    for (const auto& e : entries_) {
      m[e.row * dim_ + e.col] = e.value;
      m[e.col * dim_ + e.row] = e.value;
    }
    return m;
  }

  /// Coordinate dump, "row col value" per stored entry.
  void write_coo(std::ostream& os) const;

  friend SparseHamiltonian build_hamiltonian(const LatticeGraph&, const FockBasis&, double, double);

 private:
  void build_csr() {
    std::vector<std::size_t> counts(dim_ + 1, 0);
    for (const auto& e : entries_) {
      ++counts[e.row + 1];
      if (e.row != e.col) ++counts[e.col + 1];
    }
    for (std::size_t r = 0; r < dim_; ++r) counts[r + 1] += counts[r];
    row_ptr_ = counts;
    cols_.assign(row_ptr_.back(), 0);
    values_.assign(row_ptr_.back(), 0.0);
    std::vector<std::size_t> fill(row_ptr_.begin(), row_ptr_.end() - 1);
    for (const auto& e : entries_) {
      cols_[fill[e.row]] = e.col;
      values_[fill[e.row]++] = e.value;
      if (e.row != e.col) {
        cols_[fill[e.col]] = e.row;
        values_[fill[e.col]++] = e.value;
      }
    }
  }

  std::size_t dim_ = 0;
  double J_ = 1.0;
  double U_ = 0.0;
  std::vector<MatrixEntry> entries_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> cols_;
  std::vector<double> values_;
};

inline SparseHamiltonian build_hamiltonian(const LatticeGraph& graph, const FockBasis& basis, double J,
                                           double U) {
  if (graph.n_sites() != basis.n_sites())
    throw Error(ErrorKind::invalid_argument, "fock",
                "lattice has " + std::to_string(graph.n_sites()) + " sites but basis has " +
                    std::to_string(basis.n_sites()));
  SparseHamiltonian h;
  h.dim_ = basis.size();
  h.J_ = J;
  h.U_ = U;
  std::vector<MatrixEntry> row;
  for (std::size_t a = 0; a < basis.size(); ++a) {
    const Bitmask s = basis.state(a);
    row.clear();
    int bonds = 0;
    for (const auto& [i, j] : graph.edges()) {
      const bool bi = (s >> i) & 1U;
      const bool bj = (s >> j) & 1U;
      if (bi && bj) {
        ++bonds;
      } else if (bi != bj) {
        // hard-core: a hop only exists onto an empty site
        const Bitmask t = s ^ (Bitmask{1} << i) ^ (Bitmask{1} << j);
        const std::size_t b = basis.index_of(t);
        if (b > a) row.push_back({a, b, -J});
      }
    }
    if (bonds != 0 && U != 0.0) h.entries_.push_back({a, a, U * bonds});
    std::sort(row.begin(), row.end(), [](const MatrixEntry& x, const MatrixEntry& y) { return x.col < y.col; });
    h.entries_.insert(h.entries_.end(), row.begin(), row.end());
  }
  h.build_csr();
  return h;
}

inline void SparseHamiltonian::write_coo(std::ostream& os) const {
  char buf[64];
  for (const auto& e : entries_) {
    std::snprintf(buf, sizeof buf, "%.17g", e.value);
    os << e.row << ' ' << e.col << ' ' << buf << '\n';
  }
}

/// Maps amplitudes of sector N onto sector n-N by complementing every
/// occupation bitmask.
inline std::vector<cplx> particle_hole_map(const FockBasis& from, const FockBasis& to,
                                           std::span<const cplx> amplitudes) {
  if (from.n_sites() != to.n_sites() || from.n_particles() + to.n_particles() != from.n_sites())
    throw Error(ErrorKind::invalid_argument, "fock", "sectors are not particle-hole complements");
  if (amplitudes.size() != from.size())
    throw Error(ErrorKind::invalid_argument, "fock", "amplitude vector does not match source basis");
  const Bitmask full = (Bitmask{1} << from.n_sites()) - 1;
  std::vector<cplx> out(to.size());
  for (std::size_t a = 0; a < from.size(); ++a) out[to.index_of(full & ~from.state(a))] = amplitudes[a];
  return out;
}

}  // namespace wentropy
