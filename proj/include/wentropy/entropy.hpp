#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wentropy/error.hpp"
#include "wentropy/fock.hpp"
#include "wentropy/wannier.hpp"

namespace wentropy {

/// -sum p ln p in nats, with 0 ln 0 = 0.
inline double shannon(std::span<const double> p) {
  double h = 0.0, total = 0.0;
  for (double v : p) {
    if (v < -1e-12)
      throw Error(ErrorKind::invalid_argument, "entropy", "negative probability " + std::to_string(v));
    total += v;
    if (v > 0.0) h -= v * std::log(v);
  }
  if (total > 1.0 + 1e-9)
    throw Error(ErrorKind::invalid_argument, "entropy", "probabilities sum to " + std::to_string(total) + " > 1");
  return h;
}

/// Shannon entropy of |lambda_m|^2 over the Fock basis.
inline double f_entropy(std::span<const cplx> amplitudes) {
  std::vector<double> p(amplitudes.size());
  std::transform(amplitudes.begin(), amplitudes.end(), p.begin(), [](cplx a) { return std::norm(a); });
  return shannon(p);
}

/// Mixed-state W entropy from the diagonal of rho in the Wannier basis.
inline double w_entropy_mixed(std::span<const double> cell_diagonal) { return shannon(cell_diagonal); }

/// Per-site level tables derived from a frame. Rows of C are rescaled to unit
/// norm inside the window so single-site distributions are normalised; the
/// frame's leakage is reported separately.
struct LevelTables {
  std::size_t n_cells = 0;
  std::array<std::vector<cplx>, 2> amplitude;    // C[m][i] / |C[m]|
  std::array<std::vector<double>, 2> density;    // |amplitude|^2
  cplx overlap01{};                              // sum_i conj(c0_i) c1_i

  static LevelTables from(const Eigen::MatrixXcd& C) {
    if (C.rows() != 2 || C.cols() < 1)
      throw Error(ErrorKind::invalid_argument, "entropy", "level table must be 2 x M");
    LevelTables t;
    t.n_cells = static_cast<std::size_t>(C.cols());
    for (int m = 0; m < 2; ++m) {
      const double norm = C.row(m).norm();
      if (!(norm > 0.0)) throw Error(ErrorKind::invalid_argument, "entropy", "level row has zero norm");
      auto& a = t.amplitude[static_cast<std::size_t>(m)];
      auto& d = t.density[static_cast<std::size_t>(m)];
      a.resize(t.n_cells);
      d.resize(t.n_cells);
      for (std::size_t i = 0; i < t.n_cells; ++i) {
        a[i] = C(m, static_cast<Eigen::Index>(i)) / norm;
        d[i] = std::norm(a[i]);
      }
    }
    for (std::size_t i = 0; i < t.n_cells; ++i) t.overlap01 += std::conj(t.amplitude[0][i]) * t.amplitude[1][i];
    return t;
  }
  static LevelTables from(const FrameCoefficients& f) { return from(f.C); }
  static LevelTables from(const WannierFrame& f) { return from(f.C); }

  double level_entropy(int m) const { return shannon(density[static_cast<std::size_t>(m)]); }
};

struct WEntropyOptions {
  double prune_threshold = 1e-14;
  double cost_budget = 2e9;  // projected leaf count above which evaluation refuses
};

struct WEntropy {
  double entropy = 0.0;
  double dropped_mass = 0.0;
  double error_bound = 0.0;
};

/// Upper bound on the entropy carried by `dropped` probability spread over at
/// most `cells` outcomes.
inline double pruning_error_bound(double dropped, double cells_log) {
  if (!(dropped > 0.0)) return 0.0;
  return dropped * (cells_log - std::log(dropped));
}

/// Evaluates W entropies of states in one Fock sector against one frame.
/// Construction precomputes the suffix trie of the basis and the merged cell
/// classes, so repeated evaluation along a trajectory is cheap.
///
/// Site k of Fock state m contributes the level s_k(m). Enumeration runs
/// depth-first over sites 0..n-1; at depth k the per-state partial products
/// are accumulated on the distinct suffixes (m >> k), because the remaining
/// factors depend only on those bits.
class WEntropyEvaluator {
 public:
  WEntropyEvaluator(const FockBasis& basis, LevelTables tables, WEntropyOptions options = {})
      : n_(basis.n_sites()), tables_(std::move(tables)), options_(options) {
    if (basis.size() == 0) throw Error(ErrorKind::invalid_argument, "entropy", "empty basis");
    dim_ = basis.size();
    build_trie(basis);
    build_classes();
    for (int m = 0; m < 2; ++m) level_h_[static_cast<std::size_t>(m)] = tables_.level_entropy(m);
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t n_classes() const noexcept { return class_mult_.size(); }
  const LevelTables& tables() const noexcept { return tables_; }
  const WEntropyOptions& options() const noexcept { return options_; }

  /// Paper formula p(i_1..i_n) = sum_m |lambda_m|^2 prod_k d_{s_k(m)}(i_k).
  WEntropy factorized(std::span<const cplx> amplitudes) const {
    check(amplitudes.size());
    check_cost(static_cast<double>(n_classes()));
    FactorizedRun run{*this, {}};
    run.buf.resize(static_cast<std::size_t>(n_) + 1);
    for (int k = 0; k <= n_; ++k) run.buf[static_cast<std::size_t>(k)].resize(levels_[static_cast<std::size_t>(k)].size());
    for (std::size_t m = 0; m < dim_; ++m) run.buf[0][m] = std::norm(amplitudes[m]);
    if (const auto f = single_support(run.buf[0]))
      run.entropy = product_entropy(run.buf[0][*f], 0, *f, class_h_);
    else
      run.dfs(0, 1.0);
    return finish(run.entropy, run.dropped);
  }

  /// Overlap formula p = |sum_m lambda_m prod_k C[s_k(m)][i_k]|^2, keeping the
  /// cross terms between Fock states.
  WEntropy exact(std::span<const cplx> amplitudes) const {
    check(amplitudes.size());
    check_cost(static_cast<double>(tables_.n_cells));
    ensure_overlaps();
    ExactRun run{*this, {}};
    run.buf.resize(static_cast<std::size_t>(n_) + 1);
    for (int k = 0; k <= n_; ++k) run.buf[static_cast<std::size_t>(k)].resize(levels_[static_cast<std::size_t>(k)].size());
    for (std::size_t m = 0; m < dim_; ++m) run.buf[0][m] = amplitudes[m];
    if (const auto f = single_support(run.buf[0]))
      run.entropy = product_entropy(std::norm(run.buf[0][*f]), 0, *f, level_h_);
    else
      run.dfs(0);
    return finish(run.entropy, run.dropped);
  }

  /// All M^n exact cell probabilities, site 0 fastest. Small systems only.
  std::vector<double> exact_cell_probabilities(std::span<const cplx> amplitudes) const {
    check(amplitudes.size());
    const double count = std::pow(static_cast<double>(tables_.n_cells), n_);
    if (count > 5e7) throw Error(ErrorKind::numerical, "entropy", "cell table too large to materialise");
    const auto M = tables_.n_cells;
    std::vector<double> out(static_cast<std::size_t>(count));
    std::vector<std::size_t> idx(static_cast<std::size_t>(n_), 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
      std::size_t r = flat;
      for (int k = 0; k < n_; ++k) {
        idx[static_cast<std::size_t>(k)] = r % M;
        r /= M;
      }
      cplx a{};
      for (std::size_t m = 0; m < dim_; ++m) {
        cplx term = amplitudes[m];
        for (int k = 0; k < n_; ++k)
          term *= tables_.amplitude[(states_[m] >> k) & 1U][idx[static_cast<std::size_t>(k)]];
        a += term;
      }
      out[flat] = std::norm(a);
    }
    return out;
  }

 private:
  void check(std::size_t n) const {
    if (n != dim_)
      throw Error(ErrorKind::invalid_argument, "entropy",
                  "state of length " + std::to_string(n) + " does not match basis dimension " + std::to_string(dim_));
  }
  void check_cost(double branching) const {
    const double cost = std::pow(branching, n_);
    if (cost > options_.cost_budget)
      throw Error(ErrorKind::numerical, "entropy",
                  "W-entropy enumeration needs up to " + std::to_string(cost) + " leaves (budget " +
                      std::to_string(options_.cost_budget) + "); use a smaller cell window or larger prune threshold");
  }
  template <class T>
  static std::optional<std::size_t> single_support(const std::vector<T>& v) {
    std::optional<std::size_t> at;
    for (std::size_t f = 0; f < v.size(); ++f)
      if (v[f] != T{}) {
        if (at) return std::nullopt;
        at = f;
      }
    return at;
  }

  // Entropy of weight v times the product distribution left below suffix f at depth k.
  double product_entropy(double v, int k, std::size_t f, const std::array<double, 2>& h) const {
    const int ones = std::popcount(levels_[static_cast<std::size_t>(k)][f]);
    const int zeros = n_ - k - ones;
    return -v * std::log(v) + v * (ones * h[1] + zeros * h[0]);
  }

  WEntropy finish(double entropy, double dropped) const {
    const double cells_log = n_ * std::log(static_cast<double>(tables_.n_cells));
    return {entropy, dropped, pruning_error_bound(dropped, cells_log)};
  }

  void build_trie(const FockBasis& basis) {
    states_ = basis.states();
    levels_.assign(static_cast<std::size_t>(n_) + 1, {});
    levels_[0] = states_;
    parent_.assign(static_cast<std::size_t>(n_), {});
    for (int k = 0; k < n_; ++k) {
      const auto& cur = levels_[static_cast<std::size_t>(k)];
      auto& next = levels_[static_cast<std::size_t>(k) + 1];
      for (Bitmask s : cur) next.push_back(s >> 1);
      next.erase(std::unique(next.begin(), next.end()), next.end());
      auto& par = parent_[static_cast<std::size_t>(k)];
      par.resize(next.size());
      for (std::size_t f = 0; f < next.size(); ++f) {
        for (unsigned bit = 0; bit < 2; ++bit) {
          const Bitmask want = (next[f] << 1) | bit;
          const auto it = std::lower_bound(cur.begin(), cur.end(), want);
          par[f][bit] = (it != cur.end() && *it == want) ? static_cast<long>(it - cur.begin()) : -1;
        }
      }
    }
  }

  // Cells with equal (d0, d1) give identical probabilities; enumerate one
  // representative per class with a multiplicity. Classes are ordered by
  // descending mass.
  void build_classes() {
    const auto& d0 = tables_.density[0];
    const auto& d1 = tables_.density[1];
    std::vector<std::size_t> order(tables_.n_cells);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return d0[a] != d0[b] ? d0[a] > d0[b] : d1[a] > d1[b];
    });
    // mirror-image cells agree only to quadrature accuracy
    auto same = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)) + 1e-16; };
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i : order) {
      bool placed = false;
      for (auto& g : groups) {
        if (same(d0[g.front()], d0[i]) && same(d1[g.front()], d1[i])) {
          g.push_back(i);
          placed = true;
          break;
        }
      }
      if (!placed) groups.push_back({i});
    }
    for (const auto& g : groups) {
      double s0 = 0.0, s1 = 0.0;
      for (std::size_t i : g) {
        s0 += d0[i];
        s1 += d1[i];
      }
      const double mult = static_cast<double>(g.size());
      class_d_[0].push_back(s0 / mult);
      class_d_[1].push_back(s1 / mult);
      class_mult_.push_back(mult);
    }
    std::vector<std::size_t> idx(class_mult_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return std::max(class_d_[0][a], class_d_[1][a]) > std::max(class_d_[0][b], class_d_[1][b]);
    });
    std::array<std::vector<double>, 2> d;
    std::vector<double> mult;
    for (std::size_t i : idx) {
      d[0].push_back(class_d_[0][i]);
      d[1].push_back(class_d_[1][i]);
      mult.push_back(class_mult_[i]);
    }
    class_d_ = std::move(d);
    class_mult_ = std::move(mult);
    for (int m = 0; m < 2; ++m) {
      double h = 0.0;
      for (std::size_t c = 0; c < class_mult_.size(); ++c) {
        const double v = class_d_[static_cast<std::size_t>(m)][c];
        if (v > 0.0) h -= class_mult_[c] * v * std::log(v);
      }
      class_h_[static_cast<std::size_t>(m)] = h;
    }
  }

  // by_level[k][f * size + g] = prod over the remaining sites of <c_{s(f)}|c_{s(g)}>
  void ensure_overlaps() const {
    std::call_once(overlaps_->once, [this] {
      const cplx G[2][2] = {{1.0, tables_.overlap01}, {std::conj(tables_.overlap01), 1.0}};
      auto& all = overlaps_->by_level;
      all.resize(static_cast<std::size_t>(n_) + 1);
      for (int k = 0; k <= n_; ++k) {
        const auto& lv = levels_[static_cast<std::size_t>(k)];
        auto& ov = all[static_cast<std::size_t>(k)];
        ov.assign(lv.size() * lv.size(), 1.0);
        for (std::size_t f = 0; f < lv.size(); ++f)
          for (std::size_t g = 0; g < lv.size(); ++g) {
            cplx prod = 1.0;
            for (int j = 0; j < n_ - k; ++j) prod *= G[(lv[f] >> j) & 1U][(lv[g] >> j) & 1U];
            ov[f * lv.size() + g] = prod;
          }
      }
    });
  }

  struct FactorizedRun {
    const WEntropyEvaluator& ev;
    std::vector<std::vector<double>> buf;
    double entropy = 0.0;
    double dropped = 0.0;

    void dfs(int k, double mult) {
      const auto ks = static_cast<std::size_t>(k);
      const auto& par = ev.parent_[ks];
      const auto& in = buf[ks];
      auto& out = buf[ks + 1];
      const double theta = ev.options_.prune_threshold;
      for (std::size_t c = 0; c < ev.class_mult_.size(); ++c) {
        const double a0 = ev.class_d_[0][c];
        const double a1 = ev.class_d_[1][c];
        double mass = 0.0;
        std::size_t support = 0, last = 0;
        for (std::size_t f = 0; f < out.size(); ++f) {
          const long p0 = par[f][0], p1 = par[f][1];
          const double v = (p0 >= 0 ? in[static_cast<std::size_t>(p0)] * a0 : 0.0) +
                           (p1 >= 0 ? in[static_cast<std::size_t>(p1)] * a1 : 0.0);
          out[f] = v;
          mass += v;
          if (v > 0.0) {
            ++support;
            last = f;
          }
        }
        if (mass <= 0.0) continue;
        const double m = mult * ev.class_mult_[c];
        if (support == 1) {
          entropy += m * ev.product_entropy(out[last], k + 1, last, ev.class_h_);
          continue;
        }
        if (mass < theta) {
          dropped += m * mass;
          continue;
        }
        dfs(k + 1, m);
      }
    }
  };

  struct ExactRun {
    const WEntropyEvaluator& ev;
    std::vector<std::vector<cplx>> buf;
    double entropy = 0.0;
    double dropped = 0.0;

    void dfs(int k) {
      const auto ks = static_cast<std::size_t>(k);
      const auto& par = ev.parent_[ks];
      const auto& in = buf[ks];
      auto& out = buf[ks + 1];
      const double theta = ev.options_.prune_threshold;
      for (std::size_t i = 0; i < ev.tables_.n_cells; ++i) {
        const cplx a0 = ev.tables_.amplitude[0][i];
        const cplx a1 = ev.tables_.amplitude[1][i];
        double l1 = 0.0;
        std::size_t support = 0, last = 0;
        for (std::size_t f = 0; f < out.size(); ++f) {
          const long p0 = par[f][0], p1 = par[f][1];
          const cplx v = (p0 >= 0 ? in[static_cast<std::size_t>(p0)] * a0 : cplx{}) +
                         (p1 >= 0 ? in[static_cast<std::size_t>(p1)] * a1 : cplx{});
          out[f] = v;
          l1 += std::abs(v);
          if (v != cplx{}) {
            ++support;
            last = f;
          }
        }
        if (l1 == 0.0) continue;
        if (support == 1) {
          entropy += ev.product_entropy(std::norm(out[last]), k + 1, last, ev.level_h_);
          continue;
        }
        // |sum_f v_f u_f|^2 <= (sum_f |v_f|)^2 for unit-norm product vectors u_f
        if (l1 * l1 < theta) {
          const auto& ov = ev.overlaps_->by_level[ks + 1];
          cplx mass{};
          for (std::size_t f = 0; f < out.size(); ++f)
            for (std::size_t g = 0; g < out.size(); ++g) mass += std::conj(out[f]) * out[g] * ov[f * out.size() + g];
          dropped += std::max(mass.real(), 0.0);
          continue;
        }
        dfs(k + 1);
      }
    }
  };

  int n_ = 0;
  std::size_t dim_ = 0;
  LevelTables tables_;
  WEntropyOptions options_;
  std::vector<Bitmask> states_;
  std::vector<std::vector<Bitmask>> levels_;
  std::vector<std::vector<std::array<long, 2>>> parent_;
  std::array<std::vector<double>, 2> class_d_;
  std::vector<double> class_mult_;
  std::array<double, 2> class_h_{};  // level entropies over the merged classes
  std::array<double, 2> level_h_{};
  struct Overlaps {
    std::once_flag once;
    std::vector<std::vector<cplx>> by_level;
  };
  std::shared_ptr<Overlaps> overlaps_ = std::make_shared<Overlaps>();
};

inline WEntropy w_entropy_factorized(const FockBasis& basis, std::span<const cplx> amplitudes,
                                     const LevelTables& tables, WEntropyOptions options = {}) {
  return WEntropyEvaluator(basis, tables, options).factorized(amplitudes);
}

inline WEntropy w_entropy_exact(const FockBasis& basis, std::span<const cplx> amplitudes, const LevelTables& tables,
                                WEntropyOptions options = {}) {
  return WEntropyEvaluator(basis, tables, options).exact(amplitudes);
}

/// Mean W entropy of the Fock basis states. Each is a product state, so its
/// entropy is the sum of single-site level entropies.
inline double mean_fock_w_entropy(const FockBasis& basis, const LevelTables& tables) {
  const double h0 = tables.level_entropy(0);
  const double h1 = tables.level_entropy(1);
  double total = 0.0;
  for (Bitmask s : basis.states()) {
    double hs = 0.0;
    for (int k = 0; k < basis.n_sites(); ++k) hs += ((s >> k) & 1U) ? h1 : h0;
    total += hs;
  }
  return total / static_cast<double>(basis.size());
}

}  // namespace wentropy
