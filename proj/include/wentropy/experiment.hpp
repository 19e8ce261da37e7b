#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "wentropy/analysis.hpp"
#include "wentropy/config.hpp"
#include "wentropy/dynamics.hpp"
#include "wentropy/entropy.hpp"
#include "wentropy/fock.hpp"
#include "wentropy/lattice.hpp"
#include "wentropy/parallel.hpp"
#include "wentropy/trace.hpp"
#include "wentropy/wannier.hpp"

namespace wentropy {

// ---------------------------------------------------------------------------
// Output helpers

/// Writes `contents` to a sibling temporary file and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::config, "cli", "cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorKind::config, "cli", "failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

/// Output directory: explicit flag, then WENTROPY_OUTPUT_DIR, then config.
inline std::filesystem::path output_directory(const RunConfig& cfg, const std::string& flag = "") {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("WENTROPY_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

inline int resolve_workers(int requested) { return requested > 0 ? requested : default_workers(); }

// ---------------------------------------------------------------------------
// System and frame assembly

struct System {
  LatticeGraph graph;
  std::shared_ptr<const FockBasis> basis;
  std::shared_ptr<const SparseHamiltonian> hamiltonian;
  std::shared_ptr<const Propagator> propagator;
  QuantumState initial;
};

inline System build_system(const RunConfig& cfg) {
  System s{cfg.lattice(), nullptr, nullptr, nullptr, {}};
  auto basis = std::make_shared<const FockBasis>(enumerate_basis(s.graph.n_sites(), cfg.N));
  auto h = std::make_shared<const SparseHamiltonian>(build_hamiltonian(s.graph, *basis, cfg.J, cfg.U));
  s.basis = basis;
  s.hamiltonian = h;
  s.propagator = std::make_shared<const Propagator>(h, cfg.propagator, KrylovOptions{cfg.krylov_dim, cfg.krylov_tol});
  s.initial = fock_state(basis, cfg.sites);
  return s;
}

/// Frames depend only on their parameters, so families of runs share one.
inline FrameCoefficients acquire_frame(const RunConfig& cfg) {
  if (!cfg.frame_file.empty()) {
    std::ifstream in(cfg.frame_file);
    if (!in) throw Error(ErrorKind::config, "cli", "cannot open frame file '" + cfg.frame_file + "'");
    return read_frame(in);
  }
  static std::mutex mu;
  static std::map<std::string, FrameCoefficients> cache;
  const std::string key = format_number(cfg.grid.x0) + "|" + format_number(cfg.grid.k0) + "|" +
                          format_number(cfg.grid.zeta) + "|" + std::to_string(cfg.grid.window_x) + "|" +
                          format_number(cfg.grid.dx) + "|" + format_number(cfg.grid.half_extent) + "|" +
                          format_number(cfg.oscillator_length) + "|" + format_number(cfg.leakage_tolerance);
  std::lock_guard lock(mu);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, FrameCoefficients::from(build_frame(cfg.grid, cfg.oscillator_length, cfg.leakage_tolerance)))
             .first;
  return it->second;
}

/// Entropies of one sampled state.
struct EntropySample {
  double s_f = 0.0;
  std::optional<WEntropy> w;
};

class EntropySampler {
 public:
  EntropySampler(const RunConfig& cfg, const FockBasis& basis) : method_(cfg.method) {
    if (cfg.w_enabled()) {
      frame_ = acquire_frame(cfg);
      hash_ = frame_hash(*frame_);
      evaluator_.emplace(basis, LevelTables::from(*frame_), WEntropyOptions{cfg.theta, cfg.cost_budget});
    }
  }

  bool has_w() const noexcept { return evaluator_.has_value(); }
  const std::string& frame_id() const noexcept { return hash_; }
  const std::optional<WEntropyEvaluator>& evaluator() const noexcept { return evaluator_; }

  EntropySample operator()(std::span<const cplx> psi, bool want_w = true) const {
    EntropySample out;
    out.s_f = f_entropy(psi);
    if (want_w && evaluator_)
      out.w = method_ == WMethod::exact ? evaluator_->exact(psi) : evaluator_->factorized(psi);
    return out;
  }

 private:
  WMethod method_;
  std::optional<FrameCoefficients> frame_;
  std::optional<WEntropyEvaluator> evaluator_;
  std::string hash_ = "none";
};

inline TraceMetadata trace_metadata(const RunConfig& cfg, const System& sys, const EntropySampler& sampler) {
  TraceMetadata m;
  m.n = sys.graph.n_sites();
  m.N = cfg.N;
  m.shape = to_string(sys.graph.shape());
  m.J = cfg.J;
  m.U = cfg.U;
  m.sites = cfg.sites;
  m.frame = sampler.frame_id();
  m.window = std::to_string(cfg.grid.window_x);
  m.theta = cfg.theta;
  m.method = cfg.method == WMethod::exact ? "exact" : "factorized";
  return m;
}

/// Samples t = k dt for k = 0..n_steps and records both entropies.
inline EntropyTrace run_trace(const RunConfig& cfg, const System& sys, const EntropySampler& sampler, int workers = 1) {
  EntropyTrace tr;
  tr.meta = trace_metadata(cfg, sys, sampler);
  const std::size_t count = cfg.n_steps() + 1;
  tr.times.resize(count);
  tr.s_f.resize(count);
  if (sampler.has_w()) {
    tr.s_w.resize(count);
    tr.dropped_mass.resize(count);
    tr.error_bound.resize(count);
  }
  for_each_sample(
      *sys.propagator, sys.initial, cfg.dt, cfg.n_steps(),
      [&](std::size_t k, double t, std::span<const cplx> psi) {
        const auto e = sampler(psi);
        tr.times[k] = t;
        tr.s_f[k] = e.s_f;
        if (e.w) {
          tr.s_w[k] = e.w->entropy;
          tr.dropped_mass[k] = e.w->dropped_mass;
          tr.error_bound[k] = e.w->error_bound;
        }
      },
      workers);
  return tr;
}

inline EntropyTrace run_trace(const RunConfig& cfg, int workers = 1) {
  const auto sys = build_system(cfg);
  const EntropySampler sampler(cfg, *sys.basis);
  return run_trace(cfg, sys, sampler, workers);
}

/// Regression period found by sampling up to cfg.horizon, stopping at the
/// first return. Spectral propagation evaluates blocks of samples in parallel;
/// the result does not depend on the worker count.
inline PeriodResult scan_period(const RunConfig& cfg, const System& sys, const EntropySampler& sampler, bool use_w,
                                int workers = 1) {
  if (use_w && !sampler.has_w())
    throw Error(ErrorKind::config, "analysis", "period on s_w requested but W entropy is disabled");
  PeriodScanner scanner(cfg.eps);
  const auto total = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
  auto value = [&](std::span<const cplx> psi) {
    const auto e = sampler(psi, use_w);
    return use_w ? e.w->entropy : e.s_f;
  };
  const auto& prop = *sys.propagator;
  if (prop.mode() == PropagatorMode::spectral) {
    const auto coeffs = prop.eigen_coefficients(sys.initial.amplitudes);
    const std::size_t block = 256;
    std::vector<double> vals;
    for (std::size_t start = 0; start <= total; start += block) {
      const std::size_t len = std::min(block, total + 1 - start);
      vals.assign(len, 0.0);
      parallel_for(len, workers, [&](std::size_t i) {
        const double t = static_cast<double>(start + i) * cfg.dt;
        vals[i] = value(prop.from_coefficients(coeffs, t));
      });
      for (std::size_t i = 0; i < len; ++i)
        if (scanner.push(static_cast<double>(start + i) * cfg.dt, vals[i])) return scanner.result();
    }
    return scanner.result();
  }
  std::vector<cplx> psi = sys.initial.amplitudes;
  for (std::size_t k = 0; k <= total; ++k) {
    if (k > 0) psi = prop.evolve(psi, cfg.dt);
    if (scanner.push(static_cast<double>(k) * cfg.dt, value(psi))) break;
  }
  return scanner.result();
}

inline bool period_uses_w(const RunConfig& cfg) {
  switch (cfg.period_column) {
    case PeriodColumn::s_f: return false;
    case PeriodColumn::s_w: return true;
    case PeriodColumn::automatic: return cfg.w_enabled();
  }
  return false;
}

// ---------------------------------------------------------------------------
// Per-run analysis

struct RunSummary {
  std::optional<LinearFit> linear;
  std::optional<SaturationFit> saturation;
  std::string saturation_column;
  std::optional<PeriodResult> period;
  std::string period_column;
  double s_w_min = 0.0, s_w_max = 0.0, s_w_initial = 0.0;
  double s_f_max = 0.0;
  double initial_slope = 0.0;
  double increment_slope = 0.0;
  std::vector<std::string> errors;
};

inline SaturationOptions saturation_options(const RunConfig& cfg) {
  SaturationOptions o;
  o.plateau_fraction = cfg.plateau_fraction;
  o.plateau_tolerance = cfg.plateau_tolerance;
  return o;
}

/// Fits and diagnostics computed from a finished trace.
inline RunSummary summarize_trace(const EntropyTrace& tr, const RunConfig& cfg) {
  RunSummary s;
  const auto& main = tr.has_w() ? tr.s_w : tr.s_f;
  s.s_f_max = *std::max_element(tr.s_f.begin(), tr.s_f.end());
  if (tr.has_w()) {
    s.s_w_min = *std::min_element(tr.s_w.begin(), tr.s_w.end());
    s.s_w_max = *std::max_element(tr.s_w.begin(), tr.s_w.end());
    s.s_w_initial = tr.s_w.front();
    try {
      s.linear = fit_linear(tr.s_f, tr.s_w);
      s.increment_slope = increment_slope(tr.s_f, tr.s_w);
    } catch (const Error& e) {
      s.errors.push_back(e.what());
    }
  }
  try {
    s.initial_slope = initial_slope(tr.times, main);
  } catch (const Error& e) {
    s.errors.push_back(e.what());
  }
  s.saturation_column = tr.has_w() ? "s_w" : "s_f";
  try {
    std::vector<double> rel(main.size());
    for (std::size_t i = 0; i < main.size(); ++i) rel[i] = main[i] - main.front();
    s.saturation = fit_saturation(tr.times, rel, saturation_options(cfg));
  } catch (const Error& e) {
    s.errors.push_back(e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class Family { vary_n, vary_N, vary_position, vary_shape };

inline Family parse_family(const std::string& s) {
  if (s == "vary-n") return Family::vary_n;
  if (s == "vary-N") return Family::vary_N;
  if (s == "vary-position") return Family::vary_position;
  if (s == "vary-shape") return Family::vary_shape;
  throw Error(ErrorKind::config, "analysis", "unknown sweep family '" + s + "'");
}

inline std::string first_sites(int N) {
  std::string out;
  for (int i = 0; i < N; ++i) out += (i ? ";" : "") + std::to_string(i);
  return out;
}

/// Expands a family over string values: site counts, particle numbers, sites,
/// or shapes ("chain", "ring", "grid<R>x<C>").
inline std::vector<ConfigMap> expand_family(const ConfigMap& base, Family family, const std::vector<std::string>& values) {
  std::vector<ConfigMap> out;
  const RunConfig b = resolve(base);
  for (const auto& v : values) {
    ConfigMap c = base;
    switch (family) {
      case Family::vary_n:
        c.set("lattice.n", v);
        break;
      case Family::vary_N:
        c.set("physics.N", v);
        c.set("physics.sites", first_sites(detail::parse_int(v, "sweep value")));
        break;
      case Family::vary_position:
        c.set("physics.N", "1");
        c.set("physics.sites", v);
        break;
      case Family::vary_shape: {
        const int sites = b.n_sites();
        if (v.rfind("grid", 0) == 0) {
          const auto x = v.find('x');
          if (x == std::string::npos) throw Error(ErrorKind::config, "analysis", "grid shape must look like grid4x4");
          c.set("lattice.shape", "grid");
          c.set("lattice.rows", v.substr(4, x - 4));
          c.set("lattice.cols", v.substr(x + 1));
        } else {
          c.set("lattice.shape", v);
          c.set("lattice.n", std::to_string(sites));
        }
        break;
      }
    }
    out.push_back(c);
  }
  return out;
}

struct SweepRow {
  ConfigMap config;
  RunSummary summary;
  std::string shape;
  std::string error;
};

/// Trace, fits and period for one configuration; failures are recorded.
inline SweepRow run_point(const ConfigMap& c, int workers, bool with_period = true) {
  SweepRow row{c, {}, "", ""};
  try {
    const RunConfig cfg = resolve(c);
    const auto sys = build_system(cfg);
    row.shape = to_string(sys.graph.shape());
    const EntropySampler sampler(cfg, *sys.basis);
    const auto tr = run_trace(cfg, sys, sampler, workers);
    row.summary = summarize_trace(tr, cfg);
    if (with_period) {
      const bool use_w = period_uses_w(cfg);
      row.summary.period = scan_period(cfg, sys, sampler, use_w, workers);
      row.summary.period_column = use_w ? "s_w" : "s_f";
    }
  } catch (const Error& e) {
    row.error = e.what();
  }
  return row;
}

inline std::vector<SweepRow> run_sweep(const std::vector<ConfigMap>& points, int workers, bool with_period = true) {
  std::vector<SweepRow> rows(points.size());
  // points run one after another; each point spreads its samples over the workers
  for (std::size_t i = 0; i < points.size(); ++i) rows[i] = run_point(points[i], workers, with_period);
  return rows;
}

inline std::string num_or_empty(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "n,N,shape,init_sites,k,b,r2_lin,A,omega,r2_sat,T,found,status\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    const auto& c = r.config;
    std::string n = c.get("lattice.n");
    if (c.get("lattice.shape") == "grid")
      n = std::to_string(detail::parse_int(c.get("lattice.rows"), "rows") * detail::parse_int(c.get("lattice.cols"), "cols"));
    os << n << ',' << c.get("physics.N") << ',' << r.shape << ',' << c.get("physics.sites") << ',';
    os << (s.linear ? format_number(s.linear->k) : "") << ',' << (s.linear ? format_number(s.linear->b) : "") << ','
       << (s.linear ? format_number(s.linear->r2) : "") << ',';
    os << (s.saturation ? format_number(s.saturation->A) : "") << ','
       << (s.saturation ? format_number(s.saturation->omega) : "") << ','
       << (s.saturation ? format_number(s.saturation->r2) : "") << ',';
    if (s.period) {
      os << (s.period->found() ? format_number(s.period->T) : "") << ',' << to_string(s.period->status);
    } else {
      os << ',';
    }
    std::string status = r.error.empty() ? "ok" : r.error;
    std::replace(status.begin(), status.end(), ',', ';');
    os << ',' << status << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json period_json(const PeriodResult& p) {
  nlohmann::ordered_json j;
  j["status"] = to_string(p.status);
  j["T"] = p.found() ? nlohmann::ordered_json(p.T) : nlohmann::ordered_json(nullptr);
  j["epsilon_at_T"] = p.found() ? nlohmann::ordered_json(p.epsilon_at_T) : nlohmann::ordered_json(nullptr);
  j["armed_at"] = std::isnan(p.armed_at) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(p.armed_at);
  j["horizon"] = p.horizon;
  j["eps"] = p.eps;
  return j;
}

// ---------------------------------------------------------------------------
// Figure families

struct TrendCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct FigureOutput {
  std::string id;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  std::vector<TrendCheck> checks;
  nlohmann::ordered_json data = nlohmann::ordered_json::object();

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const TrendCheck& c) { return c.pass; });
  }
  std::string report() const {
    std::ostringstream os;
    for (const auto& c : checks) os << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    return os.str();
  }
};

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig3", "fig4",  "fig5",  "fig6",  "fig7", "fig9",
                                            "fig10", "fig11", "fig12", "fig13", "fig14"};
  return ids;
}

namespace detail {

inline std::string list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i]);
  return s;
}

inline bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

inline double max_pairwise_gap(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
}

inline ConfigMap with(ConfigMap c, std::initializer_list<std::pair<const char*, std::string>> kv) {
  for (const auto& [k, v] : kv) c.set(k, v);
  return c;
}

inline std::string trace_text(const EntropyTrace& tr) {
  std::ostringstream os;
  write_trace_csv(os, tr);
  return os.str();
}

// Runs traces for a family and returns them with their summaries.
struct FamilyRun {
  std::vector<ConfigMap> configs;
  std::vector<EntropyTrace> traces;
  std::vector<RunSummary> summaries;
};

inline FamilyRun run_family(const std::vector<ConfigMap>& configs, int workers) {
  FamilyRun fr;
  fr.configs = configs;
  for (const auto& c : configs) {
    const RunConfig cfg = resolve(c);
    const auto sys = build_system(cfg);
    const EntropySampler sampler(cfg, *sys.basis);
    fr.traces.push_back(run_trace(cfg, sys, sampler, workers));
    fr.summaries.push_back(summarize_trace(fr.traces.back(), cfg));
  }
  return fr;
}

inline std::vector<ConfigMap> chain_n_family(const ConfigMap& base, int lo, int hi) {
  std::vector<ConfigMap> out;
  for (int n = lo; n <= hi; ++n)
    out.push_back(with(base, {{"lattice.shape", "chain"}, {"lattice.n", std::to_string(n)}, {"physics.N", "1"}, {"physics.sites", "0"}}));
  return out;
}

inline std::vector<ConfigMap> particle_family(const ConfigMap& base) {
  std::vector<ConfigMap> out;
  for (int N = 1; N <= 4; ++N)
    out.push_back(with(base, {{"lattice.shape", "chain"}, {"lattice.n", "5"}, {"physics.N", std::to_string(N)},
                              {"physics.sites", first_sites(N)}}));
  return out;
}

inline std::vector<ConfigMap> position_family(const ConfigMap& base) {
  std::vector<ConfigMap> out;
  for (int p = 0; p < 3; ++p)
    out.push_back(with(base, {{"lattice.shape", "chain"}, {"lattice.n", "5"}, {"physics.N", "1"},
                              {"physics.sites", std::to_string(p)}}));
  return out;
}

inline std::vector<double> linear_k(const FamilyRun& fr) {
  std::vector<double> v;
  for (const auto& s : fr.summaries) v.push_back(s.linear ? s.linear->k : std::nan(""));
  return v;
}
inline std::vector<double> linear_b(const FamilyRun& fr) {
  std::vector<double> v;
  for (const auto& s : fr.summaries) v.push_back(s.linear ? s.linear->b : std::nan(""));
  return v;
}
inline std::vector<double> linear_r2(const FamilyRun& fr) {
  std::vector<double> v;
  for (const auto& s : fr.summaries) v.push_back(s.linear ? s.linear->r2 : std::nan(""));
  return v;
}

inline std::string linear_table(const FamilyRun& fr, const std::string& key_name, const std::string& key) {
  std::ostringstream os;
  os << key_name << ",k,b,r2_lin,increment_slope,initial_slope\n";
  for (std::size_t i = 0; i < fr.configs.size(); ++i) {
    const auto& s = fr.summaries[i];
    os << fr.configs[i].get(key) << ',' << (s.linear ? format_number(s.linear->k) : "") << ','
       << (s.linear ? format_number(s.linear->b) : "") << ',' << (s.linear ? format_number(s.linear->r2) : "") << ','
       << format_number(s.increment_slope) << ',' << format_number(s.initial_slope) << '\n';
  }
  return os.str();
}

inline void add_traces(FigureOutput& out, const FamilyRun& fr, const std::string& key_name, const std::string& key) {
  for (std::size_t i = 0; i < fr.traces.size(); ++i) {
    std::string tag = fr.configs[i].get(key);
    std::replace(tag.begin(), tag.end(), ';', '_');
    out.files.emplace_back(out.id + "_" + key_name + tag + ".csv", trace_text(fr.traces[i]));
  }
}

inline std::string period_table(const std::vector<std::string>& labels, const std::string& label_name,
                                const std::vector<PeriodResult>& periods) {
  std::ostringstream os;
  os << label_name << ",T,status,epsilon_at_T,armed_at,horizon\n";
  for (std::size_t i = 0; i < periods.size(); ++i) {
    const auto& p = periods[i];
    os << labels[i] << ',' << (p.found() ? format_number(p.T) : "") << ',' << to_string(p.status) << ','
       << (p.found() ? format_number(p.epsilon_at_T) : "") << ','
       << (std::isnan(p.armed_at) ? "" : format_number(p.armed_at)) << ',' << format_number(p.horizon) << '\n';
  }
  return os.str();
}

inline std::string period_text(const PeriodResult& p) {
  if (p.found()) return format_number(p.T);
  if (p.status == PeriodStatus::not_found) return ">" + format_number(p.horizon);
  return "n/a";
}

inline std::vector<PeriodResult> family_periods(const std::vector<ConfigMap>& configs, bool use_w, int workers) {
  std::vector<PeriodResult> out;
  for (const auto& c : configs) {
    const RunConfig cfg = resolve(c);
    const auto sys = build_system(cfg);
    const EntropySampler sampler(cfg, *sys.basis);
    out.push_back(scan_period(cfg, sys, sampler, use_w, workers));
  }
  return out;
}

}  // namespace detail

/// Runs the canned configuration family for a figure. `base` supplies the
/// shared settings (frame, dt, entropy options); the family fixes lattice and
/// particle settings.
inline FigureOutput run_figure(const std::string& id, const ConfigMap& base, int workers) {
  using namespace detail;
  FigureOutput out;
  out.id = id;
  const RunConfig b = resolve(base);

  if (id == "fig3" || id == "fig4" || id == "fig5" || id == "fig6") {
    const auto fr = run_family(chain_n_family(base, 3, 6), workers);
    const auto k = linear_k(fr), bb = linear_b(fr), r2 = linear_r2(fr);
    std::vector<double> mins, maxs, ns{3, 4, 5, 6};
    for (const auto& s : fr.summaries) {
      mins.push_back(s.s_w_min);
      maxs.push_back(s.s_w_max);
    }
    if (id == "fig3") {
      add_traces(out, fr, "n", "lattice.n");
      std::ostringstream os;
      os << "n,s_w_min,s_w_max,s_f_max\n";
      for (std::size_t i = 0; i < fr.summaries.size(); ++i)
        os << fr.configs[i].get("lattice.n") << ',' << format_number(mins[i]) << ',' << format_number(maxs[i]) << ','
           << format_number(fr.summaries[i].s_f_max) << '\n';
      out.files.emplace_back("fig3.csv", os.str());
      out.checks.push_back({"max S_w increases with n", strictly_increasing(maxs), list(maxs)});
      out.checks.push_back({"min S_w increases with n", strictly_increasing(mins), list(mins)});
    } else {
      out.files.emplace_back(id + ".csv", linear_table(fr, "n", "lattice.n"));
      if (id == "fig4") {
        const bool ok = std::all_of(r2.begin(), r2.end(), [](double v) { return v > 0.9; });
        out.checks.push_back({"linear law r2 > 0.9 for every n", ok, list(r2)});
        out.checks.push_back({"intercept b > 0", std::all_of(bb.begin(), bb.end(), [](double v) { return v > 0.0; }), list(bb)});
      } else if (id == "fig5") {
        out.checks.push_back({"intercept b increases with n", strictly_increasing(bb), list(bb)});
        double lin_r2 = std::nan("");
        try {
          lin_r2 = fit_linear(ns, bb).r2;
        } catch (const Error&) {
        }
        out.checks.push_back({"intercept b is linear in n (r2 > 0.99)", lin_r2 > 0.99, format_number(lin_r2)});
      } else {
        out.checks.push_back({"slope k decreases with n", strictly_decreasing(k), list(k)});
      }
    }
  } else if (id == "fig7" || id == "fig9") {
    const auto fr = run_family(particle_family(base), workers);
    if (id == "fig7") {
      add_traces(out, fr, "N", "physics.N");
      std::vector<double> init;
      std::ostringstream os;
      os << "N,s_w_initial,s_w_min,s_w_max\n";
      for (std::size_t i = 0; i < fr.summaries.size(); ++i) {
        const auto& s = fr.summaries[i];
        init.push_back(s.s_w_initial);
        os << fr.configs[i].get("physics.N") << ',' << format_number(s.s_w_initial) << ',' << format_number(s.s_w_min)
           << ',' << format_number(s.s_w_max) << '\n';
      }
      out.files.emplace_back("fig7.csv", os.str());
      out.checks.push_back({"initial S_w increases with N", strictly_increasing(init), list(init)});
    } else {
      out.files.emplace_back("fig9.csv", linear_table(fr, "N", "physics.N"));
      const auto k = linear_k(fr), bb = linear_b(fr);
      std::vector<double> db;
      for (std::size_t i = 1; i < bb.size(); ++i) db.push_back(bb[i] - bb[i - 1]);
      out.checks.push_back({"slope k decreases with N", strictly_decreasing(k), list(k)});
      out.checks.push_back({"intercept b increases with N", strictly_increasing(bb), list(bb)});
      out.checks.push_back({"increase of b slows down", strictly_decreasing(db), list(db)});
    }
  } else if (id == "fig10" || id == "fig12") {
    const auto configs = position_family(base);
    const auto fr = run_family(configs, workers);
    if (id == "fig10") {
      add_traces(out, fr, "site", "physics.sites");
      const auto periods = family_periods(configs, b.w_enabled(), workers);
      std::vector<double> mins, maxs, ts;
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < fr.summaries.size(); ++i) {
        mins.push_back(fr.summaries[i].s_w_min);
        maxs.push_back(fr.summaries[i].s_w_max);
        ts.push_back(periods[i].found() ? periods[i].T : std::nan(""));
        labels.push_back(configs[i].get("physics.sites"));
      }
      std::ostringstream os;
      os << "site,s_w_min,s_w_max,T\n";
      for (std::size_t i = 0; i < mins.size(); ++i)
        os << labels[i] << ',' << format_number(mins[i]) << ',' << format_number(maxs[i]) << ','
           << period_text(periods[i]) << '\n';
      out.files.emplace_back("fig10.csv", os.str());
      out.checks.push_back({"same minimum S_w across positions (gap < 0.05)", max_pairwise_gap(mins) < 0.05, list(mins)});
      out.checks.push_back({"same maximum S_w across positions (gap < 0.05)", max_pairwise_gap(maxs) < 0.05, list(maxs)});
      const bool all_found = std::all_of(periods.begin(), periods.end(), [](const PeriodResult& p) { return p.found(); });
      out.checks.push_back({"regression period found for every position", all_found, list(ts)});
    } else {
      out.files.emplace_back("fig12.csv", linear_table(fr, "site", "physics.sites"));
      const auto k = linear_k(fr), bb = linear_b(fr);
      out.checks.push_back({"slopes agree across positions (|dk| < 0.05)", max_pairwise_gap(k) < 0.05, list(k)});
      out.checks.push_back({"intercepts agree across positions (|db| < 0.05)", max_pairwise_gap(bb) < 0.05, list(bb)});
    }
  } else if (id == "fig13") {
    const ConfigMap sat = with(base, {{"entropy.enable_w", "false"}, {"physics.t_max", "50"}});
    struct Case {
      std::string label, shape, n, rows, cols, N;
    };
    const std::vector<Case> cases{{"chain16_N4", "chain", "16", "4", "4", "4"},
                                  {"chain18_N6", "chain", "18", "4", "4", "6"},
                                  {"grid4x4_N4", "grid", "16", "4", "4", "4"},
                                  {"chain6_N1", "chain", "6", "4", "4", "1"},
                                  {"chain3_N1", "chain", "3", "4", "4", "1"}};
    std::vector<ConfigMap> configs;
    for (const auto& c : cases)
      configs.push_back(with(sat, {{"lattice.shape", c.shape}, {"lattice.n", c.n}, {"lattice.rows", c.rows},
                                   {"lattice.cols", c.cols}, {"physics.N", c.N},
                                   {"physics.sites", first_sites(std::stoi(c.N))}}));
    const auto fr = run_family(configs, workers);
    std::ostringstream os;
    os << "system,A,omega,r2_sat,window_end,A_init,omega_init\n";
    std::vector<double> r2;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& s = fr.summaries[i];
      out.files.emplace_back("fig13_" + cases[i].label + ".csv", trace_text(fr.traces[i]));
      r2.push_back(s.saturation ? s.saturation->r2 : std::nan(""));
      os << cases[i].label << ',';
      if (s.saturation)
        os << format_number(s.saturation->A) << ',' << format_number(s.saturation->omega) << ','
           << format_number(s.saturation->r2) << ',' << format_number(fr.traces[i].times[s.saturation->window - 1]) << ','
           << format_number(s.saturation->A_init) << ',' << format_number(s.saturation->omega_init);
      else
        os << ",,,,,";
      os << '\n';
    }
    out.files.emplace_back("fig13.csv", os.str());
    out.checks.push_back({"r2(chain16, N=4) > 0.9", r2[0] > 0.9, format_number(r2[0])});
    out.checks.push_back({"r2(chain16, N=4) > r2(chain6, N=1)", r2[0] > r2[3], format_number(r2[0]) + " vs " + format_number(r2[3])});
    out.checks.push_back({"r2(chain16, N=4) > r2(chain3, N=1)", r2[0] > r2[4], format_number(r2[0]) + " vs " + format_number(r2[4])});
  } else if (id == "fig14") {
    const auto configs = chain_n_family(base, 3, 8);
    const bool use_w = b.enable_w;
    const auto periods = family_periods(configs, use_w, workers);
    std::vector<std::string> labels;
    std::vector<double> ts;
    bool increasing = true;
    for (std::size_t i = 0; i < periods.size(); ++i) {
      labels.push_back(configs[i].get("lattice.n"));
      ts.push_back(periods[i].found() ? periods[i].T : std::nan(""));
      if (i > 0 && !period_less(periods[i - 1], periods[i])) increasing = false;
    }
    out.files.emplace_back("fig14.csv", period_table(labels, "n", periods));
    out.checks.push_back({std::string("period T increases with n (") + (use_w ? "s_w" : "s_f") + ")", increasing, list(ts)});
  } else if (id == "fig11") {
    const ConfigMap shape_base = with(base, {{"physics.N", "1"}, {"physics.sites", "0"}});
    const auto configs = expand_family(with(shape_base, {{"lattice.shape", "chain"}, {"lattice.n", "16"}}),
                                       Family::vary_shape, {"grid4x4", "ring", "chain"});
    const auto periods = family_periods(configs, false, workers);
    out.files.emplace_back("fig11.csv", period_table({"grid4x4", "ring16", "chain16"}, "shape", periods));
    const bool ok = period_less(periods[0], periods[1]) && period_less(periods[1], periods[2]);
    out.checks.push_back({"T(grid4x4) < T(ring16) < T(chain16) on s_f", ok,
                          period_text(periods[0]) + ", " + period_text(periods[1]) + ", " + period_text(periods[2])});
  } else {
    throw Error(ErrorKind::config, "cli", "unknown figure id '" + id + "'");
  }
  out.files.emplace_back(id + "_trend.txt", out.report());
  return out;
}

/// Writes figure files plus a JSON sidecar; returns the sidecar path.
inline std::filesystem::path write_figure(const FigureOutput& fig, const ConfigMap& base,
                                          const std::filesystem::path& dir) {
  nlohmann::ordered_json side;
  side["figure"] = fig.id;
  side["config"] = base.to_json();
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& [name, contents] : fig.files) {
    write_atomic(dir / name, contents);
    files.push_back(name);
  }
  side["files"] = files;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : fig.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  side["checks"] = checks;
  const auto path = dir / (fig.id + ".json");
  write_atomic(path, side.dump(2) + "\n");
  return path;
}

}  // namespace wentropy
