// Command-line driver: traces, analysis of trace files, figure families,
// frame export and parameter sweeps.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "wentropy/analysis.hpp"
#include "wentropy/config.hpp"
#include "wentropy/entropy.hpp"
#include "wentropy/experiment.hpp"
#include "wentropy/trace.hpp"
#include "wentropy/wannier.hpp"

namespace fs = std::filesystem;
using namespace wentropy;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  int workers = 0;
  bool dry_run = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "INI config file or JSON sidecar");
  app->add_option("-s,--set", c.overrides, "override a config key, section.key=value")->take_all();
  app->add_option("-o,--out", c.out, "output directory");
  app->add_option("-w,--workers", c.workers, "worker threads (0 = available cores)")->check(CLI::NonNegativeNumber);
  app->add_flag("--dry-run", c.dry_run, "print the resolved config and exit");
}

ConfigMap load(const Common& c) {
  ConfigMap m = c.config.empty() ? ConfigMap{} : ConfigMap::load(c.config);
  for (const auto& o : c.overrides) m.apply(o);
  return m;
}

int workers_for(const Common& c, const RunConfig& cfg) {
  return resolve_workers(c.workers > 0 ? c.workers : cfg.workers);
}

int cmd_trace(const Common& c) {
  const ConfigMap m = load(c);
  const RunConfig cfg = resolve(m);
  if (c.dry_run) {
    std::cout << m.to_ini();
    return 0;
  }
  const auto sys = build_system(cfg);
  const EntropySampler sampler(cfg, *sys.basis);
  const auto tr = run_trace(cfg, sys, sampler, workers_for(c, cfg));
  const auto dir = output_directory(cfg, c.out);
  std::ostringstream csv;
  write_trace_csv(csv, tr);
  write_atomic(dir / (cfg.prefix + ".csv"), csv.str());

  const auto summary = summarize_trace(tr, cfg);
  nlohmann::ordered_json side;
  side["config"] = m.to_json();
  side["frame"] = sampler.frame_id();
  side["dimension"] = sys.basis->size();
  side["propagator"] = sys.propagator->mode() == PropagatorMode::spectral ? "spectral" : "krylov";
  side["trace"] = cfg.prefix + ".csv";
  if (summary.linear) side["linear"] = {{"k", summary.linear->k}, {"b", summary.linear->b}, {"r2", summary.linear->r2}};
  side["initial_slope"] = summary.initial_slope;
  write_atomic(dir / (cfg.prefix + ".json"), side.dump(2) + "\n");
  std::cout << (dir / (cfg.prefix + ".csv")).string() << '\n';
  return 0;
}

int cmd_analyze(const Common& c, const std::vector<std::string>& files) {
  const ConfigMap m = load(c);
  const RunConfig cfg = resolve(m);
  if (c.dry_run) {
    std::cout << m.to_ini();
    return 0;
  }
  std::ostringstream csv;
  csv << "file,n,N,shape,k,b,r2_lin,increment_slope,A,omega,r2_sat,period_column,T,status,epsilon_at_T,armed_at,"
         "horizon,initial_slope\n";
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw Error(ErrorKind::config, "cli", "cannot open trace '" + f + "'");
    const auto tr = read_trace_csv(in);
    const auto s = summarize_trace(tr, cfg);
    const bool use_w = tr.has_w() && cfg.period_column != PeriodColumn::s_f;
    if (cfg.period_column == PeriodColumn::s_w && !tr.has_w())
      throw Error(ErrorKind::parse, "cli", "trace '" + f + "' has no values in column 's_w'");
    const auto p = detect_period(tr.times, use_w ? tr.s_w : tr.s_f, cfg.eps);
    const auto name = fs::path(f).filename().string();
    csv << name << ',' << tr.meta.n << ',' << tr.meta.N << ',' << tr.meta.shape << ',';
    csv << (s.linear ? format_number(s.linear->k) : "") << ',' << (s.linear ? format_number(s.linear->b) : "") << ','
        << (s.linear ? format_number(s.linear->r2) : "") << ',' << (s.linear ? format_number(s.increment_slope) : "")
        << ',';
    csv << (s.saturation ? format_number(s.saturation->A) : "") << ','
        << (s.saturation ? format_number(s.saturation->omega) : "") << ','
        << (s.saturation ? format_number(s.saturation->r2) : "") << ',';
    csv << (use_w ? "s_w" : "s_f") << ',' << (p.found() ? format_number(p.T) : "") << ',' << to_string(p.status) << ','
        << (p.found() ? format_number(p.epsilon_at_T) : "") << ','
        << (std::isnan(p.armed_at) ? "" : format_number(p.armed_at)) << ',' << format_number(p.horizon) << ','
        << format_number(s.initial_slope) << '\n';
    nlohmann::ordered_json row;
    row["file"] = name;
    if (s.linear) row["linear"] = {{"k", s.linear->k}, {"b", s.linear->b}, {"r2", s.linear->r2}, {"n_samples", s.linear->n_samples}};
    if (s.saturation)
      row["saturation"] = {{"column", s.saturation_column}, {"A", s.saturation->A}, {"omega", s.saturation->omega},
                           {"r2", s.saturation->r2}, {"residual_norm", s.saturation->residual_norm},
                           {"A_init", s.saturation->A_init}, {"omega_init", s.saturation->omega_init}};
    row["period"] = period_json(p);
    row["errors"] = s.errors;
    rows.push_back(row);
  }
  const auto dir = output_directory(cfg, c.out);
  write_atomic(dir / "analysis.csv", csv.str());
  nlohmann::ordered_json side;
  side["config"] = m.to_json();
  side["inputs"] = files;
  side["results"] = rows;
  write_atomic(dir / "analysis.json", side.dump(2) + "\n");
  std::cout << csv.str();
  return 0;
}

int cmd_figure(const Common& c, const std::string& id) {
  const ConfigMap m = load(c);
  const RunConfig cfg = resolve(m);
  if (c.dry_run) {
    std::cout << m.to_ini();
    return 0;
  }
  const std::vector<std::string> ids = id == "all" ? figure_ids() : std::vector<std::string>{id};
  bool ok = true;
  for (const auto& fid : ids) {
    const auto fig = run_figure(fid, m, workers_for(c, cfg));
    write_figure(fig, m, output_directory(cfg, c.out));
    std::cout << fig.report();
    ok = ok && fig.passed();
  }
  return ok ? 0 : 4;
}

int cmd_frame(const Common& c, const std::string& file) {
  const ConfigMap m = load(c);
  RunConfig cfg = resolve(m);
  if (c.dry_run) {
    std::cout << m.to_ini();
    return 0;
  }
  const auto frame = build_frame(cfg.grid, cfg.oscillator_length, cfg.leakage_tolerance);
  const auto coeffs = FrameCoefficients::from(frame);
  std::ostringstream os;
  write_frame(os, coeffs);
  const fs::path path = file.empty() ? output_directory(cfg, c.out) / "frame.txt" : fs::path(file);
  write_atomic(path, os.str());
  const auto weights = quadrature_weights(cfg.grid);
  std::cout << "frame " << frame_hash(coeffs) << " -> " << path.string() << '\n'
            << "cells " << frame.n_cells() << '\n'
            << "gram_deviation " << format_number(max_gram_deviation(frame.functions, weights)) << '\n'
            << "leakage0 " << format_number(frame.leakage[0]) << '\n'
            << "leakage1 " << format_number(frame.leakage[1]) << '\n';
  return 0;
}

int cmd_sweep(const Common& c, const std::string& family, const std::vector<std::string>& values, bool period) {
  const ConfigMap m = load(c);
  const RunConfig cfg = resolve(m);
  const auto points = expand_family(m, parse_family(family), values);
  if (c.dry_run) {
    for (const auto& p : points) std::cout << p.to_ini() << '\n';
    return 0;
  }
  const auto rows = run_sweep(points, workers_for(c, cfg), period);
  const auto dir = output_directory(cfg, c.out);
  const auto csv = sweep_csv(rows);
  write_atomic(dir / (cfg.prefix + "_sweep.csv"), csv);
  nlohmann::ordered_json side;
  side["config"] = m.to_json();
  side["family"] = family;
  side["values"] = values;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json p;
    p["config"] = r.config.to_json();
    if (r.summary.period) p["period"] = period_json(*r.summary.period);
    p["status"] = r.error.empty() ? "ok" : r.error;
    pts.push_back(p);
  }
  side["points"] = pts;
  write_atomic(dir / (cfg.prefix + "_sweep.json"), side.dump(2) + "\n");
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-space (W) and Fock-space (F) entropy dynamics of hard-core bosons"};
  app.require_subcommand(1);

  Common trace_opts, analyze_opts, figure_opts, frame_opts, sweep_opts;
  auto* trace = app.add_subcommand("trace", "run one trajectory and write its entropy trace");
  add_common(trace, trace_opts);

  auto* analyze = app.add_subcommand("analyze", "fit and period-scan existing trace files");
  add_common(analyze, analyze_opts);
  std::vector<std::string> trace_files;
  analyze->add_option("traces", trace_files, "trace CSV files")->required()->check(CLI::ExistingFile);

  auto* figure = app.add_subcommand("figure", "reproduce a figure family and check its trends");
  add_common(figure, figure_opts);
  std::string figure_id;
  std::vector<std::string> allowed = figure_ids();
  allowed.push_back("all");
  figure->add_option("id", figure_id, "figure id or 'all'")->required()->check(CLI::IsMember(allowed));

  auto* frame = app.add_subcommand("frame-build", "build a Wannier frame and export its level projections");
  add_common(frame, frame_opts);
  std::string frame_file;
  frame->add_option("--file", frame_file, "output file (default <out>/frame.txt)");

  auto* sweep = app.add_subcommand("sweep", "run a parameter family and tabulate fits and periods");
  add_common(sweep, sweep_opts);
  std::string family;
  std::vector<std::string> values;
  bool no_period = false;
  sweep->add_option("--family", family, "vary-n | vary-N | vary-position | vary-shape")
      ->required()
      ->check(CLI::IsMember({"vary-n", "vary-N", "vary-position", "vary-shape"}));
  sweep->add_option("--values", values, "family values, e.g. 3 4 5 6 or chain ring grid4x4")->required()->delimiter(',');
  sweep->add_flag("--no-period", no_period, "skip the regression-period search");

  app.add_subcommand("template", "print a config template with all defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*trace) return cmd_trace(trace_opts);
    if (*analyze) return cmd_analyze(analyze_opts, trace_files);
    if (*figure) return cmd_figure(figure_opts, figure_id);
    if (*frame) return cmd_frame(frame_opts, frame_file);
    if (*sweep) return cmd_sweep(sweep_opts, family, values, !no_period);
    std::cout << config_template();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: cli: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
