#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "wentropy/error.hpp"

namespace wentropy {

/// Shortest text that round-trips the double exactly; locale independent.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_number(const std::string& s, const std::string& what) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || s.empty())
    throw Error(ErrorKind::parse, "entropy", what + ": '" + s + "' is not a number");
  return v;
}

struct TraceMetadata {
  int n = 0;
  int N = 0;
  std::string shape;
  double J = 1.0;
  double U = 0.0;
  std::vector<int> sites;
  std::string frame = "none";
  std::string window = "2";
  double theta = 1e-14;
  std::string method = "factorized";
};

/// Entropy time series of one run. s_w, dropped_mass and error_bound are
/// empty when W entropy was not computed.
struct EntropyTrace {
  TraceMetadata meta;
  std::vector<double> times;
  std::vector<double> s_f;
  std::vector<double> s_w;
  std::vector<double> dropped_mass;
  std::vector<double> error_bound;

  bool has_w() const noexcept { return !s_w.empty(); }
  std::size_t size() const noexcept { return times.size(); }
};

inline std::string join_sites(const std::vector<int>& sites) {
  std::string out;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(sites[i]);
  }
  return out;
}

inline void write_trace_csv(std::ostream& os, const EntropyTrace& tr) {
  const auto& m = tr.meta;
  os << "# n=" << m.n << ",N=" << m.N << ",shape=" << m.shape << ",J=" << format_number(m.J)
     << ",U=" << format_number(m.U) << ",sites=" << join_sites(m.sites) << ",frame=" << m.frame
     << ",window=" << m.window << ",theta=" << format_number(m.theta) << ",method=" << m.method << '\n';
  os << "t,s_f,s_w,dropped_mass,error_bound\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    os << format_number(tr.times[i]) << ',' << format_number(tr.s_f[i]) << ',';
    if (tr.has_w())
      os << format_number(tr.s_w[i]) << ',' << format_number(tr.dropped_mass[i]) << ','
         << format_number(tr.error_bound[i]);
    else
      os << ",,";
    os << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline EntropyTrace read_trace_csv(std::istream& in) {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::parse, "entropy", "trace file: " + what); };
  EntropyTrace tr;
  std::string line;
  std::vector<std::string> columns;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::map<std::string, std::string> kv;
      for (const auto& item : detail::split(line.substr(1), ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) continue;
        std::string key = item.substr(0, eq);
        key.erase(0, key.find_first_not_of(' '));
        kv[key] = item.substr(eq + 1);
      }
      auto& m = tr.meta;
      try {
        if (kv.count("n")) m.n = std::stoi(kv["n"]);
        if (kv.count("N")) m.N = std::stoi(kv["N"]);
        if (kv.count("J")) m.J = parse_number(kv["J"], "header J");
        if (kv.count("U")) m.U = parse_number(kv["U"], "header U");
        if (kv.count("theta")) m.theta = parse_number(kv["theta"], "header theta");
        if (kv.count("sites") && !kv["sites"].empty())
          for (const auto& s : detail::split(kv["sites"], ';')) m.sites.push_back(std::stoi(s));
      } catch (const std::logic_error&) {
        bad("malformed metadata header");
      }
      if (kv.count("shape")) m.shape = kv["shape"];
      if (kv.count("frame")) m.frame = kv["frame"];
      if (kv.count("window")) m.window = kv["window"];
      if (kv.count("method")) m.method = kv["method"];
      continue;
    }
    if (columns.empty()) {
      columns = detail::split(line, ',');
      const std::vector<std::string> want{"t", "s_f", "s_w", "dropped_mass", "error_bound"};
      for (std::size_t c = 0; c < want.size(); ++c)
        if (c >= columns.size() || columns[c] != want[c])
          bad("missing or misplaced column '" + want[c] + "'");
      continue;
    }
    ++row;
    const auto cells = detail::split(line, ',');
    if (cells.size() != columns.size())
      bad("row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " fields, expected " +
          std::to_string(columns.size()));
    const std::string where = " (row " + std::to_string(row) + ")";
    tr.times.push_back(parse_number(cells[0], "column 't'" + where));
    tr.s_f.push_back(parse_number(cells[1], "column 's_f'" + where));
    const bool w = !cells[2].empty();
    if (row == 1 || w == tr.has_w()) {
      if (w) {
        tr.s_w.push_back(parse_number(cells[2], "column 's_w'" + where));
        tr.dropped_mass.push_back(parse_number(cells[3], "column 'dropped_mass'" + where));
        tr.error_bound.push_back(parse_number(cells[4], "column 'error_bound'" + where));
      }
    } else {
      bad("column 's_w' is filled on some rows only" + where);
    }
  }
  if (columns.empty()) bad("missing column header");
  for (std::size_t i = 1; i < tr.times.size(); ++i)
    if (!(tr.times[i] > tr.times[i - 1])) bad("column 't' is not strictly ascending");
  return tr;
}

}  // namespace wentropy
