#pragma once

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wentropy/error.hpp"

namespace wentropy {

using Edge = std::pair<int, int>;

enum class Shape { chain, ring, grid, custom };

struct ShapeTag {
  Shape kind = Shape::custom;
  int rows = 0;  // grid only
  int cols = 0;  // grid only

  friend bool operator==(const ShapeTag&, const ShapeTag&) = default;
};

inline std::string to_string(const ShapeTag& tag) {
  switch (tag.kind) {
    case Shape::chain: return "chain";
    case Shape::ring: return "ring";
    case Shape::grid: return "grid" + std::to_string(tag.rows) + "x" + std::to_string(tag.cols);
    case Shape::custom: return "custom";
  }
  return "custom";
}

/// Undirected nearest-neighbour graph. Edges are stored canonically: i < j,
/// no duplicates, sorted lexicographically. Always connected.
class LatticeGraph {
 public:
  int n_sites() const noexcept { return n_sites_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const ShapeTag& shape() const noexcept { return tag_; }

  int degree(int site) const {
    return static_cast<int>(std::count_if(edges_.begin(), edges_.end(), [site](const Edge& e) {
      return e.first == site || e.second == site;
    }));
  }

  /// First line n_sites, then one "i j" line per edge.
  std::string to_text() const {
    std::ostringstream os;
    os << n_sites_ << '\n';
    for (const auto& [i, j] : edges_) os << i << ' ' << j << '\n';
    return os.str();
  }

  friend bool operator==(const LatticeGraph& a, const LatticeGraph& b) {
    return a.n_sites_ == b.n_sites_ && a.edges_ == b.edges_;
  }

  friend LatticeGraph make_lattice(int n, std::vector<Edge> edges, ShapeTag tag);

 private:
  int n_sites_ = 0;
  std::vector<Edge> edges_;
  ShapeTag tag_;
};

namespace detail {

inline bool is_connected(int n, const std::vector<Edge>& edges) {
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = n;
  for (const auto& [i, j] : edges) {
    int a = find(i), b = find(j);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

}  // namespace detail

/// Normalises, deduplicates and validates an edge list.
inline LatticeGraph make_lattice(int n, std::vector<Edge> edges, ShapeTag tag) {
  if (n < 1) throw Error(ErrorKind::invalid_argument, "lattice", "site count must be positive");
  for (auto& e : edges) {
    if (e.first < 0 || e.second < 0 || e.first >= n || e.second >= n)
      throw Error(ErrorKind::invalid_argument, "lattice",
                  "edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                      ") references a site outside [0," + std::to_string(n) + ")");
    if (e.first == e.second)
      throw Error(ErrorKind::invalid_argument, "lattice",
                  "self-loop at site " + std::to_string(e.first));
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (!detail::is_connected(n, edges))
    throw Error(ErrorKind::invalid_argument, "lattice", "graph is not connected");

  LatticeGraph g;
  g.n_sites_ = n;
  g.edges_ = std::move(edges);
  g.tag_ = tag;
  return g;
}

inline LatticeGraph build_chain(int n) {
  if (n < 2) throw Error(ErrorKind::invalid_argument, "lattice", "chain needs at least 2 sites");
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return make_lattice(n, std::move(edges), {Shape::chain});
}

/// Chain plus the closing bond (0, n-1).
inline LatticeGraph build_ring(int n) {
  if (n < 3) throw Error(ErrorKind::invalid_argument, "lattice", "ring needs at least 3 sites");
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  edges.emplace_back(0, n - 1);
  return make_lattice(n, std::move(edges), {Shape::ring});
}

/// Open-boundary square grid, site = row * cols + col.
inline LatticeGraph build_grid(int rows, int cols) {
  if (rows < 1 || cols < 1 || rows * cols < 2)
    throw Error(ErrorKind::invalid_argument, "lattice",
                "grid " + std::to_string(rows) + "x" + std::to_string(cols) + " is degenerate");
  std::vector<Edge> edges;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int s = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(s, s + 1);
      if (r + 1 < rows) edges.emplace_back(s, s + cols);
    }
  }
  return make_lattice(rows * cols, std::move(edges), {Shape::grid, rows, cols});
}

inline LatticeGraph build_custom(int n, std::span<const Edge> edges) {
  return make_lattice(n, std::vector<Edge>(edges.begin(), edges.end()), {Shape::custom});
}

/// Reads the plain-text record produced by LatticeGraph::to_text.
inline LatticeGraph parse_lattice(std::istream& in) {
  int n = 0;
  if (!(in >> n)) throw Error(ErrorKind::parse, "lattice", "missing site count");
  std::vector<Edge> edges;
  int i = 0, j = 0;
  while (in >> i) {
    if (!(in >> j)) throw Error(ErrorKind::parse, "lattice", "dangling edge endpoint");
    edges.emplace_back(i, j);
  }
  return make_lattice(n, std::move(edges), {Shape::custom});
}

}  // namespace wentropy
