#include <gtest/gtest.h>

#include <sstream>

#include "wentropy/lattice.hpp"

using namespace wentropy;

TEST(Lattice, ChainHasNearestNeighbourBonds) {
  const auto g = build_chain(5);
  EXPECT_EQ(g.n_sites(), 5);
  const std::vector<Edge> want{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  EXPECT_EQ(g.edges(), want);
  EXPECT_EQ(g.degree(0), 1);
  EXPECT_EQ(g.degree(2), 2);
  EXPECT_EQ(to_string(g.shape()), "chain");
}

TEST(Lattice, RingClosesTheChain) {
  const auto g = build_ring(4);
  EXPECT_EQ(g.edges().size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(g.degree(i), 2);
  EXPECT_EQ(to_string(g.shape()), "ring");
}

TEST(Lattice, GridBondCountAndIndexing) {
  for (int r = 1; r <= 5; ++r)
    for (int c = 1; c <= 5; ++c) {
      if (r * c < 2) continue;
      const auto g = build_grid(r, c);
      EXPECT_EQ(static_cast<int>(g.edges().size()), 2 * r * c - r - c) << r << "x" << c;
    }
  const auto g = build_grid(4, 4);
  EXPECT_EQ(to_string(g.shape()), "grid4x4");
  // site = row * cols + col; corners have two neighbours, the bulk four
  EXPECT_EQ(g.degree(0), 2);
  EXPECT_EQ(g.degree(5), 4);
  EXPECT_EQ(g.degree(3), 2);
  EXPECT_EQ(g.degree(7), 3);
}

TEST(Lattice, SixteenSiteShapesOrderedByBondCount) {
  EXPECT_LT(build_chain(16).edges().size(), build_ring(16).edges().size());
  EXPECT_LT(build_ring(16).edges().size(), build_grid(4, 4).edges().size());
}

TEST(Lattice, CustomEdgesAreNormalisedAndDeduplicated) {
  const std::vector<Edge> raw{{2, 0}, {0, 1}, {1, 0}, {1, 2}};
  const auto g = build_custom(3, raw);
  const std::vector<Edge> want{{0, 1}, {0, 2}, {1, 2}};
  EXPECT_EQ(g.edges(), want);
}

TEST(Lattice, RejectsInvalidGraphs) {
  EXPECT_THROW(build_chain(1), Error);
  EXPECT_THROW(build_ring(2), Error);
  EXPECT_THROW(build_grid(1, 1), Error);
  const std::vector<Edge> loop{{0, 0}, {0, 1}};
  EXPECT_THROW(build_custom(2, loop), Error);
  const std::vector<Edge> outside{{0, 3}};
  EXPECT_THROW(build_custom(3, outside), Error);
  const std::vector<Edge> split{{0, 1}, {2, 3}};
  EXPECT_THROW(build_custom(4, split), Error);
}

TEST(Lattice, TextRoundTrip) {
  const auto g = build_grid(2, 3);
  std::istringstream in(g.to_text());
  EXPECT_EQ(parse_lattice(in), g);
  std::istringstream bad("3\n0 x\n");
  EXPECT_THROW(parse_lattice(bad), Error);
}
