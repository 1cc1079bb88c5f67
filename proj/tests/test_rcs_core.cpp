#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fcsim/rcs_core.hpp"
#include "oracles.hpp"

using fcsim::Frc;
using fcsim::Structure;

TEST(GenerateTargets, InterlacedThreeLanes) {
  EXPECT_EQ(fcsim::generate_targets({Structure::Interlaced, 3, 3}),
            (std::vector<Frc>{{0, 0}, {0, 2}, {1, 1}}));
  EXPECT_EQ(fcsim::generate_targets({Structure::Interlaced, 3, 4}),
            (std::vector<Frc>{{0, 0}, {0, 2}, {1, 1}, {2, 0}}));
}

TEST(GenerateTargets, SingleLaneUsesEvenSlots) {
  EXPECT_EQ(fcsim::generate_targets({Structure::Interlaced, 1, 3}),
            (std::vector<Frc>{{0, 0}, {2, 0}, {4, 0}}));
}

TEST(GenerateTargets, ParallelFillsEveryPoint) {
  EXPECT_EQ(fcsim::generate_targets({Structure::Parallel, 2, 5}),
            (std::vector<Frc>{{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 0}}));
}

TEST(GenerateTargets, RejectsEmptySpec) {
  EXPECT_THROW(fcsim::generate_targets({Structure::Interlaced, 0, 3}), fcsim::MalformedInstance);
  EXPECT_THROW(fcsim::generate_targets({Structure::Interlaced, 2, 0}), fcsim::MalformedInstance);
}

TEST(GenerateTargets, PrefixMonotoneParityAndDistinct) {
  for (auto st : {Structure::Interlaced, Structure::Parallel}) {
    for (int lanes = 1; lanes <= 5; ++lanes) {
      auto prev = fcsim::generate_targets({st, lanes, 1});
      for (int n = 2; n <= 20; ++n) {
        auto cur = fcsim::generate_targets({st, lanes, n});
        ASSERT_EQ(cur.size(), static_cast<std::size_t>(n));
        EXPECT_TRUE(std::equal(prev.begin(), prev.end(), cur.begin()));
        EXPECT_EQ(std::set<Frc>(cur.begin(), cur.end()).size(), cur.size());
        for (const Frc& p : cur) {
          EXPECT_LT(p.y_r, lanes);
          if (st == Structure::Interlaced) EXPECT_EQ((p.x_r + p.y_r) % 2, 0);
        }
        prev = cur;
      }
    }
  }
}

TEST(Frd, Examples) {
  EXPECT_EQ(fcsim::frd({2, 2}, {1, 3}), 1.0);
  EXPECT_EQ(fcsim::frd({3, 0}, {0, 0}), 3.0);
  EXPECT_EQ(fcsim::frd({4, 1}, {4, 1}, 2.5, 7.0), 0.0);
  // two oblique edges and one straight edge
  EXPECT_DOUBLE_EQ(fcsim::frd({0, 0}, {3, 2}, 1.0, 1.5), 1.0 + 2 * 1.5);
}

TEST(Frd, MatchesBfsAndIsAMetric) {
  std::vector<Frc> pts;
  for (int x = 0; x <= 5; ++x) {
    for (int y = 0; y <= 5; ++y) pts.push_back({x, y});
  }
  for (const Frc& a : pts) {
    for (const Frc& b : pts) {
      const double d = fcsim::frd(a, b);
      EXPECT_EQ(d, oracle::bfs_distance(a, b)) << a << " " << b;
      EXPECT_EQ(d, fcsim::chebyshev(a, b));
      EXPECT_EQ(d, fcsim::frd(b, a));
      EXPECT_EQ(d == 0.0, a == b);
    }
  }
  std::mt19937_64 rng(7);
  for (int k = 0; k < 2000; ++k) {
    const Frc& a = pts[rng() % pts.size()];
    const Frc& b = pts[rng() % pts.size()];
    const Frc& c = pts[rng() % pts.size()];
    EXPECT_LE(fcsim::frd(a, c), fcsim::frd(a, b) + fcsim::frd(b, c));
  }
}

TEST(CostMatrix, CaseOne) {
  const std::vector<Frc> v{{0, 0}, {1, 0}, {2, 0}};
  const std::vector<Frc> t{{0, 0}, {1, 1}, {0, 2}};
  const fcsim::CostMatrix expected{{0, 1, 2}, {1, 1, 2}, {2, 1, 2}};
  EXPECT_EQ(fcsim::cost_matrix(v, t), expected);
}

TEST(CostMatrix, CaseTwoIsElementwiseChebyshev) {
  const std::vector<Frc> v{{3, 0}, {1, 1}, {0, 2}, {2, 0}};
  const std::vector<Frc> t{{0, 0}, {1, 1}, {0, 2}, {2, 0}};
  const auto c = fcsim::cost_matrix(v, t);
  ASSERT_EQ(c.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const int dx = std::abs(v[i].x_r - t[j].x_r), dy = std::abs(v[i].y_r - t[j].y_r);
      EXPECT_EQ(c(i, j), std::max(dx, dy));
    }
  }
}

TEST(CostMatrix, Errors) {
  const std::vector<Frc> one{{0, 0}};
  EXPECT_EQ(fcsim::cost_matrix(one, one)(0, 0), 0.0);
  const std::vector<Frc> two{{0, 0}, {1, 1}};
  EXPECT_THROW(fcsim::cost_matrix(one, two), fcsim::MalformedInstance);
  EXPECT_THROW((fcsim::CostMatrix{{1, 2}, {3}}), fcsim::MalformedInstance);
}
