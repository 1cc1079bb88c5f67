#include <gtest/gtest.h>

#include <random>

#include "fcsim/pathmap.hpp"
#include "oracles.hpp"

using fcsim::Frc;
using fcsim::RelativePathMap;
using fcsim::ViolationKind;

namespace {

struct Planned {
  RelativePathMap map;
  std::vector<Frc> targets;
};

Planned plan(const std::vector<Frc>& vehicles, const std::vector<Frc>& targets) {
  const auto r = fcsim::conflict_free_assign(vehicles, targets);
  Planned p;
  for (int j : r.assignment.match) p.targets.push_back(targets[static_cast<std::size_t>(j)]);
  p.map = fcsim::build_map(vehicles, r.paths);
  return p;
}

// Collision check written independently of the library: sample the straight
// relative motion of every pair at fine resolution and flag any moment at
// which the two vehicles are less than one grid unit apart (L1).
bool sampled_collision_free(const RelativePathMap& m) {
  for (std::size_t s = 0; s < m.rows.front().size(); ++s) {
    for (std::size_t a = 0; a < m.rows.size(); ++a) {
      for (std::size_t b = a + 1; b < m.rows.size(); ++b) {
        if (m.rows[a][s] == m.rows[b][s]) return false;
        if (s == 0) continue;
        for (int k = 1; k < 64; ++k) {
          const double t = k / 64.0;
          auto lerp = [t](int p, int q) { return p + t * (q - p); };
          const double dx = lerp(m.rows[a][s - 1].x_r, m.rows[a][s].x_r) -
                            lerp(m.rows[b][s - 1].x_r, m.rows[b][s].x_r);
          const double dy = lerp(m.rows[a][s - 1].y_r, m.rows[a][s].y_r) -
                            lerp(m.rows[b][s - 1].y_r, m.rows[b][s].y_r);
          if (std::abs(dx) + std::abs(dy) < 1.0 - 1e-9) return false;
        }
      }
    }
  }
  return true;
}

const char* kCaseOneMapTwo =
    "1 (0,0) (0,0) (0,0)\n"
    "2 (1,0) (1,1) (1,1)\n"
    "3 (2,0) (1,1) (0,2)\n";

const char* kCaseOneMapFour =
    "1 (0,0) (0,0) (0,0)\n"
    "2 (1,0) (1,0) (1,1)\n"
    "3 (2,0) (1,1) (0,2)\n";

const char* kCaseTwoMapTwo =
    "1 (3,0) (2,0) (2,0)\n"
    "2 (1,1) (1,1) (1,1)\n"
    "3 (0,2) (0,2) (0,2)\n"
    "4 (2,0) (1,0) (0,0)\n";

}  // namespace

TEST(BuildMap, CaseOne) {
  const auto p = plan({{0, 0}, {1, 0}, {2, 0}}, {{0, 0}, {1, 1}, {0, 2}});
  EXPECT_EQ(p.map, fcsim::parse_map(kCaseOneMapTwo));
}

TEST(BuildMap, CaseTwoAfterExchange) {
  const auto p = plan({{3, 0}, {1, 1}, {0, 2}, {2, 0}}, {{0, 0}, {1, 1}, {0, 2}, {2, 0}});
  EXPECT_EQ(p.map, fcsim::parse_map(kCaseTwoMapTwo));
}

TEST(BuildMap, SingleVehicleAndMismatch) {
  const std::vector<Frc> one{{4, 1}};
  const std::vector<fcsim::RelativePath> empty(1);
  const auto m = fcsim::build_map(one, empty);
  ASSERT_EQ(m.n_vehicles(), 1u);
  EXPECT_EQ(m.n_steps(), 0u);
  EXPECT_EQ(m.at(0, 0), (Frc{4, 1}));
  EXPECT_THROW(fcsim::build_map(one, std::vector<fcsim::RelativePath>(2)), fcsim::MalformedInstance);
}

TEST(VerifyMap, Examples) {
  EXPECT_TRUE(fcsim::verify_map(fcsim::parse_map(kCaseOneMapFour)).empty());
  EXPECT_TRUE(fcsim::verify_map(RelativePathMap{}).empty());
  const auto v = fcsim::verify_map(fcsim::parse_map(kCaseOneMapTwo));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (fcsim::Violation{ViolationKind::Vertex, 1, 1, 2}));
}

TEST(VerifyMap, SwapCrossStepAndLength) {
  auto swap = fcsim::parse_map("1 (0,0) (1,0)\n2 (1,0) (0,0)\n");
  EXPECT_EQ(fcsim::verify_map(swap), (std::vector<fcsim::Violation>{{ViolationKind::Swap, 1, 0, 1}}));
  // Diagonal moves that cross each other mid-step.
  auto cross = fcsim::parse_map("1 (0,0) (1,1)\n2 (1,0) (0,1)\n");
  EXPECT_EQ(fcsim::verify_map(cross), (std::vector<fcsim::Violation>{{ViolationKind::Cross, 1, 0, 1}}));
  // Following at one slot is fine.
  EXPECT_TRUE(fcsim::verify_map(fcsim::parse_map("1 (1,0) (0,0)\n2 (2,0) (1,0)\n")).empty());
  auto jump = fcsim::parse_map("1 (0,0) (2,0)\n");
  EXPECT_EQ(fcsim::verify_map(jump)[0].kind, ViolationKind::InvalidStep);
  auto ragged = fcsim::parse_map("1 (0,0) (0,0)\n2 (3,0)\n");
  EXPECT_EQ(fcsim::verify_map(ragged)[0].kind, ViolationKind::RowLength);
}

TEST(SweepsConflict, Basics) {
  EXPECT_TRUE(fcsim::sweeps_conflict({0, 0}, {1, 1}, {1, 0}, {0, 1}));
  EXPECT_FALSE(fcsim::sweeps_conflict({0, 0}, {1, 1}, {0, 1}, {1, 2}));
  EXPECT_FALSE(fcsim::sweeps_conflict({2, 0}, {1, 1}, {5, 5}, {5, 5}));
  // A vehicle cannot brush a stationary one without ending on its cell.
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (const Frc& a0 : {Frc{1, 0}, Frc{1, 1}, Frc{0, 1}, Frc{-1, 1}, Frc{2, 1}}) {
        const Frc a1{a0.x_r + dx, a0.y_r + dy};
        if (a1 == Frc{0, 0}) continue;
        EXPECT_FALSE(fcsim::sweeps_conflict(a0, a1, {0, 0}, {0, 0})) << a0 << "->" << a1;
      }
    }
  }
}

TEST(ResolveMap, CaseOneBecomesMapFour) {
  const auto p = plan({{0, 0}, {1, 0}, {2, 0}}, {{0, 0}, {1, 1}, {0, 2}});
  std::vector<fcsim::HoldEvent> trace;
  const auto out = fcsim::resolve_map(p.map, p.targets, &trace);
  EXPECT_EQ(out, fcsim::parse_map(kCaseOneMapFour));
  EXPECT_EQ(out.n_steps(), 2u);
  ASSERT_EQ(trace.size(), 1u);
  EXPECT_EQ(trace[0].waiter, 1);
  EXPECT_EQ(trace[0].other, 2);
  EXPECT_EQ(trace[0].collision_step, 1u);
  EXPECT_FALSE(trace[0].priority_overridden);
}

TEST(ResolveMap, CaseTwoUnchanged) {
  const auto p = plan({{3, 0}, {1, 1}, {0, 2}, {2, 0}}, {{0, 0}, {1, 1}, {0, 2}, {2, 0}});
  EXPECT_EQ(fcsim::resolve_map(p.map, p.targets), p.map);
}

TEST(ResolveMap, DisjointRowsIdentical) {
  const auto m = fcsim::parse_map("1 (3,0) (2,0) (1,0)\n2 (3,2) (2,2) (1,2)\n");
  const std::vector<Frc> t{{1, 0}, {1, 2}};
  EXPECT_EQ(fcsim::resolve_map(m, t), m);
}

TEST(ResolveMap, Errors) {
  const auto m = fcsim::parse_map("1 (3,0) (2,0)\n2 (3,0) (2,1)\n");
  EXPECT_THROW(fcsim::resolve_map(m, std::vector<Frc>{{2, 0}, {2, 1}}), fcsim::UnresolvableMap);
  EXPECT_THROW(fcsim::resolve_map(m, std::vector<Frc>{{2, 0}}), fcsim::MalformedInstance);
  EXPECT_THROW(fcsim::resolve_map(m, std::vector<Frc>{{2, 0}, {0, 0}}), fcsim::MalformedInstance);
}

TEST(ResolveMap, RandomizedProperties) {
  std::mt19937_64 rng(99);
  int sequential_runs = 0;
  for (int seed = 0; seed < 1000; ++seed) {
    const auto ins = oracle::random_instance(rng, 12, 4);
    const auto p = plan(ins.vehicles, ins.targets);
    std::vector<fcsim::HoldEvent> trace;
    const auto out = fcsim::resolve_map(p.map, p.targets, &trace);

    EXPECT_TRUE(fcsim::verify_map(out).empty()) << "seed " << seed;
    EXPECT_TRUE(sampled_collision_free(out)) << "seed " << seed;
    ASSERT_EQ(out.n_vehicles(), p.map.n_vehicles());
    bool sequential = false;
    for (std::size_t v = 0; v < out.n_vehicles(); ++v) {
      EXPECT_EQ(out.rows[v].front(), p.map.rows[v].front());
      EXPECT_EQ(out.rows[v].back(), p.targets[v]);
    }
    for (const auto& e : trace) {
      sequential = sequential || e.sequential;
      if (!e.sequential) {
        EXPECT_NE(e.other, -1);
        if (!e.priority_overridden) EXPECT_LE(e.waiter_remaining, e.other_remaining);
      }
    }
    sequential_runs += sequential;
    EXPECT_LE(out.n_steps(), p.map.n_steps() + trace.size());
    // Each row is its own input row with holds inserted.
    for (std::size_t v = 0; v < out.n_vehicles(); ++v) {
      std::vector<Frc> a, b;
      for (const Frc& c : p.map.rows[v]) if (a.empty() || a.back() != c) a.push_back(c);
      for (const Frc& c : out.rows[v]) if (b.empty() || b.back() != c) b.push_back(c);
      EXPECT_EQ(a, b);
    }
  }
  EXPECT_LT(sequential_runs, 20);
}

TEST(MapText, RoundTrip) {
  const auto m = fcsim::parse_map(kCaseTwoMapTwo);
  EXPECT_EQ(fcsim::parse_map(fcsim::format_map(m)), m);
  EXPECT_EQ(fcsim::format_map(m).substr(0, 1), "#");
  EXPECT_THROW(fcsim::parse_map("2 (0,0)\n"), std::invalid_argument);
  EXPECT_THROW(fcsim::parse_map("1 (0;0)\n"), std::invalid_argument);
  EXPECT_THROW(fcsim::parse_map("1\n"), std::invalid_argument);
}
