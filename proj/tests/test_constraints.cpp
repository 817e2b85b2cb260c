#include <gtest/gtest.h>

#include "escape/constraints.hpp"
#include "fixtures.hpp"

using namespace escape;

TEST(Solve, ConstantFlowsAlongACopy) {
  ConstraintGraph g;
  int x = g.add_unknown("X"), y = g.add_unknown("Y");
  g.add_const(x, PointSet{0});
  g.add_copy(x, y);
  Solution s = solve(g);
  EXPECT_EQ(s.value[static_cast<std::size_t>(x)], PointSet{0});
  EXPECT_EQ(s.value[static_cast<std::size_t>(y)], PointSet{0});
  EXPECT_EQ(g.num_constraints(), 2u);
}

TEST(Solve, TwoCycleIsOneComponent) {
  ConstraintGraph g;
  int x = g.add_unknown("X"), y = g.add_unknown("Y");
  g.add_copy(x, y);
  g.add_copy(y, x);
  g.add_const(x, PointSet{3});
  Solution s = solve(g);
  EXPECT_EQ(s.value[static_cast<std::size_t>(x)], PointSet{3});
  EXPECT_EQ(s.value[static_cast<std::size_t>(y)], PointSet{3});
  ASSERT_EQ(s.components.size(), 1u);
  EXPECT_DOUBLE_EQ(s.linearity(), 2.0);
}

TEST(Solve, AcyclicChainNeedsOneVisitPerComponent) {
  ConstraintGraph g;
  std::vector<int> u;
  for (int k = 0; k < 20; ++k) u.push_back(g.add_unknown("U" + std::to_string(k)));
  // Edges added against the topological order to make the sort matter.
  for (int k = 19; k > 0; --k) g.add_copy(u[static_cast<std::size_t>(k - 1)], u[static_cast<std::size_t>(k)]);
  g.add_const(u[0], PointSet{1, 2});
  Solution s = solve(g);
  EXPECT_EQ(s.components.size(), 20u);
  EXPECT_EQ(s.visits, s.components.size());
  EXPECT_DOUBLE_EQ(s.linearity(), 1.0);
  for (int k : u) EXPECT_EQ(s.value[static_cast<std::size_t>(k)], (PointSet{1, 2}));
}

TEST(Solve, FilterAndGuard) {
  ConstraintGraph g;
  int a = g.add_unknown("A"), b = g.add_unknown("B"), c = g.add_unknown("C"), gd = g.add_unknown("G");
  g.add_const(a, PointSet{1, 2, 3});
  g.add_filter(a, b, PointSet{2, 3, 4});
  g.add_guarded(a, c, gd, PointSet{7});
  Solution s = solve(g);
  EXPECT_EQ(s.value[static_cast<std::size_t>(b)], (PointSet{2, 3}));
  EXPECT_TRUE(s.value[static_cast<std::size_t>(c)].empty());
  g.add_const(gd, PointSet{7});
  s = solve(g);
  EXPECT_EQ(s.value[static_cast<std::size_t>(c)], (PointSet{1, 2, 3}));
}

TEST(Solve, LeastSolution) {
  // A cycle with no constant stays empty.
  ConstraintGraph g;
  int x = g.add_unknown("X"), y = g.add_unknown("Y"), z = g.add_unknown("Z");
  g.add_copy(x, y);
  g.add_copy(y, z);
  g.add_copy(z, x);
  Solution s = solve(g);
  for (const auto& v : s.value) EXPECT_TRUE(v.empty());
  EXPECT_DOUBLE_EQ(s.linearity(), 3.0);
}

TEST(Solve, RandomGraphsReachAFixpoint) {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 200; ++round) {
    ConstraintGraph g;
    int n = 2 + static_cast<int>(rng() % 30);
    for (int k = 0; k < n; ++k) g.add_unknown("U");
    for (int k = 0; k < n; ++k)
      if (rng() % 3 == 0) g.add_const(k, fx::random_subset(rng, PointSet::first_n(8)));
    int edges = static_cast<int>(rng() % static_cast<std::uint64_t>(3 * n));
    for (int k = 0; k < edges; ++k) {
      int a = static_cast<int>(rng() % static_cast<std::uint64_t>(n)), b = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      switch (rng() % 3) {
        case 0: g.add_copy(a, b); break;
        case 1: g.add_filter(a, b, fx::random_subset(rng, PointSet::first_n(8))); break;
        default: g.add_guarded(a, b, static_cast<int>(rng() % static_cast<std::uint64_t>(n)), fx::random_subset(rng, PointSet::first_n(8)));
      }
    }
    Solution s = solve(g);
    // Every constraint holds.
    for (int k = 0; k < n; ++k) EXPECT_TRUE(g.seed(k).subset_of(s.value[static_cast<std::size_t>(k)]));
    for (const auto& e : g.edges()) {
      const PointSet& src = s.value[static_cast<std::size_t>(e.src)];
      const PointSet& dst = s.value[static_cast<std::size_t>(e.dst)];
      if (e.guard >= 0) {
        if (s.value[static_cast<std::size_t>(e.guard)].intersects(e.mask)) EXPECT_TRUE(src.subset_of(dst));
      } else if (e.filter) {
        EXPECT_TRUE((src & e.mask).subset_of(dst));
      } else {
        EXPECT_TRUE(src.subset_of(dst));
      }
    }
    // Components partition the unknowns, dependencies first.
    std::vector<int> order(static_cast<std::size_t>(n), -1);
    for (std::size_t c = 0; c < s.components.size(); ++c)
      for (int u : s.components[c]) order[static_cast<std::size_t>(u)] = static_cast<int>(c);
    for (int o : order) EXPECT_GE(o, 0);
    for (const auto& e : g.edges()) {
      EXPECT_LE(order[static_cast<std::size_t>(e.src)], order[static_cast<std::size_t>(e.dst)]);
      if (e.guard >= 0) EXPECT_LE(order[static_cast<std::size_t>(e.guard)], order[static_cast<std::size_t>(e.dst)]);
    }
  }
}

TEST(Generate, NewSeedsTheResultSlot) {
  Program p = fx::load_with_external("class Main { void main() { Main m = new Main(); {p} } }", false);
  PointId pt = p.find_point("p");
  ConstraintSystem cs = generate_constraints(p, default_entry(p), p.find_point("pibar"));
  bool seeded = false;
  for (std::size_t u = 0; u < cs.graph.num_unknowns(); ++u)
    if (cs.graph.seed(static_cast<int>(u)) == PointSet{pt}) seeded = true;
  EXPECT_TRUE(seeded);
  Solution s = solve(cs.graph);
  // After the declaration m holds the new object.
  bool found = false;
  for (std::size_t k = 0; k < p.marks.size(); ++k) {
    const Mark& mk = p.marks[k];
    if (mk.kind != MarkKind::stmt) continue;
    ERElem d = constraint_decoration(p, cs, s, static_cast<MarkId>(k));
    ASSERT_TRUE(d);
    EXPECT_EQ(d->frame[static_cast<std::size_t>(p.env(mk.env).index_of("m"))], PointSet{pt});
    found = true;
  }
  EXPECT_TRUE(found);
}

TEST(Generate, StraightLineCodeIsAcyclic) {
  Program p = fx::load_with_external(
      "class A { A f; }\n"
      "class Main { void main() { A a = new A(); A b = a; A c = b; c.f = a; } }",
      false);
  ConstraintSystem cs = generate_constraints(p, default_entry(p), p.find_point("pibar"));
  Solution s = solve(cs.graph);
  EXPECT_DOUBLE_EQ(s.linearity(), 1.0);
}

TEST(Generate, RunningExampleRegression) {
  Program p = fx::running();
  MethodId scan = p.find_method("Scan.scan");
  ConstraintSystem global = generate_constraints(p, scan, p.find_point("pibar"));
  Solution gs = solve(global.graph);
  EXPECT_EQ(global.graph.num_constraints(), 862u);
  EXPECT_EQ(global.graph.num_unknowns(), 807u);
  EXPECT_EQ(gs.components.size(), 642u);
  EXPECT_NEAR(gs.linearity(), 1.2570, 1e-4);

  ConstraintOptions o;
  o.fields_per_point = true;
  ConstraintSystem pp = generate_constraints(p, scan, p.find_point("pibar"), o);
  Solution ps = solve(pp.graph);
  EXPECT_EQ(pp.graph.num_constraints(), 1039u);
  EXPECT_EQ(pp.graph.num_unknowns(), 904u);
  EXPECT_EQ(ps.components.size(), 547u);
}

TEST(Generate, ScanEscapesNothing) {
  Program p = fx::running();
  MethodId scan = p.find_method("Scan.scan");
  for (bool per_point : {false, true}) {
    ConstraintOptions o;
    o.fields_per_point = per_point;
    ConstraintSystem cs = generate_constraints(p, scan, p.find_point("pibar"), o);
    Solution s = solve(cs.graph);
    PointSet esc = s.value[static_cast<std::size_t>(cs.escape[static_cast<std::size_t>(scan)])];
    esc.erase(p.find_point("pibar"));
    EXPECT_TRUE(esc.empty()) << per_point;
  }
}
