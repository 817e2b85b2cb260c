#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"

using namespace escape;

namespace {

const Instr& find_target_ret(const Program& p, const std::string& caller, const std::string& selector,
                             const std::string& target) {
  const auto& m = p.methods[static_cast<std::size_t>(p.find_method(caller))];
  const Instr* r = nullptr;
  fx::for_each_node(m.body, [&](const Node& n) {
    if (n.kind != Node::Kind::call || r) return;
    for (const auto& t : n.targets)
      if (t.lookup.selector == selector && p.method_name(t.lookup.method) == target) r = &t.ret;
  });
  if (!r) throw ConfigError("no call target " + target);
  return *r;
}

Instr make(Program& p, Op op, const TypeEnv& in, const TypeEnv& out) {
  Instr i;
  i.op = op;
  i.in = p.intern(in);
  i.out = p.intern(out);
  return i;
}

}  // namespace

TEST(Delta, WorkedValueAtW0) {
  Program p = fx::running();
  DomainE d(p);
  EXPECT_EQ(d.delta(fx::tau_w0(p), fx::pts(p, {"pibar", "pi1", "pi3", "pi4"})), fx::pts(p, {"pi3"}));
}

TEST(Delta, EmptyStaysEmpty) {
  Program p = fx::running();
  DomainE d(p);
  for (EnvId e = 0; e < static_cast<EnvId>(p.num_envs()); ++e) EXPECT_TRUE(d.delta(p.env(e), {}).empty());
}

// At w1 no Square point is in e, so no Angle can be reached: the collector keeps only the
// Scan receiver and the Circle. Cross-checked against concrete reachability below.
TEST(Delta, AtW1AgreesWithConcreteReachability) {
  Program p = fx::running();
  DomainE d(p);
  TypeEnv w1 = fx::tau_w1(p);
  PointSet e = fx::pts(p, {"pibar", "pi1", "pi3", "pi4"});
  PointSet got = d.delta(w1, e);
  EXPECT_EQ(got, alpha_e(p, w1, representative_states_e(p, w1, e)));
  EXPECT_EQ(got, fx::pts(p, {"pibar", "pi3"}));
  // With a Square available the Angles become reachable through rotation.
  PointSet with_square = e | fx::pts(p, {"pi2"});
  EXPECT_EQ(d.delta(w1, with_square), with_square);
}

TEST(Delta, NoCompatibleThisEmptiesEverything) {
  Program p = fx::running();
  DomainE d(p);
  EXPECT_TRUE(d.delta(fx::tau_w0(p), fx::pts(p, {"pi1", "pi2", "pi4"})).empty());
}

TEST(TransferE, NewThenPutVar) {
  Program p = fx::running(false);
  DomainE d(p);
  TypeEnv w1 = fx::tau_w1(p);
  TypeEnv with_res = w1.with("res", p.class_of("Circle"));
  Instr nw = make(p, Op::new_obj, w1, with_res);
  nw.point = p.find_point("pi3");
  PointSet e = d.transfer(nw, fx::pts(p, {"pibar", "pi1", "pi2", "pi4"}));
  EXPECT_EQ(e, fx::pts(p, {"pibar", "pi1", "pi2", "pi3", "pi4"}));
  Instr pv = make(p, Op::put_var, with_res, w1);
  pv.var = "f";
  EXPECT_EQ(d.transfer(pv, e), e);
}

TEST(TransferE, Lookup) {
  Program p = fx::running(false);
  DomainE d(p);
  TypeEnv in = fx::tau_w1(p).with("res", p.class_of("Figure"));
  Instr lk = make(p, Op::lookup, in, in);
  lk.selector = "def";
  lk.method = p.find_method("Figure.def");
  PointSet e = fx::pts(p, {"pibar", "pi2"});
  EXPECT_TRUE(d.transfer(lk, e).empty());
  lk.method = p.find_method("Square.def");
  EXPECT_EQ(d.transfer(lk, e), e);
}

TEST(TransferE, ReturnAssumesTheWorstForCallerFields) {
  Program p = fx::running(false);
  DomainE d(p, EReturn::optimal);
  const Instr& ret = find_target_ret(p, "Scan.scan", "def", "Square.def");
  PointSet e1 = fx::pts(p, {"pibar", "pi2"});
  ASSERT_EQ(d.delta(p.env(ret.in), e1), e1);
  PointSet empty;
  EXPECT_EQ(d.transfer(ret, e1, &empty), fx::pts(p, {"pibar", "pi1", "pi2", "pi3", "pi4"}));
}

TEST(JoinE, Examples) {
  Program p = fx::running();
  PointSet all = fx::pts(p, {"pibar", "pi1", "pi2", "pi3", "pi4"});
  EXPECT_EQ(DomainE::join({}, all), all);
  EXPECT_EQ(DomainE::join(all, all), all);
  EXPECT_EQ(DomainE::join(fx::pts(p, {"pibar", "pi2"}), fx::pts(p, {"pibar", "pi3"})),
            fx::pts(p, {"pibar", "pi2", "pi3"}));
}

TEST(JoinE, UnionOfFixpointsIsAFixpoint) {
  std::mt19937_64 rng(11);
  Program p = fx::running();
  DomainE d(p);
  for (int k = 0; k < 2000; ++k) {
    const TypeEnv& env = p.env(static_cast<EnvId>(rng() % p.num_envs()));
    PointSet a = d.delta(env, fx::random_subset(rng, p.all_points()));
    PointSet b = d.delta(env, fx::random_subset(rng, p.all_points()));
    EXPECT_EQ(d.delta(env, a | b), a | b);
  }
}

TEST(RepresentativesE, Examples) {
  Program p = fx::running();
  TypeEnv w0 = fx::tau_w0(p);
  auto some = representative_states_e(p, w0, fx::pts(p, {"pi3"}));
  EXPECT_FALSE(some.empty());
  EXPECT_EQ(alpha_e(p, w0, some), fx::pts(p, {"pi3"}));
  EXPECT_TRUE(representative_states_e(p, w0, fx::pts(p, {"pi4"})).empty());
  EXPECT_TRUE(representative_states_e(p, w0, {}).empty());
  TypeEnv no_this({{"f", p.class_of("Figure")}, {"k", kInt}});
  auto nulls = representative_states_e(p, no_this, {});
  ASSERT_EQ(nulls.size(), 1u);
  EXPECT_EQ(nulls[0].frame[0], Value::nil());
}

TEST(RepresentativesE, GuardOnPointCount) {
  Program p = fx::running();
  EXPECT_THROW(representative_states_e(p, fx::tau_w1(p), p.all_points(), 3), ConfigError);
}

// delta is a lower closure operator on every scope met while lowering the corpus and 30
// generated programs.
TEST(DeltaProperty, LowerClosureOperator) {
  std::mt19937_64 rng(2024);
  std::vector<Program> progs;
  progs.push_back(fx::running());
  for (std::uint64_t s = 1; s <= 30; ++s) progs.push_back(fx::load_with_external(gen::random_program(s), false));
  std::size_t cases = 0;
  for (int k = 0; k < 10'000; ++k) {
    Program& p = progs[rng() % progs.size()];
    DomainE d(p);
    const TypeEnv& env = p.env(static_cast<EnvId>(rng() % p.num_envs()));
    PointSet a = fx::random_subset(rng, p.all_points());
    PointSet b = a | fx::random_subset(rng, p.all_points());
    PointSet da = d.delta(env, a), db = d.delta(env, b);
    ASSERT_TRUE(da.subset_of(a));
    ASSERT_EQ(d.delta(env, da), da);
    ASSERT_TRUE(da.subset_of(db));
    ++cases;
  }
  EXPECT_EQ(cases, 10'000u);
}

TEST(DeltaProperty, FixpointsAreAbstractionsOfRepresentatives) {
  for (const auto& f : fx::small_corpus()) {
    Program p = fx::load_with_external(fx::corpus(f), true);
    ASSERT_LE(p.num_points(), 4u) << f;
    DomainE d(p);
    for (EnvId id = 0; id < static_cast<EnvId>(p.num_envs()); ++id) {
      const TypeEnv& env = p.env(id);
      for (std::uint64_t bits = 0; bits < (1u << p.num_points()); ++bits) {
        PointSet e;
        for (PointId q = 0; q < static_cast<PointId>(p.num_points()); ++q)
          if (bits >> q & 1u) e.insert(q);
        auto reps = representative_states_e(p, env, e);
        PointSet a = alpha_e(p, env, reps);
        EXPECT_EQ(a, d.delta(env, e)) << f;
        if (env.has("this")) EXPECT_EQ(a.empty(), reps.empty()) << f;
      }
    }
  }
}

TEST(GaloisE, RoundTripOnSmallCorpus) {
  std::size_t checked = 0;
  for (const auto& f : fx::small_corpus()) {
    Program p = fx::load_with_external(fx::corpus(f), true);
    DomainE d(p);
    for (EnvId id = 0; id < static_cast<EnvId>(p.num_envs()); ++id)
      for (const PointSet& e : d.enumerate(p.env(id))) {
        EXPECT_EQ(alpha_e(p, p.env(id), representative_states_e(p, p.env(id), e)), e) << f;
        ++checked;
      }
  }
  EXPECT_GT(checked, 50u);
}

TEST(OptimalityE, MatchesTheInducedOperation) {
  const std::set<Op> ops = {Op::get_var, Op::put_var, Op::new_obj, Op::is_null, Op::restrict, Op::expand, Op::lookup};
  std::size_t checked = 0;
  for (const auto& f : fx::small_corpus()) {
    Program p = fx::load_with_external(fx::corpus(f), true);
    DomainE d(p);
    fx::for_each_instr(p, [&](const Instr& i) {
      if (!ops.count(i.op)) return;
      for (const PointSet& e : d.enumerate(p.env(i.in))) {
        auto out = fx::step_all(p, i, representative_states_e(p, p.env(i.in), e));
        EXPECT_EQ(d.transfer(i, e), alpha_e(p, p.env(i.out), out)) << f << " " << op_name(i.op);
        ++checked;
      }
    });
  }
  EXPECT_GT(checked, 100u);
}

TEST(TransferEProperty, StrictAndMonotone) {
  std::mt19937_64 rng(5);
  for (std::uint64_t s = 0; s <= 20; ++s) {
    Program p = s == 0 ? fx::running() : fx::load_with_external(gen::random_program(s), false, true);
    DomainE d(p, EReturn::shadow);
    DomainE opt(p, EReturn::optimal);
    fx::for_each_instr(p, [&](const Instr& i) {
      const TypeEnv& in = p.env(i.in);
      PointSet empty;
      PointSet a = d.delta(in, fx::random_subset(rng, p.all_points()));
      PointSet b = d.delta(in, a | fx::random_subset(rng, p.all_points()));
      if (is_binary(i.op)) {
        const TypeEnv& in2 = p.env(i.in2);
        PointSet c = d.delta(in2, fx::random_subset(rng, p.all_points()));
        PointSet e = d.delta(in2, c | fx::random_subset(rng, p.all_points()));
        for (DomainE* dom : {&d, &opt}) {
          EXPECT_TRUE(dom->transfer(i, a, &c).subset_of(dom->transfer(i, b, &e))) << op_name(i.op);
          EXPECT_TRUE(dom->transfer(i, empty, &c).empty()) << op_name(i.op);
          if (i.op != Op::ret) EXPECT_TRUE(dom->transfer(i, a, &empty).empty()) << op_name(i.op);
        }
      } else {
        EXPECT_TRUE(d.transfer(i, a).subset_of(d.transfer(i, b))) << op_name(i.op);
        EXPECT_TRUE(d.transfer(i, empty).empty()) << op_name(i.op);
      }
    });
  }
}

TEST(LatticeE, CountAtW1) {
  Program p = fx::running();
  DomainE d(p);
  auto all = d.enumerate(fx::tau_w1(p));
  EXPECT_EQ(all.size(), 11u);
  EXPECT_LT(all.size(), 16u);
  for (const auto& e : all)
    if (!e.empty()) EXPECT_TRUE(e.contains(p.find_point("pibar")));
}
