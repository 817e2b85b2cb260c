#include <gtest/gtest.h>

#include "json.hpp"

#include "escape/oracle.hpp"
#include "fixtures.hpp"
#include "scan_expected.hpp"

using namespace escape;

namespace {

AnalysisConfig config(DomainKind d, const std::string& entry = "") {
  AnalysisConfig c;
  c.domain = d;
  c.entry = entry;
  return c;
}

AnalysisConfig constraints_config(bool per_point, bool frames_merged = false) {
  AnalysisConfig c;
  c.engine = EngineKind::constraints;
  c.fields_per_point = per_point;
  c.frames_merged = frames_merged;
  return c;
}

Program load(const std::string& file, bool shadows = true) {
  LoadOptions o;
  o.shadows = shadows;
  return load_file(fx::corpus(file), o);
}

const MethodReport& method(const Program& p, const Report& r, const std::string& name) {
  MethodId id = p.find_method(name);
  for (const auto& m : r.methods)
    if (m.id == id) return m;
  throw ConfigError("no method " + name);
}

std::map<std::string, bool> allocatable(const Report& r) {
  std::map<std::string, bool> m;
  for (const auto& pt : r.points) m[pt.label] = pt.allocatable;
  return m;
}

std::vector<std::string> scan_decorations(DomainKind d) {
  Program p = load("figures.oo");
  AnalysisConfig c = config(d, "Scan.scan");
  Report r = analyze(p, c);
  return fx::decorations_of(decorate(p, r, c), "Scan.scan");
}

}  // namespace

TEST(RunningExample, EDecorationsOfScan) {
  auto ours = scan_decorations(DomainKind::e);
  ASSERT_EQ(ours.size(), 12u);
  EXPECT_EQ(fx::scan_decorations_as_listed(ours, fx::kScanOmittedE), fx::scan_listing_e());
  EXPECT_EQ(ours.back(), "{pi1, pi2, pi3, pi4, pibar}");
}

TEST(RunningExample, ERDecorationsOfScan) {
  auto ours = scan_decorations(DomainKind::er);
  ASSERT_EQ(ours.size(), 12u);
  EXPECT_EQ(fx::scan_decorations_as_listed(ours, fx::kScanOmittedER), fx::scan_listing_er());
  EXPECT_EQ(ours[fx::kScanOmittedER], "[f->{pi2}, this->{pibar}] * [next->{pi2}, rotation->{pi1, pi4}]");
}

TEST(RunningExample, EEscapesEveryInternalPoint) {
  Program p = load("figures.oo");
  Report r = analyze(p, config(DomainKind::e, "Scan.scan"));
  EXPECT_EQ(method(p, r, "Scan.scan").escaping, fx::pts(p, {"pi1", "pi2", "pi3", "pi4"}));
  for (const auto& [label, ok] : allocatable(r)) EXPECT_FALSE(ok) << label;
}

TEST(RunningExample, ERStackAllocatesSquareAndCircle) {
  Program p = load("figures.oo");
  Report r = analyze(p, config(DomainKind::er, "Scan.scan"));
  EXPECT_TRUE(method(p, r, "Scan.scan").escaping.empty());
  auto a = allocatable(r);
  EXPECT_TRUE(a.at("pi2"));
  EXPECT_TRUE(a.at("pi3"));
  EXPECT_FALSE(a.at("pi1"));
  EXPECT_FALSE(a.at("pi4"));
  // Each rotation escapes its creating method through the receiver's field.
  EXPECT_TRUE(method(p, r, "Square.def").escaping.contains(p.find_point("pi1")));
  EXPECT_TRUE(method(p, r, "Scan.rotate").escaping.contains(p.find_point("pi4")));
}

TEST(RunningExample, DefaultEntryIsTheLastClassWithoutMain) {
  Program p = load("figures.oo");
  Report r = analyze(p, config(DomainKind::er));
  EXPECT_EQ(p.method_name(r.entry), "Scan.scan");
}

TEST(CirclesVariant, RotationAngleIsStackAllocated) {
  Program p = load("circles.oo");
  Report r = analyze(p, config(DomainKind::er, "Scan.scan"));
  auto a = allocatable(r);
  EXPECT_TRUE(a.at("pi4"));
  EXPECT_TRUE(a.at("pi2"));
  EXPECT_TRUE(a.at("pi3"));
}

TEST(EmptyProgram, EmptyReport) {
  Program p = load("empty.oo");
  for (DomainKind d : {DomainKind::e, DomainKind::er}) {
    Report r = analyze(p, config(d));
    EXPECT_EQ(r.entry, -1);
    EXPECT_TRUE(r.methods.empty());
    EXPECT_TRUE(r.points.empty());
  }
}

TEST(HandCorpus, ExpectedAllocations) {
  const std::map<std::string, std::map<std::string, bool>> expected = {
      {"pair.oo", {{"p1", false}, {"p2", false}}},
      {"chain.oo", {{"c0", true}, {"c1", false}}},
      {"dispatch.oo", {{"b1", true}, {"s1", true}}},
      {"local.oo", {{"q1", false}, {"q2", true}}},
  };
  for (const auto& [file, want] : expected) {
    Program p = load(file);
    EXPECT_EQ(allocatable(analyze(p, config(DomainKind::er))), want) << file;
  }
}

TEST(Config, RejectsInvalidCombinations) {
  Program p = load("figures.oo");
  AnalysisConfig c = constraints_config(false);
  c.domain = DomainKind::e;
  EXPECT_THROW(analyze(p, c), ConfigError);
  AnalysisConfig s = config(DomainKind::er);
  s.simple_return_lookup = true;
  EXPECT_THROW(analyze(p, s), ConfigError);
  EXPECT_THROW(analyze(p, config(DomainKind::er, "Scan.nothing")), ConfigError);
}

TEST(Report, JsonIsDeterministicAndFollowsTheSchema) {
  for (const auto& f : fx::hand_corpus()) {
    for (bool constraints : {false, true}) {
      AnalysisConfig c = constraints ? constraints_config(true) : config(DomainKind::er);
      Program p1 = load(f), p2 = load(f);
      std::string a = report_json(p1, analyze(p1, c));
      std::string b = report_json(p2, analyze(p2, c));
      EXPECT_EQ(a, b) << f;
      auto j = nlohmann::json::parse(a);
      ASSERT_TRUE(j.contains("methods") && j["methods"].is_array()) << f;
      for (const auto& m : j["methods"]) {
        EXPECT_TRUE(m["name"].is_string());
        EXPECT_TRUE(m["escaping"].is_array());
        for (const auto& pt : m["points"]) {
          EXPECT_TRUE(pt["id"].is_string());
          EXPECT_TRUE(pt["class"].is_string());
          EXPECT_TRUE(pt["allocatable"].is_boolean());
        }
      }
      for (const char* k : {"nc", "linearity", "iterations", "millis"}) EXPECT_TRUE(j["stats"].contains(k)) << k;
      if (constraints && f != "empty.oo") EXPECT_GT(j["stats"]["nc"].get<int>(), 0) << f;
    }
  }
}

// ER is at least as precise as E on every method.
TEST(Precision, ERWithinE) {
  for (const auto& src : fx::differential_corpus(40)) {
    Program pe = load_program(src.source), per = load_program(src.source);
    Report e = analyze(pe, config(DomainKind::e));
    Report er = analyze(per, config(DomainKind::er));
    ASSERT_EQ(e.methods.size(), er.methods.size());
    for (std::size_t k = 0; k < e.methods.size(); ++k)
      EXPECT_TRUE(er.methods[k].escaping.subset_of(e.methods[k].escaping)) << src.name << " " << e.methods[k].name;
  }
}

namespace {

struct Variant {
  const char* name;
  AnalysisConfig cfg;
  bool shadows = true;
};

std::vector<Variant> variants() {
  std::vector<Variant> v;
  v.push_back({"e", config(DomainKind::e)});
  AnalysisConfig simple = config(DomainKind::e);
  simple.simple_return_lookup = true;
  v.push_back({"e simple", simple});
  v.push_back({"er", config(DomainKind::er)});
  AnalysisConfig flat = config(DomainKind::er);
  flat.contexts = false;
  v.push_back({"er no contexts", flat});
  v.push_back({"er no shadows", config(DomainKind::er), false});
  v.push_back({"constraints global", constraints_config(false)});
  v.push_back({"constraints per point", constraints_config(true)});
  v.push_back({"constraints merged frames", constraints_config(false, true)});
  return v;
}

}  // namespace

// Every concrete state met at a mark is abstracted below the decoration there.
TEST(Soundness, OracleWithinDecorations) {
  RunOptions budget;
  budget.budget = 100'000;
  auto corpus = fx::differential_corpus(60);
  ASSERT_GE(corpus.size(), 50u);
  for (const auto& v : variants()) {
    std::size_t marks = 0;
    for (const auto& src : corpus) {
      LoadOptions o;
      o.shadows = v.shadows;
      Program p = load_program(src.source, o);
      Report r = analyze(p, v.cfg);
      OracleResult res = oracle_check(p, r, v.cfg, budget);
      EXPECT_FALSE(res.truncated) << v.name << " " << src.name;
      EXPECT_TRUE(res.violations.empty()) << v.name << " " << src.name << ": " << res.violations.front();
      marks += res.marks_checked;
    }
    EXPECT_GT(marks, 500u) << v.name;
  }
}

namespace {

bool same_escapes(const Report& a, const Report& b) {
  for (std::size_t k = 0; k < a.methods.size(); ++k)
    if (a.methods[k].escaping != b.methods[k].escaping) return false;
  return true;
}

bool within(const Report& precise, const Report& coarse) {
  for (std::size_t k = 0; k < precise.methods.size(); ++k)
    if (!precise.methods[k].escaping.subset_of(coarse.methods[k].escaping)) return false;
  return true;
}

}  // namespace

// The constraint engine with per-point fields gives the same escape sets as the denotational
// engine with one summary per method; merging fields or frames only loses precision.
TEST(EngineAgreement, PerPointFieldsMatchTheDenotationalEngine) {
  AnalysisConfig flat = config(DomainKind::er);
  flat.contexts = false;
  for (const auto& src : fx::differential_corpus(60)) {
    auto run = [&](const AnalysisConfig& c) {
      Program p = load_program(src.source);
      return analyze(p, c);
    };
    Report den = run(flat);
    Report pp = run(constraints_config(true));
    Report global = run(constraints_config(false));
    Report merged = run(constraints_config(false, true));
    ASSERT_EQ(den.methods.size(), pp.methods.size());
    EXPECT_TRUE(same_escapes(den, pp)) << src.name;
    EXPECT_TRUE(within(pp, global)) << src.name;
    EXPECT_TRUE(within(global, merged)) << src.name;
    EXPECT_TRUE(within(den, merged)) << src.name;
  }
}

// Over a wider sweep the per-point engine is never more precise than the denotational one.
// It can be strictly coarser: fields are only collected at method exits and a field store
// always keeps the old contents, so a few generated programs lose precision.
TEST(EngineAgreement, ConstraintsNeverBelowDenotational) {
  AnalysisConfig flat = config(DomainKind::er);
  flat.contexts = false;
  std::size_t methods = 0, coarser = 0;
  for (std::uint64_t s = 61; s <= 400; ++s) {
    std::string src = gen::random_program(s);
    Program pd = load_program(src), pc = load_program(src);
    Report den = analyze(pd, flat);
    Report pp = analyze(pc, constraints_config(true));
    for (std::size_t k = 0; k < den.methods.size(); ++k) {
      EXPECT_TRUE(den.methods[k].escaping.subset_of(pp.methods[k].escaping)) << "seed " << s;
      ++methods;
      if (den.methods[k].escaping != pp.methods[k].escaping) ++coarser;
    }
  }
  RecordProperty("methods", static_cast<int>(methods));
  RecordProperty("coarser", static_cast<int>(coarser));
  EXPECT_LT(coarser * 50, methods);
}

TEST(Constraints, RunningExampleStats) {
  Program p = load("figures.oo");
  AnalysisConfig c = constraints_config(false);
  c.entry = "Scan.scan";
  Report r = analyze(p, c);
  EXPECT_EQ(r.stats.nc, 862u);
  EXPECT_NEAR(r.stats.linearity, 1.2570, 1e-4);
  std::size_t total = 0;
  for (auto n : r.scc_sizes) total += n;
  EXPECT_EQ(total, 807u);
  EXPECT_TRUE(method(p, r, "Scan.scan").escaping.empty());
}
