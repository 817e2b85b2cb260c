// Command-line driver: analyze, decorate, constraints, oracle-check, lattice-count.
#include <cctype>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "escape/analysis.hpp"
#include "escape/constraints.hpp"
#include "escape/domain_e.hpp"
#include "escape/domain_er.hpp"
#include "escape/frontend.hpp"
#include "escape/oracle.hpp"

using namespace escape;

namespace {

struct Options {
  std::string file;
  std::string domain = "er";
  std::string engine = "denotational";
  std::string fields = "global";
  std::string frames = "per-point";
  std::string format = "text";
  std::string entry;
  std::string env;
  bool simple = false;
  bool no_contexts = false;
  bool no_shadows = false;
  bool timing = false;
  bool show_shadows = false;
  bool list = false;
  std::size_t budget = 100'000;
};

AnalysisConfig config(const Options& o) {
  AnalysisConfig c;
  c.domain = o.domain == "e" ? DomainKind::e : DomainKind::er;
  c.engine = o.engine == "constraints" ? EngineKind::constraints : EngineKind::denotational;
  c.simple_return_lookup = o.simple;
  c.contexts = !o.no_contexts;
  c.fields_per_point = o.fields == "per-point";
  c.frames_merged = o.frames == "merged";
  c.entry = o.entry;
  c.timing = o.timing;
  return c;
}

Program load(const Options& o) { return load_file(o.file, LoadOptions{!o.no_shadows}); }

int cmd_analyze(const Options& o) {
  Program p = load(o);
  AnalysisConfig c = config(o);
  Report r = analyze(p, c);
  std::cout << (o.format == "json" ? report_json(p, r) : report_text(p, r));
  return 0;
}

int cmd_decorate(const Options& o) {
  Program p = load(o);
  AnalysisConfig c = config(o);
  Report r = analyze(p, c);
  std::cout << decorate(p, r, c, o.show_shadows);
  return 0;
}

int cmd_constraints(const Options& o) {
  Program p = load(o);
  MethodId entry = o.entry.empty() ? default_entry(p) : p.find_method(o.entry);
  if (!o.entry.empty() && entry < 0) throw ConfigError("unknown entry method '" + o.entry + "'");
  PointId ext = -1;
  if (entry >= 0) ext = p.add_external_point(p.methods[static_cast<std::size_t>(entry)].owner, "pibar");
  ConstraintOptions co;
  co.fields_per_point = o.fields == "per-point";
  co.frames_merged = o.frames == "merged";
  ConstraintSystem cs = generate_constraints(p, entry, ext, co);
  Solution sol = solve(cs.graph);
  std::map<std::size_t, std::size_t> sizes;
  for (const auto& comp : sol.components) ++sizes[comp.size()];
  std::cout << "unknowns " << cs.graph.num_unknowns() << "\n"
            << "nc " << cs.graph.num_constraints() << "\n"
            << "components " << sol.components.size() << "\n"
            << "linearity " << sol.linearity() << "\n"
            << "visits " << sol.visits << "\n";
  for (const auto& [size, count] : sizes) std::cout << "scc " << size << " x" << count << "\n";
  if (o.list) {
    const auto& g = cs.graph;
    for (std::size_t u = 0; u < g.num_unknowns(); ++u)
      if (!g.seed(static_cast<int>(u)).empty())
        std::cout << render_points(p, g.seed(static_cast<int>(u))) << " <= " << g.name(static_cast<int>(u)) << "\n";
    for (const auto& e : g.edges()) {
      std::cout << g.name(e.src);
      if (e.filter) std::cout << " & " << render_points(p, e.mask);
      std::cout << " <= " << g.name(e.dst);
      if (e.guard >= 0) std::cout << "  if " << g.name(e.guard) << " meets " << render_points(p, e.mask);
      std::cout << "\n";
    }
  }
  return 0;
}

int cmd_oracle(const Options& o) {
  Program p = load(o);
  AnalysisConfig c = config(o);
  Report r = analyze(p, c);
  RunOptions ro;
  ro.budget = o.budget;
  OracleResult res = oracle_check(p, r, c, ro);
  std::cout << "marks " << res.marks_checked << " states " << res.states << (res.truncated ? " truncated" : "") << "\n";
  for (const auto& v : res.violations) std::cout << "violation " << v << "\n";
  std::cout << (res.violations.empty() ? "ok" : "FAILED") << "\n";
  return res.violations.empty() ? 0 : 2;
}

// "f:Figure,n:Figure,out:int,this:Scan"
TypeEnv parse_env(const Program& p, const std::string& bindings) {
  std::vector<TypeEnv::Binding> b;
  std::stringstream ss(bindings);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("bad binding '" + item + "', expected name:Type");
    std::string ty = item.substr(colon + 1);
    b.emplace_back(item.substr(0, colon), ty == "int" ? kInt : p.class_of(ty));
  }
  return TypeEnv(std::move(b));
}

int cmd_lattice(const Options& o) {
  Program p = load(o);
  MethodId entry = o.entry.empty() ? default_entry(p) : p.find_method(o.entry);
  if (entry >= 0) p.add_external_point(p.methods[static_cast<std::size_t>(entry)].owner, "pibar");
  TypeEnv env = parse_env(p, o.env);
  DomainE e(p);
  DomainER er(p);
  // Both counts include the bottom element: the empty set for E, an extra element for ER.
  std::cout << "points " << p.num_points() << "\n"
            << "E " << e.enumerate(env).size() << " of " << (std::uint64_t{1} << p.num_points()) << "\n"
            << "ER " << er.enumerate(env).size() + 1 << " of " << er.candidate_count(env) + 1 << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Escape analysis for a small object-oriented language"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* s, bool analysis) {
    s->add_option("file", o.file, "program source (.oo)")->required()->check(CLI::ExistingFile);
    s->add_option("--entry", o.entry, "entry method as Class.method");
    s->add_flag("--no-shadows", o.no_shadows, "do not insert shadow copies of parameters");
    if (!analysis) return;
    s->add_option("--domain", o.domain, "abstract domain")->check(CLI::IsMember({"e", "er"}));
    s->add_option("--engine", o.engine, "analysis backend")->check(CLI::IsMember({"denotational", "constraints"}));
    s->add_flag("--simple-return-lookup", o.simple, "coarse return and lookup for domain e");
    s->add_flag("--no-contexts", o.no_contexts, "denotational engine keeps one summary per method");
    s->add_option("--fields", o.fields, "field unknowns of the constraints engine")
        ->check(CLI::IsMember({"global", "per-point"}));
    s->add_option("--frames", o.frames, "frame unknowns of the constraints engine")
        ->check(CLI::IsMember({"per-point", "merged"}));
  };

  auto* analyze = app.add_subcommand("analyze", "report stack-allocatable creation points");
  common(analyze, true);
  analyze->add_option("--format", o.format, "output format")->check(CLI::IsMember({"text", "json"}));
  analyze->add_flag("--timing", o.timing, "report wall time in stats.millis");

  auto* deco = app.add_subcommand("decorate", "print every method with its abstract decorations");
  common(deco, true);
  deco->add_flag("--show-shadows", o.show_shadows, "include shadow copies in decorations");

  auto* cons = app.add_subcommand("constraints", "print constraint statistics");
  common(cons, false);
  cons->add_option("--fields", o.fields, "field unknowns")->check(CLI::IsMember({"global", "per-point"}));
  cons->add_option("--frames", o.frames, "frame unknowns")->check(CLI::IsMember({"per-point", "merged"}));
  cons->add_flag("--list", o.list, "print every constraint");

  auto* oracle = app.add_subcommand("oracle-check", "compare decorations with a concrete run");
  common(oracle, true);
  oracle->add_option("--budget", o.budget, "instruction step budget");

  auto* lattice = app.add_subcommand("lattice-count", "count canonical elements for a type environment");
  common(lattice, false);
  lattice->add_option("--env", o.env, "bindings such as f:Figure,out:int,this:Scan")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*analyze) return cmd_analyze(o);
    if (*deco) return cmd_decorate(o);
    if (*cons) return cmd_constraints(o);
    if (*oracle) return cmd_oracle(o);
    if (*lattice) return cmd_lattice(o);
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    bool located = !msg.empty() && std::isdigit(static_cast<unsigned char>(msg[0]));
    std::cerr << o.file << (located ? ":" : ": ") << msg << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
