#include "escape/analysis.hpp"

#include <chrono>
#include "json.hpp"
#include <sstream>

#include "escape/constraints.hpp"
#include "escape/domain_e.hpp"
#include "escape/domain_er.hpp"
#include "escape/engine.hpp"

namespace escape {

MethodId default_entry(const Program& p) {
  for (std::size_t m = 0; m < p.methods.size(); ++m)
    if (p.methods[m].name == "main") return static_cast<MethodId>(m);
  for (auto c = p.classes.rbegin(); c != p.classes.rend(); ++c)
    if (!c->own_methods.empty()) return c->own_methods.front();
  return -1;
}

namespace {

PointSet external_points(const Program& p) {
  PointSet r;
  for (std::size_t k = 0; k < p.points.size(); ++k)
    if (p.points[k].external) r.insert(static_cast<PointId>(k));
  return r;
}

MarkId watch_mark(const Program& p, const MethodInfo& m) { return p.shadows ? m.exit_mark : m.block_end_mark; }

void run_e(const Program& p, const AnalysisConfig& cfg, Report& r) {
  EReturn mode = cfg.simple_return_lookup ? EReturn::simple : (p.shadows ? EReturn::shadow : EReturn::optimal);
  DomainE d(p, mode);
  Denotational<EAdaptor> eng(p, EAdaptor{d}, cfg.contexts);
  const MethodInfo& root = p.methods[static_cast<std::size_t>(r.entry)];
  PointSet input;
  input.insert(r.external);
  eng.run(r.entry, d.delta(root.entry_env, input));
  for (std::size_t k = 0; k < p.marks.size(); ++k) {
    r.e_at.push_back(eng.at(static_cast<MarkId>(k)));
    r.reached.push_back(eng.reached(static_cast<MarkId>(k)));
  }
  for (auto& mr : r.methods) {
    MarkId w = watch_mark(p, p.methods[static_cast<std::size_t>(mr.id)]);
    mr.reached = eng.reached(p.methods[static_cast<std::size_t>(mr.id)].entry_mark);
    mr.escaping = eng.at(w);
  }
  r.stats.iterations = eng.iterations();
}

void run_er(const Program& p, const AnalysisConfig& cfg, Report& r) {
  DomainER d(p, p.shadows ? ERReturn::shadow : ERReturn::worst_memory);
  Denotational<ERAdaptor> eng(p, ERAdaptor{d}, cfg.contexts);
  const MethodInfo& root = p.methods[static_cast<std::size_t>(r.entry)];
  const TypeEnv& env = p.env(root.entry_env);
  ERState s = d.empty_state(env);
  s.frame[static_cast<std::size_t>(env.index_of(kThis))].insert(r.external);
  eng.run(r.entry, d.xi(env, s));
  for (std::size_t k = 0; k < p.marks.size(); ++k) {
    r.er_at.push_back(eng.at(static_cast<MarkId>(k)));
    r.reached.push_back(eng.reached(static_cast<MarkId>(k)));
  }
  for (auto& mr : r.methods) {
    const MethodInfo& mi = p.methods[static_cast<std::size_t>(mr.id)];
    MarkId w = watch_mark(p, mi);
    mr.reached = eng.reached(mi.entry_mark);
    const ERElem& x = eng.at(w);
    if (x) mr.escaping = d.rho(p.env(p.marks[static_cast<std::size_t>(w)].env), *x);
  }
  r.stats.iterations = eng.iterations();
}

void run_constraints(const Program& p, const AnalysisConfig& cfg, Report& r) {
  ConstraintOptions o;
  o.fields_per_point = cfg.fields_per_point;
  o.frames_merged = cfg.frames_merged;
  ConstraintSystem cs = generate_constraints(p, r.entry, r.external, o);
  Solution sol = solve(cs.graph);
  for (auto& mr : r.methods) {
    auto m = static_cast<std::size_t>(mr.id);
    mr.reached = !sol.value[static_cast<std::size_t>(cs.entry_this[m])].empty();
    if (mr.reached) mr.escaping = sol.value[static_cast<std::size_t>(cs.escape[m])];
  }
  for (std::size_t k = 0; k < p.marks.size(); ++k) {
    bool reached = r.methods[static_cast<std::size_t>(p.marks[k].method)].reached;
    r.reached.push_back(reached);
    r.er_at.push_back(reached ? constraint_decoration(p, cs, sol, static_cast<MarkId>(k)) : ERElem{});
  }
  r.stats.nc = cs.graph.num_constraints();
  r.stats.linearity = sol.linearity();
  r.stats.iterations = sol.visits;
  for (const auto& c : sol.components) r.scc_sizes.push_back(c.size());
}

}  // namespace

Report analyze(Program& p, const AnalysisConfig& cfg) {
  if (cfg.engine == EngineKind::constraints && cfg.domain != DomainKind::er)
    throw ConfigError("the constraints engine requires --domain er");
  if (cfg.simple_return_lookup && cfg.domain != DomainKind::e)
    throw ConfigError("--simple-return-lookup applies to --domain e only");
  auto start = std::chrono::steady_clock::now();
  Report r;
  if (!cfg.entry.empty()) {
    r.entry = p.find_method(cfg.entry);
    if (r.entry < 0) throw ConfigError("unknown entry method '" + cfg.entry + "'");
  } else {
    r.entry = default_entry(p);
  }
  if (r.entry < 0) return r;
  r.external = p.add_external_point(p.methods[static_cast<std::size_t>(r.entry)].owner, "pibar");

  for (std::size_t m = 0; m < p.methods.size(); ++m)
    r.methods.push_back({static_cast<MethodId>(m), p.method_name(static_cast<MethodId>(m)), false, {}});
  if (cfg.engine == EngineKind::constraints)
    run_constraints(p, cfg, r);
  else if (cfg.domain == DomainKind::e)
    run_e(p, cfg, r);
  else
    run_er(p, cfg, r);

  PointSet ext = external_points(p);
  for (auto& mr : r.methods) {
    if (!mr.reached) mr.escaping = {};
    mr.escaping -= ext;
  }
  for (std::size_t k = 0; k < p.points.size(); ++k) {
    const CreationPoint& cp = p.points[k];
    if (cp.external) continue;
    PointReport pr;
    pr.id = static_cast<PointId>(k);
    pr.label = cp.label;
    pr.cls = p.classes[static_cast<std::size_t>(cp.cls)].name;
    pr.owner = cp.owner;
    pr.allocatable = !r.methods[static_cast<std::size_t>(cp.owner)].escaping.contains(pr.id);
    r.points.push_back(pr);
  }
  if (cfg.timing)
    r.stats.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

namespace {

std::vector<std::string> labels(const Program& p, const PointSet& s) {
  std::vector<std::string> r;
  s.for_each([&](PointId pt) { r.push_back(p.points[static_cast<std::size_t>(pt)].label); });
  return r;
}

}  // namespace

std::string report_json(const Program& p, const Report& r) {
  nlohmann::ordered_json j;
  j["methods"] = nlohmann::ordered_json::array();
  for (const auto& mr : r.methods) {
    nlohmann::ordered_json m;
    m["name"] = mr.name;
    m["reached"] = mr.reached;
    m["escaping"] = labels(p, mr.escaping);
    m["points"] = nlohmann::ordered_json::array();
    for (const auto& pr : r.points) {
      if (pr.owner != mr.id) continue;
      m["points"].push_back({{"id", pr.label}, {"class", pr.cls}, {"allocatable", pr.allocatable}});
    }
    j["methods"].push_back(std::move(m));
  }
  j["stats"] = {{"nc", r.stats.nc},
                {"linearity", r.stats.linearity},
                {"iterations", r.stats.iterations},
                {"millis", r.stats.millis}};
  return j.dump(2) + "\n";
}

std::string report_text(const Program& p, const Report& r) {
  std::ostringstream os;
  for (const auto& mr : r.methods) {
    os << mr.name << (mr.reached ? "" : " (unreached)") << "\n  escaping " << render_points(p, mr.escaping) << "\n";
    for (const auto& pr : r.points) {
      if (pr.owner != mr.id) continue;
      os << "  " << pr.label << " " << pr.cls << (pr.allocatable ? " stack" : " heap") << "\n";
    }
  }
  os << "nc " << r.stats.nc << " linearity " << r.stats.linearity << " iterations " << r.stats.iterations
     << " millis " << r.stats.millis << "\n";
  return os.str();
}

std::string decorate(const Program& p, const Report& r, const AnalysisConfig& cfg, bool show_shadows) {
  std::ostringstream os;
  DomainER er(p);
  for (std::size_t m = 0; m < p.methods.size(); ++m) {
    os << "// " << p.method_name(static_cast<MethodId>(m)) << "\n";
    for (const auto& line : p.methods[m].layout) {
      std::string pad(static_cast<std::size_t>(line.depth) * 2, ' ');
      if (line.mark < 0) {
        os << pad << line.text << "\n";
        continue;
      }
      auto k = static_cast<std::size_t>(line.mark);
      const Mark& mk = p.marks[k];
      if (mk.kind == MarkKind::compound || mk.kind == MarkKind::exit) continue;
      os << pad;
      if (k >= r.reached.size() || !r.reached[k])
        os << "unreached";
      else if (cfg.domain == DomainKind::e && cfg.engine == EngineKind::denotational)
        os << render_points(p, r.e_at[k]);
      else
        os << er.render(p.env(mk.env), r.er_at[k], show_shadows);
      os << "\n";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace escape
