#include "escape/oracle.hpp"

#include "escape/domain_er.hpp"

namespace escape {

OracleResult oracle_check(const Program& p, const Report& r, const AnalysisConfig& cfg, const RunOptions& opts) {
  OracleResult res;
  if (r.entry < 0) return res;
  State init = entry_state(p, r.entry, r.external);
  Collected c = run_collecting(p, r.entry, {init}, opts);
  res.truncated = c.truncated;
  bool use_e = cfg.domain == DomainKind::e && cfg.engine == EngineKind::denotational;
  DomainER er(p);
  for (const auto& [mark, states] : c.at) {
    auto k = static_cast<std::size_t>(mark);
    const TypeEnv& env = p.env(p.marks[k].env);
    std::vector<State> v(states.begin(), states.end());
    ++res.marks_checked;
    res.states += v.size();
    std::string where = p.method_name(p.marks[k].method) + " line " + std::to_string(p.marks[k].line);
    if (use_e) {
      PointSet a = alpha_e(p, env, v);
      if (!a.subset_of(r.e_at[k]))
        res.violations.push_back(where + ": " + render_points(p, a) + " not within " + render_points(p, r.e_at[k]));
    } else {
      ERElem a = alpha_er(p, env, v);
      if (!DomainER::leq(a, r.er_at[k]))
        res.violations.push_back(where + ": " + er.render(env, a, true) + " not within " +
                                 er.render(env, r.er_at[k], true));
    }
  }
  return res;
}

}  // namespace escape
