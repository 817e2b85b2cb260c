#include "escape/constraints.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "escape/frontend.hpp"

namespace escape {

int ConstraintGraph::add_unknown(std::string name) {
  names_.push_back(std::move(name));
  seeds_.emplace_back();
  return static_cast<int>(names_.size()) - 1;
}

void ConstraintGraph::add_const(int dst, const PointSet& c) {
  seeds_[static_cast<std::size_t>(dst)] |= c;
  ++consts_;
}

void ConstraintGraph::add_copy(int src, int dst) {
  if (src == dst) return;
  edges_.push_back({src, dst, false, -1, {}});
}

void ConstraintGraph::add_filter(int src, int dst, const PointSet& mask) {
  if (mask.empty()) return;
  edges_.push_back({src, dst, true, -1, mask});
}

void ConstraintGraph::add_guarded(int src, int dst, int guard, const PointSet& mask) {
  if (mask.empty() || src == dst) return;
  edges_.push_back({src, dst, false, guard, mask});
}

double Solution::linearity() const {
  if (components.empty()) return 1.0;
  return static_cast<double>(value.size()) / static_cast<double>(components.size());
}

Solution solve(const ConstraintGraph& g) {
  const std::size_t n = g.num_unknowns();
  // Dependencies: src and guard must be known before dst.
  std::vector<std::vector<int>> succ(n);
  std::vector<std::vector<std::size_t>> incoming(n);
  for (std::size_t k = 0; k < g.edges().size(); ++k) {
    const auto& e = g.edges()[k];
    succ[static_cast<std::size_t>(e.src)].push_back(e.dst);
    if (e.guard >= 0) succ[static_cast<std::size_t>(e.guard)].push_back(e.dst);
    incoming[static_cast<std::size_t>(e.dst)].push_back(k);
  }

  // Iterative Tarjan; components come out in reverse topological order.
  Solution sol;
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int counter = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<std::pair<int, std::size_t>> work{{static_cast<int>(root), 0}};
    while (!work.empty()) {
      auto& [v, next] = work.back();
      auto vi = static_cast<std::size_t>(v);
      if (next == 0 && index[vi] < 0) {
        index[vi] = low[vi] = counter++;
        stack.push_back(v);
        on_stack[vi] = true;
      }
      if (next < succ[vi].size()) {
        int w = succ[vi][next++];
        auto wi = static_cast<std::size_t>(w);
        if (index[wi] < 0) {
          work.emplace_back(w, 0);
        } else if (on_stack[wi]) {
          low[vi] = std::min(low[vi], index[wi]);
        }
        continue;
      }
      if (low[vi] == index[vi]) {
        std::vector<int> comp;
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        sol.components.push_back(std::move(comp));
      }
      int done = v;
      work.pop_back();
      if (!work.empty()) {
        auto pi = static_cast<std::size_t>(work.back().first);
        low[pi] = std::min(low[pi], low[static_cast<std::size_t>(done)]);
      }
    }
  }
  std::reverse(sol.components.begin(), sol.components.end());

  sol.value.assign(n, PointSet{});
  for (std::size_t u = 0; u < n; ++u) sol.value[u] = g.seed(static_cast<int>(u));
  auto eval = [&](int u) {
    PointSet r = sol.value[static_cast<std::size_t>(u)];
    for (std::size_t k : incoming[static_cast<std::size_t>(u)]) {
      const auto& e = g.edges()[k];
      const PointSet& src = sol.value[static_cast<std::size_t>(e.src)];
      if (e.guard >= 0) {
        if (sol.value[static_cast<std::size_t>(e.guard)].intersects(e.mask)) r |= src;
      } else if (e.filter) {
        r |= src & e.mask;
      } else {
        r |= src;
      }
    }
    return r;
  };
  for (const auto& comp : sol.components) {
    bool changed = true;
    while (changed) {
      changed = false;
      ++sol.visits;
      for (int u : comp) {
        PointSet r = eval(u);
        if (!(r == sol.value[static_cast<std::size_t>(u)])) {
          sol.value[static_cast<std::size_t>(u)] = r;
          changed = true;
        }
      }
      if (comp.size() == 1) {
        // A singleton only needs another round when it feeds itself.
        bool self = false;
        for (std::size_t k : incoming[static_cast<std::size_t>(comp[0])]) {
          const auto& e = g.edges()[k];
          if (e.src == comp[0] || e.guard == comp[0]) self = true;
        }
        if (!self) break;
      }
    }
  }
  return sol;
}

namespace {

struct Frame {
  EnvId env = -1;
  std::vector<int> ids;  // per slot
  std::vector<int> mem;  // per field
};

class Generator {
public:
  Generator(const Program& p, const ConstraintOptions& opts, ConstraintSystem& cs) : p_(p), o_(opts), cs_(cs) {}

  void run(MethodId root, PointId external) {
    cs_.frames.assign(p_.marks.size(), {});
    cs_.mems.assign(p_.marks.size(), {});
    global_.assign(p_.fields.size(), -1);
    if (!o_.fields_per_point)
      for (std::size_t f = 0; f < p_.fields.size(); ++f)
        if (is_class(p_.fields[f].type)) global_[f] = g().add_unknown(p_.fields[f].name);
    for (std::size_t m = 0; m < p_.methods.size(); ++m) {
      const MethodInfo& mi = p_.methods[m];
      method_ = static_cast<MethodId>(m);
      Frame in = fresh(mi.entry_env, "in");
      in.mem = fresh_mem("in");
      inputs_.push_back(in);
      outputs_.push_back(is_class(p_.env(mi.exit_env).at(kOut)) ? g().add_unknown(p_.method_name(method_) + ".out") : -1);
      exit_mem_.push_back(fresh_mem("exit"));
      escape_.push_back(g().add_unknown(p_.method_name(method_) + ".escape"));
      cs_.entry_this.push_back(in.ids[static_cast<std::size_t>(p_.env(mi.entry_env).index_of(kThis))]);
    }
    if (root >= 0) {
      PointSet ext;
      ext.insert(external);
      g().add_const(cs_.entry_this[static_cast<std::size_t>(root)], ext);
    }
    for (std::size_t m = 0; m < p_.methods.size(); ++m) {
      method_ = static_cast<MethodId>(m);
      const MethodInfo& mi = p_.methods[m];
      Frame exit = gen(mi.body, inputs_[m]);
      if (int out = outputs_[m]; out >= 0) g().add_copy(slot(exit, kOut), out);
      watch(mi, m);
    }
    cs_.escape = escape_;
  }

private:
  ConstraintGraph& g() { return cs_.graph; }

  int new_slot(EnvId env, std::size_t k, const char* tag) {
    const TypeEnv& te = p_.env(env);
    if (!is_class(te.type(k))) return -1;
    if (o_.frames_merged) {
      auto key = std::make_pair(method_, te.name(k));
      auto it = merged_.find(key);
      if (it != merged_.end()) return it->second;
      int u = g().add_unknown(p_.method_name(method_) + "." + te.name(k));
      merged_.emplace(key, u);
      return u;
    }
    return g().add_unknown(p_.method_name(method_) + "." + te.name(k) + "@" + tag + std::to_string(++serial_));
  }

  Frame fresh(EnvId env, const char* tag) {
    Frame f{env, {}, {}};
    for (std::size_t k = 0; k < p_.env(env).size(); ++k) f.ids.push_back(new_slot(env, k, tag));
    return f;
  }

  // Field unknowns for a point where the memory may change; the global ones when fields are global.
  std::vector<int> fresh_mem(const char* tag) {
    if (!o_.fields_per_point) return global_;
    std::vector<int> r(p_.fields.size(), -1);
    for (std::size_t f = 0; f < p_.fields.size(); ++f)
      if (is_class(p_.fields[f].type))
        r[f] = g().add_unknown(p_.method_name(method_) + "." + p_.fields[f].name + "@" + tag + std::to_string(++serial_));
    return r;
  }

  void copy_mem(const std::vector<int>& from, const std::vector<int>& into) {
    for (std::size_t f = 0; f < into.size(); ++f)
      if (into[f] >= 0 && from[f] >= 0) g().add_copy(from[f], into[f]);
  }

  int slot(const Frame& f, std::string_view v) const {
    int i = p_.env(f.env).index_of(v);
    if (i < 0) throw ConfigError("variable '" + std::string(v) + "' not in scope");
    return f.ids[static_cast<std::size_t>(i)];
  }

  // Output frame over env out, sharing the memory of in. Slots named in fresh_vars start
  // empty; the others copy from the input.
  Frame reframe(const Frame& in, EnvId out, std::initializer_list<std::string_view> fresh_vars = {}) {
    Frame r{out, {}, in.mem};
    const TypeEnv& te = p_.env(out);
    const TypeEnv& ti = p_.env(in.env);
    for (std::size_t k = 0; k < te.size(); ++k) {
      int u = new_slot(out, k, "p");
      r.ids.push_back(u);
      if (u < 0) continue;
      bool skip = std::find(fresh_vars.begin(), fresh_vars.end(), te.name(k)) != fresh_vars.end();
      int i = ti.index_of(te.name(k));
      if (!skip && i >= 0 && in.ids[static_cast<std::size_t>(i)] >= 0) g().add_copy(in.ids[static_cast<std::size_t>(i)], u);
    }
    return r;
  }

  Frame join_frame(EnvId env, const char* tag) {
    Frame r = fresh(env, tag);
    r.mem = fresh_mem(tag);
    return r;
  }

  void join_into(const Frame& from, const Frame& into) {
    for (std::size_t k = 0; k < into.ids.size(); ++k)
      if (into.ids[k] >= 0 && from.ids[k] >= 0) g().add_copy(from.ids[k], into.ids[k]);
    copy_mem(from.mem, into.mem);
  }

  Frame transfer(const Instr& i, const Frame& a, const Frame* b) {
    switch (i.op) {
      case Op::nop:
      case Op::get_int:
      case Op::get_null:
      case Op::expand:
        return reframe(a, i.out, {kRes, i.var});
      case Op::is_true:
      case Op::is_false:
      case Op::is_null:
        return reframe(a, i.out, {kRes});
      case Op::restrict:
        return reframe(a, i.out);
      case Op::get_var: {
        Frame r = reframe(a, i.out, {kRes});
        if (int src = slot(a, i.var); src >= 0) g().add_copy(src, slot(r, kRes));
        return r;
      }
      case Op::put_var: {
        Frame r = reframe(a, i.out, {i.var});
        if (int src = slot(a, kRes); src >= 0) g().add_copy(src, slot(r, i.var));
        return r;
      }
      case Op::new_obj: {
        // {pi} flows only once the method itself is reached.
        Frame r = reframe(a, i.out, {kRes});
        auto& c = point_const_[i.point];
        if (c == 0) {
          c = g().add_unknown(p_.points[static_cast<std::size_t>(i.point)].label) + 1;
          PointSet one;
          one.insert(i.point);
          g().add_const(c - 1, one);
        }
        g().add_guarded(c - 1, slot(r, kRes), cs_.entry_this[static_cast<std::size_t>(method_)], p_.all_points());
        return r;
      }
      case Op::eq:
      case Op::plus:
      case Op::lt:
      case Op::minus:
        return reframe(*b, i.out, {kRes});
      case Op::get_field: {
        Frame r = reframe(a, i.out, {kRes});
        int dst = slot(r, kRes);
        auto f = static_cast<std::size_t>(i.field);
        if (dst >= 0) g().add_guarded(a.mem[f], dst, slot(a, kRes), p_.field_owners(i.field));
        return r;
      }
      case Op::put_field: {
        Frame r = reframe(*b, i.out);
        int value = slot(*b, kRes);
        if (value < 0) return r;
        auto f = static_cast<std::size_t>(i.field);
        int target = slot(a, kRes);
        if (o_.fields_per_point) {
          int u = g().add_unknown(p_.method_name(method_) + "." + p_.fields[f].name + "@w" + std::to_string(++serial_));
          g().add_copy(b->mem[f], u);
          r.mem[f] = u;
        }
        g().add_guarded(value, r.mem[f], target, p_.field_owners(i.field));
        return r;
      }
      case Op::lookup: {
        Frame r = reframe(a, i.out, {kRes});
        g().add_filter(slot(a, kRes), slot(r, kRes), p_.dispatching(i.selector, i.method));
        return r;
      }
      case Op::call: {
        const Frame& callee = inputs_[static_cast<std::size_t>(i.method)];
        for (const auto& [formal, actual] : i.args) {
          int src = slot(a, actual);
          if (src >= 0) g().add_copy(src, slot(callee, formal));
        }
        g().add_copy(slot(a, kRes), slot(callee, kThis));
        if (!o_.fields_per_point) return callee;
        // Collector at the call: only fields of points reachable from the arguments pass.
        int reach = g().add_unknown(p_.method_name(method_) + ".call" + std::to_string(++serial_));
        g().add_copy(slot(a, kRes), reach);
        for (const auto& arg : i.args)
          if (int src = slot(a, arg.second); src >= 0) g().add_copy(src, reach);
        for (std::size_t f = 0; f < p_.fields.size(); ++f) {
          if (a.mem[f] < 0) continue;
          const PointSet& owners = p_.field_owners(static_cast<FieldId>(f));
          g().add_guarded(a.mem[f], reach, reach, owners);
          g().add_guarded(a.mem[f], callee.mem[f], reach, owners);
        }
        return callee;
      }
      case Op::ret: {
        auto m = static_cast<std::size_t>(i.method);
        Frame r = reframe(a, i.out, {kRes});
        if (int out = outputs_[m]; out >= 0) g().add_copy(out, slot(r, kRes));
        if (o_.fields_per_point) {
          r.mem = fresh_mem("r");
          copy_mem(a.mem, r.mem);
          copy_mem(exit_mem_[m], r.mem);
        }
        return r;
      }
    }
    throw ConfigError("unknown instruction");
  }

  Frame gen(const Node& n, const Frame& s) {
    using K = Node::Kind;
    switch (n.kind) {
      case K::instr:
        return transfer(n.instr, s, nullptr);
      case K::seq: {
        Frame cur = s;
        for (const Node& k : n.kids) cur = gen(k, cur);
        return cur;
      }
      case K::mark:
        cs_.frames[static_cast<std::size_t>(n.mark)] = s.ids;
        cs_.mems[static_cast<std::size_t>(n.mark)] = s.mem;
        return s;
      case K::binary: {
        Frame x = gen(n.kids[0], s);
        Frame y = gen(n.kids[1], x);
        return transfer(n.instr, x, &y);
      }
      case K::call: {
        Frame out;
        bool first = true;
        for (const CallTarget& t : n.targets) {
          Frame l = transfer(t.lookup, s, nullptr);
          transfer(t.call, l, nullptr);
          Frame r = transfer(t.ret, l, nullptr);
          if (n.targets.size() == 1) return r;
          if (first) {
            out = join_frame(r.env, "j");
            first = false;
          }
          join_into(r, out);
        }
        if (first) throw ConfigError("call without targets");
        return out;
      }
      case K::branch: {
        Frame c = gen(n.kids[0], s);
        Frame t = gen(n.kids[1], c);
        Frame e = gen(n.kids[2], c);
        Frame out = join_frame(t.env, "j");
        join_into(t, out);
        join_into(e, out);
        return out;
      }
      case K::loop: {
        Frame head = join_frame(s.env, "h");
        join_into(s, head);
        Frame c = gen(n.kids[0], head);
        Frame b = gen(n.kids[1], c);
        join_into(b, head);
        return gen(n.kids[2], c);
      }
    }
    return s;
  }

  // Collector at the watchpoint: R gets the points reachable from the frame, and the exit
  // memory keeps a field only when some reachable point carries it.
  void watch(const MethodInfo& mi, std::size_t m) {
    int r = escape_[m];
    MarkId w = p_.shadows ? mi.exit_mark : mi.block_end_mark;
    const TypeEnv& env = p_.env(p_.marks[static_cast<std::size_t>(w)].env);
    const auto& ids = cs_.frames[static_cast<std::size_t>(w)];
    const auto& mem = cs_.mems[static_cast<std::size_t>(w)];
    for (std::size_t k = 0; k < env.size(); ++k)
      if (ids[k] >= 0) g().add_copy(ids[k], r);
    for (std::size_t f = 0; f < p_.fields.size(); ++f) {
      if (mem[f] < 0) continue;
      const PointSet& owners = p_.field_owners(static_cast<FieldId>(f));
      g().add_guarded(mem[f], r, r, owners);
      if (!o_.fields_per_point) continue;
      if (p_.shadows)
        g().add_guarded(mem[f], exit_mem_[m][f], r, owners);
      else
        g().add_copy(mem[f], exit_mem_[m][f]);
    }
  }

  const Program& p_;
  ConstraintOptions o_;
  ConstraintSystem& cs_;
  MethodId method_ = -1;
  std::vector<int> global_;
  std::vector<Frame> inputs_;
  std::vector<int> outputs_;
  std::vector<std::vector<int>> exit_mem_;
  std::vector<int> escape_;
  std::map<std::pair<MethodId, std::string>, int> merged_;
  std::map<PointId, int> point_const_;  // unknown + 1, seeded with the point
  int serial_ = 0;
};

}  // namespace

ConstraintSystem generate_constraints(const Program& p, MethodId root, PointId external, const ConstraintOptions& opts) {
  ConstraintSystem cs;
  Generator(p, opts, cs).run(root, external);
  return cs;
}

ERElem constraint_decoration(const Program& p, const ConstraintSystem& cs, const Solution& sol, MarkId m) {
  ERState s;
  auto value = [&](int u) { return u >= 0 ? sol.value[static_cast<std::size_t>(u)] : PointSet{}; };
  for (int u : cs.frames[static_cast<std::size_t>(m)]) s.frame.push_back(value(u));
  for (int u : cs.mems[static_cast<std::size_t>(m)]) s.mem.push_back(value(u));
  if (s.mem.empty()) s.mem.assign(p.fields.size(), PointSet{});
  return s;
}

}  // namespace escape
