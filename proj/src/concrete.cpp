#include "escape/concrete.hpp"

#include <algorithm>
#include <deque>

namespace escape {

Value initial_value(Type t) { return is_class(t) ? Value::nil() : Value::num(0); }

Object fresh_object(const Program& p, PointId point) {
  Object o;
  o.point = point;
  for (FieldId f : p.classes[static_cast<std::size_t>(p.points[static_cast<std::size_t>(point)].cls)].fields)
    o.fields.push_back(initial_value(p.fields[static_cast<std::size_t>(f)].type));
  return o;
}

namespace {

std::size_t field_pos(const Program& p, const Object& o, FieldId f) {
  const auto& fs = p.classes[static_cast<std::size_t>(p.points[static_cast<std::size_t>(o.point)].cls)].fields;
  auto it = std::find(fs.begin(), fs.end(), f);
  if (it == fs.end()) throw ConfigError("object has no field " + p.fields[static_cast<std::size_t>(f)].name);
  return static_cast<std::size_t>(it - fs.begin());
}

bool weakly_correct(const Program& p, Type t, const Value& v, const Memory& mem) {
  if (!is_class(t)) return v.kind == Value::Kind::integer;
  if (v.kind == Value::Kind::integer) return false;
  if (v.kind == Value::Kind::null) return true;
  auto it = mem.find(v.v);
  if (it == mem.end()) return false;
  return p.subtype(p.points[static_cast<std::size_t>(it->second.point)].cls, t);
}

const Value& var(const TypeEnv& env, const State& s, std::string_view name) {
  int i = env.index_of(name);
  if (i < 0) throw ConfigError("variable '" + std::string(name) + "' not in the state");
  return s.frame[static_cast<std::size_t>(i)];
}

// Frame over `out` taking values from `in` by name, with overrides.
std::vector<Value> reframe(const TypeEnv& in, const std::vector<Value>& frame, const TypeEnv& out,
                           std::initializer_list<std::pair<std::string_view, Value>> set = {}) {
  std::vector<Value> r;
  r.reserve(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::string& n = out.name(k);
    const Value* v = nullptr;
    for (const auto& [name, val] : set)
      if (name == n) v = &val;
    if (v) {
      r.push_back(*v);
      continue;
    }
    int i = in.index_of(n);
    if (i < 0) throw ConfigError("variable '" + n + "' has no value");
    r.push_back(frame[static_cast<std::size_t>(i)]);
  }
  return r;
}

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}

}  // namespace

const Value& field_value(const Program& p, const Object& o, FieldId f) { return o.fields[field_pos(p, o, f)]; }
Value& field_value(const Program& p, Object& o, FieldId f) { return o.fields[field_pos(p, o, f)]; }

bool check_correct(const Program& p, const TypeEnv& env, const std::vector<Value>& frame, const Memory& mem) {
  if (frame.size() != env.size()) return false;
  for (std::size_t i = 0; i < env.size(); ++i)
    if (!weakly_correct(p, env.type(i), frame[i], mem)) return false;
  for (const auto& [l, o] : mem) {
    if (o.point < 0 || o.point >= static_cast<PointId>(p.points.size())) return false;
    const auto& fs = p.classes[static_cast<std::size_t>(p.points[static_cast<std::size_t>(o.point)].cls)].fields;
    if (o.fields.size() != fs.size()) return false;
    for (std::size_t k = 0; k < fs.size(); ++k)
      if (!weakly_correct(p, p.fields[static_cast<std::size_t>(fs[k])].type, o.fields[k], mem)) return false;
  }
  return true;
}

bool in_sigma(const Program& p, const TypeEnv& env, const State& s) {
  if (!check_correct(p, env, s.frame, s.mem)) return false;
  int t = env.index_of(kThis);
  return t < 0 || s.frame[static_cast<std::size_t>(t)].is_loc();
}

std::optional<State> step(const Program& p, const Instr& i, const State& s, const State* s2) {
  const TypeEnv& in = p.env(i.in);
  const TypeEnv& out = p.env(i.out);
  auto with_frame = [&](const State& base, std::vector<Value> f) {
    State r;
    r.frame = std::move(f);
    r.mem = base.mem;
    return r;
  };
  auto need2 = [&]() -> const State& {
    if (!s2) throw ConfigError(std::string(op_name(i.op)) + " needs two states");
    return *s2;
  };
  switch (i.op) {
    case Op::nop:
      return s;
    case Op::get_int:
      return with_frame(s, reframe(in, s.frame, out, {{kRes, Value::num(i.value)}}));
    case Op::get_null:
      return with_frame(s, reframe(in, s.frame, out, {{kRes, Value::nil()}}));
    case Op::get_var:
      return with_frame(s, reframe(in, s.frame, out, {{kRes, var(in, s, i.var)}}));
    case Op::get_field: {
      const Value& r = var(in, s, kRes);
      if (!r.is_loc()) return std::nullopt;
      Value v = field_value(p, s.mem.at(r.v), i.field);
      return with_frame(s, reframe(in, s.frame, out, {{kRes, v}}));
    }
    case Op::put_var:
      return with_frame(s, reframe(in, s.frame, out, {{i.var, var(in, s, kRes)}}));
    case Op::put_field: {
      const State& t = need2();
      const TypeEnv& in2 = p.env(i.in2);
      const Value& l = var(in, s, kRes);
      if (!l.is_loc()) return std::nullopt;
      auto a = s.mem.find(l.v);
      auto b = t.mem.find(l.v);
      if (a == s.mem.end() || b == t.mem.end() || a->second.point != b->second.point) return std::nullopt;
      State r;
      r.frame = reframe(in2, t.frame, out);
      r.mem = t.mem;
      field_value(p, r.mem.at(l.v), i.field) = var(in2, t, kRes);
      return r;
    }
    case Op::eq:
    case Op::plus:
    case Op::lt:
    case Op::minus: {
      const State& t = need2();
      const TypeEnv& in2 = p.env(i.in2);
      std::int64_t a = var(in, s, kRes).v;
      std::int64_t b = var(in2, t, kRes).v;
      std::int64_t r = 0;
      if (i.op == Op::eq) r = var(in, s, kRes) == var(in2, t, kRes) ? 1 : -1;
      if (i.op == Op::lt) r = a < b ? 1 : -1;
      if (i.op == Op::plus) r = wrap_add(a, b);
      if (i.op == Op::minus) r = wrap_sub(a, b);
      return with_frame(t, reframe(in2, t.frame, out, {{kRes, Value::num(r)}}));
    }
    case Op::is_null:
      return with_frame(
          s, reframe(in, s.frame, out, {{kRes, Value::num(var(in, s, kRes).kind == Value::Kind::null ? 1 : -1)}}));
    case Op::call: {
      const Value& recv = var(in, s, kRes);
      if (!recv.is_loc()) return std::nullopt;
      State r;
      r.frame.assign(out.size(), Value::nil());
      for (const auto& [formal, actual] : i.args)
        r.frame[static_cast<std::size_t>(out.index_of(formal))] = var(in, s, actual);
      r.frame[static_cast<std::size_t>(out.index_of(kThis))] = recv;
      r.mem = s.mem;
      return r;
    }
    case Op::ret: {
      const State& t = need2();
      const TypeEnv& in2 = p.env(i.in2);
      for (std::size_t k = 0; k < in.size(); ++k) {
        if (in.name(k) == kRes || !s.frame[k].is_loc()) continue;
        auto a = s.mem.find(s.frame[k].v);
        auto b = t.mem.find(s.frame[k].v);
        if (a == s.mem.end() || b == t.mem.end() || a->second.point != b->second.point) return std::nullopt;
      }
      State r;
      r.frame = reframe(in, s.frame, out, {{kRes, var(in2, t, kOut)}});
      r.mem = t.mem;
      return r;
    }
    case Op::restrict:
      return with_frame(s, reframe(in, s.frame, out));
    case Op::expand:
      return with_frame(s, reframe(in, s.frame, out, {{i.var, initial_value(i.type)}}));
    case Op::new_obj: {
      std::int64_t l = s.mem.empty() ? 0 : s.mem.rbegin()->first + 1;
      State r;
      r.frame = reframe(in, s.frame, out, {{kRes, Value::loc(l)}});
      r.mem = s.mem;
      r.mem.emplace(l, fresh_object(p, i.point));
      return r;
    }
    case Op::lookup: {
      const Value& recv = var(in, s, kRes);
      if (!recv.is_loc()) return std::nullopt;
      ClassId c = p.points[static_cast<std::size_t>(s.mem.at(recv.v).point)].cls;
      const auto& ms = p.classes[static_cast<std::size_t>(c)].methods;
      auto it = ms.find(i.selector);
      if (it == ms.end() || it->second != i.method) return std::nullopt;
      return with_frame(s, reframe(in, s.frame, out));
    }
    case Op::is_true:
    case Op::is_false: {
      bool truth = var(in, s, kRes).v >= 0;
      if (truth != (i.op == Op::is_true)) return std::nullopt;
      return with_frame(s, reframe(in, s.frame, out));
    }
  }
  throw ConfigError("unknown instruction");
}

std::set<std::int64_t> reach(const Program& p, const TypeEnv& env, const State& s) {
  (void)p;
  std::set<std::int64_t> seen;
  std::vector<std::int64_t> work;
  for (std::size_t k = 0; k < env.size(); ++k)
    if (s.frame[k].is_loc() && seen.insert(s.frame[k].v).second) work.push_back(s.frame[k].v);
  while (!work.empty()) {
    std::int64_t l = work.back();
    work.pop_back();
    for (const Value& v : s.mem.at(l).fields)
      if (v.is_loc() && seen.insert(v.v).second) work.push_back(v.v);
  }
  return seen;
}

PointSet alpha_e(const Program& p, const TypeEnv& env, const std::vector<State>& states) {
  PointSet r;
  for (const State& s : states)
    for (std::int64_t l : reach(p, env, s)) r.insert(s.mem.at(l).point);
  return r;
}

ERElem alpha_er(const Program& p, const TypeEnv& env, const std::vector<State>& states) {
  if (states.empty()) return std::nullopt;
  ERState r;
  r.frame.assign(env.size(), PointSet{});
  r.mem.assign(p.fields.size(), PointSet{});
  for (const State& s : states) {
    for (std::size_t k = 0; k < env.size(); ++k)
      if (s.frame[k].is_loc()) r.frame[k].insert(s.mem.at(s.frame[k].v).point);
    for (std::int64_t l : reach(p, env, s)) {
      const Object& o = s.mem.at(l);
      const auto& fs = p.classes[static_cast<std::size_t>(p.points[static_cast<std::size_t>(o.point)].cls)].fields;
      for (std::size_t k = 0; k < fs.size(); ++k)
        if (o.fields[k].is_loc()) r.mem[static_cast<std::size_t>(fs[k])].insert(s.mem.at(o.fields[k].v).point);
    }
  }
  return r;
}

State canonical(const Program& p, const TypeEnv& env, const State& s) {
  (void)p;
  std::map<std::int64_t, std::int64_t> rename;
  std::deque<std::int64_t> work;
  auto visit = [&](const Value& v) {
    if (v.is_loc() && rename.emplace(v.v, static_cast<std::int64_t>(rename.size())).second) work.push_back(v.v);
  };
  for (std::size_t k = 0; k < env.size(); ++k) visit(s.frame[k]);
  while (!work.empty()) {
    std::int64_t l = work.front();
    work.pop_front();
    for (const Value& v : s.mem.at(l).fields) visit(v);
  }
  auto map_value = [&](Value v) {
    if (v.is_loc()) v.v = rename.at(v.v);
    return v;
  };
  State r;
  for (const Value& v : s.frame) r.frame.push_back(map_value(v));
  for (const auto& [old, fresh] : rename) {
    Object o = s.mem.at(old);
    for (Value& v : o.fields) v = map_value(v);
    r.mem.emplace(fresh, std::move(o));
  }
  return r;
}

State entry_state(const Program& p, MethodId m, PointId this_point) {
  const TypeEnv& env = p.env(p.methods[static_cast<std::size_t>(m)].entry_env);
  State s;
  for (std::size_t k = 0; k < env.size(); ++k) s.frame.push_back(initial_value(env.type(k)));
  s.frame[static_cast<std::size_t>(env.index_of(kThis))] = Value::loc(0);
  s.mem.emplace(0, fresh_object(p, this_point));
  return s;
}

namespace {

class Interp {
public:
  Interp(const Program& p, const RunOptions& o, const MarkVisitor& v) : p_(p), opts_(o), visit_(v) {}

  std::optional<State> method(MethodId m, const State& s) {
    if (++depth_ > opts_.max_depth) {
      truncated_ = true;
      --depth_;
      return std::nullopt;
    }
    auto r = eval(p_.methods[static_cast<std::size_t>(m)].body, s);
    --depth_;
    return r;
  }

  bool truncated_ = false;
  std::size_t steps_ = 0;

private:
  const Program& p_;
  const RunOptions& opts_;
  const MarkVisitor& visit_;
  std::size_t depth_ = 0;

  std::optional<State> exec(const Instr& i, const State& s, const State* s2 = nullptr) {
    if (++steps_ > opts_.budget) {
      truncated_ = true;
      return std::nullopt;
    }
    return step(p_, i, s, s2);
  }

  std::optional<State> seq_from(const Node& n, std::size_t from, State s) {
    for (std::size_t k = from; k < n.kids.size(); ++k) {
      auto r = eval(n.kids[k], s);
      if (!r) return std::nullopt;
      s = std::move(*r);
    }
    return s;
  }

  // Guarded code: a seq whose first kid is is_true/is_false, or a bare guard.
  std::optional<State> guarded(const Node& n, const State& s, bool& taken) {
    const Node& g = n.kind == Node::Kind::seq ? n.kids.front() : n;
    auto r = exec(g.instr, s);
    taken = r.has_value();
    if (!r || n.kind != Node::Kind::seq) return r;
    return seq_from(n, 1, std::move(*r));
  }

  std::optional<State> eval(const Node& n, const State& s) {
    if (truncated_) return std::nullopt;
    switch (n.kind) {
      case Node::Kind::instr:
        return exec(n.instr, s);
      case Node::Kind::seq:
        return seq_from(n, 0, s);
      case Node::Kind::mark:
        if (visit_) visit_(n.mark, s);
        return s;
      case Node::Kind::binary: {
        auto a = eval(n.kids[0], s);
        if (!a) return std::nullopt;
        auto b = eval(n.kids[1], *a);
        if (!b) return std::nullopt;
        return exec(n.instr, *a, &*b);
      }
      case Node::Kind::call:
        for (const auto& t : n.targets) {
          auto l = exec(t.lookup, s);
          if (!l) {
            if (truncated_) return std::nullopt;
            continue;
          }
          auto c = exec(t.call, *l);
          if (!c) return std::nullopt;
          auto out = method(t.call.method, *c);
          if (!out) return std::nullopt;
          return exec(t.ret, *l, &*out);
        }
        return std::nullopt;
      case Node::Kind::branch: {
        auto c = eval(n.kids[0], s);
        if (!c) return std::nullopt;
        bool taken = false;
        auto r = guarded(n.kids[1], *c, taken);
        if (taken || truncated_) return r;
        return guarded(n.kids[2], *c, taken);
      }
      case Node::Kind::loop: {
        State x = s;
        for (;;) {
          auto c = eval(n.kids[0], x);
          if (!c) return std::nullopt;
          bool taken = false;
          auto r = guarded(n.kids[1], *c, taken);
          if (!taken) {
            if (truncated_) return std::nullopt;
            return guarded(n.kids[2], *c, taken);
          }
          if (!r) return std::nullopt;
          x = std::move(*r);
        }
      }
    }
    return std::nullopt;
  }
};

}  // namespace

RunResult run(const Program& p, MethodId m, const State& entry, const RunOptions& opts, const MarkVisitor& visit) {
  Interp in(p, opts, visit);
  RunResult r;
  r.final = in.method(m, entry);
  r.truncated = in.truncated_;
  r.steps = in.steps_;
  if (r.truncated) r.final.reset();
  return r;
}

Collected run_collecting(const Program& p, MethodId m, const std::vector<State>& initial, const RunOptions& opts) {
  Collected out;
  for (const State& s : initial) {
    RunResult r = run(p, m, s, opts, [&](MarkId mk, const State& st) {
      out.at[mk].insert(canonical(p, p.env(p.marks[static_cast<std::size_t>(mk)].env), st));
    });
    out.truncated = out.truncated || r.truncated;
  }
  return out;
}

namespace {

// Cartesian enumeration over slot choices; each slot lists its allowed values.
std::vector<State> enumerate(const Program& p, const TypeEnv& env, std::vector<std::vector<Value>> frame_choices,
                             std::vector<std::vector<std::vector<Value>>> field_choices, std::size_t limit) {
  std::vector<std::vector<Value>*> slots;
  for (auto& c : frame_choices) slots.push_back(&c);
  for (auto& obj : field_choices)
    for (auto& c : obj) slots.push_back(&c);
  double total = 1;
  for (auto* c : slots) total *= static_cast<double>(c->size());
  if (total > static_cast<double>(limit)) throw ConfigError("too many representative states");
  std::vector<State> out;
  if (total == 0) return out;
  std::vector<std::size_t> idx(slots.size(), 0);
  for (;;) {
    State s;
    std::size_t k = 0;
    for (; k < frame_choices.size(); ++k) s.frame.push_back((*slots[k])[idx[k]]);
    for (std::size_t pt = 0; pt < field_choices.size(); ++pt) {
      Object o;
      o.point = static_cast<PointId>(pt);
      for (std::size_t f = 0; f < field_choices[pt].size(); ++f, ++k) o.fields.push_back((*slots[k])[idx[k]]);
      s.mem.emplace(static_cast<std::int64_t>(pt), std::move(o));
    }
    if (in_sigma(p, env, s)) out.push_back(std::move(s));
    std::size_t j = 0;
    for (; j < slots.size(); ++j) {
      if (++idx[j] < slots[j]->size()) break;
      idx[j] = 0;
    }
    if (j == slots.size()) break;
  }
  return out;
}

std::vector<Value> choices(const Program& p, Type t, const PointSet& allowed) {
  if (!is_class(t)) return {Value::num(0)};
  PointSet l = p.compatible(allowed, t);
  if (l.empty()) return {Value::nil()};
  std::vector<Value> r;
  l.for_each([&](PointId pt) { r.push_back(Value::loc(pt)); });
  return r;
}

void guard(const Program& p, std::size_t max_points) {
  if (p.points.size() > max_points) throw ConfigError("too many creation points to enumerate states");
}

}  // namespace

std::vector<State> representative_states_e(const Program& p, const TypeEnv& env, const PointSet& e,
                                           std::size_t max_points, std::size_t limit) {
  guard(p, max_points);
  std::vector<std::vector<Value>> fc;
  for (std::size_t k = 0; k < env.size(); ++k) fc.push_back(choices(p, env.type(k), e));
  std::vector<std::vector<std::vector<Value>>> mc;
  for (const auto& pt : p.points) {
    std::vector<std::vector<Value>> obj;
    for (FieldId f : p.classes[static_cast<std::size_t>(pt.cls)].fields)
      obj.push_back(choices(p, p.fields[static_cast<std::size_t>(f)].type, e));
    mc.push_back(std::move(obj));
  }
  return enumerate(p, env, std::move(fc), std::move(mc), limit);
}

std::vector<State> representative_states_er(const Program& p, const TypeEnv& env, const ERState& s,
                                            std::size_t max_points, std::size_t limit) {
  guard(p, max_points);
  std::vector<std::vector<Value>> fc;
  for (std::size_t k = 0; k < env.size(); ++k) fc.push_back(choices(p, env.type(k), s.frame[k]));
  std::vector<std::vector<std::vector<Value>>> mc;
  for (const auto& pt : p.points) {
    std::vector<std::vector<Value>> obj;
    for (FieldId f : p.classes[static_cast<std::size_t>(pt.cls)].fields)
      obj.push_back(choices(p, p.fields[static_cast<std::size_t>(f)].type, s.mem[static_cast<std::size_t>(f)]));
    mc.push_back(std::move(obj));
  }
  return enumerate(p, env, std::move(fc), std::move(mc), limit);
}

}  // namespace escape
