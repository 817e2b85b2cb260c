#include "escape/domain_er.hpp"

#include <cmath>

#include "escape/frontend.hpp"

namespace escape {

std::string render_points(const Program& p, const PointSet& s) {
  std::string r = "{";
  bool first = true;
  s.for_each([&](PointId pt) {
    if (!first) r += ", ";
    first = false;
    r += p.points[static_cast<std::size_t>(pt)].label;
  });
  return r + "}";
}

DomainER::DomainER(const Program& p, ERReturn mode) : p_(p), mode_(mode) {
  for (const auto& pt : p.points) {
    std::vector<FieldId> fs;
    for (FieldId f : p.classes[static_cast<std::size_t>(pt.cls)].fields)
      if (is_class(p.fields[static_cast<std::size_t>(f)].type)) fs.push_back(f);
    class_fields_.push_back(std::move(fs));
  }
}

ERState DomainER::empty_state(const TypeEnv& env) const {
  ERState s;
  s.frame.assign(env.size(), PointSet{});
  s.mem.assign(p_.fields.size(), PointSet{});
  return s;
}

std::vector<PointSet> DomainER::top_memory() const {
  std::vector<PointSet> m;
  for (const auto& f : p_.fields) m.push_back(p_.compatible_mask(f.type));
  return m;
}

PointSet DomainER::rho(const TypeEnv& env, const ERState& s) const {
  PointSet r;
  for (std::size_t k = 0; k < env.size(); ++k) r |= s.frame[k];
  PointSet frontier = r;
  while (!frontier.empty()) {
    PointSet next;
    frontier.for_each([&](PointId pt) {
      for (FieldId f : class_fields_[static_cast<std::size_t>(pt)]) next |= s.mem[static_cast<std::size_t>(f)];
    });
    next -= r;
    r |= next;
    frontier = next;
  }
  return r;
}

ERElem DomainER::xi(const TypeEnv& env, ERElem s) const {
  if (!s) return s;
  int t = env.index_of(kThis);
  if (t >= 0 && s->frame[static_cast<std::size_t>(t)].empty()) return std::nullopt;
  PointSet live = rho(env, *s);
  std::vector<bool> keep(p_.fields.size(), false);
  live.for_each([&](PointId pt) {
    for (FieldId f : class_fields_[static_cast<std::size_t>(pt)]) keep[static_cast<std::size_t>(f)] = true;
  });
  for (std::size_t f = 0; f < keep.size(); ++f)
    if (!keep[f]) s->mem[f] = PointSet{};
  return s;
}

namespace {

struct Slot {
  std::string_view name;
  PointSet value;
};

// Frame over `out` taking sets from `in` by name, with overrides.
std::vector<PointSet> reframe(const TypeEnv& in, const std::vector<PointSet>& frame, const TypeEnv& out,
                              std::initializer_list<Slot> set = {}) {
  std::vector<PointSet> r;
  r.reserve(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::string& n = out.name(k);
    const PointSet* v = nullptr;
    for (const auto& s : set)
      if (s.name == n) v = &s.value;
    if (v) {
      r.push_back(is_class(out.type(k)) ? *v : PointSet{});
      continue;
    }
    r.push_back(frame[static_cast<std::size_t>(in.index_of(n))]);
  }
  return r;
}

const PointSet& slot(const TypeEnv& env, const ERState& s, std::string_view v) {
  int i = env.index_of(v);
  if (i < 0) throw ConfigError("variable '" + std::string(v) + "' not in scope");
  return s.frame[static_cast<std::size_t>(i)];
}

}  // namespace

ERElem DomainER::transfer(const Instr& i, const ERElem& s1, const ERElem* s2) const {
  if (!s1) return std::nullopt;
  const TypeEnv& in = p_.env(i.in);
  const TypeEnv& out = p_.env(i.out);
  const ERState& a = *s1;
  auto second = [&]() -> const ERElem& {
    if (!s2) throw ConfigError(std::string(op_name(i.op)) + " needs two arguments");
    return *s2;
  };
  auto same_mem = [&](std::vector<PointSet> frame) {
    ERState r;
    r.frame = std::move(frame);
    r.mem = a.mem;
    return ERElem(std::move(r));
  };
  switch (i.op) {
    case Op::nop:
      return s1;
    case Op::get_int:
    case Op::get_null:
      return same_mem(reframe(in, a.frame, out, {{kRes, {}}}));
    case Op::get_var:
      return same_mem(reframe(in, a.frame, out, {{kRes, slot(in, a, i.var)}}));
    case Op::is_true:
    case Op::is_false:
      return same_mem(reframe(in, a.frame, out));
    case Op::eq:
    case Op::plus:
    case Op::lt:
    case Op::minus:
      return second();
    case Op::is_null:
      return xi(out, same_mem(reframe(in, a.frame, out, {{kRes, {}}})));
    case Op::new_obj:
      return same_mem(reframe(in, a.frame, out, {{kRes, PointSet{i.point}}}));
    case Op::put_var:
      return xi(out, same_mem(reframe(in, a.frame, out, {{i.var, slot(in, a, kRes)}})));
    case Op::restrict:
      return xi(out, same_mem(reframe(in, a.frame, out)));
    case Op::expand:
      return same_mem(reframe(in, a.frame, out, {{i.var, {}}}));
    case Op::get_field: {
      if (slot(in, a, kRes).empty()) return std::nullopt;
      return xi(out, same_mem(reframe(in, a.frame, out, {{kRes, a.mem[static_cast<std::size_t>(i.field)]}})));
    }
    case Op::put_field: {
      if (slot(in, a, kRes).empty()) return std::nullopt;
      const ERElem& b = second();
      if (!b) return std::nullopt;
      const TypeEnv& in2 = p_.env(i.in2);
      const PointSet& target = slot(in, a, kRes);
      bool occurs = false;
      for (std::size_t k = 0; k < in2.size(); ++k)
        if (in2.name(k) != kRes && b->frame[k].intersects(target)) occurs = true;
      for (const auto& m : b->mem)
        if (m.intersects(target)) occurs = true;
      ERState r;
      r.frame = reframe(in2, b->frame, out);
      r.mem = b->mem;
      if (occurs) r.mem[static_cast<std::size_t>(i.field)] |= slot(in2, *b, kRes);
      return xi(out, std::move(r));
    }
    case Op::call: {
      ERState r;
      r.frame.assign(out.size(), PointSet{});
      for (const auto& [formal, actual] : i.args)
        r.frame[static_cast<std::size_t>(out.index_of(formal))] = slot(in, a, actual);
      r.frame[static_cast<std::size_t>(out.index_of(kThis))] = slot(in, a, kRes);
      r.mem = a.mem;
      return xi(out, std::move(r));
    }
    case Op::ret: {
      const ERElem& b = second();
      if (!b) return std::nullopt;
      const PointSet& result = slot(p_.env(i.in2), *b, kOut);
      if (mode_ == ERReturn::shadow) {
        ERState r;
        r.frame = reframe(in, a.frame, out, {{kRes, result}});
        r.mem = a.mem;
        for (std::size_t f = 0; f < r.mem.size(); ++f) r.mem[f] |= b->mem[f];
        return xi(out, std::move(r));
      }
      TypeEnv rest = in.without(kRes);
      ERState caller;
      caller.frame = reframe(in, a.frame, rest);
      caller.mem = top_memory();
      ERElem kept = xi(rest, std::move(caller));
      if (!kept) return std::nullopt;
      ERState r;
      r.frame = reframe(rest, kept->frame, out, {{kRes, result}});
      r.mem = kept->mem;
      for (std::size_t f = 0; f < r.mem.size(); ++f) r.mem[f] |= b->mem[f];
      return xi(out, std::move(r));
    }
    case Op::lookup: {
      PointSet sel = slot(in, a, kRes) & p_.dispatching(i.selector, i.method);
      if (sel.empty()) return std::nullopt;
      return xi(out, same_mem(reframe(in, a.frame, out, {{kRes, sel}})));
    }
  }
  throw ConfigError("unknown instruction");
}

ERElem DomainER::join(const ERElem& a, const ERElem& b) {
  if (!a) return b;
  if (!b) return a;
  ERState r = *a;
  for (std::size_t k = 0; k < r.frame.size(); ++k) r.frame[k] |= b->frame[k];
  for (std::size_t k = 0; k < r.mem.size(); ++k) r.mem[k] |= b->mem[k];
  return r;
}

bool DomainER::leq(const ERElem& a, const ERElem& b) {
  if (!a) return true;
  if (!b) return false;
  for (std::size_t k = 0; k < a->frame.size(); ++k)
    if (!a->frame[k].subset_of(b->frame[k])) return false;
  for (std::size_t k = 0; k < a->mem.size(); ++k)
    if (!a->mem[k].subset_of(b->mem[k])) return false;
  return true;
}

ERElem DomainER::theta(const TypeEnv& env, const PointSet& e) const {
  ERState s;
  for (std::size_t k = 0; k < env.size(); ++k) s.frame.push_back(p_.compatible(e, env.type(k)));
  for (const auto& f : p_.fields) s.mem.push_back(p_.compatible(e, f.type));
  return xi(env, std::move(s));
}

double DomainER::candidate_count(const TypeEnv& env) const {
  double bits = 0;
  for (std::size_t k = 0; k < env.size(); ++k) bits += static_cast<double>(p_.compatible_mask(env.type(k)).size());
  for (const auto& f : p_.fields) bits += static_cast<double>(p_.compatible_mask(f.type).size());
  return std::pow(2.0, bits);
}

std::vector<ERState> DomainER::enumerate(const TypeEnv& env, std::size_t max_bits) const {
  // Each candidate bit is one (slot, compatible point) pair.
  struct Bit {
    bool frame;
    std::size_t slot;
    PointId point;
  };
  std::vector<Bit> bits;
  for (std::size_t k = 0; k < env.size(); ++k)
    p_.compatible_mask(env.type(k)).for_each([&](PointId pt) { bits.push_back({true, k, pt}); });
  for (std::size_t f = 0; f < p_.fields.size(); ++f)
    p_.compatible_mask(p_.fields[f].type).for_each([&](PointId pt) { bits.push_back({false, f, pt}); });
  if (bits.size() > max_bits) throw ConfigError("too many candidate elements to enumerate");
  std::vector<ERState> out;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << bits.size()); ++m) {
    ERState s = empty_state(env);
    for (std::size_t b = 0; b < bits.size(); ++b) {
      if (!(m >> b & 1u)) continue;
      (bits[b].frame ? s.frame : s.mem)[bits[b].slot].insert(bits[b].point);
    }
    ERElem x = xi(env, s);
    if (x && *x == s) out.push_back(std::move(s));
  }
  return out;
}

std::string DomainER::render(const TypeEnv& env, const ERElem& s, bool show_shadows) const {
  if (!s) return "bottom";
  std::string r = "[";
  bool first = true;
  for (std::size_t k = 0; k < env.size(); ++k) {
    if (s->frame[k].empty()) continue;
    if (!show_shadows && is_shadow_name(env.name(k))) continue;
    if (!first) r += ", ";
    first = false;
    r += env.name(k) + "->" + render_points(p_, s->frame[k]);
  }
  r += "] * [";
  first = true;
  for (std::size_t f = 0; f < s->mem.size(); ++f) {
    if (s->mem[f].empty()) continue;
    if (!first) r += ", ";
    first = false;
    r += p_.fields[f].name + "->" + render_points(p_, s->mem[f]);
  }
  return r + "]";
}

}  // namespace escape
