#include "escape/domain_e.hpp"

namespace escape {

DomainE::DomainE(const Program& p, EReturn mode) : p_(p), mode_(mode) {
  for (const auto& pt : p.points) {
    PointSet m;
    for (FieldId f : p.classes[static_cast<std::size_t>(pt.cls)].fields)
      m |= p.compatible_mask(p.fields[static_cast<std::size_t>(f)].type);
    reach_mask_.push_back(m);
  }
}

DomainE::Masks DomainE::masks(const TypeEnv& env) const {
  Masks m;
  for (const auto& [v, t] : env.bindings()) {
    m.vars |= p_.compatible_mask(t);
    if (v == kThis) {
      m.has_this = true;
      m.this_mask = p_.compatible_mask(t);
    }
  }
  return m;
}

PointSet DomainE::field_closure(const PointSet& roots, const PointSet& e) const {
  PointSet r = roots;
  PointSet frontier = roots;
  while (!frontier.empty()) {
    PointSet next;
    frontier.for_each([&](PointId pt) { next |= reach_mask_[static_cast<std::size_t>(pt)]; });
    next &= e;
    next -= r;
    r |= next;
    frontier = next;
  }
  return r;
}

PointSet DomainE::close(const Masks& m, const PointSet& e) const {
  if (m.has_this && !e.intersects(m.this_mask)) return {};
  return field_closure(e & m.vars, e);
}

PointSet DomainE::delta(const TypeEnv& env, const PointSet& e) const { return close(masks(env), e); }

PointSet DomainE::delta(EnvId env, const PointSet& e) {
  Key k{env, e};
  auto it = memo_.find(k);
  if (it != memo_.end()) return it->second;
  PointSet r = delta(p_.env(env), e);
  memo_.emplace(k, r);
  return r;
}

PointSet DomainE::transfer(const Instr& i, const PointSet& e1, const PointSet* e2) {
  const TypeEnv& in = p_.env(i.in);
  auto second = [&]() -> const PointSet& {
    if (!e2) throw ConfigError(std::string(op_name(i.op)) + " needs two arguments");
    return *e2;
  };
  if (i.op == Op::ret) {
    if (e1.empty()) return {};
    const PointSet& callee = second();
    if (mode_ == EReturn::shadow) return delta(i.out, e1 | callee);
    if (mode_ == EReturn::simple) return delta(in, p_.all_points()) | callee;
    PointSet kept;
    for (const auto& [v, t] : in.bindings())
      if (v != kRes) kept |= p_.compatible(e1, t);
    PointSet r = callee;
    kept.for_each([&](PointId pt) {
      r.insert(pt);
      r |= field_closure(p_.all_points() & reach_mask_[static_cast<std::size_t>(pt)], p_.all_points());
    });
    return r;
  }
  if (e1.empty()) return {};
  switch (i.op) {
    case Op::nop:
    case Op::get_int:
    case Op::get_null:
    case Op::get_var:
    case Op::is_true:
    case Op::is_false:
    case Op::expand:
      return e1;
    case Op::put_var:
      return delta(in.without(i.var), e1);
    case Op::is_null:
      return delta(in.without(kRes), e1);
    case Op::new_obj: {
      PointSet r = e1;
      r.insert(i.point);
      return r;
    }
    case Op::eq:
    case Op::plus:
    case Op::lt:
    case Op::minus:
      return second();
    case Op::restrict:
      return delta(i.out, e1);
    case Op::call: {
      std::vector<std::string> keep{std::string(kRes)};
      for (const auto& a : i.args) keep.push_back(a.second);
      return delta(in.only(keep), e1);
    }
    case Op::get_field:
      if (!e1.intersects(p_.compatible_mask(in.at(kRes)))) return {};
      return delta(i.out, e1);
    case Op::put_field: {
      if (!e1.intersects(p_.compatible_mask(in.at(kRes)))) return {};
      const PointSet& v = second();
      if (v.empty()) return {};
      return delta(in.without(kRes), v);
    }
    case Op::lookup: {
      PointSet sel = p_.compatible(e1, in.at(kRes)) & p_.dispatching(i.selector, i.method);
      if (sel.empty()) return {};
      if (mode_ == EReturn::simple) return e1;
      PointSet r = delta(in.without(kRes), e1);
      sel.for_each([&](PointId pt) {
        r.insert(pt);
        r |= field_closure(e1 & reach_mask_[static_cast<std::size_t>(pt)], e1);
      });
      return r;
    }
    case Op::ret:
      break;
  }
  throw ConfigError("unknown instruction");
}

std::vector<PointSet> DomainE::enumerate(const TypeEnv& env) const {
  const std::size_t n = p_.points.size();
  if (n > 20) throw ConfigError("too many creation points to enumerate");
  Masks m = masks(env);
  std::vector<PointSet> out;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    PointSet e;
    for (std::size_t k = 0; k < n; ++k)
      if (bits >> k & 1u) e.insert(static_cast<PointId>(k));
    if (close(m, e) == e) out.push_back(e);
  }
  return out;
}

}  // namespace escape
