#include "escape/program.hpp"

#include <algorithm>
#include <set>

namespace escape {

TypeEnv::TypeEnv(std::vector<Binding> bindings) : vars_(std::move(bindings)) {
  std::sort(vars_.begin(), vars_.end());
  for (std::size_t i = 1; i < vars_.size(); ++i) {
    if (vars_[i].first == vars_[i - 1].first)
      throw ConfigError("duplicate variable '" + vars_[i].first + "' in type environment");
  }
  int t = index_of(kThis);
  if (t >= 0 && !is_class(vars_[static_cast<std::size_t>(t)].second))
    throw ConfigError("'this' must have a class type");
}

int TypeEnv::index_of(std::string_view v) const {
  auto it = std::lower_bound(vars_.begin(), vars_.end(), v,
                             [](const Binding& b, std::string_view key) { return b.first < key; });
  if (it == vars_.end() || it->first != v) return -1;
  return static_cast<int>(it - vars_.begin());
}

Type TypeEnv::at(std::string_view v) const {
  int i = index_of(v);
  if (i < 0) throw ConfigError("variable '" + std::string(v) + "' not in scope");
  return vars_[static_cast<std::size_t>(i)].second;
}

TypeEnv TypeEnv::with(std::string_view v, Type t) const {
  auto b = vars_;
  int i = index_of(v);
  if (i >= 0)
    b[static_cast<std::size_t>(i)].second = t;
  else
    b.emplace_back(std::string(v), t);
  return TypeEnv(std::move(b));
}

TypeEnv TypeEnv::without(std::string_view v) const {
  TypeEnv r;
  for (const auto& b : vars_)
    if (b.first != v) r.vars_.push_back(b);
  return r;
}

TypeEnv TypeEnv::without(const std::vector<std::string>& vs) const {
  TypeEnv r;
  for (const auto& b : vars_)
    if (std::find(vs.begin(), vs.end(), b.first) == vs.end()) r.vars_.push_back(b);
  return r;
}

TypeEnv TypeEnv::only(const std::vector<std::string>& vs) const {
  TypeEnv r;
  for (const auto& b : vars_)
    if (std::find(vs.begin(), vs.end(), b.first) != vs.end()) r.vars_.push_back(b);
  return r;
}

const char* op_name(Op op) {
  switch (op) {
    case Op::nop: return "nop";
    case Op::get_int: return "get_int";
    case Op::get_null: return "get_null";
    case Op::get_var: return "get_var";
    case Op::get_field: return "get_field";
    case Op::put_var: return "put_var";
    case Op::put_field: return "put_field";
    case Op::eq: return "eq";
    case Op::plus: return "plus";
    case Op::lt: return "lt";
    case Op::minus: return "minus";
    case Op::is_null: return "is_null";
    case Op::call: return "call";
    case Op::ret: return "return";
    case Op::restrict: return "restrict";
    case Op::expand: return "expand";
    case Op::new_obj: return "new";
    case Op::lookup: return "lookup";
    case Op::is_true: return "is_true";
    case Op::is_false: return "is_false";
  }
  return "?";
}

bool is_binary(Op op) {
  switch (op) {
    case Op::put_field:
    case Op::eq:
    case Op::plus:
    case Op::lt:
    case Op::minus:
    case Op::ret:
      return true;
    default:
      return false;
  }
}

ClassId Program::find_class(std::string_view name) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i].name == name) return static_cast<ClassId>(i);
  return -1;
}

ClassId Program::class_of(std::string_view name) const {
  ClassId c = find_class(name);
  if (c < 0) throw ConfigError("unknown class '" + std::string(name) + "'");
  return c;
}

MethodId Program::find_method(std::string_view qualified) const {
  for (std::size_t i = 0; i < methods.size(); ++i)
    if (method_name(static_cast<MethodId>(i)) == qualified) return static_cast<MethodId>(i);
  return -1;
}

FieldId Program::find_field(ClassId cls, std::string_view simple) const {
  for (FieldId f : classes[static_cast<std::size_t>(cls)].fields)
    if (fields[static_cast<std::size_t>(f)].simple == simple) return f;
  return -1;
}

PointId Program::find_point(std::string_view label) const {
  for (std::size_t i = 0; i < points.size(); ++i)
    if (points[i].label == label) return static_cast<PointId>(i);
  return -1;
}

void Program::finalize_classes() {
  const std::size_t n = classes.size();
  sub_.assign(n, std::vector<bool>(n, false));
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t steps = 0;
    for (ClassId c = static_cast<ClassId>(a); c >= 0; c = classes[static_cast<std::size_t>(c)].parent) {
      if (++steps > n) throw ConfigError("cyclic inheritance involving '" + classes[a].name + "'");
      sub_[a][static_cast<std::size_t>(c)] = true;
    }
  }
  // Antisymmetry and transitivity follow from the parent chain; checked anyway.
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b && sub_[a][b] && sub_[b][a]) throw ConfigError("subclass relation is not antisymmetric");
      if (!sub_[a][b]) continue;
      for (std::size_t c = 0; c < n; ++c)
        if (sub_[b][c] && !sub_[a][c]) throw ConfigError("subclass relation is not transitive");
    }
  finalize_points();
}

void Program::finalize_points() {
  if (points.size() > kMaxPoints) throw ConfigError("too many creation points");
  compat_.assign(classes.size(), PointSet{});
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (std::size_t p = 0; p < points.size(); ++p)
      if (sub_[static_cast<std::size_t>(points[p].cls)][c]) compat_[c].insert(static_cast<PointId>(p));
  field_owners_.assign(fields.size(), PointSet{});
  for (std::size_t p = 0; p < points.size(); ++p)
    for (FieldId f : classes[static_cast<std::size_t>(points[p].cls)].fields)
      field_owners_[static_cast<std::size_t>(f)].insert(static_cast<PointId>(p));
}

bool Program::subtype(Type a, Type b) const {
  if (!is_class(a) || !is_class(b)) return a == b;
  return sub_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
}

std::string Program::type_name(Type t) const {
  if (!is_class(t)) return "int";
  return classes[static_cast<std::size_t>(t)].name;
}

std::string Program::method_name(MethodId m) const {
  const auto& mi = methods[static_cast<std::size_t>(m)];
  return classes[static_cast<std::size_t>(mi.owner)].name + "." + mi.name;
}

const PointSet& Program::compatible_mask(Type t) const {
  if (!is_class(t)) return empty_;
  return compat_[static_cast<std::size_t>(t)];
}

PointSet Program::dispatching(std::string_view selector, MethodId nu) const {
  PointSet r;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto& ms = classes[static_cast<std::size_t>(points[p].cls)].methods;
    auto it = ms.find(std::string(selector));
    if (it != ms.end() && it->second == nu) r.insert(static_cast<PointId>(p));
  }
  return r;
}

TypeEnv Program::field_env(ClassId c) const {
  std::vector<TypeEnv::Binding> b;
  for (FieldId f : classes[static_cast<std::size_t>(c)].fields)
    b.emplace_back(fields[static_cast<std::size_t>(f)].name, fields[static_cast<std::size_t>(f)].type);
  return TypeEnv(std::move(b));
}

TypeEnv Program::all_fields_env() const {
  std::vector<TypeEnv::Binding> b;
  for (const auto& f : fields) b.emplace_back(f.name, f.type);
  return TypeEnv(std::move(b));
}

EnvId Program::intern(const TypeEnv& env) {
  auto it = env_ids_.find(env);
  if (it != env_ids_.end()) return it->second;
  EnvId id = static_cast<EnvId>(envs_.size());
  envs_.push_back(env);
  env_ids_.emplace(env, id);
  return id;
}

PointId Program::add_external_point(ClassId cls, std::string label) {
  points.push_back(CreationPoint{std::move(label), cls, -1, true});
  finalize_points();
  return static_cast<PointId>(points.size() - 1);
}

}  // namespace escape
