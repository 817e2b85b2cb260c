#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "escape/frontend.hpp"

namespace escape {
namespace {

bool reserved_var(std::string_view n) { return n == kRes || n == kOut || n == kThis; }

[[noreturn]] void type_error(SourceLoc loc, const std::string& msg) { throw SourceError(loc, msg); }

}  // namespace

// Output environment of an instruction; throws if a side condition fails.
TypeEnv instr_out_env(const Program& p, const Instr& i, const TypeEnv& in, const TypeEnv* in2) {
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) type_error(i.loc, std::string(op_name(i.op)) + ": " + what);
  };
  auto res_class = [&]() {
    need(in.has(kRes), "res not in scope");
    need(is_class(in.at(kRes)), "res must have a class type");
    return in.at(kRes);
  };
  auto field_of = [&](Type cls) {
    need(i.field >= 0 && i.field < static_cast<FieldId>(p.fields.size()), "unknown field");
    const auto& fs = p.classes[static_cast<std::size_t>(cls)].fields;
    need(std::find(fs.begin(), fs.end(), i.field) != fs.end(),
         "class " + p.type_name(cls) + " has no field " + p.fields[static_cast<std::size_t>(i.field)].name);
    return p.fields[static_cast<std::size_t>(i.field)].type;
  };
  switch (i.op) {
    case Op::nop:
      return in;
    case Op::get_int:
      need(!in.has(kRes), "res already in scope");
      return in.with(kRes, kInt);
    case Op::get_null:
      need(!in.has(kRes), "res already in scope");
      need(is_class(i.type), "null needs a class type");
      return in.with(kRes, i.type);
    case Op::get_var:
      need(!in.has(kRes), "res already in scope");
      need(in.has(i.var), "unknown variable '" + i.var + "'");
      return in.with(kRes, in.at(i.var));
    case Op::get_field: {
      Type t = field_of(res_class());
      return in.with(kRes, t);
    }
    case Op::put_var:
      need(in.has(kRes), "res not in scope");
      need(i.var != kRes, "cannot assign res");
      need(in.has(i.var), "unknown variable '" + i.var + "'");
      need(p.subtype(in.at(kRes), in.at(i.var)),
           "cannot assign " + p.type_name(in.at(kRes)) + " to " + p.type_name(in.at(i.var)));
      return in.without(kRes);
    case Op::put_field: {
      Type ft = field_of(res_class());
      need(in2 != nullptr && in2->has(kRes), "second operand missing");
      need(in2->without(kRes) == in.without(kRes), "operands evaluated in different scopes");
      need(p.subtype(in2->at(kRes), ft),
           "cannot store " + p.type_name(in2->at(kRes)) + " into field of type " + p.type_name(ft));
      return in.without(kRes);
    }
    case Op::eq:
    case Op::plus:
    case Op::lt:
    case Op::minus:
      need(in.has(kRes) && in.at(kRes) == kInt, "left operand must be int");
      need(in2 != nullptr && in2->has(kRes) && in2->at(kRes) == kInt, "right operand must be int");
      need(in2->without(kRes) == in.without(kRes), "operands evaluated in different scopes");
      return *in2;
    case Op::is_null:
      res_class();
      return in.with(kRes, kInt);
    case Op::is_true:
    case Op::is_false:
      need(in.has(kRes) && in.at(kRes) == kInt, "condition must be int");
      return in.without(kRes);
    case Op::restrict:
      for (const auto& v : i.vars) need(in.has(v), "cannot restrict unknown variable '" + v + "'");
      return in.without(i.vars);
    case Op::expand:
      need(!in.has(i.var), "variable '" + i.var + "' already in scope");
      return in.with(i.var, i.type);
    case Op::new_obj:
      need(!in.has(kRes), "res already in scope");
      need(i.point >= 0 && i.point < static_cast<PointId>(p.points.size()), "unknown creation point");
      return in.with(kRes, p.points[static_cast<std::size_t>(i.point)].cls);
    case Op::lookup: {
      Type t = res_class();
      need(i.method >= 0, "unknown method");
      bool reachable = false;
      for (std::size_t c = 0; c < p.classes.size(); ++c) {
        if (!p.subtype(static_cast<Type>(c), t)) continue;
        auto it = p.classes[c].methods.find(i.selector);
        if (it != p.classes[c].methods.end() && it->second == i.method) reachable = true;
      }
      need(reachable, "method " + p.method_name(i.method) + " is not a target of " + i.selector);
      return in.with(kRes, p.methods[static_cast<std::size_t>(i.method)].owner);
    }
    case Op::call: {
      const MethodInfo& m = p.methods[static_cast<std::size_t>(i.method)];
      const TypeEnv& sig = p.env(m.signature);
      need(i.args.size() == m.params.size(), "wrong number of arguments");
      for (std::size_t k = 0; k < i.args.size(); ++k) {
        const auto& [formal, actual] = i.args[k];
        need(formal == m.params[k], "argument bound to the wrong parameter");
        need(in.has(actual) && actual != kRes, "argument '" + actual + "' not in scope");
        need(p.subtype(in.at(actual), sig.at(formal)),
             "argument of type " + p.type_name(in.at(actual)) + " passed for " + p.type_name(sig.at(formal)));
      }
      need(p.subtype(res_class(), sig.at(kThis)), "receiver type mismatch");
      return p.env(m.entry_env);
    }
    case Op::ret: {
      const MethodInfo& m = p.methods[static_cast<std::size_t>(i.method)];
      need(in.has(kRes), "res not in scope");
      need(in2 != nullptr && *in2 == p.env(m.exit_env), "callee state has the wrong scope");
      return in.with(kRes, p.env(m.signature).at(kOut));
    }
  }
  type_error(i.loc, "unknown instruction");
}

namespace {

class Lowerer {
public:
  explicit Lowerer(const ast::Program& a) : a_(a) {}

  Program run() {
    declare_classes();
    declare_fields();
    declare_methods();
    p_.finalize_classes();
    MethodId id = 0;
    for (const auto& c : a_.classes)
      for (const auto& m : c.methods) lower_method(id++, m);
    p_.finalize_points();
    for (const auto& m : p_.methods)
      if (!m.shadows.empty()) p_.shadows = true;
    return std::move(p_);
  }

private:
  const ast::Program& a_;
  Program p_;

  // Per-method state.
  MethodId mid_ = -1;
  TypeEnv cur_;
  std::vector<std::vector<std::string>> scopes_;
  int temps_ = 0;
  int auto_labels_ = 0;
  int depth_ = 0;
  std::set<std::string> labels_;

  Type resolve_type(const std::string& name, SourceLoc loc, bool allow_void = false) {
    if (name == "int") return kInt;
    if (name == "void") {
      if (allow_void) return kInt;
      type_error(loc, "void is not a value type");
    }
    ClassId c = p_.find_class(name);
    if (c < 0) type_error(loc, "unknown type '" + name + "'");
    return c;
  }

  void declare_classes() {
    for (const auto& c : a_.classes) {
      if (c.name == "int" || c.name == "void") type_error(c.loc, "invalid class name");
      if (p_.find_class(c.name) >= 0) type_error(c.loc, "duplicate class '" + c.name + "'");
      p_.classes.push_back(ClassInfo{c.name, -1, {}, {}, {}, {}});
    }
    for (std::size_t i = 0; i < a_.classes.size(); ++i) {
      const auto& c = a_.classes[i];
      if (c.parent.empty()) continue;
      ClassId par = p_.find_class(c.parent);
      if (par < 0) type_error(c.loc, "unknown superclass '" + c.parent + "'");
      p_.classes[i].parent = par;
    }
    // Reject cycles before anything walks the parent chain.
    for (std::size_t i = 0; i < p_.classes.size(); ++i) {
      std::size_t steps = 0;
      for (ClassId c = static_cast<ClassId>(i); c >= 0; c = p_.classes[static_cast<std::size_t>(c)].parent)
        if (++steps > p_.classes.size()) type_error(a_.classes[i].loc, "cyclic inheritance");
    }
  }

  // Classes ordered so that parents come first.
  std::vector<std::size_t> topo() const {
    std::vector<std::size_t> order;
    std::vector<bool> done(p_.classes.size(), false);
    std::function<void(std::size_t)> visit = [&](std::size_t c) {
      if (done[c]) return;
      ClassId par = p_.classes[c].parent;
      if (par >= 0) visit(static_cast<std::size_t>(par));
      done[c] = true;
      order.push_back(c);
    };
    for (std::size_t c = 0; c < p_.classes.size(); ++c) visit(c);
    return order;
  }

  void declare_fields() {
    std::map<std::string, int> count;
    for (const auto& c : a_.classes)
      for (const auto& f : c.fields) ++count[f.name];
    for (std::size_t ci = 0; ci < a_.classes.size(); ++ci) {
      const auto& c = a_.classes[ci];
      std::set<std::string> seen;
      for (const auto& f : c.fields) {
        if (f.name == kThis) type_error(f.loc, "'this' cannot be a field");
        if (!seen.insert(f.name).second) type_error(f.loc, "duplicate field '" + f.name + "'");
        FieldInfo fi;
        fi.simple = f.name;
        fi.name = count[f.name] > 1 ? c.name + "." + f.name : f.name;
        fi.owner = static_cast<ClassId>(ci);
        fi.type = resolve_type(f.type, f.loc);
        p_.classes[ci].own_fields.push_back(static_cast<FieldId>(p_.fields.size()));
        p_.fields.push_back(std::move(fi));
      }
    }
    for (std::size_t c : topo()) {
      auto& ci = p_.classes[c];
      if (ci.parent >= 0) ci.fields = p_.classes[static_cast<std::size_t>(ci.parent)].fields;
      for (FieldId f : ci.own_fields) {
        for (FieldId g : ci.fields)
          if (p_.fields[static_cast<std::size_t>(g)].simple == p_.fields[static_cast<std::size_t>(f)].simple)
            type_error(a_.classes[c].loc, "field '" + p_.fields[static_cast<std::size_t>(f)].simple +
                                              "' hides an inherited field");
        ci.fields.push_back(f);
      }
    }
  }

  void declare_methods() {
    MethodId id = 0;
    for (std::size_t ci = 0; ci < a_.classes.size(); ++ci) {
      const auto& c = a_.classes[ci];
      std::set<std::string> seen;
      for (const auto& m : c.methods) {
        if (!seen.insert(m.name).second) type_error(m.loc, "duplicate method '" + m.name + "'");
        MethodInfo mi;
        mi.name = m.name;
        mi.owner = static_cast<ClassId>(ci);
        mi.is_void = m.ret_type == "void";
        mi.ret = resolve_type(m.ret_type, m.loc, true);
        mi.loc = m.loc;
        std::vector<TypeEnv::Binding> sig{{std::string(kOut), mi.ret}, {std::string(kThis), mi.owner}};
        std::set<std::string> names;
        for (const auto& prm : m.params) {
          if (reserved_var(prm.name)) type_error(m.loc, "reserved parameter name '" + prm.name + "'");
          if (!names.insert(prm.name).second) type_error(m.loc, "duplicate parameter '" + prm.name + "'");
          mi.params.push_back(prm.name);
          sig.emplace_back(prm.name, resolve_type(prm.type, m.loc));
        }
        TypeEnv sig_env(sig);
        mi.signature = p_.intern(sig_env);
        mi.entry_env = p_.intern(sig_env.without(kOut));
        std::vector<TypeEnv::Binding> exit{{std::string(kOut), mi.ret}};
        for (const auto& s : m.body) {
          if (!s.shadow) continue;
          std::string orig = s.name.substr(0, s.name.size() - 1);
          if (!sig_env.has(orig) || !is_class(sig_env.at(orig)))
            type_error(s.loc, "shadow copy of unknown parameter '" + orig + "'");
          mi.shadows.push_back(s.name);
          exit.emplace_back(s.name, sig_env.at(orig));
        }
        mi.exit_env = p_.intern(TypeEnv(exit));
        p_.classes[ci].own_methods.push_back(id);
        p_.methods.push_back(std::move(mi));
        ++id;
      }
    }
    for (std::size_t c : topo()) {
      auto& ci = p_.classes[c];
      if (ci.parent >= 0) ci.methods = p_.classes[static_cast<std::size_t>(ci.parent)].methods;
      for (MethodId m : ci.own_methods) {
        const auto& mi = p_.methods[static_cast<std::size_t>(m)];
        auto it = ci.methods.find(mi.name);
        if (it != ci.methods.end()) check_override(mi, p_.methods[static_cast<std::size_t>(it->second)]);
        ci.methods[mi.name] = m;
      }
    }
  }

  void check_override(const MethodInfo& sub, const MethodInfo& sup) {
    const TypeEnv& a = p_.env(sub.signature);
    const TypeEnv& b = p_.env(sup.signature);
    bool ok = sub.params.size() == sup.params.size() && a.at(kOut) == b.at(kOut);
    for (std::size_t k = 0; ok && k < sub.params.size(); ++k) ok = a.at(sub.params[k]) == b.at(sup.params[k]);
    if (!ok) type_error(sub.loc, "method '" + sub.name + "' overrides with a different signature");
  }

  // ---- emission helpers ----

  Node emit(Instr i, SourceLoc loc) {
    i.loc = loc;
    i.in = p_.intern(cur_);
    cur_ = instr_out_env(p_, i, cur_, nullptr);
    i.out = p_.intern(cur_);
    Node n;
    n.kind = Node::Kind::instr;
    n.instr = std::move(i);
    return n;
  }

  Instr op(Op o) {
    Instr i;
    i.op = o;
    return i;
  }

  static void append(Node& seq, Node n) {
    if (n.kind == Node::Kind::seq) {
      for (auto& k : n.kids) seq.kids.push_back(std::move(k));
    } else {
      seq.kids.push_back(std::move(n));
    }
  }

  // proto is read after both operands are lowered, so they may still fill it in.
  Node binary(const Instr& proto, SourceLoc loc, const std::function<Node()>& first,
              const std::function<Node()>& second) {
    Node n;
    n.kind = Node::Kind::binary;
    n.kids.push_back(first());
    TypeEnv e1 = cur_;
    Node s;
    Instr r = op(Op::restrict);
    r.vars = {std::string(kRes)};
    append(s, emit(r, loc));
    append(s, second());
    n.kids.push_back(std::move(s));
    TypeEnv e2 = cur_;
    Instr i = proto;
    i.loc = loc;
    i.in = p_.intern(e1);
    i.in2 = p_.intern(e2);
    cur_ = instr_out_env(p_, i, e1, &e2);
    i.out = p_.intern(cur_);
    n.instr = std::move(i);
    return n;
  }

  Node mark(MarkKind kind, int line, const std::string& label = {}) {
    MarkId id = static_cast<MarkId>(p_.marks.size());
    p_.marks.push_back(Mark{mid_, kind, p_.intern(cur_), line, label});
    p_.methods[static_cast<std::size_t>(mid_)].layout.push_back(LayoutLine{depth_, {}, id});
    Node n;
    n.kind = Node::Kind::mark;
    n.mark = id;
    return n;
  }

  void text(const std::string& t) {
    p_.methods[static_cast<std::size_t>(mid_)].layout.push_back(LayoutLine{depth_, t, -1});
  }

  // ---- static typing of expressions (no emission) ----

  Type type_of(const ast::Expr& e) {
    using K = ast::Expr::Kind;
    switch (e.kind) {
      case K::int_lit:
        return kInt;
      case K::null_lit:
        type_error(e.loc, "cannot infer the type of null here");
      case K::var:
        if (e.name == kRes || e.name == kOut || !cur_.has(e.name))
          type_error(e.loc, "unknown variable '" + e.name + "'");
        return cur_.at(e.name);
      case K::field: {
        Type t = type_of(e.kids[0]);
        if (!is_class(t)) type_error(e.loc, "field access on int");
        FieldId f = p_.find_field(t, e.name);
        if (f < 0) type_error(e.loc, "class " + p_.type_name(t) + " has no field '" + e.name + "'");
        return p_.fields[static_cast<std::size_t>(f)].type;
      }
      case K::new_obj:
        return resolve_type(e.name, e.loc);
      case K::binop:
        return kInt;
      case K::call: {
        Type t = e.implicit_this ? cur_.at(kThis) : type_of(e.kids[0]);
        return p_.env(p_.methods[static_cast<std::size_t>(static_target(t, e))].signature).at(kOut);
      }
    }
    type_error(e.loc, "bad expression");
  }

  MethodId static_target(Type t, const ast::Expr& call) {
    if (!is_class(t)) type_error(call.loc, "method call on int");
    const auto& ms = p_.classes[static_cast<std::size_t>(t)].methods;
    auto it = ms.find(call.name);
    if (it == ms.end()) type_error(call.loc, "class " + p_.type_name(t) + " has no method '" + call.name + "'");
    return it->second;
  }

  // ---- expressions ----

  Node lower_expr(const ast::Expr& e, Type hint) {
    using K = ast::Expr::Kind;
    Node seq;
    switch (e.kind) {
      case K::int_lit: {
        Instr i = op(Op::get_int);
        i.value = e.value;
        return emit(i, e.loc);
      }
      case K::null_lit: {
        if (!is_class(hint)) type_error(e.loc, "cannot infer the type of null here");
        Instr i = op(Op::get_null);
        i.type = hint;
        return emit(i, e.loc);
      }
      case K::var: {
        if (e.name == kRes || e.name == kOut || !cur_.has(e.name))
          type_error(e.loc, "unknown variable '" + e.name + "'");
        Instr i = op(Op::get_var);
        i.var = e.name;
        return emit(i, e.loc);
      }
      case K::field: {
        append(seq, lower_expr(e.kids[0], kInt));
        Type t = cur_.at(kRes);
        if (!is_class(t)) type_error(e.loc, "field access on int");
        FieldId f = p_.find_field(t, e.name);
        if (f < 0) type_error(e.loc, "class " + p_.type_name(t) + " has no field '" + e.name + "'");
        Instr i = op(Op::get_field);
        i.field = f;
        append(seq, emit(i, e.loc));
        return seq;
      }
      case K::new_obj: {
        Type c = resolve_type(e.name, e.loc);
        Instr i = op(Op::new_obj);
        i.point = new_point(e, c);
        return emit(i, e.loc);
      }
      case K::binop:
        return lower_binop(e);
      case K::call:
        return lower_call(e);
    }
    type_error(e.loc, "bad expression");
  }

  PointId new_point(const ast::Expr& e, ClassId c) {
    auto& m = p_.methods[static_cast<std::size_t>(mid_)];
    std::string label = e.label;
    if (label.empty()) label = p_.method_name(mid_) + "#" + std::to_string(++auto_labels_);
    if (!labels_.insert(label).second) type_error(e.loc, "duplicate creation point label '" + label + "'");
    PointId id = static_cast<PointId>(p_.points.size());
    p_.points.push_back(CreationPoint{label, c, mid_, false});
    m.points.push_back(id);
    return id;
  }

  static bool is_null_lit(const ast::Expr& e) { return e.kind == ast::Expr::Kind::null_lit; }

  // 0 - code, turning a +1/-1 truth value around.
  Node negate(SourceLoc loc, const std::function<Node()>& code) {
    return binary(op(Op::minus), loc, [&] {
      Instr z = op(Op::get_int);
      z.value = 0;
      return emit(z, loc);
    }, code);
  }

  Node null_test(const ast::Expr& obj, SourceLoc loc) {
    Node s;
    append(s, lower_expr(obj, kInt));
    if (!is_class(cur_.at(kRes))) type_error(loc, "comparison of int with null");
    append(s, emit(op(Op::is_null), loc));
    return s;
  }

  Node lower_binop(const ast::Expr& e) {
    const auto& l = e.kids[0];
    const auto& r = e.kids[1];
    if (e.name == "==" || e.name == "!=") {
      if (is_null_lit(l) || is_null_lit(r)) {
        const ast::Expr& obj = is_null_lit(l) ? r : l;
        if (e.name == "==") return null_test(obj, e.loc);
        return negate(e.loc, [&] { return null_test(obj, e.loc); });
      }
      auto eq = [&] { return int_binary(Op::eq, l, r, e.loc); };
      if (e.name == "==") return eq();
      return negate(e.loc, eq);
    }
    Op o = e.name == "+" ? Op::plus : e.name == "-" ? Op::minus : Op::lt;
    return int_binary(o, l, r, e.loc);
  }

  Node int_binary(Op o, const ast::Expr& l, const ast::Expr& r, SourceLoc loc) {
    auto side = [&](const ast::Expr& x) {
      Node n = lower_expr(x, kInt);
      if (cur_.at(kRes) != kInt) type_error(x.loc, std::string("operands of ") + op_name(o) + " must be int");
      return n;
    };
    return binary(op(o), loc, [&] { return side(l); }, [&] { return side(r); });
  }

  std::string temp() { return "$t" + std::to_string(temps_++); }

  Node lower_call(const ast::Expr& e) {
    Node seq;
    const ast::Expr* recv = e.implicit_this ? nullptr : &e.kids[0];
    std::vector<const ast::Expr*> args;
    for (std::size_t k = e.implicit_this ? 0 : 1; k < e.kids.size(); ++k) args.push_back(&e.kids[k]);
    Type t = recv ? type_of(*recv) : cur_.at(kThis);
    MethodId stat = static_target(t, e);
    const MethodInfo& sm = p_.methods[static_cast<std::size_t>(stat)];
    const TypeEnv& ssig = p_.env(sm.signature);
    if (args.size() != sm.params.size())
      type_error(e.loc, "method '" + e.name + "' expects " + std::to_string(sm.params.size()) + " arguments");

    auto plain = [&](const ast::Expr* x) { return x->kind == ast::Expr::Kind::var && x->name != kRes && x->name != kOut; };
    bool all_plain = std::all_of(args.begin(), args.end(), plain);
    std::vector<std::string> actuals;
    std::vector<std::string> temps;
    auto get_var = [&](const std::string& v) {
      Instr i = op(Op::get_var);
      i.var = v;
      return emit(i, e.loc);
    };
    if (all_plain) {
      append(seq, recv ? lower_expr(*recv, kInt) : get_var(std::string(kThis)));
      for (auto* a : args) actuals.push_back(a->name);
    } else {
      std::string rv;
      if (!recv) {
        rv = kThis;
      } else if (plain(recv)) {
        rv = recv->name;
      } else {
        rv = temp();
        Instr x = op(Op::expand);
        x.var = rv;
        x.type = t;
        append(seq, emit(x, e.loc));
        append(seq, lower_expr(*recv, kInt));
        Instr pv = op(Op::put_var);
        pv.var = rv;
        append(seq, emit(pv, e.loc));
        temps.push_back(rv);
      }
      for (std::size_t k = 0; k < args.size(); ++k) {
        if (plain(args[k])) {
          actuals.push_back(args[k]->name);
          continue;
        }
        std::string tv = temp();
        Type ft = ssig.at(sm.params[k]);
        Instr x = op(Op::expand);
        x.var = tv;
        x.type = ft;
        append(seq, emit(x, args[k]->loc));
        append(seq, lower_expr(*args[k], ft));
        Instr pv = op(Op::put_var);
        pv.var = tv;
        append(seq, emit(pv, args[k]->loc));
        temps.push_back(tv);
        actuals.push_back(tv);
      }
      append(seq, get_var(rv));
    }
    if (!is_class(cur_.at(kRes))) type_error(e.loc, "method call on int");

    std::vector<MethodId> cands;
    for (std::size_t c = 0; c < p_.classes.size(); ++c) {
      if (!p_.subtype(static_cast<Type>(c), t)) continue;
      auto it = p_.classes[c].methods.find(e.name);
      if (it != p_.classes[c].methods.end() &&
          std::find(cands.begin(), cands.end(), it->second) == cands.end())
        cands.push_back(it->second);
    }
    std::sort(cands.begin(), cands.end());

    TypeEnv before = cur_;
    TypeEnv after;
    Node call;
    call.kind = Node::Kind::call;
    for (MethodId nu : cands) {
      bool first = nu == cands.front();
      cur_ = before;
      const MethodInfo& m = p_.methods[static_cast<std::size_t>(nu)];
      CallTarget ct;
      Instr lk = op(Op::lookup);
      lk.selector = e.name;
      lk.method = nu;
      ct.lookup = emit(lk, e.loc).instr;
      TypeEnv looked = cur_;
      Instr c = op(Op::call);
      c.method = nu;
      for (std::size_t k = 0; k < m.params.size(); ++k) c.args.emplace_back(m.params[k], actuals[k]);
      ct.call = emit(c, e.loc).instr;
      Instr r = op(Op::ret);
      r.method = nu;
      r.loc = e.loc;
      r.in = p_.intern(looked);
      r.in2 = m.exit_env;
      TypeEnv callee_exit = p_.env(m.exit_env);
      TypeEnv out = instr_out_env(p_, r, looked, &callee_exit);
      r.out = p_.intern(out);
      ct.ret = r;
      if (!first && !(out == after)) type_error(e.loc, "call targets disagree on the result type");
      after = out;
      call.targets.push_back(std::move(ct));
    }
    cur_ = after;
    append(seq, std::move(call));
    if (!temps.empty()) {
      Instr rs = op(Op::restrict);
      rs.vars = temps;
      append(seq, emit(rs, e.loc));
    }
    return seq;
  }

  // Condition code leaves an int in res; negated means "true" when the int is negative.
  std::pair<Node, bool> lower_cond(const ast::Expr& e) {
    if (e.kind == ast::Expr::Kind::binop && (e.name == "==" || e.name == "!=")) {
      bool neg = e.name == "!=";
      const auto& l = e.kids[0];
      const auto& r = e.kids[1];
      if (is_null_lit(l) || is_null_lit(r)) return {null_test(is_null_lit(l) ? r : l, e.loc), neg};
      return {int_binary(Op::eq, l, r, e.loc), neg};
    }
    Node n = lower_expr(e, kInt);
    if (cur_.at(kRes) != kInt) type_error(e.loc, "condition must be int");
    return {std::move(n), false};
  }

  // ---- statements ----

  void declare_local(const std::string& name, SourceLoc loc) {
    if (reserved_var(name)) type_error(loc, "reserved variable name '" + name + "'");
    if (cur_.has(name)) type_error(loc, "variable '" + name + "' already in scope");
    scopes_.back().push_back(name);
  }

  Node close_scope(SourceLoc loc) {
    std::vector<std::string> vars = std::move(scopes_.back());
    scopes_.pop_back();
    if (vars.empty()) return Node{};
    Instr r = op(Op::restrict);
    r.vars = std::move(vars);
    return emit(r, loc);
  }

  Node lower_block(const std::vector<ast::Stmt>& body) {
    Node seq;
    scopes_.emplace_back();
    for (const auto& s : body) {
      if (s.kind == ast::Stmt::Kind::ret) type_error(s.loc, "return must be the last statement of the method body");
      append(seq, lower_stmt(s));
    }
    SourceLoc loc = body.empty() ? SourceLoc{} : body.back().loc;
    append(seq, close_scope(loc));
    return seq;
  }

  Node lower_decl(const ast::Stmt& s) {
    Node seq;
    Type t = resolve_type(s.type, s.loc);
    if (!s.shadow) declare_local(s.name, s.loc);
    Instr x = op(Op::expand);
    x.var = s.name;
    x.type = t;
    append(seq, emit(x, s.loc));
    if (s.has_init) {
      append(seq, lower_expr(s.exprs[0], t));
      Instr pv = op(Op::put_var);
      pv.var = s.name;
      append(seq, emit(pv, s.loc));
    }
    return seq;
  }

  Node store(const ast::Expr& target, const std::function<Node(Type)>& value, SourceLoc loc) {
    using K = ast::Expr::Kind;
    if (target.kind == K::var) {
      if (target.name == kThis || reserved_var(target.name) || !cur_.has(target.name) ||
          is_shadow_name(target.name))
        type_error(target.loc, "cannot assign to '" + target.name + "'");
      Node seq;
      append(seq, value(cur_.at(target.name)));
      Instr pv = op(Op::put_var);
      pv.var = target.name;
      append(seq, emit(pv, loc));
      return seq;
    }
    if (target.kind == K::field) {
      Instr pf = op(Op::put_field);
      return binary(pf, loc, [&] {
        Node n = lower_expr(target.kids[0], kInt);
        Type t = cur_.at(kRes);
        if (!is_class(t)) type_error(target.loc, "field access on int");
        FieldId f = p_.find_field(t, target.name);
        if (f < 0) type_error(target.loc, "class " + p_.type_name(t) + " has no field '" + target.name + "'");
        pf.field = f;
        return n;
      }, [&] {
        Node n = value(p_.fields[static_cast<std::size_t>(pf.field)].type);
        return n;
      });
    }
    type_error(target.loc, "invalid assignment target");
  }

  Node lower_stmt(const ast::Stmt& s) {
    using K = ast::Stmt::Kind;
    Node seq;
    switch (s.kind) {
      case K::decl:
        text(s.text);
        append(seq, lower_decl(s));
        break;
      case K::assign:
        text(s.text);
        append(seq, store(s.exprs[0], [&](Type t) { return lower_expr(s.exprs[1], t); }, s.loc));
        break;
      case K::incr: {
        text(s.text);
        const ast::Expr& tg = s.exprs[0];
        append(seq, store(tg, [&](Type t) {
          if (t != kInt) type_error(tg.loc, "++ needs an int");
          ast::Expr one;
          one.kind = ast::Expr::Kind::int_lit;
          one.value = 1;
          one.loc = tg.loc;
          return int_binary(Op::plus, tg, one, s.loc);
        }, s.loc));
        break;
      }
      case K::expr: {
        text(s.text);
        append(seq, lower_expr(s.exprs[0], kInt));
        Instr r = op(Op::restrict);
        r.vars = {std::string(kRes)};
        append(seq, emit(r, s.loc));
        break;
      }
      case K::ret: {
        text(s.text);
        Type rt = cur_.at(kOut);
        if (s.exprs.empty()) {
          if (!p_.methods[static_cast<std::size_t>(mid_)].is_void) type_error(s.loc, "missing return value");
          append(seq, emit(op(Op::nop), s.loc));
          break;
        }
        if (p_.methods[static_cast<std::size_t>(mid_)].is_void) type_error(s.loc, "void method returns a value");
        append(seq, lower_expr(s.exprs[0], rt));
        Instr pv = op(Op::put_var);
        pv.var = std::string(kOut);
        append(seq, emit(pv, s.loc));
        break;
      }
      case K::block: {
        text("{");
        ++depth_;
        append(seq, lower_block(s.body));
        --depth_;
        text("}");
        break;
      }
      case K::branch: {
        text(s.text);
        auto [cond, neg] = lower_cond(s.exprs[0]);
        TypeEnv at_cond = cur_;
        Node br;
        br.kind = Node::Kind::branch;
        br.kids.push_back(std::move(cond));
        Node then_code;
        append(then_code, emit(op(neg ? Op::is_false : Op::is_true), s.loc));
        ++depth_;
        append(then_code, mark(MarkKind::body_entry, s.loc.line));
        append(then_code, lower_block(s.body));
        --depth_;
        TypeEnv after_then = cur_;
        cur_ = at_cond;
        Node else_code;
        append(else_code, emit(op(neg ? Op::is_true : Op::is_false), s.loc));
        if (s.has_else) {
          text("} else {");
          ++depth_;
          append(else_code, mark(MarkKind::else_entry, s.loc.line));
          append(else_code, lower_block(s.else_body));
          --depth_;
        }
        if (!(cur_ == after_then)) type_error(s.loc, "branches end in different scopes");
        text("}");
        br.kids.push_back(std::move(then_code));
        br.kids.push_back(std::move(else_code));
        append(seq, std::move(br));
        break;
      }
      case K::loop: {
        text(s.text);
        TypeEnv head = cur_;
        auto [cond, neg] = lower_cond(s.exprs[0]);
        TypeEnv at_cond = cur_;
        Node lp;
        lp.kind = Node::Kind::loop;
        lp.kids.push_back(std::move(cond));
        Node body;
        append(body, emit(op(neg ? Op::is_false : Op::is_true), s.loc));
        ++depth_;
        append(body, mark(MarkKind::body_entry, s.loc.line));
        append(body, lower_block(s.body));
        --depth_;
        if (!(cur_ == head)) type_error(s.loc, "loop body changes the scope");
        text("}");
        cur_ = at_cond;
        Node exit;
        append(exit, emit(op(neg ? Op::is_true : Op::is_false), s.loc));
        lp.kids.push_back(std::move(body));
        lp.kids.push_back(std::move(exit));
        append(seq, std::move(lp));
        break;
      }
    }
    bool simple = s.kind != K::branch && s.kind != K::loop && s.kind != K::block;
    append(seq, mark(simple ? MarkKind::stmt : MarkKind::compound, s.loc.line, s.label));
    return seq;
  }

  void lower_method(MethodId id, const ast::Method& am) {
    mid_ = id;
    temps_ = 0;
    auto_labels_ = 0;
    depth_ = 0;
    scopes_.clear();
    MethodInfo& m = p_.methods[static_cast<std::size_t>(id)];
    cur_ = p_.env(m.entry_env);
    Node body;
    Instr x = op(Op::expand);
    x.var = std::string(kOut);
    x.type = p_.env(m.signature).at(kOut);
    append(body, emit(x, am.loc));
    std::size_t k = 0;
    for (; k < am.body.size() && am.body[k].shadow; ++k) append(body, lower_decl(am.body[k]));
    text(am.header);
    depth_ = 1;
    {
      Node n = mark(MarkKind::entry, am.loc.line);
      p_.methods[static_cast<std::size_t>(id)].entry_mark = n.mark;
      append(body, std::move(n));
    }
    scopes_.emplace_back();
    if (k == am.body.size()) append(body, emit(op(Op::nop), am.loc));
    for (std::size_t i = k; i < am.body.size(); ++i) {
      const auto& s = am.body[i];
      if (s.shadow) type_error(s.loc, "shadow copies must come first");
      if (s.kind == ast::Stmt::Kind::ret && i + 1 != am.body.size())
        type_error(s.loc, "return must be the last statement of the method body");
      append(body, lower_stmt(s));
    }
    append(body, close_scope(am.loc));
    {
      Node n = mark(MarkKind::block_end, am.loc.line);
      p_.methods[static_cast<std::size_t>(id)].block_end_mark = n.mark;
      append(body, std::move(n));
    }
    depth_ = 0;
    text("}");
    std::vector<std::string> params;
    for (const auto& [v, t] : cur_.bindings())
      if (v != kOut && !is_shadow_name(v)) params.push_back(v);
    Instr r = op(Op::restrict);
    r.vars = params;
    append(body, emit(r, am.loc));
    {
      Node n = mark(MarkKind::exit, am.loc.line);
      p_.methods[static_cast<std::size_t>(id)].exit_mark = n.mark;
      append(body, std::move(n));
    }
    if (!(cur_ == p_.env(m.exit_env))) type_error(am.loc, "internal: exit scope mismatch");
    p_.methods[static_cast<std::size_t>(id)].body = std::move(body);
  }
};

void check_node(const Program& p, const Node& n, EnvId& cur) {
  auto check_instr = [&](const Instr& i, const TypeEnv* in2) {
    TypeEnv out = instr_out_env(p, i, p.env(i.in), in2);
    if (!(out == p.env(i.out))) throw SourceError(i.loc, std::string(op_name(i.op)) + ": output scope mismatch");
  };
  auto expect = [&](EnvId e, const Instr& i) {
    if (!(p.env(e) == p.env(cur)))
      throw SourceError(i.loc, std::string(op_name(i.op)) + ": input scope does not match preceding code");
  };
  switch (n.kind) {
    case Node::Kind::instr:
      expect(n.instr.in, n.instr);
      check_instr(n.instr, nullptr);
      cur = n.instr.out;
      break;
    case Node::Kind::seq:
      for (const auto& k : n.kids) check_node(p, k, cur);
      break;
    case Node::Kind::mark:
      if (!(p.env(p.marks[static_cast<std::size_t>(n.mark)].env) == p.env(cur)))
        throw ConfigError("mark recorded with the wrong scope");
      break;
    case Node::Kind::binary: {
      EnvId start = cur;
      check_node(p, n.kids[0], cur);
      if (!(p.env(cur) == p.env(n.instr.in))) throw SourceError(n.instr.loc, "binary: first operand scope");
      check_node(p, n.kids[1], cur);
      if (!(p.env(cur) == p.env(n.instr.in2))) throw SourceError(n.instr.loc, "binary: second operand scope");
      (void)start;
      check_instr(n.instr, &p.env(n.instr.in2));
      cur = n.instr.out;
      break;
    }
    case Node::Kind::call: {
      EnvId start = cur;
      EnvId after = -1;
      for (const auto& t : n.targets) {
        cur = start;
        expect(t.lookup.in, t.lookup);
        check_instr(t.lookup, nullptr);
        if (!(p.env(t.call.in) == p.env(t.lookup.out)) || !(p.env(t.ret.in) == p.env(t.lookup.out)))
          throw SourceError(t.call.loc, "call protocol scope mismatch");
        check_instr(t.call, nullptr);
        check_instr(t.ret, &p.env(t.ret.in2));
        if (after >= 0 && !(p.env(after) == p.env(t.ret.out))) throw SourceError(t.ret.loc, "targets disagree");
        after = t.ret.out;
      }
      if (after < 0) throw ConfigError("call site without targets");
      cur = after;
      break;
    }
    case Node::Kind::branch: {
      check_node(p, n.kids[0], cur);
      EnvId c = cur;
      check_node(p, n.kids[1], cur);
      EnvId t = cur;
      cur = c;
      check_node(p, n.kids[2], cur);
      if (!(p.env(t) == p.env(cur))) throw ConfigError("branches end in different scopes");
      break;
    }
    case Node::Kind::loop: {
      EnvId head = cur;
      check_node(p, n.kids[0], cur);
      EnvId c = cur;
      check_node(p, n.kids[1], cur);
      if (!(p.env(head) == p.env(cur))) throw ConfigError("loop body changes the scope");
      cur = c;
      check_node(p, n.kids[2], cur);
      break;
    }
  }
}

}  // namespace

Program lower(const ast::Program& prog) { return Lowerer(prog).run(); }

void check_program(const Program& p) {
  for (const auto& m : p.methods) {
    EnvId cur = m.entry_env;
    check_node(p, m.body, cur);
    if (!(p.env(cur) == p.env(m.exit_env))) throw ConfigError("method " + m.name + " ends in the wrong scope");
  }
}

}  // namespace escape
