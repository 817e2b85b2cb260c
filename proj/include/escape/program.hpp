#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "escape/point_set.hpp"

namespace escape {

using ClassId = int;
using FieldId = int;
using MethodId = int;
using EnvId = int;
using MarkId = int;

// A type is either int (negative) or a class id.
using Type = int;
inline constexpr Type kInt = -1;
inline bool is_class(Type t) { return t >= 0; }

inline constexpr std::string_view kRes = "res";
inline constexpr std::string_view kOut = "out";
inline constexpr std::string_view kThis = "this";

/// Raised for malformed programs or configurations.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Variables in scope with their static types, kept sorted by name.
class TypeEnv {
public:
  using Binding = std::pair<std::string, Type>;

  TypeEnv() = default;
  explicit TypeEnv(std::vector<Binding> bindings);

  const std::vector<Binding>& bindings() const { return vars_; }
  std::size_t size() const { return vars_.size(); }
  int index_of(std::string_view v) const;
  bool has(std::string_view v) const { return index_of(v) >= 0; }
  Type at(std::string_view v) const;
  const std::string& name(std::size_t i) const { return vars_[i].first; }
  Type type(std::size_t i) const { return vars_[i].second; }

  TypeEnv with(std::string_view v, Type t) const;
  TypeEnv without(std::string_view v) const;
  TypeEnv without(const std::vector<std::string>& vs) const;
  TypeEnv only(const std::vector<std::string>& vs) const;

  friend bool operator==(const TypeEnv& a, const TypeEnv& b) { return a.vars_ == b.vars_; }
  friend bool operator<(const TypeEnv& a, const TypeEnv& b) { return a.vars_ < b.vars_; }

private:
  std::vector<Binding> vars_;
};

struct SourceLoc {
  int line = 0;
  int col = 0;
};

// ---- lowered instructions ----

enum class Op : std::uint8_t {
  nop,
  get_int,
  get_null,
  get_var,
  get_field,
  put_var,
  put_field,
  eq,
  plus,
  lt,
  minus,
  is_null,
  call,
  ret,
  restrict,
  expand,
  new_obj,
  lookup,
  is_true,
  is_false,
};

const char* op_name(Op op);
bool is_binary(Op op);

struct Instr {
  Op op = Op::nop;
  EnvId in = -1;   // input environment (first input for binary kinds)
  EnvId in2 = -1;  // second input environment (binary kinds)
  EnvId out = -1;  // output environment
  std::int64_t value = 0;                               // get_int
  Type type = kInt;                                     // get_null, expand
  std::string var;                                      // get_var, put_var, expand
  std::vector<std::string> vars;                        // restrict
  FieldId field = -1;                                   // get_field, put_field
  MethodId method = -1;                                 // call, ret, lookup
  std::string selector;                                 // lookup
  std::vector<std::pair<std::string, std::string>> args;  // call: (formal, actual)
  PointId point = -1;                                   // new_obj
  SourceLoc loc;
};

struct CallTarget {
  Instr lookup;
  Instr call;
  Instr ret;
};

/// Structured code tree. Evaluation of every kind is described in engine.hpp.
struct Node {
  enum class Kind : std::uint8_t {
    instr,   // single unary instruction
    seq,     // kids in order
    binary,  // kids[0] from the input, kids[1] from the result of kids[0]; then instr
    call,    // receiver in res; one target per candidate method, joined
    branch,  // kids[0] condition, kids[1] then (starts with guard), kids[2] else (starts with guard)
    loop,    // kids[0] condition from the loop head, kids[1] body (starts with guard), kids[2] exit guard
    mark,    // records the current element
  };
  Kind kind = Kind::seq;
  Instr instr;
  std::vector<Node> kids;
  std::vector<CallTarget> targets;
  MarkId mark = -1;
};

enum class MarkKind : std::uint8_t {
  entry,
  stmt,      // after a simple statement
  compound,  // after an if, while or block
  body_entry,
  else_entry,
  block_end,  // locals gone, parameters still in scope
  exit,       // only out and shadow copies left
};

struct Mark {
  MethodId method = -1;
  MarkKind kind = MarkKind::stmt;
  EnvId env = -1;
  int line = 0;
  std::string label;  // optional user label such as w1
};

/// One line of the decorated listing of a method: either source text or a mark.
struct LayoutLine {
  int depth = 0;
  std::string text;
  MarkId mark = -1;
};

// ---- static information ----

struct FieldInfo {
  std::string name;    // unique name, qualified when the simple name is ambiguous
  std::string simple;  // name as written in the source
  ClassId owner = -1;
  Type type = kInt;
};

struct ClassInfo {
  std::string name;
  ClassId parent = -1;
  std::vector<FieldId> own_fields;
  std::vector<FieldId> fields;              // declared and inherited
  std::map<std::string, MethodId> methods;  // declared and inherited
  std::vector<MethodId> own_methods;
};

struct MethodInfo {
  std::string name;
  ClassId owner = -1;
  std::vector<std::string> params;  // source order, excluding this and out
  Type ret = kInt;
  bool is_void = true;
  EnvId signature = -1;  // params plus out and this
  EnvId entry_env = -1;  // signature without out
  EnvId exit_env = -1;   // out plus shadow copies
  std::vector<std::string> shadows;
  Node body;
  MarkId entry_mark = -1;
  MarkId block_end_mark = -1;
  MarkId exit_mark = -1;
  std::vector<LayoutLine> layout;
  std::vector<PointId> points;  // creation points lexically inside this method
  SourceLoc loc;
};

struct CreationPoint {
  std::string label;
  ClassId cls = -1;
  MethodId owner = -1;  // -1 for external points
  bool external = false;
};

/// The whole program: class poset, fields, methods, creation points and lowered code.
class Program {
public:
  std::vector<ClassInfo> classes;
  std::vector<FieldInfo> fields;
  std::vector<MethodInfo> methods;
  std::vector<CreationPoint> points;
  std::vector<Mark> marks;
  bool shadows = false;

  // Call after classes are final.
  void finalize_classes();
  // Call after creation points change.
  void finalize_points();

  ClassId find_class(std::string_view name) const;  // -1 if absent
  ClassId class_of(std::string_view name) const;    // throws ConfigError
  MethodId find_method(std::string_view qualified) const;  // "Class.method", -1 if absent
  FieldId find_field(ClassId cls, std::string_view simple) const;  // -1 if absent
  PointId find_point(std::string_view label) const;  // -1 if absent

  bool subtype(Type a, Type b) const;
  std::string type_name(Type t) const;
  std::string method_name(MethodId m) const;

  std::size_t num_points() const { return points.size(); }
  PointSet all_points() const { return PointSet::first_n(points.size()); }
  /// Points whose class is a subclass of t; empty for int.
  const PointSet& compatible_mask(Type t) const;
  PointSet compatible(const PointSet& e, Type t) const { return e & compatible_mask(t); }
  /// Points whose objects carry the field.
  const PointSet& field_owners(FieldId f) const { return field_owners_[static_cast<std::size_t>(f)]; }
  /// Points dispatching selector m to method nu.
  PointSet dispatching(std::string_view selector, MethodId nu) const;

  /// Type environment F(k) of a class's fields, keyed by field name.
  TypeEnv field_env(ClassId c) const;
  /// Type environment of all fields of all classes.
  TypeEnv all_fields_env() const;

  EnvId intern(const TypeEnv& env);
  const TypeEnv& env(EnvId id) const { return envs_[static_cast<std::size_t>(id)]; }
  std::size_t num_envs() const { return envs_.size(); }

  PointId add_external_point(ClassId cls, std::string label);

private:
  std::deque<TypeEnv> envs_;  // stable references across intern
  std::map<TypeEnv, EnvId> env_ids_;
  std::vector<std::vector<bool>> sub_;  // sub_[a][b]: a <= b
  std::vector<PointSet> compat_;        // per class
  std::vector<PointSet> field_owners_;  // per field
  PointSet empty_;
};

}  // namespace escape
