#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "escape/program.hpp"

namespace escape {

/// Syntax or type error located in the source text.
class SourceError : public ConfigError {
public:
  SourceError(SourceLoc loc, const std::string& msg)
      : ConfigError(std::to_string(loc.line) + ":" + std::to_string(loc.col) + ": " + msg), loc_(loc) {}
  SourceLoc loc() const { return loc_; }

private:
  SourceLoc loc_;
};

namespace ast {

struct Expr {
  enum class Kind : std::uint8_t { int_lit, null_lit, var, field, new_obj, binop, call };
  Kind kind = Kind::int_lit;
  std::int64_t value = 0;
  std::string name;   // var, field, class (new), operator (binop), method (call)
  std::string label;  // creation point label for new
  bool implicit_this = false;  // call without receiver
  std::vector<Expr> kids;      // field: [object]; binop: [lhs, rhs]; call: [receiver?, args...]
  SourceLoc loc;
};

struct Stmt {
  enum class Kind : std::uint8_t { decl, assign, incr, expr, branch, loop, ret, block };
  Kind kind = Kind::expr;
  std::string type;  // decl
  std::string name;  // decl
  bool has_init = false;
  bool shadow = false;         // decl inserted as a parameter shadow copy
  std::vector<Expr> exprs;     // decl: [init]; assign: [target, value]; incr: [target]; expr: [e]; branch/loop: [cond]; ret: [e]?
  std::vector<Stmt> body;      // block, loop body, then branch
  std::vector<Stmt> else_body;
  bool has_else = false;
  std::string text;            // single-line source text of the statement head
  std::string label;           // point label such as w1
  SourceLoc loc;
};

struct Param {
  std::string type;
  std::string name;
};

struct Method {
  std::string ret_type;  // "void", "int" or a class
  std::string name;
  std::vector<Param> params;
  std::vector<Stmt> body;
  std::string header;
  SourceLoc loc;
};

struct Field {
  std::string type;
  std::string name;
  SourceLoc loc;
};

struct Class {
  std::string name;
  std::string parent;
  std::vector<Field> fields;
  std::vector<Method> methods;
  SourceLoc loc;
};

struct Program {
  std::vector<Class> classes;
};

}  // namespace ast

ast::Program parse(std::string_view source);

/// Prepends v' = v for this and every class-typed parameter. Idempotent.
ast::Program insert_shadow_copies(ast::Program prog);

/// Builds static information and lowered code.
Program lower(const ast::Program& prog);

struct LoadOptions {
  bool shadows = true;
};

Program load_program(std::string_view source, const LoadOptions& opts = {});
Program load_file(const std::string& path, const LoadOptions& opts = {});

/// Checks every instruction of the lowered code against its signature; throws on violation.
void check_program(const Program& prog);

std::string shadow_name(std::string_view v);
bool is_shadow_name(std::string_view v);

}  // namespace escape
