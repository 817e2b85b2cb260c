#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "escape/frontend.hpp"

namespace escape {
namespace {

struct Token {
  enum class Kind { ident, number, sym, annot, end };
  Kind kind = Kind::end;
  std::string text;
  std::int64_t value = 0;
  SourceLoc loc;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1, col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    SourceLoc loc{line, col};
    if (src.substr(i, 3) == "//@") {
      std::size_t j = i + 3;
      while (j < src.size() && src[j] != '\n') ++j;
      std::string body(src.substr(i + 3, j - i - 3));
      std::size_t a = body.find_first_not_of(" \t\r");
      std::size_t b = body.find_last_not_of(" \t\r");
      if (a == std::string::npos) throw SourceError(loc, "empty annotation");
      Token t{Token::Kind::annot, body.substr(a, b - a + 1), 0, loc, i, j};
      out.push_back(std::move(t));
      advance(j - i);
      continue;
    }
    if (src.substr(i, 2) == "//") {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (src.substr(i, 2) == "/*") {
      std::size_t j = src.find("*/", i + 2);
      if (j == std::string_view::npos) throw SourceError(loc, "unterminated comment");
      advance(j + 2 - i);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      out.push_back(Token{Token::Kind::ident, std::string(src.substr(i, j - i)), 0, loc, i, j});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      Token t{Token::Kind::number, std::string(src.substr(i, j - i)), 0, loc, i, j};
      auto [p, ec] = std::from_chars(src.data() + i, src.data() + j, t.value);
      if (ec != std::errc()) throw SourceError(loc, "integer literal out of range");
      out.push_back(std::move(t));
      advance(j - i);
      continue;
    }
    static const char* two[] = {"==", "!=", "++", "<="};
    bool matched = false;
    for (const char* s : two) {
      if (src.substr(i, 2) == s) {
        out.push_back(Token{Token::Kind::sym, s, 0, loc, i, i + 2});
        advance(2);
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (std::string_view("{}();,.=+-<>").find(c) != std::string_view::npos) {
      out.push_back(Token{Token::Kind::sym, std::string(1, c), 0, loc, i, i + 1});
      advance(1);
      continue;
    }
    throw SourceError(loc, std::string("unexpected character '") + c + "'");
  }
  out.push_back(Token{Token::Kind::end, "", 0, {line, col}, src.size(), src.size()});
  return out;
}

std::string collapse(std::string_view s) {
  std::string r;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !r.empty();
      continue;
    }
    if (space) r.push_back(' ');
    space = false;
    r.push_back(c);
  }
  return r;
}

class Parser {
public:
  Parser(std::string_view src) : src_(src), toks_(lex(src)) {}

  ast::Program program() {
    ast::Program p;
    while (!at_end()) p.classes.push_back(class_decl());
    return p;
  }

private:
  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;

  const Token& peek(std::size_t k = 0) const {
    std::size_t i = std::min(pos_ + k, toks_.size() - 1);
    return toks_[i];
  }
  bool at_end() const { return peek().kind == Token::Kind::end; }
  bool is_sym(std::string_view s, std::size_t k = 0) const {
    return peek(k).kind == Token::Kind::sym && peek(k).text == s;
  }
  bool is_kw(std::string_view s, std::size_t k = 0) const {
    return peek(k).kind == Token::Kind::ident && peek(k).text == s;
  }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    std::string got = t.kind == Token::Kind::end ? "end of input" : "'" + t.text + "'";
    throw SourceError(t.loc, msg + ", found " + got);
  }
  void expect_sym(std::string_view s) {
    if (!is_sym(s)) fail("expected '" + std::string(s) + "'");
    next();
  }
  std::string ident(const char* what) {
    if (peek().kind != Token::Kind::ident) fail(std::string("expected ") + what);
    return next().text;
  }
  std::string text_between(std::size_t from_tok, std::size_t to_tok_exclusive) const {
    std::size_t b = toks_[from_tok].begin;
    std::size_t e = toks_[to_tok_exclusive - 1].end;
    return collapse(src_.substr(b, e - b));
  }

  static bool reserved(std::string_view s) {
    return s == "class" || s == "extends" || s == "if" || s == "else" || s == "while" || s == "return" ||
           s == "new" || s == "null" || s == "this" || s == "void";
  }

  ast::Class class_decl() {
    ast::Class c;
    c.loc = peek().loc;
    if (!is_kw("class")) fail("expected 'class'");
    next();
    c.name = ident("class name");
    if (is_kw("extends")) {
      next();
      c.parent = ident("superclass name");
    }
    expect_sym("{");
    while (!is_sym("}")) {
      if (at_end()) fail("expected '}'");
      member(c);
    }
    next();
    return c;
  }

  void member(ast::Class& c) {
    std::size_t start = pos_;
    SourceLoc loc = peek().loc;
    std::string type = ident("type");
    std::string name = ident("member name");
    if (is_sym("(")) {
      ast::Method m;
      m.loc = loc;
      m.ret_type = type;
      m.name = name;
      next();
      if (!is_sym(")")) {
        for (;;) {
          ast::Param p;
          p.type = ident("parameter type");
          p.name = ident("parameter name");
          m.params.push_back(p);
          if (is_sym(",")) {
            next();
            continue;
          }
          break;
        }
      }
      expect_sym(")");
      m.header = text_between(start, pos_) + " {";
      if (!is_sym("{")) fail("expected method body");
      m.body = block();
      c.methods.push_back(std::move(m));
      return;
    }
    if (type == "void") throw SourceError(loc, "field cannot have type void");
    c.fields.push_back({type, name, loc});
    while (is_sym(",")) {
      next();
      SourceLoc l = peek().loc;
      c.fields.push_back({type, ident("field name"), l});
    }
    expect_sym(";");
  }

  std::vector<ast::Stmt> block() {
    expect_sym("{");
    std::vector<ast::Stmt> out;
    while (!is_sym("}")) {
      if (at_end()) fail("expected '}'");
      out.push_back(statement());
    }
    next();
    return out;
  }

  // Body of if/while: either a block or a single statement.
  std::vector<ast::Stmt> sub_body() {
    if (is_sym("{")) return block();
    std::vector<ast::Stmt> v;
    v.push_back(statement());
    return v;
  }

  static ast::Expr* first_unlabeled_new(ast::Expr& e) {
    if (e.kind == ast::Expr::Kind::new_obj && e.label.empty()) return &e;
    for (auto& k : e.kids)
      if (auto* r = first_unlabeled_new(k)) return r;
    return nullptr;
  }

  void annotate(ast::Stmt& s) {
    for (;;) {
      std::string name;
      SourceLoc loc = peek().loc;
      if (peek().kind == Token::Kind::annot) {
        name = next().text;
      } else if (is_sym("{") && peek(1).kind == Token::Kind::ident && is_sym("}", 2)) {
        next();
        name = next().text;
        next();
      } else {
        return;
      }
      ast::Expr* target = nullptr;
      for (auto& e : s.exprs)
        if ((target = first_unlabeled_new(e))) break;
      if (target) {
        target->label = name;
      } else if (s.label.empty()) {
        s.label = name;
      } else {
        throw SourceError(loc, "statement already carries label '" + s.label + "'");
      }
    }
  }

  bool looks_like_decl() const {
    // "int x", "C x" followed by '=' or ';'
    return peek().kind == Token::Kind::ident && peek(1).kind == Token::Kind::ident && !reserved(peek().text) &&
           (is_sym("=", 2) || is_sym(";", 2));
  }

  ast::Stmt statement() {
    std::size_t start = pos_;
    ast::Stmt s;
    s.loc = peek().loc;
    if (is_sym("{")) {
      s.kind = ast::Stmt::Kind::block;
      s.text = "{";
      s.body = block();
      return s;
    }
    if (is_kw("if") || is_kw("while")) {
      bool loop = is_kw("while");
      next();
      expect_sym("(");
      s.exprs.push_back(expr());
      expect_sym(")");
      s.kind = loop ? ast::Stmt::Kind::loop : ast::Stmt::Kind::branch;
      s.text = text_between(start, pos_) + " {";
      s.body = sub_body();
      if (!loop && is_kw("else")) {
        next();
        s.has_else = true;
        s.else_body = sub_body();
      }
      annotate(s);
      return s;
    }
    if (is_kw("return")) {
      next();
      s.kind = ast::Stmt::Kind::ret;
      if (!is_sym(";")) s.exprs.push_back(expr());
      expect_sym(";");
      s.text = text_between(start, pos_);
      annotate(s);
      return s;
    }
    if (looks_like_decl()) {
      s.kind = ast::Stmt::Kind::decl;
      s.type = next().text;
      s.name = next().text;
      if (is_sym("=")) {
        next();
        s.has_init = true;
        s.exprs.push_back(expr());
      }
      expect_sym(";");
      s.text = text_between(start, pos_);
      annotate(s);
      return s;
    }
    ast::Expr e = expr();
    if (is_sym("=")) {
      next();
      s.kind = ast::Stmt::Kind::assign;
      s.exprs.push_back(std::move(e));
      s.exprs.push_back(expr());
    } else if (is_sym("++")) {
      next();
      s.kind = ast::Stmt::Kind::incr;
      s.exprs.push_back(std::move(e));
    } else {
      s.kind = ast::Stmt::Kind::expr;
      s.exprs.push_back(std::move(e));
    }
    expect_sym(";");
    s.text = text_between(start, pos_);
    annotate(s);
    return s;
  }

  ast::Expr expr() {
    ast::Expr lhs = additive();
    for (const char* op : {"<", "==", "!="}) {
      if (is_sym(op)) {
        ast::Expr b;
        b.kind = ast::Expr::Kind::binop;
        b.loc = peek().loc;
        b.name = next().text;
        b.kids.push_back(std::move(lhs));
        b.kids.push_back(additive());
        if (is_sym("<") || is_sym("==") || is_sym("!=")) fail("comparison operators do not associate");
        return b;
      }
    }
    if (is_sym(">") || is_sym("<=")) fail("unsupported operator");
    return lhs;
  }

  ast::Expr additive() {
    ast::Expr lhs = postfix();
    while (is_sym("+") || is_sym("-")) {
      ast::Expr b;
      b.kind = ast::Expr::Kind::binop;
      b.loc = peek().loc;
      b.name = next().text;
      b.kids.push_back(std::move(lhs));
      b.kids.push_back(postfix());
      lhs = std::move(b);
    }
    return lhs;
  }

  void call_args(ast::Expr& call) {
    expect_sym("(");
    if (!is_sym(")")) {
      for (;;) {
        call.kids.push_back(expr());
        if (is_sym(",")) {
          next();
          continue;
        }
        break;
      }
    }
    expect_sym(")");
  }

  ast::Expr postfix() {
    ast::Expr e = primary();
    while (is_sym(".")) {
      next();
      SourceLoc loc = peek().loc;
      std::string name = ident("field or method name");
      ast::Expr x;
      x.loc = loc;
      x.name = name;
      x.kids.push_back(std::move(e));
      if (is_sym("(")) {
        x.kind = ast::Expr::Kind::call;
        call_args(x);
      } else {
        x.kind = ast::Expr::Kind::field;
      }
      e = std::move(x);
    }
    return e;
  }

  ast::Expr primary() {
    ast::Expr e;
    e.loc = peek().loc;
    if (peek().kind == Token::Kind::number) {
      e.kind = ast::Expr::Kind::int_lit;
      e.value = next().value;
      return e;
    }
    if (is_sym("-") && peek(1).kind == Token::Kind::number) {
      next();
      e.kind = ast::Expr::Kind::int_lit;
      e.value = -next().value;
      return e;
    }
    if (is_sym("(")) {
      next();
      e = expr();
      expect_sym(")");
      return e;
    }
    if (is_kw("null")) {
      next();
      e.kind = ast::Expr::Kind::null_lit;
      return e;
    }
    if (is_kw("new")) {
      next();
      e.kind = ast::Expr::Kind::new_obj;
      e.name = ident("class name");
      expect_sym("(");
      if (!is_sym(")")) fail("constructors take no arguments");
      next();
      return e;
    }
    if (peek().kind == Token::Kind::ident) {
      std::string name = next().text;
      if (reserved(name) && name != "this") throw SourceError(e.loc, "unexpected keyword '" + name + "'");
      if (is_sym("(")) {
        e.kind = ast::Expr::Kind::call;
        e.name = name;
        e.implicit_this = true;
        call_args(e);
        return e;
      }
      e.kind = ast::Expr::Kind::var;
      e.name = name;
      return e;
    }
    fail("expected expression");
  }
};

}  // namespace

ast::Program parse(std::string_view source) { return Parser(source).program(); }

std::string shadow_name(std::string_view v) { return std::string(v) + "'"; }
bool is_shadow_name(std::string_view v) { return !v.empty() && v.back() == '\''; }

ast::Program insert_shadow_copies(ast::Program prog) {
  auto class_typed = [](const std::string& t) { return t != "int"; };
  for (auto& c : prog.classes) {
    for (auto& m : c.methods) {
      std::vector<std::pair<std::string, std::string>> wanted;  // (type, name)
      wanted.emplace_back(c.name, "this");
      for (const auto& p : m.params)
        if (class_typed(p.type)) wanted.emplace_back(p.type, p.name);
      std::vector<ast::Stmt> prefix;
      for (const auto& [type, name] : wanted) {
        bool present = false;
        for (const auto& s : m.body)
          if (s.kind == ast::Stmt::Kind::decl && s.shadow && s.name == shadow_name(name)) present = true;
        if (present) continue;
        ast::Stmt s;
        s.kind = ast::Stmt::Kind::decl;
        s.shadow = true;
        s.type = type;
        s.name = shadow_name(name);
        s.has_init = true;
        ast::Expr v;
        v.kind = ast::Expr::Kind::var;
        v.name = name;
        v.loc = m.loc;
        s.exprs.push_back(std::move(v));
        s.loc = m.loc;
        s.text = s.name + " = " + name + ";";
        prefix.push_back(std::move(s));
      }
      // Existing shadow declarations stay first.
      std::size_t k = 0;
      while (k < m.body.size() && m.body[k].shadow) ++k;
      m.body.insert(m.body.begin() + static_cast<std::ptrdiff_t>(k), prefix.begin(), prefix.end());
    }
  }
  return prog;
}

Program load_program(std::string_view source, const LoadOptions& opts) {
  ast::Program p = parse(source);
  if (opts.shadows) p = insert_shadow_copies(std::move(p));
  Program prog = lower(p);
  prog.shadows = opts.shadows;
  return prog;
}

Program load_file(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_program(ss.str(), opts);
}

}  // namespace escape
