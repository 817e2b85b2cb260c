#pragma once

#include <fstream>
#include <functional>
#include <initializer_list>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "escape/analysis.hpp"
#include "escape/concrete.hpp"
#include "escape/domain_e.hpp"
#include "escape/domain_er.hpp"
#include "escape/frontend.hpp"
#include "random_program.hpp"

namespace fx {

using namespace escape;

inline std::string corpus(const std::string& name) { return std::string(ESCAPE_CORPUS_DIR) + "/" + name; }

inline const std::vector<std::string>& hand_corpus() {
  static const std::vector<std::string> files = {"figures.oo", "circles.oo", "empty.oo", "pair.oo",
                                                 "chain.oo",   "dispatch.oo", "local.oo"};
  return files;
}

// Hand corpus files with at most four creation points once the external one is added.
inline const std::vector<std::string>& small_corpus() {
  static const std::vector<std::string> files = {"pair.oo", "chain.oo", "dispatch.oo", "local.oo"};
  return files;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct NamedSource {
  std::string name;
  std::string source;
};

/// Differential corpus: every hand-written program plus generated programs for seeds 1..generated.
inline std::vector<NamedSource> differential_corpus(std::uint64_t generated = 60) {
  std::vector<NamedSource> r;
  for (const auto& f : hand_corpus()) r.push_back({f, read_file(corpus(f))});
  for (std::uint64_t s = 1; s <= generated; ++s) r.push_back({"seed " + std::to_string(s), gen::random_program(s)});
  return r;
}

/// Program with the external point for the default entry already added.
inline Program load_with_external(const std::string& source_or_path, bool is_path, bool shadows = true) {
  LoadOptions o;
  o.shadows = shadows;
  Program p = is_path ? load_file(source_or_path, o) : load_program(source_or_path, o);
  MethodId m = default_entry(p);
  if (m >= 0) p.add_external_point(p.methods[static_cast<std::size_t>(m)].owner, "pibar");
  return p;
}

/// The running example with pibar as an external Scan point.
inline Program running(bool shadows = true) {
  LoadOptions o;
  o.shadows = shadows;
  Program p = load_file(corpus("figures.oo"), o);
  p.add_external_point(p.class_of("Scan"), "pibar");
  return p;
}

inline PointSet pts(const Program& p, std::initializer_list<const char*> labels) {
  PointSet s;
  for (const char* l : labels) {
    PointId id = p.find_point(l);
    if (id < 0) throw ConfigError(std::string("no point ") + l);
    s.insert(id);
  }
  return s;
}

inline TypeEnv tau_w0(const Program& p) { return TypeEnv({{"out", kInt}, {"this", p.class_of("Circle")}}); }
inline TypeEnv tau_w1(const Program& p) {
  return TypeEnv({{"f", p.class_of("Figure")}, {"n", p.class_of("Figure")}, {"out", kInt}, {"this", p.class_of("Scan")}});
}

inline FieldId field(const Program& p, const std::string& name) {
  for (std::size_t f = 0; f < p.fields.size(); ++f)
    if (p.fields[f].name == name) return static_cast<FieldId>(f);
  throw ConfigError("no field " + name);
}

using Slots = std::vector<std::pair<std::string, PointSet>>;

/// ER element from named frame and memory slots; every other slot is empty.
inline ERState er(const Program& p, const TypeEnv& env, const Slots& frame, const Slots& mem) {
  ERState s;
  s.frame.assign(env.size(), PointSet{});
  s.mem.assign(p.fields.size(), PointSet{});
  for (const auto& [v, set] : frame) s.frame[static_cast<std::size_t>(env.index_of(v))] = set;
  for (const auto& [f, set] : mem) s.mem[static_cast<std::size_t>(field(p, f))] = set;
  return s;
}

/// Visits every instruction of the lowered code, including the call protocol of each target.
inline void for_each_instr(const Node& n, const std::function<void(const Instr&)>& f) {
  switch (n.kind) {
    case Node::Kind::instr:
      f(n.instr);
      break;
    case Node::Kind::binary:
      for (const auto& k : n.kids) for_each_instr(k, f);
      f(n.instr);
      break;
    case Node::Kind::call:
      for (const auto& t : n.targets) {
        f(t.lookup);
        f(t.call);
        f(t.ret);
      }
      break;
    default:
      for (const auto& k : n.kids) for_each_instr(k, f);
  }
}

inline void for_each_instr(const Program& p, const std::function<void(const Instr&)>& f) {
  for (const auto& m : p.methods) for_each_instr(m.body, f);
}

inline void for_each_node(const Node& n, const std::function<void(const Node&)>& f) {
  f(n);
  for (const auto& k : n.kids) for_each_node(k, f);
}

/// Decoration lines printed by decorate for one method, in listing order.
inline std::vector<std::string> decorations_of(const std::string& listing, const std::string& method) {
  std::vector<std::string> r;
  std::istringstream in(listing);
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (line.rfind("// ", 0) == 0) {
      inside = line.substr(3) == method;
      continue;
    }
    if (!inside) continue;
    auto b = line.find_first_not_of(' ');
    if (b != std::string::npos && (line[b] == '{' || line[b] == '[')) r.push_back(line.substr(b));
  }
  return r;
}

/// Uniformly random subset of mask.
inline PointSet random_subset(std::mt19937_64& rng, const PointSet& mask) {
  PointSet s;
  mask.for_each([&](PointId q) {
    if (rng() & 1u) s.insert(q);
  });
  return s;
}

/// Random typed ER element (not necessarily canonical).
inline ERState random_er(std::mt19937_64& rng, const Program& p, const TypeEnv& env) {
  ERState s;
  for (std::size_t i = 0; i < env.size(); ++i) s.frame.push_back(random_subset(rng, p.compatible_mask(env.type(i))));
  for (const auto& f : p.fields) s.mem.push_back(random_subset(rng, p.compatible_mask(f.type)));
  return s;
}

/// Pointwise subset-or-equal with random extra points, still typed.
inline ERState random_above(std::mt19937_64& rng, const Program& p, const TypeEnv& env, ERState s) {
  for (std::size_t i = 0; i < env.size(); ++i) s.frame[i] |= random_subset(rng, p.compatible_mask(env.type(i)));
  for (std::size_t f = 0; f < p.fields.size(); ++f) s.mem[f] |= random_subset(rng, p.compatible_mask(p.fields[f].type));
  return s;
}

/// Applies one instruction to every state; undefined outcomes are dropped.
inline std::vector<State> step_all(const Program& p, const Instr& i, const std::vector<State>& in) {
  std::vector<State> out;
  for (const auto& s : in)
    if (auto r = step(p, i, s)) out.push_back(*r);
  return out;
}

}  // namespace fx
