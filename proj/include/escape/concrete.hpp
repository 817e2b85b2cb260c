#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "escape/er_elem.hpp"
#include "escape/program.hpp"

namespace escape {

struct Value {
  enum class Kind : std::uint8_t { integer, location, null };
  Kind kind = Kind::null;
  std::int64_t v = 0;  // integer value or location id

  static Value num(std::int64_t i) { return {Kind::integer, i}; }
  static Value loc(std::int64_t l) { return {Kind::location, l}; }
  static Value nil() { return {Kind::null, 0}; }
  bool is_loc() const { return kind == Kind::location; }

  friend bool operator==(const Value&, const Value&) = default;
  friend auto operator<=>(const Value&, const Value&) = default;
};

/// Object: creation point plus field values aligned with ClassInfo::fields of its class.
struct Object {
  PointId point = -1;
  std::vector<Value> fields;

  friend bool operator==(const Object&, const Object&) = default;
  friend auto operator<=>(const Object&, const Object&) = default;
};

using Memory = std::map<std::int64_t, Object>;

/// Frame values are aligned with the sorted type environment the state is typed by.
struct State {
  std::vector<Value> frame;
  Memory mem;

  friend bool operator==(const State&, const State&) = default;
  friend auto operator<=>(const State&, const State&) = default;
};

/// Initial value of a type: 0 or null.
Value initial_value(Type t);
Object fresh_object(const Program& p, PointId point);

/// Value of field f in object o; f must belong to the object's class.
const Value& field_value(const Program& p, const Object& o, FieldId f);
Value& field_value(const Program& p, Object& o, FieldId f);

/// Weak correctness of the frame and of every object, as one check.
bool check_correct(const Program& p, const TypeEnv& env, const std::vector<Value>& frame, const Memory& mem);
/// check_correct plus this != null.
bool in_sigma(const Program& p, const TypeEnv& env, const State& s);

/// One concrete operation. nullopt means undefined. Binary kinds need s2.
std::optional<State> step(const Program& p, const Instr& instr, const State& s, const State* s2 = nullptr);

/// Locations of the objects reachable from the frame.
std::set<std::int64_t> reach(const Program& p, const TypeEnv& env, const State& s);

PointSet alpha_e(const Program& p, const TypeEnv& env, const std::vector<State>& states);
ERElem alpha_er(const Program& p, const TypeEnv& env, const std::vector<State>& states);

/// Drops unreachable objects and renumbers locations in discovery order.
State canonical(const Program& p, const TypeEnv& env, const State& s);

/// Entry state: this bound to an object of the given point, class parameters null, ints 0.
State entry_state(const Program& p, MethodId m, PointId this_point);

struct RunOptions {
  std::size_t budget = 1'000'000;  // instruction steps per run
  std::size_t max_depth = 4'000;   // nested calls
};

struct RunResult {
  std::optional<State> final;  // at the method exit, in the exit environment
  bool truncated = false;
  std::size_t steps = 0;
};

/// Called at every mark with the current state (typed by the mark's environment).
using MarkVisitor = std::function<void(MarkId, const State&)>;

/// Deterministic interpreter over the lowered code.
RunResult run(const Program& p, MethodId m, const State& entry, const RunOptions& opts = {},
              const MarkVisitor& visit = {});

struct Collected {
  std::map<MarkId, std::set<State>> at;  // canonical states per mark
  bool truncated = false;
};

/// Runs every initial state and collects canonical states at every mark.
Collected run_collecting(const Program& p, MethodId m, const std::vector<State>& initial,
                         const RunOptions& opts = {});

/// Enumerates the richest states built from e, one location per creation point (location = point id).
/// Throws ConfigError when more than max_points points exist or the count exceeds limit.
std::vector<State> representative_states_e(const Program& p, const TypeEnv& env, const PointSet& e,
                                           std::size_t max_points = 6, std::size_t limit = 2'000'000);
/// Same for a non-bottom ER element.
std::vector<State> representative_states_er(const Program& p, const TypeEnv& env, const ERState& s,
                                            std::size_t max_points = 6, std::size_t limit = 2'000'000);

}  // namespace escape
