#pragma once

#include <unordered_map>
#include <vector>

#include "escape/program.hpp"

namespace escape {

/// Variant of the return (and lookup) transfer.
enum class EReturn : std::uint8_t {
  optimal,  // worst case on the fields of the caller's objects
  simple,   // delta over the whole caller scope; lookup is the identity
  shadow,   // callee exit carries shadow copies of the parameters
};

/// The basic escape domain: sets of creation points closed under the collector delta.
class DomainE {
public:
  explicit DomainE(const Program& p, EReturn mode = EReturn::optimal);

  const Program& program() const { return p_; }
  EReturn mode() const { return mode_; }

  PointSet delta(const TypeEnv& env, const PointSet& e) const;
  PointSet delta(EnvId env, const PointSet& e);  // memoized

  /// Abstract counterpart of one instruction; e2 is the second input of binary kinds.
  PointSet transfer(const Instr& i, const PointSet& e1, const PointSet* e2 = nullptr);
  static PointSet join(const PointSet& a, const PointSet& b) { return a | b; }

  /// Every canonical element for env, in increasing numeric order of the bit patterns.
  std::vector<PointSet> enumerate(const TypeEnv& env) const;

private:
  struct Masks {
    PointSet vars;  // points compatible with some class variable
    bool has_this = false;
    PointSet this_mask;
  };
  Masks masks(const TypeEnv& env) const;
  PointSet close(const Masks& m, const PointSet& e) const;
  PointSet field_closure(const PointSet& roots, const PointSet& e) const;

  struct Key {
    EnvId env;
    PointSet e;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const { return k.e.hash() * 31u + static_cast<std::size_t>(k.env); }
  };

  const Program& p_;
  EReturn mode_;
  std::vector<PointSet> reach_mask_;  // per point: points compatible with some class field of its class
  std::unordered_map<Key, PointSet, KeyHash> memo_;
};

}  // namespace escape
