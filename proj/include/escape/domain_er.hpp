#pragma once

#include <string>
#include <vector>

#include "escape/er_elem.hpp"
#include "escape/program.hpp"

namespace escape {

/// Variant of the return transfer.
enum class ERReturn : std::uint8_t {
  worst_memory,  // caller fields assumed to hold anything type-compatible
  shadow,        // callee exit carries shadow copies of the parameters
};

/// The refined domain: a set per variable and per field, closed under the collector xi.
class DomainER {
public:
  explicit DomainER(const Program& p, ERReturn mode = ERReturn::shadow);

  const Program& program() const { return p_; }
  ERReturn mode() const { return mode_; }

  /// Creation points reachable from the frame through the memory.
  PointSet rho(const TypeEnv& env, const ERState& s) const;
  ERElem xi(const TypeEnv& env, ERElem s) const;

  ERElem transfer(const Instr& i, const ERElem& s1, const ERElem* s2 = nullptr) const;
  static ERElem join(const ERElem& a, const ERElem& b);
  static bool leq(const ERElem& a, const ERElem& b);

  /// Embedding of an E element.
  ERElem theta(const TypeEnv& env, const PointSet& e) const;
  /// Memory binding each class field to every compatible point.
  std::vector<PointSet> top_memory() const;

  /// Element with every class slot empty.
  ERState empty_state(const TypeEnv& env) const;

  /// Canonical non-bottom elements for env; throws if more than 2^max_bits candidates.
  std::vector<ERState> enumerate(const TypeEnv& env, std::size_t max_bits = 24) const;
  /// Number of candidate (typed) non-bottom elements.
  double candidate_count(const TypeEnv& env) const;

  /// "[f->{pi2}, this->{pibar}] * [next->{pi2}]"; empty slots and int slots are hidden.
  std::string render(const TypeEnv& env, const ERElem& s, bool show_shadows = false) const;

private:
  const Program& p_;
  ERReturn mode_;
  std::vector<std::vector<FieldId>> class_fields_;  // per point: class-typed fields of its class
};

std::string render_points(const Program& p, const PointSet& s);

}  // namespace escape
