#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "escape/er_elem.hpp"
#include "escape/program.hpp"

namespace escape {

/// Inclusion constraints over unknown sets of creation points.
class ConstraintGraph {
public:
  struct Edge {
    int src = -1;
    int dst = -1;
    bool filter = false;  // dst ⊇ src ∩ mask
    int guard = -1;       // when set: dst ⊇ src only if guard ∩ mask is non-empty
    PointSet mask;
  };

  int add_unknown(std::string name);
  void add_const(int dst, const PointSet& c);
  void add_copy(int src, int dst);
  void add_filter(int src, int dst, const PointSet& mask);
  void add_guarded(int src, int dst, int guard, const PointSet& mask);

  std::size_t num_unknowns() const { return names_.size(); }
  /// Constant inclusions plus edges.
  std::size_t num_constraints() const { return consts_ + edges_.size(); }
  const std::string& name(int u) const { return names_[static_cast<std::size_t>(u)]; }
  const PointSet& seed(int u) const { return seeds_[static_cast<std::size_t>(u)]; }
  const std::vector<Edge>& edges() const { return edges_; }

private:
  std::vector<std::string> names_;
  std::vector<PointSet> seeds_;
  std::vector<Edge> edges_;
  std::size_t consts_ = 0;
};

struct Solution {
  std::vector<PointSet> value;              // per unknown
  std::vector<std::vector<int>> components;  // strongly connected, dependencies first
  std::size_t visits = 0;                    // component evaluations
  /// Average component size.
  double linearity() const;
};

/// Least solution, propagating components in topological order.
Solution solve(const ConstraintGraph& g);

struct ConstraintOptions {
  bool fields_per_point = false;  // field unknowns per program point instead of one per field
  bool frames_merged = false;     // one unknown per method variable instead of per program point
};

/// Constraint form of the ER analysis, one summary per method. put_field always adds the
/// stored value; the collector is only applied at method exits.
struct ConstraintSystem {
  ConstraintGraph graph;
  std::vector<std::vector<int>> frames;  // per mark: one unknown per slot of its environment, -1 for ints
  std::vector<std::vector<int>> mems;    // per mark: one unknown per field, -1 for int fields
  std::vector<int> escape;               // per method: points reachable at the watchpoint
  std::vector<int> entry_this;           // per method: unknown of this at the body input
};

/// Generates constraints for every method; the root's this receives the external point.
ConstraintSystem generate_constraints(const Program& p, MethodId root, PointId external,
                                      const ConstraintOptions& opts = {});

/// ER element at a mark read from a solution.
ERElem constraint_decoration(const Program& p, const ConstraintSystem& cs, const Solution& sol, MarkId m);

}  // namespace escape
