#pragma once

#include <optional>
#include <vector>

#include "escape/point_set.hpp"

namespace escape {

/// Non-bottom element of ER: one set per frame variable (aligned with the
/// sorted type environment) and one set per field, indexed by FieldId.
/// Int slots hold the empty set and stand for *.
struct ERState {
  std::vector<PointSet> frame;
  std::vector<PointSet> mem;

  friend bool operator==(const ERState&, const ERState&) = default;
  friend bool operator<(const ERState& a, const ERState& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.mem < b.mem;
  }
};

/// nullopt is bottom.
using ERElem = std::optional<ERState>;

}  // namespace escape
