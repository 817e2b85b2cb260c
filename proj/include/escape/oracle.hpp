#pragma once

#include <string>
#include <vector>

#include "escape/analysis.hpp"
#include "escape/concrete.hpp"

namespace escape {

struct OracleResult {
  std::size_t marks_checked = 0;
  std::size_t states = 0;
  bool truncated = false;
  std::vector<std::string> violations;  // one line per failing mark
};

/// Runs the entry method concretely from its entry state and checks that the abstraction of
/// the states seen at every mark is below the decoration of r.
OracleResult oracle_check(const Program& p, const Report& r, const AnalysisConfig& cfg, const RunOptions& opts = {});

}  // namespace escape
