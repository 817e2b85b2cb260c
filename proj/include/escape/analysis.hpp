#pragma once

#include <string>
#include <vector>

#include "escape/er_elem.hpp"
#include "escape/program.hpp"

namespace escape {

enum class DomainKind : std::uint8_t { e, er };
enum class EngineKind : std::uint8_t { denotational, constraints };

struct AnalysisConfig {
  DomainKind domain = DomainKind::er;
  EngineKind engine = EngineKind::denotational;
  bool simple_return_lookup = false;  // E only
  bool contexts = true;               // denotational: one summary per distinct input, else one per method
  bool fields_per_point = false;      // constraints only: field unknowns per program point
  bool frames_merged = false;         // constraints only
  std::string entry;                  // "Class.method"; empty picks the default
  bool timing = false;
};

/// First main, otherwise the first method of the last class; -1 for an empty program.
MethodId default_entry(const Program& p);

struct MethodReport {
  MethodId id = -1;
  std::string name;
  bool reached = false;
  PointSet escaping;  // external points removed
};

struct PointReport {
  PointId id = -1;
  std::string label;
  std::string cls;
  MethodId owner = -1;
  bool allocatable = false;
};

struct Stats {
  std::size_t nc = 0;
  double linearity = 0;
  std::size_t iterations = 0;
  double millis = 0;
};

struct Report {
  MethodId entry = -1;
  PointId external = -1;
  std::vector<MethodReport> methods;
  std::vector<PointReport> points;  // internal points only
  Stats stats;
  // Decorations per mark; only the vector of the chosen domain is filled.
  std::vector<PointSet> e_at;
  std::vector<ERElem> er_at;
  std::vector<bool> reached;
  std::vector<std::size_t> scc_sizes;  // constraints engine
};

/// Runs the configured analysis. Adds the external point "pibar" for the entry's class to p.
Report analyze(Program& p, const AnalysisConfig& cfg);

std::string report_json(const Program& p, const Report& r);
std::string report_text(const Program& p, const Report& r);

/// Listing of every method with its decorations interleaved between statements.
std::string decorate(const Program& p, const Report& r, const AnalysisConfig& cfg, bool show_shadows = false);

}  // namespace escape
