#pragma once

#include <string>
#include <vector>

// Hand-derived decorations of Scan.scan in figures.oo, one per statement boundary, as they
// appear in the published listings. The analysis also prints one extra boundary that those
// listings leave out; see scan_decorations_as_listed.

namespace fx {

inline const std::vector<std::string>& scan_listing_e() {
  static const std::vector<std::string> v = {
      "{pibar}",
      "{pi2, pibar}",
      "{pi2, pibar}",
      "{pi1, pi2, pibar}",
      "{pi1, pi2, pi4, pibar}",
      "{pi1, pi2, pi3, pi4, pibar}",
      "{pi1, pi2, pi3, pi4, pibar}",
      "{pi1, pi2, pi3, pi4, pibar}",
      "{pi1, pi2, pi3, pi4, pibar}",
      "{pi1, pi2, pi3, pi4, pibar}",
      "{pi1, pi2, pi3, pi4, pibar}",
  };
  return v;
}

inline const std::vector<std::string>& scan_listing_er() {
  static const std::vector<std::string> v = {
      "[this->{pibar}] * []",
      "[f->{pi2}, this->{pibar}] * []",
      "[f->{pi2}, this->{pibar}] * [next->{pi2}]",
      "[f->{pi2}, this->{pibar}] * [next->{pi2}, rotation->{pi1}]",
      "[f->{pi2}, this->{pibar}] * [next->{pi2}, rotation->{pi1, pi4}]",
      "[f->{pi3}, this->{pibar}] * [next->{pi2}, rotation->{pi1, pi4}]",
      "[f->{pi3}, this->{pibar}] * [next->{pi2}, rotation->{pi1, pi4}]",
      "[f->{pi3}, this->{pibar}] * [next->{pi2}, rotation->{pi1, pi4}]",
      "[f->{pi2, pi3}, this->{pibar}] * [next->{pi2}, rotation->{pi1, pi4}]",
      "[f->{pi2, pi3}, this->{pibar}] * [next->{pi2}, rotation->{pi1, pi4}]",
      "[this->{pibar}] * []",
  };
  return v;
}

// The E listing stops after the loop body; the ER listing skips the boundary after the last
// statement of the loop body. Index of the boundary each listing omits.
inline constexpr std::size_t kScanOmittedE = 11;
inline constexpr std::size_t kScanOmittedER = 10;

/// Our twelve scan decorations with the boundary the listing omits removed.
inline std::vector<std::string> scan_decorations_as_listed(std::vector<std::string> ours, std::size_t omitted) {
  if (omitted < ours.size()) ours.erase(ours.begin() + static_cast<std::ptrdiff_t>(omitted));
  return ours;
}

}  // namespace fx
