#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <vector>

namespace escape {

using PointId = int;

// Upper bound on creation points per program (program points plus external ones).
inline constexpr std::size_t kMaxPoints = 256;

/// Set of creation points, iterated in index order.
class PointSet {
  static constexpr std::size_t kWords = kMaxPoints / 64;

public:
  PointSet() = default;
  PointSet(std::initializer_list<PointId> ids) {
    for (PointId p : ids) insert(p);
  }

  static PointSet first_n(std::size_t n) {
    PointSet s;
    for (std::size_t i = 0; i < n; ++i) s.insert(static_cast<PointId>(i));
    return s;
  }

  void insert(PointId p) { w_[idx(p)] |= bit(p); }
  void erase(PointId p) { w_[idx(p)] &= ~bit(p); }
  bool contains(PointId p) const { return (w_[idx(p)] & bit(p)) != 0; }

  bool empty() const {
    for (auto w : w_)
      if (w) return false;
    return true;
  }
  std::size_t size() const {
    std::size_t n = 0;
    for (auto w : w_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  bool subset_of(const PointSet& o) const {
    for (std::size_t i = 0; i < kWords; ++i)
      if (w_[i] & ~o.w_[i]) return false;
    return true;
  }
  bool intersects(const PointSet& o) const {
    for (std::size_t i = 0; i < kWords; ++i)
      if (w_[i] & o.w_[i]) return true;
    return false;
  }

  PointSet& operator|=(const PointSet& o) {
    for (std::size_t i = 0; i < kWords; ++i) w_[i] |= o.w_[i];
    return *this;
  }
  PointSet& operator&=(const PointSet& o) {
    for (std::size_t i = 0; i < kWords; ++i) w_[i] &= o.w_[i];
    return *this;
  }
  PointSet& operator-=(const PointSet& o) {
    for (std::size_t i = 0; i < kWords; ++i) w_[i] &= ~o.w_[i];
    return *this;
  }
  friend PointSet operator|(PointSet a, const PointSet& b) { return a |= b; }
  friend PointSet operator&(PointSet a, const PointSet& b) { return a &= b; }
  friend PointSet operator-(PointSet a, const PointSet& b) { return a -= b; }

  friend bool operator==(const PointSet& a, const PointSet& b) { return a.w_ == b.w_; }
  friend bool operator!=(const PointSet& a, const PointSet& b) { return !(a == b); }
  // Arbitrary total order, used for map keys.
  friend bool operator<(const PointSet& a, const PointSet& b) { return a.w_ < b.w_; }

  template <class F>
  void for_each(F&& f) const {
    for (std::size_t i = 0; i < kWords; ++i) {
      std::uint64_t w = w_[i];
      while (w) {
        int b = std::countr_zero(w);
        f(static_cast<PointId>(i * 64 + static_cast<std::size_t>(b)));
        w &= w - 1;
      }
    }
  }

  std::vector<PointId> to_vector() const {
    std::vector<PointId> out;
    for_each([&](PointId p) { out.push_back(p); });
    return out;
  }

  std::size_t hash() const {
    std::size_t h = 0;
    for (auto w : w_) h = h * 1000003u ^ std::hash<std::uint64_t>{}(w);
    return h;
  }

private:
  static std::size_t idx(PointId p) { return static_cast<std::size_t>(p) / 64; }
  static std::uint64_t bit(PointId p) { return std::uint64_t{1} << (static_cast<std::size_t>(p) % 64); }

  std::array<std::uint64_t, kWords> w_{};
};

}  // namespace escape

template <>
struct std::hash<escape::PointSet> {
  std::size_t operator()(const escape::PointSet& s) const { return s.hash(); }
};
