#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "escape/domain_e.hpp"
#include "escape/domain_er.hpp"
#include "escape/program.hpp"

namespace escape {

/// Adaptor for the E domain: sets of points, empty set is bottom.
struct EAdaptor {
  using Elem = PointSet;
  DomainE& d;

  Elem bottom() const { return {}; }
  bool is_bottom(const Elem& e) const { return e.empty(); }
  Elem join(const Elem& a, const Elem& b) const { return a | b; }
  bool leq(const Elem& a, const Elem& b) const { return a.subset_of(b); }
  Elem transfer(const Instr& i, const Elem& a, const Elem* b = nullptr) const { return d.transfer(i, a, b); }
};

struct ERAdaptor {
  using Elem = ERElem;
  const DomainER& d;

  Elem bottom() const { return std::nullopt; }
  bool is_bottom(const Elem& e) const { return !e.has_value(); }
  Elem join(const Elem& a, const Elem& b) const { return DomainER::join(a, b); }
  bool leq(const Elem& a, const Elem& b) const { return DomainER::leq(a, b); }
  Elem transfer(const Instr& i, const Elem& a, const Elem* b = nullptr) const { return d.transfer(i, a, b); }
};

/// Denotational evaluator over method summaries.
///
/// By default every method has one input (the join of all its call sites) and one output.
/// With contexts enabled every method keeps a table from input to output instead.
/// Outputs start at bottom. A pass evaluates every live context reachable from the root;
/// callee inputs met during a pass become live. Passes repeat until nothing grows.
/// Decorations are joined over the live contexts of the last pass, which is a fixpoint.
template <class A>
class Denotational {
public:
  using Elem = typename A::Elem;

  Denotational(const Program& p, A adaptor, bool contexts = false)
      : p_(p), a_(std::move(adaptor)), contexts_(contexts) {}

  void run(MethodId root, const Elem& input) {
    tables_.assign(p_.methods.size(), {});
    tables_[static_cast<std::size_t>(root)].emplace(input, a_.bottom());
    iterations_ = 0;
    bool changed = true;
    while (changed) {
      changed = false;
      ++iterations_;
      at_.assign(p_.marks.size(), a_.bottom());
      reached_.assign(p_.marks.size(), false);
      done_.assign(p_.methods.size(), {});
      pending_.clear();
      pending_.emplace_back(root, input);
      grew_ = false;
      while (!pending_.empty()) {
        auto [m, x] = pending_.back();
        pending_.pop_back();
        if (!contexts_) x = tables_[static_cast<std::size_t>(m)].begin()->first;
        auto& done = done_[static_cast<std::size_t>(m)];
        if (done.count(x) != 0) continue;
        done.emplace(x, true);
        Elem out = eval(p_.methods[static_cast<std::size_t>(m)].body, x);
        if (!contexts_) x = tables_[static_cast<std::size_t>(m)].begin()->first;
        Elem& slot = tables_[static_cast<std::size_t>(m)][x];
        Elem next = a_.join(slot, out);
        if (!(next == slot)) {
          slot = next;
          changed = true;
        }
      }
      if (grew_) changed = true;
    }
  }

  const Elem& at(MarkId m) const { return at_[static_cast<std::size_t>(m)]; }
  bool reached(MarkId m) const { return reached_[static_cast<std::size_t>(m)]; }
  std::size_t iterations() const { return iterations_; }
  /// Live contexts of a method in the last pass.
  std::size_t contexts(MethodId m) const { return done_[static_cast<std::size_t>(m)].size(); }
  const std::map<Elem, Elem>& table(MethodId m) const { return tables_[static_cast<std::size_t>(m)]; }
  const A& adaptor() const { return a_; }

  Elem eval(const Node& n, const Elem& s) {
    using K = Node::Kind;
    switch (n.kind) {
      case K::instr:
        return a_.transfer(n.instr, s);
      case K::seq: {
        Elem cur = s;
        for (const Node& k : n.kids) cur = eval(k, cur);
        return cur;
      }
      case K::mark: {
        auto i = static_cast<std::size_t>(n.mark);
        at_[i] = a_.join(at_[i], s);
        reached_[i] = true;
        return s;
      }
      case K::binary: {
        Elem x = eval(n.kids[0], s);
        Elem y = eval(n.kids[1], x);
        return a_.transfer(n.instr, x, &y);
      }
      case K::call: {
        Elem acc = a_.bottom();
        for (const CallTarget& t : n.targets) {
          Elem l = a_.transfer(t.lookup, s);
          if (a_.is_bottom(l)) continue;
          Elem c = a_.transfer(t.call, l);
          Elem o = a_.is_bottom(c) ? a_.bottom() : summary(t.call.method, c);
          Elem r = a_.transfer(t.ret, l, &o);
          acc = a_.join(acc, r);
        }
        return acc;
      }
      case K::branch: {
        Elem c = eval(n.kids[0], s);
        Elem t = eval(n.kids[1], c);
        Elem e = eval(n.kids[2], c);
        return a_.join(t, e);
      }
      case K::loop: {
        Elem x = s;
        for (;;) {
          Elem c = eval(n.kids[0], x);
          Elem b = eval(n.kids[1], c);
          Elem next = a_.join(s, b);
          if (a_.leq(next, x)) break;
          x = a_.join(x, next);
        }
        Elem c = eval(n.kids[0], x);
        return eval(n.kids[2], c);
      }
    }
    return s;
  }

private:
  Elem summary(MethodId m, const Elem& input) {
    auto& table = tables_[static_cast<std::size_t>(m)];
    if (!contexts_ && !table.empty()) {
      // Single summary: widen the one input, keep the output as a lower bound.
      auto only = table.begin();
      if (a_.leq(input, only->first)) {
        pending_.emplace_back(m, only->first);
        return only->second;
      }
      Elem in = a_.join(only->first, input);
      Elem out = only->second;
      table.clear();
      table.emplace(in, out);
      grew_ = true;
      pending_.emplace_back(m, in);
      return out;
    }
    auto it = table.find(input);
    if (it == table.end()) {
      it = table.emplace(input, a_.bottom()).first;
      grew_ = true;
    }
    pending_.emplace_back(m, input);
    return it->second;
  }

  const Program& p_;
  A a_;
  bool contexts_;
  std::vector<std::map<Elem, Elem>> tables_;
  std::vector<std::map<Elem, bool>> done_;
  std::vector<std::pair<MethodId, Elem>> pending_;
  std::vector<Elem> at_;
  std::vector<bool> reached_;
  std::size_t iterations_ = 0;
  bool grew_ = false;
};

}  // namespace escape
