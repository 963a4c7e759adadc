#pragma once

// Ground-completion engine and verdict layer.
//
// Soundness contract (with respect to eval_* in logic.hpp):
//   - Valid / Unsat are produced only by syntactic reasoning whose rewrite
//     rules are identities in every total model that extends the partial
//     evaluation semantics on its defined points. Connectives evaluate
//     strictly, so an assignment that makes the hypothesis true defines every
//     subterm of the hypothesis; goals are additionally screened so that all
//     their partial subterms are guaranteed defined whenever the hypothesis
//     holds. Together these make the syntactic verdicts agree with ground
//     evaluation.
//   - Invalid / Sat always carry a witness assignment that has been checked
//     by direct evaluation.
//   - Anything else is Unknown.

#include <atomic>
#include <functional>
#include <random>
#include <shared_mutex>

#include "graten/logic.hpp"

namespace graten {

// ---- structural containment and replacement ----------------------------------

inline bool contains_sz(const SizeP& hay, const SizeP& needle);
inline bool contains_sz(const ShapeP& hay, const SizeP& needle);
inline bool contains_sh(const ShapeP& hay, const ShapeP& needle);
inline bool contains_sh(const SizeP& hay, const ShapeP& needle);

inline bool contains_sz(const SizeP& hay, const SizeP& needle) {
  if (equal(hay, needle)) return true;
  switch (hay->k) {
    case Size::K::Lit:
    case Size::K::Var: return false;
    case Size::K::Neg: return contains_sz(hay->a, needle);
    case Size::K::Add:
    case Size::K::Mul:
    case Size::K::Div: return contains_sz(hay->a, needle) || contains_sz(hay->b, needle);
    case Size::K::Head:
    case Size::K::Last:
    case Size::K::Len:
    case Size::K::Prod: return contains_sz(hay->sh, needle);
    case Size::K::Nth: return contains_sz(hay->a, needle) || contains_sz(hay->sh, needle);
  }
  return false;
}

inline bool contains_sz(const ShapeP& hay, const SizeP& needle) {
  switch (hay->k) {
    case Shape::K::Lit:
      for (const auto& e : hay->elems)
        if (contains_sz(e, needle)) return true;
      return false;
    case Shape::K::Var:
    case Shape::K::ShapeOf: return false;
    case Shape::K::Cons: return contains_sz(hay->s1, needle) || contains_sz(hay->a, needle);
    case Shape::K::Append:
    case Shape::K::Reshape:
    case Shape::K::Broadcast:
    case Shape::K::Matmul: return contains_sz(hay->a, needle) || contains_sz(hay->b, needle);
    case Shape::K::Tail:
    case Shape::K::Init: return contains_sz(hay->a, needle);
    case Shape::K::InsertAt:
      return contains_sz(hay->s1, needle) || contains_sz(hay->s2, needle) ||
             contains_sz(hay->a, needle);
    case Shape::K::DropAt: return contains_sz(hay->s1, needle) || contains_sz(hay->a, needle);
    case Shape::K::Swap:
      return contains_sz(hay->s1, needle) || contains_sz(hay->s2, needle) ||
             contains_sz(hay->a, needle);
  }
  return false;
}

inline bool contains_sh(const ShapeP& hay, const ShapeP& needle) {
  if (equal(hay, needle)) return true;
  switch (hay->k) {
    case Shape::K::Lit:
      for (const auto& e : hay->elems)
        if (contains_sh(e, needle)) return true;
      return false;
    case Shape::K::Var:
    case Shape::K::ShapeOf: return false;
    case Shape::K::Cons: return contains_sh(hay->s1, needle) || contains_sh(hay->a, needle);
    case Shape::K::Append:
    case Shape::K::Reshape:
    case Shape::K::Broadcast:
    case Shape::K::Matmul: return contains_sh(hay->a, needle) || contains_sh(hay->b, needle);
    case Shape::K::Tail:
    case Shape::K::Init: return contains_sh(hay->a, needle);
    case Shape::K::InsertAt:
      return contains_sh(hay->s1, needle) || contains_sh(hay->s2, needle) ||
             contains_sh(hay->a, needle);
    case Shape::K::DropAt: return contains_sh(hay->s1, needle) || contains_sh(hay->a, needle);
    case Shape::K::Swap:
      return contains_sh(hay->s1, needle) || contains_sh(hay->s2, needle) ||
             contains_sh(hay->a, needle);
  }
  return false;
}

inline bool contains_sh(const SizeP& hay, const ShapeP& needle) {
  switch (hay->k) {
    case Size::K::Lit:
    case Size::K::Var: return false;
    case Size::K::Neg: return contains_sh(hay->a, needle);
    case Size::K::Add:
    case Size::K::Mul:
    case Size::K::Div: return contains_sh(hay->a, needle) || contains_sh(hay->b, needle);
    case Size::K::Head:
    case Size::K::Last:
    case Size::K::Len:
    case Size::K::Prod: return contains_sh(hay->sh, needle);
    case Size::K::Nth: return contains_sh(hay->a, needle) || contains_sh(hay->sh, needle);
  }
  return false;
}

// Replace every structural occurrence of a size (resp. shape) term.
struct Replacement {
  std::optional<std::pair<SizeP, SizeP>> sz;
  std::optional<std::pair<ShapeP, ShapeP>> sh;
};

inline SizeP replace_in(const SizeP& s, const Replacement& r);
inline ShapeP replace_in(const ShapeP& s, const Replacement& r);

inline SizeP replace_in(const SizeP& s, const Replacement& r) {
  if (r.sz && equal(s, r.sz->first)) return r.sz->second;
  auto q = std::make_shared<Size>(*s);
  switch (s->k) {
    case Size::K::Lit:
    case Size::K::Var: return s;
    case Size::K::Neg:
      q->a = replace_in(s->a, r);
      return q;
    case Size::K::Add:
    case Size::K::Mul:
    case Size::K::Div:
      q->a = replace_in(s->a, r);
      q->b = replace_in(s->b, r);
      return q;
    case Size::K::Head:
    case Size::K::Last:
    case Size::K::Len:
    case Size::K::Prod:
      q->sh = replace_in(s->sh, r);
      return q;
    case Size::K::Nth:
      q->a = replace_in(s->a, r);
      q->sh = replace_in(s->sh, r);
      return q;
  }
  return s;
}

inline ShapeP replace_in(const ShapeP& s, const Replacement& r) {
  if (r.sh && equal(s, r.sh->first)) return r.sh->second;
  auto q = std::make_shared<Shape>(*s);
  switch (s->k) {
    case Shape::K::Lit: {
      std::vector<SizeP> es;
      es.reserve(s->elems.size());
      for (const auto& e : s->elems) es.push_back(replace_in(e, r));
      q->elems = std::move(es);
      return q;
    }
    case Shape::K::Var:
    case Shape::K::ShapeOf: return s;
    case Shape::K::Cons:
      q->s1 = replace_in(s->s1, r);
      q->a = replace_in(s->a, r);
      return q;
    case Shape::K::Append:
    case Shape::K::Reshape:
    case Shape::K::Broadcast:
    case Shape::K::Matmul:
      q->a = replace_in(s->a, r);
      q->b = replace_in(s->b, r);
      return q;
    case Shape::K::Tail:
    case Shape::K::Init:
      q->a = replace_in(s->a, r);
      return q;
    case Shape::K::InsertAt:
      q->s1 = replace_in(s->s1, r);
      q->s2 = replace_in(s->s2, r);
      q->a = replace_in(s->a, r);
      return q;
    case Shape::K::DropAt:
      q->s1 = replace_in(s->s1, r);
      q->a = replace_in(s->a, r);
      return q;
    case Shape::K::Swap:
      q->s1 = replace_in(s->s1, r);
      q->s2 = replace_in(s->s2, r);
      q->a = replace_in(s->a, r);
      return q;
  }
  return s;
}

inline PredP replace_in(const PredP& p, const Replacement& r) {
  auto q = std::make_shared<Pred>(*p);
  switch (p->k) {
    case Pred::K::True:
    case Pred::K::False:
    case Pred::K::BVar:
    case Pred::K::PVar: return p;
    case Pred::K::EqSz:
    case Pred::K::Lt:
    case Pred::K::Le:
      q->s1 = replace_in(p->s1, r);
      q->s2 = replace_in(p->s2, r);
      return q;
    case Pred::K::EqSh:
    case Pred::K::Brc:
    case Pred::K::Rsh:
      q->sh1 = replace_in(p->sh1, r);
      q->sh2 = replace_in(p->sh2, r);
      return q;
    case Pred::K::Not:
      q->p1 = replace_in(p->p1, r);
      return q;
    case Pred::K::And:
    case Pred::K::Or:
      q->p1 = replace_in(p->p1, r);
      q->p2 = replace_in(p->p2, r);
      return q;
  }
  return p;
}

// ---- polynomial canonicalization for size arithmetic -------------------------

namespace detail {

struct Poly {
  // monomial key: sorted atom prints; value: coefficient and the atom terms
  std::map<std::vector<std::string>, std::pair<long long, std::vector<SizeP>>> terms;
  bool ok = true;

  void add_term(std::vector<std::string> key, long long c, std::vector<SizeP> atoms) {
    auto it = terms.find(key);
    if (it == terms.end()) {
      if (c != 0) terms.emplace(std::move(key), std::make_pair(c, std::move(atoms)));
    } else {
      it->second.first += c;
      if (it->second.first == 0) terms.erase(it);
    }
  }
};

inline Poly poly_const(long long c) {
  Poly p;
  if (c != 0) p.terms.emplace(std::vector<std::string>{}, std::make_pair(c, std::vector<SizeP>{}));
  return p;
}

inline Poly poly_atom(const SizeP& s) {
  Poly p;
  p.terms.emplace(std::vector<std::string>{show(s, 0)},
                  std::make_pair(1LL, std::vector<SizeP>{s}));
  return p;
}

inline Poly poly_add(Poly a, const Poly& b) {
  if (!a.ok || !b.ok) {
    a.ok = false;
    return a;
  }
  for (const auto& [k, v] : b.terms) a.add_term(k, v.first, v.second);
  return a;
}

inline Poly poly_scale(Poly a, long long c) {
  if (c == 0) return poly_const(0);
  for (auto& [k, v] : a.terms) v.first *= c;
  return a;
}

inline Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out;
  if (!a.ok || !b.ok) {
    out.ok = false;
    return out;
  }
  for (const auto& [ka, va] : a.terms)
    for (const auto& [kb, vb] : b.terms) {
      std::vector<std::string> key = ka;
      key.insert(key.end(), kb.begin(), kb.end());
      std::vector<SizeP> atoms = va.second;
      atoms.insert(atoms.end(), vb.second.begin(), vb.second.end());
      // keep factor lists sorted so the monomial is canonical
      std::vector<size_t> order(key.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](size_t x, size_t y) { return key[x] < key[y]; });
      std::vector<std::string> skey;
      std::vector<SizeP> satoms;
      for (size_t i : order) {
        skey.push_back(key[i]);
        satoms.push_back(atoms[i]);
      }
      out.add_term(std::move(skey), va.first * vb.first, std::move(satoms));
      if (out.terms.size() > 64) {
        out.ok = false;
        return out;
      }
    }
  return out;
}

// poly_of treats any node that is not Lit/Neg/Add/Mul as an opaque atom.
inline Poly poly_of(const SizeP& s) {
  switch (s->k) {
    case Size::K::Lit: return poly_const(s->lit);
    case Size::K::Neg: return poly_scale(poly_of(s->a), -1);
    case Size::K::Add: return poly_add(poly_of(s->a), poly_of(s->b));
    case Size::K::Mul: return poly_mul(poly_of(s->a), poly_of(s->b));
    default: return poly_atom(s);
  }
}

inline SizeP poly_rebuild(const Poly& p) {
  if (p.terms.empty()) return sz_lit(0);
  SizeP acc;
  for (const auto& [key, cv] : p.terms) {
    long long c = cv.first;
    const auto& atoms = cv.second;
    SizeP t;
    if (atoms.empty()) {
      t = sz_lit(c);
    } else {
      t = atoms[0];
      for (size_t i = 1; i < atoms.size(); ++i) t = sz_mul(t, atoms[i]);
      if (c == -1) t = sz_neg(t);
      else if (c != 1) t = sz_mul(sz_lit(c), t);
    }
    acc = acc ? sz_add(acc, t) : t;
  }
  return acc;
}

// Canonical linear/polynomial form; returns the input when it does not profit.
inline SizeP poly_canon(const SizeP& s) {
  if (s->k != Size::K::Add && s->k != Size::K::Neg && s->k != Size::K::Mul &&
      s->k != Size::K::Lit)
    return s;
  Poly p = poly_of(s);
  if (!p.ok) return s;
  return poly_rebuild(p);
}

inline std::optional<long long> poly_const_diff(const SizeP& a, const SizeP& b) {
  Poly p = poly_add(poly_of(a), poly_scale(poly_of(b), -1));
  if (!p.ok) return std::nullopt;
  if (p.terms.empty()) return 0;
  if (p.terms.size() == 1 && p.terms.begin()->first.empty())
    return p.terms.begin()->second.first;
  return std::nullopt;
}

}  // namespace detail

// ---- the congruence / ground-completion engine -------------------------------

class Congruence {
 public:
  void assume(const PredP& p) {
    for (const auto& c : ::graten::conjuncts(p)) facts_.push_back(c);
    closed_ = false;
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    for (int round = 0; round < 30 && !contra_; ++round) {
      bool changed = false;
      atoms_.clear();
      atom_prints_.clear();
      std::vector<PredP> work = facts_;
      for (size_t i = 0; i < work.size() && !contra_; ++i) {
        PredP q = norm_pred(work[i]);
        switch (q->k) {
          case Pred::K::True: break;
          case Pred::K::False: contra_ = true; break;
          case Pred::K::And:
            work.push_back(q->p1);
            work.push_back(q->p2);
            break;
          case Pred::K::EqSz: changed |= orient_size(q->s1, q->s2); break;
          case Pred::K::EqSh: changed |= orient_shape(q->sh1, q->sh2); break;
          case Pred::K::BVar: changed |= set_bool(q->var, true); break;
          case Pred::K::Not:
            if (q->p1->k == Pred::K::BVar) {
              changed |= set_bool(q->p1->var, false);
            } else {
              add_atom(q);
            }
            break;
          default: add_atom(q); break;
        }
      }
      if (!changed) break;
    }
  }

  bool contradictory() {
    close();
    return contra_;
  }

  // Does the closure syntactically derive every conjunct of the goal?
  bool derives(const PredP& goal) {
    close();
    if (contra_) return true;
    for (const auto& g : ::graten::conjuncts(goal))
      if (!derive1(norm_pred(g), 0)) return false;
    return true;
  }

  SizeP norm_size(const SizeP& s) {
    SizeP cur = s;
    for (int i = 0; i < 40; ++i) {
      SizeP next = nsz(cur);
      if (equal(next, cur)) return cur;
      cur = next;
    }
    return cur;
  }

  ShapeP norm_shape(const ShapeP& s) {
    ShapeP cur = s;
    for (int i = 0; i < 40; ++i) {
      ShapeP next = nsh(cur);
      if (equal(next, cur)) return cur;
      cur = next;
    }
    return cur;
  }

  PredP norm_pred(const PredP& p) {
    using K = Pred::K;
    switch (p->k) {
      case K::True:
      case K::False:
      case K::PVar: return p;
      case K::BVar: {
        auto it = boolmap_.find(p->var);
        if (it != boolmap_.end()) return it->second ? pr_true() : pr_false();
        return p;
      }
      case K::EqSz:
      case K::Lt:
      case K::Le: {
        SizeP a = norm_size(p->s1), b = norm_size(p->s2);
        auto va = size_lit(a), vb = size_lit(b);
        if (va && vb) {
          bool r = p->k == K::EqSz ? *va == *vb : p->k == K::Lt ? *va < *vb : *va <= *vb;
          return r ? pr_true() : pr_false();
        }
        if (auto d = detail::poly_const_diff(b, a)) {
          // b - a is the constant *d in every total model
          if (p->k == K::EqSz) return *d == 0 ? pr_true() : pr_false();
          if (p->k == K::Lt) return *d > 0 ? pr_true() : pr_false();
          return *d >= 0 ? pr_true() : pr_false();
        }
        auto q = std::make_shared<Pred>(*p);
        q->s1 = a;
        q->s2 = b;
        return q;
      }
      case K::EqSh: {
        ShapeP a = norm_shape(p->sh1), b = norm_shape(p->sh2);
        if (equal(a, b)) return pr_true();
        if (a->k == Shape::K::Lit && b->k == Shape::K::Lit) {
          if (a->elems.size() != b->elems.size()) return pr_false();
          PredP acc = pr_true();
          for (size_t i = 0; i < a->elems.size(); ++i)
            acc = pr_and(acc, norm_pred(pr_eq_sz(a->elems[i], b->elems[i])));
          return acc;
        }
        return pr_eq_sh(a, b);
      }
      case K::Brc:
      case K::Rsh: {
        ShapeP a = norm_shape(p->sh1), b = norm_shape(p->sh2);
        auto av = shape_lit(a), bv = shape_lit(b);
        if (av && bv) {
          bool r = p->k == K::Brc ? broadcastable_v(*av, *bv) : reshapeable_v(*av, *bv);
          return r ? pr_true() : pr_false();
        }
        if (p->k == K::Brc && equal(a, b)) return pr_true();
        return p->k == K::Brc ? pr_brc(a, b) : pr_rsh(a, b);
      }
      case K::Not: {
        PredP a = norm_pred(p->p1);
        if (a->k == K::True) return pr_false();
        if (a->k == K::False) return pr_true();
        if (a->k == K::Not) return a->p1;
        return pr_not(a);
      }
      case K::And: {
        PredP a = norm_pred(p->p1), b = norm_pred(p->p2);
        if (a->k == K::False || b->k == K::False) return pr_false();
        return pr_and(a, b);
      }
      case K::Or: {
        PredP a = norm_pred(p->p1), b = norm_pred(p->p2);
        if (a->k == K::True || b->k == K::True) return pr_true();
        if (a->k == K::False) return b;
        if (b->k == K::False) return a;
        if (equal(a, b)) return a;
        return pr_or(a, b);
      }
    }
    return p;
  }

  const std::set<std::string>& atom_prints() {
    close();
    return atom_prints_;
  }

 private:
  std::vector<PredP> facts_;
  std::map<std::string, SizeP> szmap_;   // print of lhs -> rhs term
  std::map<std::string, ShapeP> shmap_;  // print of lhs -> rhs term
  std::map<std::string, bool> boolmap_;
  std::vector<PredP> atoms_;
  std::set<std::string> atom_prints_;
  bool contra_ = false;
  bool closed_ = false;
  int depth_ = 0;

  struct Guard {
    int& d;
    explicit Guard(int& dd) : d(dd) { ++d; }
    ~Guard() { --d; }
  };

  void add_atom(const PredP& q) {
    std::string s = show(q, 0);
    if (atom_prints_.insert(s).second) atoms_.push_back(q);
  }

  bool set_bool(const std::string& name, bool v) {
    auto it = boolmap_.find(name);
    if (it != boolmap_.end()) {
      if (it->second != v) contra_ = true;
      return false;
    }
    boolmap_.emplace(name, v);
    return true;
  }

  // weights: partial operations cost extra so oriented values stay no more
  // partial than their keys unless both sides came from the hypothesis
  static long long wsize(const SizeP& s) {
    switch (s->k) {
      case Size::K::Lit: return 0;
      case Size::K::Var: return 1;
      case Size::K::Neg: return 1 + wsize(s->a);
      case Size::K::Add:
      case Size::K::Mul: return 1 + wsize(s->a) + wsize(s->b);
      case Size::K::Div: return 2 + wsize(s->a) + wsize(s->b);
      case Size::K::Head:
      case Size::K::Last: return 2 + wshape(s->sh);
      case Size::K::Len:
      case Size::K::Prod: return 1 + wshape(s->sh);
      case Size::K::Nth: return 2 + wsize(s->a) + wshape(s->sh);
    }
    return 1;
  }

  static long long wshape(const ShapeP& s) {
    switch (s->k) {
      case Shape::K::Lit: {
        long long w = 1;
        for (const auto& e : s->elems) w += wsize(e);
        return w;
      }
      case Shape::K::Var:
      case Shape::K::ShapeOf: return 2;
      case Shape::K::Cons: return 1 + wsize(s->s1) + wshape(s->a);
      case Shape::K::Append: return 1 + wshape(s->a) + wshape(s->b);
      case Shape::K::Tail:
      case Shape::K::Init: return 2 + wshape(s->a);
      case Shape::K::InsertAt: return 2 + wsize(s->s1) + wsize(s->s2) + wshape(s->a);
      case Shape::K::DropAt: return 2 + wsize(s->s1) + wshape(s->a);
      case Shape::K::Swap: return 2 + wsize(s->s1) + wsize(s->s2) + wshape(s->a);
      case Shape::K::Reshape:
      case Shape::K::Broadcast:
      case Shape::K::Matmul: return 2 + wshape(s->a) + wshape(s->b);
    }
    return 2;
  }

  bool orient_size(const SizeP& a, const SizeP& b) {
    std::string pa = show(a, 0), pb = show(b, 0);
    if (pa == pb) return false;
    SizeP key = a, val = b;
    if (std::make_pair(wsize(a), pa) < std::make_pair(wsize(b), pb)) std::swap(key, val);
    if (contains_sz(val, key)) {
      std::swap(key, val);
      if (contains_sz(val, key)) {
        add_atom(pr_eq_sz(a, b));
        return false;
      }
    }
    std::string kp = show(key, 0);
    auto it = szmap_.find(kp);
    if (it != szmap_.end()) {
      if (equal(it->second, val)) return false;
      // key already rewrites elsewhere; record the equality of the two images
      facts_.push_back(pr_eq_sz(it->second, val));
      return true;
    }
    szmap_.emplace(kp, val);
    return true;
  }

  bool orient_shape(const ShapeP& a, const ShapeP& b) {
    std::string pa = show(a, false), pb = show(b, false);
    if (pa == pb) return false;
    ShapeP key = a, val = b;
    // prefer rewriting toward a literal so projections can fire
    bool alit = a->k == Shape::K::Lit, blit = b->k == Shape::K::Lit;
    if (alit != blit) {
      if (alit) std::swap(key, val);
    } else if (std::make_pair(wshape(a), pa) < std::make_pair(wshape(b), pb)) {
      std::swap(key, val);
    }
    if (contains_sh(val, key)) {
      std::swap(key, val);
      if (contains_sh(val, key)) {
        add_atom(pr_eq_sh(a, b));
        return false;
      }
    }
    std::string kp = show(key, false);
    auto it = shmap_.find(kp);
    if (it != shmap_.end()) {
      if (equal(it->second, val)) return false;
      facts_.push_back(pr_eq_sh(it->second, val));
      return true;
    }
    shmap_.emplace(kp, val);
    return true;
  }

  // single bottom-up pass: normalize children, local rules, map lookup
  SizeP nsz(const SizeP& s) {
    Guard g(depth_);
    if (depth_ > 400) return s;
    using K = Size::K;
    SizeP r = s;
    switch (s->k) {
      case K::Lit:
      case K::Var: break;
      case K::Neg: {
        auto q = std::make_shared<Size>(*s);
        q->a = nsz(s->a);
        r = q;
        break;
      }
      case K::Add:
      case K::Mul:
      case K::Div: {
        auto q = std::make_shared<Size>(*s);
        q->a = nsz(s->a);
        q->b = nsz(s->b);
        r = q;
        break;
      }
      case K::Head:
      case K::Last:
      case K::Len:
      case K::Prod: {
        auto q = std::make_shared<Size>(*s);
        q->sh = nsh(s->sh);
        r = q;
        break;
      }
      case K::Nth: {
        auto q = std::make_shared<Size>(*s);
        q->a = nsz(s->a);
        q->sh = nsh(s->sh);
        r = q;
        break;
      }
    }
    r = size_local(r);
    auto it = szmap_.find(show(r, 0));
    if (it != szmap_.end()) r = it->second;
    return r;
  }

  // local rules, valid in every total model extending the defined semantics
  SizeP size_local(const SizeP& s) {
    using K = Size::K;
    using SK = Shape::K;
    switch (s->k) {
      case K::Lit:
      case K::Var: return s;
      case K::Neg:
      case K::Add:
      case K::Mul: return detail::poly_canon(s);
      case K::Div: {
        auto va = size_lit(s->a), vb = size_lit(s->b);
        if (vb && *vb == 1) return s->a;
        if (va && vb && *vb != 0) return sz_lit(*va / *vb);
        return s;
      }
      case K::Head:
        if (s->sh->k == SK::Lit && !s->sh->elems.empty()) return s->sh->elems.front();
        if (s->sh->k == SK::Cons) return s->sh->s1;
        return s;
      case K::Last:
        if (s->sh->k == SK::Lit && !s->sh->elems.empty()) return s->sh->elems.back();
        return s;
      case K::Len:
        if (s->sh->k == SK::Lit) return sz_lit(static_cast<long long>(s->sh->elems.size()));
        if (s->sh->k == SK::Cons)
          return detail::poly_canon(sz_add(sz_lit(1), sz_len(s->sh->a)));
        if (s->sh->k == SK::Append)
          return detail::poly_canon(sz_add(sz_len(s->sh->a), sz_len(s->sh->b)));
        return s;
      case K::Prod:
        if (s->sh->k == SK::Lit) {
          SizeP acc = sz_lit(1);
          for (const auto& e : s->sh->elems) acc = sz_mul(acc, e);
          return detail::poly_canon(acc);
        }
        if (s->sh->k == SK::Cons)
          return detail::poly_canon(sz_mul(s->sh->s1, sz_prod(s->sh->a)));
        if (s->sh->k == SK::Append)
          return detail::poly_canon(sz_mul(sz_prod(s->sh->a), sz_prod(s->sh->b)));
        return s;
      case K::Nth: {
        auto iv = size_lit(s->a);
        if (iv && s->sh->k == SK::Lit && *iv >= 0 &&
            *iv < static_cast<long long>(s->sh->elems.size()))
          return s->sh->elems[static_cast<size_t>(*iv)];
        if (iv && s->sh->k == SK::Cons) {
          if (*iv == 0) return s->sh->s1;
          if (*iv > 0) return sz_nth(sz_lit(*iv - 1), s->sh->a);
        }
        return s;
      }
    }
    return s;
  }

  ShapeP nsh(const ShapeP& s) {
    Guard g(depth_);
    if (depth_ > 400) return s;
    using K = Shape::K;
    auto q = std::make_shared<Shape>(*s);
    switch (s->k) {
      case K::Lit: {
        std::vector<SizeP> es;
        es.reserve(s->elems.size());
        for (const auto& e : s->elems) es.push_back(nsz(e));
        q->elems = std::move(es);
        break;
      }
      case K::Var:
      case K::ShapeOf: break;
      case K::Cons:
        q->s1 = nsz(s->s1);
        q->a = nsh(s->a);
        break;
      case K::Append:
      case K::Reshape:
      case K::Broadcast:
      case K::Matmul:
        q->a = nsh(s->a);
        q->b = nsh(s->b);
        break;
      case K::Tail:
      case K::Init:
        q->a = nsh(s->a);
        break;
      case K::InsertAt:
        q->s1 = nsz(s->s1);
        q->s2 = nsz(s->s2);
        q->a = nsh(s->a);
        break;
      case K::DropAt:
        q->s1 = nsz(s->s1);
        q->a = nsh(s->a);
        break;
      case K::Swap:
        q->s1 = nsz(s->s1);
        q->s2 = nsz(s->s2);
        q->a = nsh(s->a);
        break;
    }
    ShapeP r = shape_local(q);
    auto it = shmap_.find(show(r, false));
    if (it != shmap_.end()) r = it->second;
    return r;
  }

  ShapeP shape_local(const ShapeP& s) {
    using K = Shape::K;
    switch (s->k) {
      case K::Lit:
      case K::Var:
      case K::ShapeOf: return s;
      case K::Cons:
        if (s->a->k == K::Lit) {
          std::vector<SizeP> es{s->s1};
          es.insert(es.end(), s->a->elems.begin(), s->a->elems.end());
          return sh_lit(std::move(es));
        }
        return s;
      case K::Append:
        if (s->a->k == K::Lit && s->b->k == K::Lit) {
          std::vector<SizeP> es = s->a->elems;
          es.insert(es.end(), s->b->elems.begin(), s->b->elems.end());
          return sh_lit(std::move(es));
        }
        if (s->a->k == K::Lit && s->a->elems.empty()) return s->b;
        if (s->b->k == K::Lit && s->b->elems.empty()) return s->a;
        return s;
      case K::Tail:
        if (s->a->k == K::Lit && !s->a->elems.empty())
          return sh_lit(std::vector<SizeP>(s->a->elems.begin() + 1, s->a->elems.end()));
        if (s->a->k == K::Cons) return s->a->a;
        return s;
      case K::Init:
        if (s->a->k == K::Lit && !s->a->elems.empty())
          return sh_lit(std::vector<SizeP>(s->a->elems.begin(), s->a->elems.end() - 1));
        return s;
      case K::InsertAt: {
        auto iv = size_lit(s->s1);
        if (iv && s->a->k == K::Lit && *iv >= 0 &&
            *iv <= static_cast<long long>(s->a->elems.size())) {
          std::vector<SizeP> es = s->a->elems;
          es.insert(es.begin() + static_cast<size_t>(*iv), s->s2);
          return sh_lit(std::move(es));
        }
        return s;
      }
      case K::DropAt: {
        auto iv = size_lit(s->s1);
        if (iv && s->a->k == K::Lit && *iv >= 0 &&
            *iv < static_cast<long long>(s->a->elems.size())) {
          std::vector<SizeP> es = s->a->elems;
          es.erase(es.begin() + static_cast<size_t>(*iv));
          return sh_lit(std::move(es));
        }
        return s;
      }
      case K::Swap: {
        auto iv = size_lit(s->s1), jv = size_lit(s->s2);
        long long n = s->a->k == K::Lit ? static_cast<long long>(s->a->elems.size()) : -1;
        if (iv && jv && s->a->k == K::Lit && *iv >= 0 && *iv < n && *jv >= 0 && *jv < n) {
          std::vector<SizeP> es = s->a->elems;
          std::swap(es[static_cast<size_t>(*iv)], es[static_cast<size_t>(*jv)]);
          return sh_lit(std::move(es));
        }
        return s;
      }
      case K::Reshape:
      case K::Broadcast:
      case K::Matmul: {
        auto av = shape_lit(s->a), bv = shape_lit(s->b);
        if (av && bv) {
          std::optional<std::vector<long long>> r;
          if (s->k == K::Reshape) r = reshape_v(*av, *bv);
          else if (s->k == K::Broadcast) r = broadcast_v(*av, *bv);
          else r = matmul_v(*av, *bv);
          if (r) return sh_lit_ints(*r);
        }
        if (s->k == K::Broadcast && equal(s->a, s->b)) return s->a;
        return s;
      }
    }
    return s;
  }

  bool derive1(const PredP& g, int depth) {
    if (depth > 12) return false;
    using K = Pred::K;
    if (g->k == K::True) return true;
    if (g->k == K::False) return false;
    if (atom_prints_.count(show(g, 0))) return true;
    switch (g->k) {
      case K::And: return derive1(g->p1, depth + 1) && derive1(g->p2, depth + 1);
      case K::Or: return derive1(g->p1, depth + 1) || derive1(g->p2, depth + 1);
      case K::EqSh: {
        auto la = known_len(g->sh1), lb = known_len(g->sh2);
        if (la && lb && *la == *lb && *la <= 16) {
          for (long long i = 0; i < *la; ++i) {
            PredP comp = norm_pred(
                pr_eq_sz(sz_nth(sz_lit(i), g->sh1), sz_nth(sz_lit(i), g->sh2)));
            if (!derive1(comp, depth + 1)) return false;
          }
          return true;
        }
        return false;
      }
      default: return false;
    }
  }

  std::optional<long long> known_len(const ShapeP& s) {
    if (s->k == Shape::K::Lit) return static_cast<long long>(s->elems.size());
    return size_lit(norm_size(sz_len(s)));
  }
};

// ---- definedness screening for goals ------------------------------------------

namespace detail {

inline void subterm_prints(const SizeP& s, std::set<std::string>& out);
inline void subterm_prints(const ShapeP& s, std::set<std::string>& out);

inline void subterm_prints(const SizeP& s, std::set<std::string>& out) {
  out.insert(show(s, 0));
  switch (s->k) {
    case Size::K::Lit:
    case Size::K::Var: return;
    case Size::K::Neg: subterm_prints(s->a, out); return;
    case Size::K::Add:
    case Size::K::Mul:
    case Size::K::Div:
      subterm_prints(s->a, out);
      subterm_prints(s->b, out);
      return;
    case Size::K::Head:
    case Size::K::Last:
    case Size::K::Len:
    case Size::K::Prod: subterm_prints(s->sh, out); return;
    case Size::K::Nth:
      subterm_prints(s->a, out);
      subterm_prints(s->sh, out);
      return;
  }
}

inline void subterm_prints(const ShapeP& s, std::set<std::string>& out) {
  out.insert("#" + show(s, false));
  switch (s->k) {
    case Shape::K::Lit:
      for (const auto& e : s->elems) subterm_prints(e, out);
      return;
    case Shape::K::Var:
    case Shape::K::ShapeOf: return;
    case Shape::K::Cons:
      subterm_prints(s->s1, out);
      subterm_prints(s->a, out);
      return;
    case Shape::K::Append:
    case Shape::K::Reshape:
    case Shape::K::Broadcast:
    case Shape::K::Matmul:
      subterm_prints(s->a, out);
      subterm_prints(s->b, out);
      return;
    case Shape::K::Tail:
    case Shape::K::Init: subterm_prints(s->a, out); return;
    case Shape::K::InsertAt:
      subterm_prints(s->s1, out);
      subterm_prints(s->s2, out);
      subterm_prints(s->a, out);
      return;
    case Shape::K::DropAt:
      subterm_prints(s->s1, out);
      subterm_prints(s->a, out);
      return;
    case Shape::K::Swap:
      subterm_prints(s->s1, out);
      subterm_prints(s->s2, out);
      subterm_prints(s->a, out);
      return;
  }
}

inline void subterm_prints(const PredP& p, std::set<std::string>& out) {
  switch (p->k) {
    case Pred::K::True:
    case Pred::K::False:
    case Pred::K::BVar:
    case Pred::K::PVar: return;
    case Pred::K::EqSz:
    case Pred::K::Lt:
    case Pred::K::Le:
      subterm_prints(p->s1, out);
      subterm_prints(p->s2, out);
      return;
    case Pred::K::EqSh:
    case Pred::K::Brc:
    case Pred::K::Rsh:
      subterm_prints(p->sh1, out);
      subterm_prints(p->sh2, out);
      return;
    case Pred::K::Not: subterm_prints(p->p1, out); return;
    case Pred::K::And:
    case Pred::K::Or:
      subterm_prints(p->p1, out);
      subterm_prints(p->p2, out);
      return;
  }
}

// Is evaluation of this term guaranteed to succeed whenever every term in
// `hyp` (the hypothesis subterm prints) evaluates successfully? Connectives
// are strict, so a true hypothesis defines all of its subterms; the engine is
// consulted for value-level conditions (index in range, divisor nonzero) that
// follow from the hypothesis equalities. Every partial operation's
// definedness depends only on its operand values, so engine-derived operand
// facts transfer to definedness.
inline bool defined_under(const SizeP& s, const std::set<std::string>& hyp, Congruence& eng);
inline bool defined_under(const ShapeP& s, const std::set<std::string>& hyp, Congruence& eng);

inline std::optional<long long> engine_len(const ShapeP& s, Congruence& eng) {
  if (s->k == Shape::K::Lit) return static_cast<long long>(s->elems.size());
  return size_lit(eng.norm_size(sz_len(s)));
}

inline bool defined_under(const SizeP& s, const std::set<std::string>& hyp, Congruence& eng) {
  if (pure_size(s)) return true;
  if (hyp.count(show(s, 0))) return true;
  switch (s->k) {
    case Size::K::Neg: return defined_under(s->a, hyp, eng);
    case Size::K::Add:
    case Size::K::Mul: return defined_under(s->a, hyp, eng) && defined_under(s->b, hyp, eng);
    case Size::K::Div: {
      auto vb = size_lit(eng.norm_size(s->b));
      return vb && *vb != 0 && defined_under(s->a, hyp, eng) && defined_under(s->b, hyp, eng);
    }
    case Size::K::Head:
    case Size::K::Last: {
      auto len = engine_len(s->sh, eng);
      return len && *len >= 1 && defined_under(s->sh, hyp, eng);
    }
    case Size::K::Len:
    case Size::K::Prod: return defined_under(s->sh, hyp, eng);
    case Size::K::Nth: {
      auto iv = size_lit(eng.norm_size(s->a));
      auto len = engine_len(s->sh, eng);
      return iv && len && *iv >= 0 && *iv < *len && defined_under(s->a, hyp, eng) &&
             defined_under(s->sh, hyp, eng);
    }
    default: return false;
  }
}

inline bool defined_under(const ShapeP& s, const std::set<std::string>& hyp, Congruence& eng) {
  if (pure_shape(s)) return true;
  if (hyp.count("#" + show(s, false))) return true;
  switch (s->k) {
    case Shape::K::Lit:
      for (const auto& e : s->elems)
        if (!defined_under(e, hyp, eng)) return false;
      return true;
    case Shape::K::Cons: return defined_under(s->s1, hyp, eng) && defined_under(s->a, hyp, eng);
    case Shape::K::Append:
      return defined_under(s->a, hyp, eng) && defined_under(s->b, hyp, eng);
    case Shape::K::Tail:
    case Shape::K::Init: {
      auto len = engine_len(s->a, eng);
      return len && *len >= 1 && defined_under(s->a, hyp, eng);
    }
    case Shape::K::InsertAt: {
      auto iv = size_lit(eng.norm_size(s->s1));
      auto len = engine_len(s->a, eng);
      return iv && len && *iv >= 0 && *iv <= *len && defined_under(s->s1, hyp, eng) &&
             defined_under(s->s2, hyp, eng) && defined_under(s->a, hyp, eng);
    }
    case Shape::K::DropAt: {
      auto iv = size_lit(eng.norm_size(s->s1));
      auto len = engine_len(s->a, eng);
      return iv && len && *iv >= 0 && *iv < *len && defined_under(s->s1, hyp, eng) &&
             defined_under(s->a, hyp, eng);
    }
    case Shape::K::Swap: {
      auto iv = size_lit(eng.norm_size(s->s1));
      auto jv = size_lit(eng.norm_size(s->s2));
      auto len = engine_len(s->a, eng);
      return iv && jv && len && *iv >= 0 && *iv < *len && *jv >= 0 && *jv < *len &&
             defined_under(s->s1, hyp, eng) && defined_under(s->s2, hyp, eng) &&
             defined_under(s->a, hyp, eng);
    }
    case Shape::K::Reshape:
    case Shape::K::Broadcast:
    case Shape::K::Matmul: {
      if (!defined_under(s->a, hyp, eng) || !defined_under(s->b, hyp, eng)) return false;
      auto av = shape_lit(eng.norm_shape(s->a)), bv = shape_lit(eng.norm_shape(s->b));
      if (!av || !bv) return false;
      if (s->k == Shape::K::Reshape) return reshape_v(*av, *bv).has_value();
      if (s->k == Shape::K::Broadcast) return broadcast_v(*av, *bv).has_value();
      return matmul_v(*av, *bv).has_value();
    }
    default: return false;
  }
}

inline bool defined_under(const PredP& p, const std::set<std::string>& hyp, Congruence& eng) {
  switch (p->k) {
    case Pred::K::True:
    case Pred::K::False:
    case Pred::K::BVar: return true;
    case Pred::K::PVar: return false;
    case Pred::K::EqSz:
    case Pred::K::Lt:
    case Pred::K::Le: return defined_under(p->s1, hyp, eng) && defined_under(p->s2, hyp, eng);
    case Pred::K::EqSh:
    case Pred::K::Brc:
    case Pred::K::Rsh: return defined_under(p->sh1, hyp, eng) && defined_under(p->sh2, hyp, eng);
    case Pred::K::Not: return defined_under(p->p1, hyp, eng);
    case Pred::K::And:
    case Pred::K::Or: return defined_under(p->p1, hyp, eng) && defined_under(p->p2, hyp, eng);
  }
  return false;
}

}  // namespace detail

// ---- bounded search for witnesses ---------------------------------------------

struct SearchBounds {
  long long int_min = -4, int_max = 4;
  int max_len = 3;
  long long elem_min = 0, elem_max = 4;
  std::vector<long long> extra_ints, extra_elems;
  size_t full_budget = 60000;
  size_t sample_budget = 30000;
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;
};

namespace detail {

inline void collect_literals(const SizeP& s, std::set<long long>& out);
inline void collect_literals(const ShapeP& s, std::set<long long>& out);

inline void collect_literals(const SizeP& s, std::set<long long>& out) {
  switch (s->k) {
    case Size::K::Lit:
      out.insert(s->lit);
      out.insert(-s->lit);
      return;
    case Size::K::Var: return;
    case Size::K::Neg: collect_literals(s->a, out); return;
    case Size::K::Add:
    case Size::K::Mul:
    case Size::K::Div:
      collect_literals(s->a, out);
      collect_literals(s->b, out);
      return;
    case Size::K::Head:
    case Size::K::Last:
    case Size::K::Len:
    case Size::K::Prod: collect_literals(s->sh, out); return;
    case Size::K::Nth:
      collect_literals(s->a, out);
      collect_literals(s->sh, out);
      return;
  }
}

inline void collect_literals(const ShapeP& s, std::set<long long>& out) {
  switch (s->k) {
    case Shape::K::Lit:
      for (const auto& e : s->elems) collect_literals(e, out);
      return;
    case Shape::K::Var:
    case Shape::K::ShapeOf: return;
    case Shape::K::Cons:
      collect_literals(s->s1, out);
      collect_literals(s->a, out);
      return;
    case Shape::K::Append:
    case Shape::K::Reshape:
    case Shape::K::Broadcast:
    case Shape::K::Matmul:
      collect_literals(s->a, out);
      collect_literals(s->b, out);
      return;
    case Shape::K::Tail:
    case Shape::K::Init: collect_literals(s->a, out); return;
    case Shape::K::InsertAt:
      collect_literals(s->s1, out);
      collect_literals(s->s2, out);
      collect_literals(s->a, out);
      return;
    case Shape::K::DropAt:
      collect_literals(s->s1, out);
      collect_literals(s->a, out);
      return;
    case Shape::K::Swap:
      collect_literals(s->s1, out);
      collect_literals(s->s2, out);
      collect_literals(s->a, out);
      return;
  }
}

inline void collect_literals(const PredP& p, std::set<long long>& out) {
  switch (p->k) {
    case Pred::K::True:
    case Pred::K::False:
    case Pred::K::BVar:
    case Pred::K::PVar: return;
    case Pred::K::EqSz:
    case Pred::K::Lt:
    case Pred::K::Le:
      collect_literals(p->s1, out);
      collect_literals(p->s2, out);
      return;
    case Pred::K::EqSh:
    case Pred::K::Brc:
    case Pred::K::Rsh:
      collect_literals(p->sh1, out);
      collect_literals(p->sh2, out);
      return;
    case Pred::K::Not: collect_literals(p->p1, out); return;
    case Pred::K::And:
    case Pred::K::Or:
      collect_literals(p->p1, out);
      collect_literals(p->p2, out);
      return;
  }
}

// candidate scalar pool: bounds range + query literals + their small products
inline std::vector<long long> candidate_pool(long long lo, long long hi,
                                             const std::set<long long>& lits,
                                             const std::vector<long long>& extra) {
  std::set<long long> vals;
  for (long long v = lo; v <= hi; ++v) vals.insert(v);
  std::vector<long long> ls(lits.begin(), lits.end());
  for (long long v : ls) vals.insert(v);
  for (size_t i = 0; i < ls.size(); ++i)
    for (size_t j = i; j < ls.size(); ++j) {
      long long p = ls[i] * ls[j];
      if (p >= -64 && p <= 64) vals.insert(p);
    }
  for (long long v : extra) vals.insert(v);
  std::vector<long long> out(vals.begin(), vals.end());
  if (out.size() > 48) {
    // keep the values closest to zero, deterministically
    std::stable_sort(out.begin(), out.end(), [](long long a, long long b) {
      auto ka = std::make_pair(std::llabs(a), a);
      auto kb = std::make_pair(std::llabs(b), b);
      return ka < kb;
    });
    out.resize(48);
    std::sort(out.begin(), out.end());
  }
  return out;
}

struct VarDomain {
  std::string name;
  Sort sort;
  std::vector<LogicVal> values;  // used in full enumeration
};

inline std::vector<LogicVal> domain_values(Sort sort, const std::vector<long long>& ints,
                                           const std::vector<long long>& elems, int max_len) {
  std::vector<LogicVal> out;
  switch (sort) {
    case Sort::Int:
      for (long long v : ints) out.push_back(LogicVal::of_int(v));
      return out;
    case Sort::Bool:
      out.push_back(LogicVal::of_bool(false));
      out.push_back(LogicVal::of_bool(true));
      return out;
    case Sort::IntList:
    case Sort::Tensor: {
      std::vector<std::vector<long long>> lists{{}};
      for (int l = 0; l < max_len; ++l) {
        std::vector<std::vector<long long>> next;
        for (const auto& base : lists)
          if (static_cast<int>(base.size()) == l)
            for (long long e : elems) {
              auto x = base;
              x.push_back(e);
              next.push_back(std::move(x));
            }
        for (auto& x : next) lists.push_back(std::move(x));
      }
      for (auto& l : lists)
        out.push_back(sort == Sort::Tensor ? LogicVal::of_tensor(std::move(l))
                                           : LogicVal::of_list(std::move(l)));
      return out;
    }
  }
  return out;
}

// Enumerate (or sample) assignments; returns the first one accepted by `test`.
inline std::optional<Assignment> search_assignments(
    const SortEnv& prefix, const SearchBounds& bounds, const std::set<long long>& lits,
    const std::function<bool(const Assignment&)>& test) {
  std::vector<long long> ints =
      candidate_pool(bounds.int_min, bounds.int_max, lits, bounds.extra_ints);
  std::vector<long long> elems =
      candidate_pool(bounds.elem_min, bounds.elem_max, lits, bounds.extra_elems);

  std::vector<VarDomain> doms;
  for (const auto& [name, sort] : prefix)
    doms.push_back(VarDomain{name, sort, domain_values(sort, ints, elems, bounds.max_len)});

  if (doms.empty()) {
    Assignment a;
    if (test(a)) return a;
    return std::nullopt;
  }

  double total = 1;
  for (const auto& d : doms) {
    if (d.values.empty()) return std::nullopt;
    total *= static_cast<double>(d.values.size());
  }

  if (total <= static_cast<double>(bounds.full_budget)) {
    std::vector<size_t> idx(doms.size(), 0);
    while (true) {
      Assignment a;
      for (size_t i = 0; i < doms.size(); ++i) a[doms[i].name] = doms[i].values[idx[i]];
      if (test(a)) return a;
      size_t i = doms.size();
      while (i > 0) {
        --i;
        if (++idx[i] < doms[i].values.size()) break;
        idx[i] = 0;
        if (i == 0) return std::nullopt;
      }
    }
  }

  std::mt19937_64 rng(bounds.seed);
  for (size_t n = 0; n < bounds.sample_budget; ++n) {
    Assignment a;
    for (const auto& d : doms) {
      if (d.sort == Sort::IntList || d.sort == Sort::Tensor) {
        std::uniform_int_distribution<int> dl(0, bounds.max_len);
        std::uniform_int_distribution<size_t> de(0, elems.size() - 1);
        std::vector<long long> l(static_cast<size_t>(dl(rng)));
        for (auto& e : l) e = elems[de(rng)];
        a[d.name] = d.sort == Sort::Tensor ? LogicVal::of_tensor(std::move(l))
                                           : LogicVal::of_list(std::move(l));
      } else {
        std::uniform_int_distribution<size_t> dv(0, d.values.size() - 1);
        a[d.name] = d.values[dv(rng)];
      }
    }
    if (test(a)) return a;
  }
  return std::nullopt;
}

}  // namespace detail

// ---- verdicts ------------------------------------------------------------------

enum class Validity { Valid, Invalid, Unknown };
enum class Sat3 { Sat, Unsat, Unknown };

inline const char* validity_name(Validity v) {
  switch (v) {
    case Validity::Valid: return "valid";
    case Validity::Invalid: return "invalid";
    case Validity::Unknown: return "unknown";
  }
  return "?";
}

inline const char* sat_name(Sat3 s) {
  switch (s) {
    case Sat3::Sat: return "sat";
    case Sat3::Unsat: return "unsat";
    case Sat3::Unknown: return "unknown";
  }
  return "?";
}

struct ValidityResult {
  Validity verdict = Validity::Unknown;
  std::optional<Assignment> witness;  // set iff Invalid
};

struct SatResult {
  Sat3 verdict = Sat3::Unknown;
  std::optional<Assignment> witness;  // set iff Sat
};

// Every variable of the query must be declared in the prefix; out-of-prefix
// variables make evaluation partial and the query Unknown-biased.
struct LoggedQuery {
  SortEnv prefix;
  PredP hyp;
  PredP goal;  // for sat queries, the conjunction under test (goal == hyp)
  bool validity_mode = true;
};

inline ValidityResult check_validity(const SortEnv& prefix, const PredP& hyp, const PredP& goal,
                                     const SearchBounds& bounds = SearchBounds{}) {
  Congruence eng;
  eng.assume(hyp);
  if (eng.contradictory()) return {Validity::Valid, std::nullopt};
  if (eng.derives(goal)) {
    std::set<std::string> hypset;
    for (const auto& c : conjuncts(hyp)) detail::subterm_prints(c, hypset);
    bool screened = true;
    for (const auto& g : conjuncts(goal))
      if (!detail::defined_under(g, hypset, eng)) screened = false;
    if (screened) return {Validity::Valid, std::nullopt};
  }
  if (!has_pvar(hyp) && !has_pvar(goal)) {
    std::set<long long> lits;
    detail::collect_literals(hyp, lits);
    detail::collect_literals(goal, lits);
    auto w = detail::search_assignments(prefix, bounds, lits, [&](const Assignment& a) {
      auto h = eval_pred(a, hyp);
      if (!h || !*h) return false;
      auto g = eval_pred(a, goal);
      return !g || !*g;  // goal false or erroring under a true hypothesis
    });
    if (w) return {Validity::Invalid, w};
  }
  return {Validity::Unknown, std::nullopt};
}

inline SatResult check_sat(const SortEnv& prefix, const PredP& p,
                           const SearchBounds& bounds = SearchBounds{}) {
  Congruence eng;
  eng.assume(p);
  if (eng.contradictory()) return {Sat3::Unsat, std::nullopt};
  if (!has_pvar(p)) {
    std::set<long long> lits;
    detail::collect_literals(p, lits);
    auto w = detail::search_assignments(prefix, bounds, lits, [&](const Assignment& a) {
      auto v = eval_pred(a, p);
      return v && *v;
    });
    if (w) return {Sat3::Sat, w};
  }
  return {Sat3::Unknown, std::nullopt};
}

// ---- memoizing solver ------------------------------------------------------------

class Solver {
 public:
  SearchBounds bounds;

  ValidityResult check_validity(const SortEnv& prefix, const PredP& hyp, const PredP& goal) {
    std::string key = cache_key(prefix, hyp, goal, true);
    {
      std::shared_lock lk(mu_);
      auto it = vcache_.find(key);
      if (it != vcache_.end()) {
        ++hits_;
        return it->second;
      }
    }
    ValidityResult r = ::graten::check_validity(prefix, hyp, goal, bounds);
    {
      std::unique_lock lk(mu_);
      ++misses_;
      vcache_.emplace(key, r);
      if (r.verdict == Validity::Unknown && logger_)
        logger_(LoggedQuery{prefix, hyp, goal, true});
    }
    return r;
  }

  SatResult check_sat(const SortEnv& prefix, const PredP& p) {
    std::string key = cache_key(prefix, p, p, false);
    {
      std::shared_lock lk(mu_);
      auto it = scache_.find(key);
      if (it != scache_.end()) {
        ++hits_;
        return it->second;
      }
    }
    SatResult r = ::graten::check_sat(prefix, p, bounds);
    {
      std::unique_lock lk(mu_);
      ++misses_;
      scache_.emplace(key, r);
      if (r.verdict == Sat3::Unknown && logger_)
        logger_(LoggedQuery{prefix, p, p, false});
    }
    return r;
  }

  void set_unknown_logger(std::function<void(const LoggedQuery&)> f) {
    std::unique_lock lk(mu_);
    logger_ = std::move(f);
  }

  size_t cache_hits() const { return hits_; }
  size_t queries() const { return hits_ + misses_; }

 private:
  std::shared_mutex mu_;
  std::map<std::string, ValidityResult> vcache_;
  std::map<std::string, SatResult> scache_;
  std::function<void(const LoggedQuery&)> logger_;
  std::atomic<size_t> hits_{0}, misses_{0};

  static std::string cache_key(const SortEnv& prefix, const PredP& hyp, const PredP& goal,
                               bool validity) {
    std::string k = validity ? "v|" : "s|";
    for (const auto& [n, s] : prefix) k += n + ":" + sort_name(s) + ",";
    k += "|" + show(hyp, 0) + "|=>|" + show(goal, 0);
    return k;
  }
};

}  // namespace graten
