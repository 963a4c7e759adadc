#pragma once

// Decidable-fragment reasoning about predicates, three-layered:
//
//   1. eval_*: ground evaluation under an assignment, with explicit EvalError
//      (division by zero, out-of-range indexing, head/last/tail/init of [],
//      incompatible reshape/broadcast/matmul). The semantic ground truth.
//   2. simplify_pred: equivalence-preserving rewriting. Rules that could erase
//      an erroring subterm are guarded by a syntactic purity check, so
//      simplification preserves eval outcomes exactly, errors included.
//   3. check_validity / check_sat: Valid and Unsat come only from the
//      syntactic engine (ground completion of the hypothesis equalities plus
//      normalization); Invalid and Sat only from bounded search with a
//      checked witness. Everything else is Unknown.
//
// All verdicts are deterministic; results are memoized behind a shared mutex.

#include <mutex>
#include <random>
#include <shared_mutex>

#include "graten/pred.hpp"
#include "graten/types.hpp"

namespace graten {

// ---- assignments and evaluation ---------------------------------------------

struct LogicVal {
  Sort sort = Sort::Int;
  long long i = 0;
  bool b = false;
  std::vector<long long> list;  // IntList payload, or a Tensor's shape

  static LogicVal of_int(long long v) { return LogicVal{Sort::Int, v, false, {}}; }
  static LogicVal of_bool(bool v) { return LogicVal{Sort::Bool, 0, v, {}}; }
  static LogicVal of_list(std::vector<long long> v) {
    return LogicVal{Sort::IntList, 0, false, std::move(v)};
  }
  static LogicVal of_tensor(std::vector<long long> shape) {
    return LogicVal{Sort::Tensor, 0, false, std::move(shape)};
  }

  std::string str() const {
    switch (sort) {
      case Sort::Int: return std::to_string(i);
      case Sort::Bool: return b ? "true" : "false";
      case Sort::IntList:
      case Sort::Tensor: {
        std::vector<std::string> parts;
        for (long long x : list) parts.push_back(std::to_string(x));
        std::string core = "[" + join(parts, "; ") + "]";
        return sort == Sort::Tensor ? "tensor " + core : core;
      }
    }
    return "?";
  }
};

using Assignment = std::map<std::string, LogicVal>;

inline std::string show_assignment(const Assignment& a) {
  std::vector<std::string> parts;
  for (const auto& [k, v] : a) parts.push_back(k + " = " + v.str());
  return "{" + join(parts, ", ") + "}";
}

// Shared shape semantics (also the runtime's). Right-aligned broadcasting with
// missing dimensions treated as 1; reshape allows a single -1 in the target
// resolved by divisibility; matmul is batched with rank >= 2 on both sides.

inline bool broadcastable_v(const std::vector<long long>& a, const std::vector<long long>& b) {
  size_t n = std::max(a.size(), b.size());
  for (size_t k = 0; k < n; ++k) {
    long long x = k < a.size() ? a[a.size() - 1 - k] : 1;
    long long y = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (x != y && x != 1 && y != 1) return false;
  }
  return true;
}

inline std::optional<std::vector<long long>> broadcast_v(const std::vector<long long>& a,
                                                         const std::vector<long long>& b) {
  if (!broadcastable_v(a, b)) return std::nullopt;
  size_t n = std::max(a.size(), b.size());
  std::vector<long long> out(n);
  for (size_t k = 0; k < n; ++k) {
    long long x = k < a.size() ? a[a.size() - 1 - k] : 1;
    long long y = k < b.size() ? b[b.size() - 1 - k] : 1;
    // A dimension of 1 yields the other side's extent, which may be 0.
    out[n - 1 - k] = (x == 1) ? y : x;
  }
  return out;
}

inline bool reshapeable_v(const std::vector<long long>& from, const std::vector<long long>& to) {
  long long p = 1;
  for (long long d : from) {
    if (d < 0) return false;
    p *= d;
  }
  int wilds = 0;
  long long q = 1;
  for (long long d : to) {
    if (d == -1) {
      ++wilds;
      continue;
    }
    if (d < 0) return false;
    q *= d;
  }
  if (wilds > 1) return false;
  if (wilds == 1) return q > 0 && p % q == 0;
  return p == q;
}

inline std::optional<std::vector<long long>> reshape_v(const std::vector<long long>& from,
                                                       const std::vector<long long>& to) {
  if (!reshapeable_v(from, to)) return std::nullopt;
  long long p = 1;
  for (long long d : from) p *= d;
  long long q = 1;
  for (long long d : to)
    if (d != -1) q *= d;
  std::vector<long long> out = to;
  for (auto& d : out)
    if (d == -1) d = p / q;
  return out;
}

inline std::optional<std::vector<long long>> matmul_v(const std::vector<long long>& a,
                                                      const std::vector<long long>& b) {
  if (a.size() < 2 || b.size() < 2) return std::nullopt;
  long long m = a[a.size() - 2], k1 = a[a.size() - 1];
  long long k2 = b[b.size() - 2], n = b[b.size() - 1];
  if (k1 != k2) return std::nullopt;
  std::vector<long long> ba(a.begin(), a.end() - 2), bb(b.begin(), b.end() - 2);
  auto batch = broadcast_v(ba, bb);
  if (!batch) return std::nullopt;
  batch->push_back(m);
  batch->push_back(n);
  return batch;
}

inline std::optional<long long> eval_size(const Assignment& a, const SizeP& s);
inline std::optional<std::vector<long long>> eval_shape(const Assignment& a, const ShapeP& s);
inline std::optional<bool> eval_pred(const Assignment& a, const PredP& p);

inline std::optional<long long> eval_size(const Assignment& a, const SizeP& s) {
  using K = Size::K;
  switch (s->k) {
    case K::Lit: return s->lit;
    case K::Var: {
      auto it = a.find(s->var);
      if (it == a.end() || it->second.sort != Sort::Int) return std::nullopt;
      return it->second.i;
    }
    case K::Neg: {
      auto v = eval_size(a, s->a);
      if (!v) return std::nullopt;
      return -*v;
    }
    case K::Add:
    case K::Mul:
    case K::Div: {
      auto x = eval_size(a, s->a);
      auto y = eval_size(a, s->b);
      if (!x || !y) return std::nullopt;
      if (s->k == K::Add) return *x + *y;
      if (s->k == K::Mul) return *x * *y;
      if (*y == 0) return std::nullopt;
      return *x / *y;  // truncating
    }
    case K::Head:
    case K::Last:
    case K::Len:
    case K::Prod: {
      auto l = eval_shape(a, s->sh);
      if (!l) return std::nullopt;
      switch (s->k) {
        case K::Head:
          if (l->empty()) return std::nullopt;
          return l->front();
        case K::Last:
          if (l->empty()) return std::nullopt;
          return l->back();
        case K::Len: return static_cast<long long>(l->size());
        default: {
          long long p = 1;
          for (long long d : *l) p *= d;
          return p;
        }
      }
    }
    case K::Nth: {
      auto i = eval_size(a, s->a);
      auto l = eval_shape(a, s->sh);
      if (!i || !l) return std::nullopt;
      if (*i < 0 || *i >= static_cast<long long>(l->size())) return std::nullopt;
      return (*l)[static_cast<size_t>(*i)];
    }
  }
  return std::nullopt;
}

inline std::optional<std::vector<long long>> eval_shape(const Assignment& a, const ShapeP& s) {
  using K = Shape::K;
  switch (s->k) {
    case K::Lit: {
      std::vector<long long> out;
      out.reserve(s->elems.size());
      for (const auto& e : s->elems) {
        auto v = eval_size(a, e);
        if (!v) return std::nullopt;
        out.push_back(*v);
      }
      return out;
    }
    case K::Var: {
      auto it = a.find(s->var);
      if (it == a.end() || it->second.sort != Sort::IntList) return std::nullopt;
      return it->second.list;
    }
    case K::ShapeOf: {
      auto it = a.find(s->var);
      if (it == a.end() || it->second.sort != Sort::Tensor) return std::nullopt;
      return it->second.list;
    }
    case K::Cons: {
      auto h = eval_size(a, s->s1);
      auto t = eval_shape(a, s->a);
      if (!h || !t) return std::nullopt;
      std::vector<long long> out{*h};
      out.insert(out.end(), t->begin(), t->end());
      return out;
    }
    case K::Append: {
      auto x = eval_shape(a, s->a);
      auto y = eval_shape(a, s->b);
      if (!x || !y) return std::nullopt;
      x->insert(x->end(), y->begin(), y->end());
      return x;
    }
    case K::Tail: {
      auto x = eval_shape(a, s->a);
      if (!x || x->empty()) return std::nullopt;
      return std::vector<long long>(x->begin() + 1, x->end());
    }
    case K::Init: {
      auto x = eval_shape(a, s->a);
      if (!x || x->empty()) return std::nullopt;
      return std::vector<long long>(x->begin(), x->end() - 1);
    }
    case K::InsertAt: {
      auto i = eval_size(a, s->s1);
      auto v = eval_size(a, s->s2);
      auto x = eval_shape(a, s->a);
      if (!i || !v || !x) return std::nullopt;
      if (*i < 0 || *i > static_cast<long long>(x->size())) return std::nullopt;
      x->insert(x->begin() + static_cast<size_t>(*i), *v);
      return x;
    }
    case K::DropAt: {
      auto i = eval_size(a, s->s1);
      auto x = eval_shape(a, s->a);
      if (!i || !x) return std::nullopt;
      if (*i < 0 || *i >= static_cast<long long>(x->size())) return std::nullopt;
      x->erase(x->begin() + static_cast<size_t>(*i));
      return x;
    }
    case K::Swap: {
      auto i = eval_size(a, s->s1);
      auto j = eval_size(a, s->s2);
      auto x = eval_shape(a, s->a);
      if (!i || !j || !x) return std::nullopt;
      long long n = static_cast<long long>(x->size());
      if (*i < 0 || *i >= n || *j < 0 || *j >= n) return std::nullopt;
      std::swap((*x)[static_cast<size_t>(*i)], (*x)[static_cast<size_t>(*j)]);
      return x;
    }
    case K::Reshape: {
      auto x = eval_shape(a, s->a);
      auto y = eval_shape(a, s->b);
      if (!x || !y) return std::nullopt;
      return reshape_v(*x, *y);
    }
    case K::Broadcast: {
      auto x = eval_shape(a, s->a);
      auto y = eval_shape(a, s->b);
      if (!x || !y) return std::nullopt;
      return broadcast_v(*x, *y);
    }
    case K::Matmul: {
      auto x = eval_shape(a, s->a);
      auto y = eval_shape(a, s->b);
      if (!x || !y) return std::nullopt;
      return matmul_v(*x, *y);
    }
  }
  return std::nullopt;
}

// Strict semantics: both operands of a connective are evaluated; any EvalError
// propagates to the whole predicate.
inline std::optional<bool> eval_pred(const Assignment& a, const PredP& p) {
  using K = Pred::K;
  switch (p->k) {
    case K::True: return true;
    case K::False: return false;
    case K::EqSz:
    case K::Lt:
    case K::Le: {
      auto x = eval_size(a, p->s1);
      auto y = eval_size(a, p->s2);
      if (!x || !y) return std::nullopt;
      if (p->k == K::EqSz) return *x == *y;
      if (p->k == K::Lt) return *x < *y;
      return *x <= *y;
    }
    case K::EqSh: {
      auto x = eval_shape(a, p->sh1);
      auto y = eval_shape(a, p->sh2);
      if (!x || !y) return std::nullopt;
      return *x == *y;
    }
    case K::BVar: {
      auto it = a.find(p->var);
      if (it == a.end() || it->second.sort != Sort::Bool) return std::nullopt;
      return it->second.b;
    }
    case K::Not: {
      auto v = eval_pred(a, p->p1);
      if (!v) return std::nullopt;
      return !*v;
    }
    case K::And:
    case K::Or: {
      auto x = eval_pred(a, p->p1);
      auto y = eval_pred(a, p->p2);
      if (!x || !y) return std::nullopt;
      return p->k == K::And ? (*x && *y) : (*x || *y);
    }
    case K::Brc: {
      auto x = eval_shape(a, p->sh1);
      auto y = eval_shape(a, p->sh2);
      if (!x || !y) return std::nullopt;
      return broadcastable_v(*x, *y);
    }
    case K::Rsh: {
      auto x = eval_shape(a, p->sh1);
      auto y = eval_shape(a, p->sh2);
      if (!x || !y) return std::nullopt;
      return reshapeable_v(*x, *y);
    }
    case K::PVar: return std::nullopt;  // inference-internal, not evaluable
  }
  return std::nullopt;
}

// ---- purity: can a subterm's evaluation error? -------------------------------

inline bool pure_size(const SizeP& s);
inline bool pure_shape(const ShapeP& s);

inline bool pure_size(const SizeP& s) {
  switch (s->k) {
    case Size::K::Lit:
    case Size::K::Var: return true;
    case Size::K::Neg: return pure_size(s->a);
    case Size::K::Add:
    case Size::K::Mul: return pure_size(s->a) && pure_size(s->b);
    case Size::K::Div: return false;
    case Size::K::Head:
    case Size::K::Last:
    case Size::K::Nth: return false;
    case Size::K::Len:
    case Size::K::Prod: return pure_shape(s->sh);
  }
  return false;
}

inline bool pure_shape(const ShapeP& s) {
  switch (s->k) {
    case Shape::K::Lit: {
      for (const auto& e : s->elems)
        if (!pure_size(e)) return false;
      return true;
    }
    case Shape::K::Var:
    case Shape::K::ShapeOf: return true;
    case Shape::K::Cons: return pure_size(s->s1) && pure_shape(s->a);
    case Shape::K::Append: return pure_shape(s->a) && pure_shape(s->b);
    default: return false;  // tail/init/insertAt/dropAt/swap/reshape/broadcast/matmul are partial
  }
}

inline bool pure_pred(const PredP& p) {
  switch (p->k) {
    case Pred::K::True:
    case Pred::K::False:
    case Pred::K::BVar: return true;
    case Pred::K::EqSz:
    case Pred::K::Lt:
    case Pred::K::Le: return pure_size(p->s1) && pure_size(p->s2);
    case Pred::K::EqSh:
    case Pred::K::Brc:
    case Pred::K::Rsh: return pure_shape(p->sh1) && pure_shape(p->sh2);
    case Pred::K::Not: return pure_pred(p->p1);
    case Pred::K::And:
    case Pred::K::Or: return pure_pred(p->p1) && pure_pred(p->p2);
    case Pred::K::PVar: return false;
  }
  return false;
}

// ---- simplification (equivalence-preserving, error-exact) -------------------

inline SizeP simplify_size(const SizeP& s);
inline ShapeP simplify_shape(const ShapeP& s);
inline PredP simplify_pred(const PredP& p);

inline std::optional<long long> size_lit(const SizeP& s) {
  if (s->k == Size::K::Lit) return s->lit;
  return std::nullopt;
}

inline std::optional<std::vector<long long>> shape_lit(const ShapeP& s) {
  if (s->k != Shape::K::Lit) return std::nullopt;
  std::vector<long long> out;
  for (const auto& e : s->elems) {
    auto v = size_lit(e);
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  return out;
}

inline SizeP simplify_size(const SizeP& s) {
  using K = Size::K;
  switch (s->k) {
    case K::Lit:
    case K::Var: return s;
    case K::Neg: {
      auto a = simplify_size(s->a);
      if (auto v = size_lit(a)) return sz_lit(-*v);
      if (a->k == K::Neg) return a->a;
      return sz_neg(a);
    }
    case K::Add: {
      auto a = simplify_size(s->a), b = simplify_size(s->b);
      auto va = size_lit(a), vb = size_lit(b);
      if (va && vb) return sz_lit(*va + *vb);
      if (va && *va == 0) return b;
      if (vb && *vb == 0) return a;
      return sz_add(a, b);
    }
    case K::Mul: {
      auto a = simplify_size(s->a), b = simplify_size(s->b);
      auto va = size_lit(a), vb = size_lit(b);
      if (va && vb) return sz_lit(*va * *vb);
      if (va && *va == 1) return b;
      if (vb && *vb == 1) return a;
      if (va && *va == 0 && pure_size(b)) return sz_lit(0);
      if (vb && *vb == 0 && pure_size(a)) return sz_lit(0);
      return sz_mul(a, b);
    }
    case K::Div: {
      auto a = simplify_size(s->a), b = simplify_size(s->b);
      auto va = size_lit(a), vb = size_lit(b);
      if (vb && *vb == 1) return a;
      if (va && vb && *vb != 0) return sz_lit(*va / *vb);
      return sz_div(a, b);
    }
    case K::Head:
    case K::Last: {
      auto sh = simplify_shape(s->sh);
      if (sh->k == Shape::K::Lit && !sh->elems.empty()) {
        size_t idx = s->k == K::Head ? 0 : sh->elems.size() - 1;
        bool rest_pure = true;
        for (size_t i = 0; i < sh->elems.size(); ++i)
          if (i != idx && !pure_size(sh->elems[i])) rest_pure = false;
        if (rest_pure) return sh->elems[idx];
      }
      return sz_shape1(s->k, sh);
    }
    case K::Len: {
      auto sh = simplify_shape(s->sh);
      if (sh->k == Shape::K::Lit && pure_shape(sh))
        return sz_lit(static_cast<long long>(sh->elems.size()));
      if (sh->k == Shape::K::Cons && pure_size(sh->s1))
        return simplify_size(sz_add(sz_lit(1), sz_len(sh->a)));
      if (sh->k == Shape::K::Append)
        return simplify_size(sz_add(sz_len(sh->a), sz_len(sh->b)));
      return sz_len(sh);
    }
    case K::Prod: {
      auto sh = simplify_shape(s->sh);
      if (sh->k == Shape::K::Lit) {
        // Exact: strict evaluation of the literal multiplies all elements.
        SizeP acc = sz_lit(1);
        for (const auto& e : sh->elems) acc = sz_mul(acc, e);
        return simplify_size(acc);
      }
      return sz_prod(sh);
    }
    case K::Nth: {
      auto i = simplify_size(s->a);
      auto sh = simplify_shape(s->sh);
      auto iv = size_lit(i);
      if (iv && sh->k == Shape::K::Lit && *iv >= 0 &&
          *iv < static_cast<long long>(sh->elems.size())) {
        bool rest_pure = true;
        for (size_t j = 0; j < sh->elems.size(); ++j)
          if (j != static_cast<size_t>(*iv) && !pure_size(sh->elems[j])) rest_pure = false;
        if (rest_pure) return sh->elems[static_cast<size_t>(*iv)];
      }
      return sz_nth(i, sh);
    }
  }
  return s;
}

inline ShapeP simplify_shape(const ShapeP& s) {
  using K = Shape::K;
  switch (s->k) {
    case K::Lit: {
      std::vector<SizeP> es;
      es.reserve(s->elems.size());
      for (const auto& e : s->elems) es.push_back(simplify_size(e));
      return sh_lit(std::move(es));
    }
    case K::Var:
    case K::ShapeOf: return s;
    case K::Cons: {
      auto h = simplify_size(s->s1);
      auto t = simplify_shape(s->a);
      if (t->k == K::Lit) {
        std::vector<SizeP> es{h};
        es.insert(es.end(), t->elems.begin(), t->elems.end());
        return sh_lit(std::move(es));
      }
      return sh_cons(h, t);
    }
    case K::Append: {
      auto a = simplify_shape(s->a), b = simplify_shape(s->b);
      if (a->k == K::Lit && b->k == K::Lit) {
        std::vector<SizeP> es = a->elems;
        es.insert(es.end(), b->elems.begin(), b->elems.end());
        return sh_lit(std::move(es));
      }
      if (a->k == K::Lit && a->elems.empty()) return b;
      if (b->k == K::Lit && b->elems.empty()) return a;
      return sh_append(a, b);
    }
    case K::Tail: {
      auto a = simplify_shape(s->a);
      if (a->k == K::Lit && !a->elems.empty() && pure_size(a->elems.front()))
        return sh_lit(std::vector<SizeP>(a->elems.begin() + 1, a->elems.end()));
      return sh_tail(a);
    }
    case K::Init: {
      auto a = simplify_shape(s->a);
      if (a->k == K::Lit && !a->elems.empty() && pure_size(a->elems.back()))
        return sh_lit(std::vector<SizeP>(a->elems.begin(), a->elems.end() - 1));
      return sh_init(a);
    }
    case K::InsertAt: {
      auto i = simplify_size(s->s1);
      auto v = simplify_size(s->s2);
      auto a = simplify_shape(s->a);
      auto iv = size_lit(i);
      if (iv && a->k == K::Lit && *iv >= 0 && *iv <= static_cast<long long>(a->elems.size())) {
        std::vector<SizeP> es = a->elems;
        es.insert(es.begin() + static_cast<size_t>(*iv), v);
        return sh_lit(std::move(es));
      }
      return sh_insert_at(i, v, a);
    }
    case K::DropAt: {
      auto i = simplify_size(s->s1);
      auto a = simplify_shape(s->a);
      auto iv = size_lit(i);
      if (iv && a->k == K::Lit && *iv >= 0 && *iv < static_cast<long long>(a->elems.size()) &&
          pure_size(a->elems[static_cast<size_t>(*iv)])) {
        std::vector<SizeP> es = a->elems;
        es.erase(es.begin() + static_cast<size_t>(*iv));
        return sh_lit(std::move(es));
      }
      return sh_drop_at(i, a);
    }
    case K::Swap: {
      auto i = simplify_size(s->s1);
      auto j = simplify_size(s->s2);
      auto a = simplify_shape(s->a);
      auto iv = size_lit(i), jv = size_lit(j);
      long long n = a->k == K::Lit ? static_cast<long long>(a->elems.size()) : -1;
      if (iv && jv && a->k == K::Lit && *iv >= 0 && *iv < n && *jv >= 0 && *jv < n) {
        std::vector<SizeP> es = a->elems;
        std::swap(es[static_cast<size_t>(*iv)], es[static_cast<size_t>(*jv)]);
        return sh_lit(std::move(es));
      }
      return sh_swap(i, j, a);
    }
    case K::Reshape:
    case K::Broadcast:
    case K::Matmul: {
      auto a = simplify_shape(s->a), b = simplify_shape(s->b);
      auto av = shape_lit(a), bv = shape_lit(b);
      if (av && bv) {
        std::optional<std::vector<long long>> r;
        if (s->k == K::Reshape) r = reshape_v(*av, *bv);
        else if (s->k == K::Broadcast) r = broadcast_v(*av, *bv);
        else r = matmul_v(*av, *bv);
        if (r) return sh_lit_ints(*r);
      }
      return sh_bin(s->k, a, b);
    }
  }
  return s;
}

inline PredP simplify_pred(const PredP& p) {
  using K = Pred::K;
  switch (p->k) {
    case K::True:
    case K::False:
    case K::BVar: return p;
    case K::EqSz:
    case K::Lt:
    case K::Le: {
      auto a = simplify_size(p->s1), b = simplify_size(p->s2);
      auto va = size_lit(a), vb = size_lit(b);
      if (va && vb) {
        bool r = p->k == K::EqSz ? *va == *vb : p->k == K::Lt ? *va < *vb : *va <= *vb;
        return r ? pr_true() : pr_false();
      }
      if (p->k == K::EqSz && equal(a, b) && pure_size(a)) return pr_true();
      if (p->k == K::Le && equal(a, b) && pure_size(a)) return pr_true();
      auto q = std::make_shared<Pred>();
      q->k = p->k;
      q->s1 = a;
      q->s2 = b;
      return q;
    }
    case K::EqSh: {
      auto a = simplify_shape(p->sh1), b = simplify_shape(p->sh2);
      if (a->k == Shape::K::Lit && b->k == Shape::K::Lit) {
        if (a->elems.size() != b->elems.size()) {
          if (pure_shape(a) && pure_shape(b)) return pr_false();
        } else {
          PredP acc = pr_true();
          for (size_t i = 0; i < a->elems.size(); ++i)
            acc = pr_and(acc, simplify_pred(pr_eq_sz(a->elems[i], b->elems[i])));
          return simplify_pred(acc);
        }
      }
      if (equal(a, b) && pure_shape(a)) return pr_true();
      return pr_eq_sh(a, b);
    }
    case K::Brc:
    case K::Rsh: {
      auto a = simplify_shape(p->sh1), b = simplify_shape(p->sh2);
      auto av = shape_lit(a), bv = shape_lit(b);
      if (av && bv) {
        bool r = p->k == K::Brc ? broadcastable_v(*av, *bv) : reshapeable_v(*av, *bv);
        return r ? pr_true() : pr_false();
      }
      return p->k == K::Brc ? pr_brc(a, b) : pr_rsh(a, b);
    }
    case K::Not: {
      auto a = simplify_pred(p->p1);
      if (a->k == K::True) return pr_false();
      if (a->k == K::False) return pr_true();
      if (a->k == K::Not) return a->p1;
      return pr_not(a);
    }
    case K::And: {
      auto a = simplify_pred(p->p1), b = simplify_pred(p->p2);
      if (a->k == K::True) return b;
      if (b->k == K::True) return a;
      if (a->k == K::False && pure_pred(b)) return pr_false();
      if (b->k == K::False && pure_pred(a)) return pr_false();
      // flatten + dedupe, preserving first-occurrence order
      std::vector<PredP> cs;
      conjuncts(pr_and(a, b), cs);
      std::vector<PredP> uniq;
      std::set<std::string> seen;
      for (const auto& c : cs)
        if (seen.insert(show(c, 0)).second) uniq.push_back(c);
      if (uniq.empty()) return pr_true();
      PredP acc = uniq[0];
      for (size_t i = 1; i < uniq.size(); ++i) acc = pr_and(acc, uniq[i]);
      return acc;
    }
    case K::Or: {
      auto a = simplify_pred(p->p1), b = simplify_pred(p->p2);
      if (a->k == K::False) return b;
      if (b->k == K::False) return a;
      if (a->k == K::True && pure_pred(b)) return pr_true();
      if (b->k == K::True && pure_pred(a)) return pr_true();
      if (equal(a, b)) return a;
      return pr_or(a, b);
    }
    case K::PVar: return p;
  }
  return p;
}

}  // namespace graten

#include "graten/logic_engine.hpp"
