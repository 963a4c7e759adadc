#pragma once

// Refinement types over the predicate language:
//
//   tau ::= { x : B | p } | x : tau -> tau     B ::= bool | int | int list | tensor
//
// Gradualization lives at the predicate level only: erasing every refinement
// yields a simple type. Function binders are dependent (the codomain may
// mention the argument), refinement binders scope over their own predicate.

#include <algorithm>
#include <functional>

#include "graten/pred.hpp"

namespace graten {

struct RType;
using RTypeP = std::shared_ptr<const RType>;

struct RType {
  enum class K { Base, Fun };
  K k;
  std::string binder;
  Sort base = Sort::Int;  // Base
  PredP pred;             // Base
  RTypeP dom, cod;        // Fun
};

inline RTypeP rt_base(std::string binder, Sort b, PredP p) {
  auto t = std::make_shared<RType>();
  t->k = RType::K::Base;
  t->binder = std::move(binder);
  t->base = b;
  t->pred = std::move(p);
  return t;
}
inline RTypeP rt_simple(Sort b) { return rt_base("v", b, pr_true()); }
inline RTypeP rt_fun(std::string binder, RTypeP dom, RTypeP cod) {
  auto t = std::make_shared<RType>();
  t->k = RType::K::Fun;
  t->binder = std::move(binder);
  t->dom = std::move(dom);
  t->cod = std::move(cod);
  return t;
}
// tensor(S) is shorthand for { v : tensor | v.shape = S }.
inline RTypeP rt_tensor_of(ShapeP s, const std::string& binder = "v") {
  return rt_base(binder, Sort::Tensor, pr_eq_sh(sh_shape_of(binder), std::move(s)));
}

inline std::set<std::string> fv_type(const RTypeP& t) {
  if (t->k == RType::K::Base) {
    auto s = fv_pred(t->pred);
    s.erase(t->binder);
    return s;
  }
  auto s = fv_type(t->dom);
  auto c = fv_type(t->cod);
  c.erase(t->binder);
  s.insert(c.begin(), c.end());
  return s;
}

inline bool erasure_equal(const RTypeP& a, const RTypeP& b) {
  if (a->k != b->k) return false;
  if (a->k == RType::K::Base) return a->base == b->base;
  return erasure_equal(a->dom, b->dom) && erasure_equal(a->cod, b->cod);
}

inline std::string show_erasure(const RTypeP& t) {
  if (t->k == RType::K::Base) return sort_name(t->base);
  std::string d = show_erasure(t->dom);
  if (t->dom->k == RType::K::Fun) d = "(" + d + ")";
  return d + " -> " + show_erasure(t->cod);
}

inline std::string show(const RTypeP& t) {
  if (t->k == RType::K::Base) {
    if (t->pred->k == Pred::K::True) return sort_name(t->base);
    // tensor({v.shape = S}) prints as tensor(S)
    if (t->base == Sort::Tensor && t->pred->k == Pred::K::EqSh &&
        t->pred->sh1->k == Shape::K::ShapeOf && t->pred->sh1->var == t->binder) {
      auto rest = fv_pred(t->pred);
      rest.erase(t->binder);
      (void)rest;
      return "tensor(" + show(t->pred->sh2, false) + ")";
    }
    return "{ " + t->binder + " : " + sort_name(t->base) + " | " + show(t->pred, 0) + " }";
  }
  std::string d = show(t->dom);
  if (t->dom->k == RType::K::Fun) d = "(" + d + ")";
  auto cfv = fv_type(t->cod);
  if (cfv.count(t->binder)) d = t->binder + ":" + d;
  return d + " -> " + show(t->cod);
}

// ---- substitution into types ----------------------------------------------

inline std::set<std::string> fv_subst_val(const SubstVal& v) {
  std::set<std::string> out;
  if (auto* sz = std::get_if<SizeP>(&v)) fv(*sz, out);
  else if (auto* sh = std::get_if<ShapeP>(&v)) fv(*sh, out);
  else if (auto* pr = std::get_if<PredP>(&v)) fv(*pr, out);
  else if (auto* t = std::get_if<TensorSub>(&v)) {
    if (t->rename) out.insert(*t->rename);
  }
  return out;
}

inline std::string fresh_avoid(const std::string& base, const std::set<std::string>& avoid) {
  if (!avoid.count(base)) return base;
  for (int i = 0;; ++i) {
    std::string c = base + "'" + (i ? std::to_string(i) : "");
    if (!avoid.count(c)) return c;
  }
}

inline RTypeP subst_type(const RTypeP& t, const Subst& m) {
  if (m.empty()) return t;
  std::set<std::string> range_fv;
  for (const auto& [k, v] : m) {
    (void)k;
    auto f = fv_subst_val(v);
    range_fv.insert(f.begin(), f.end());
  }
  std::function<RTypeP(const RTypeP&, Subst)> go = [&](const RTypeP& t, Subst m) -> RTypeP {
    if (m.empty()) return t;
    std::string b = t->binder;
    bool clash = range_fv.count(b) > 0;
    if (t->k == RType::K::Base) {
      m.erase(b);  // binder shadows
      if (m.empty()) return t;
      PredP p = t->pred;
      if (clash) {
        std::set<std::string> avoid = range_fv;
        auto pf = fv_pred(p);
        avoid.insert(pf.begin(), pf.end());
        for (const auto& [k2, v2] : m) avoid.insert(k2);
        std::string nb = fresh_avoid(b, avoid);
        p = subst(p, rename1(t->base, b, nb));
        b = nb;
      }
      return rt_base(b, t->base, subst(p, m));
    }
    RTypeP dom = go(t->dom, m);
    Subst mc = m;
    mc.erase(b);
    RTypeP cod = t->cod;
    if (clash && !mc.empty()) {
      std::set<std::string> avoid = range_fv;
      auto cf = fv_type(cod);
      avoid.insert(cf.begin(), cf.end());
      for (const auto& [k2, v2] : mc) avoid.insert(k2);
      std::string nb = fresh_avoid(b, avoid);
      Sort bs = t->dom->k == RType::K::Base ? t->dom->base : Sort::Tensor;
      cod = subst_type(cod, rename1(bs, b, nb));
      b = nb;
    }
    return rt_fun(b, dom, mc.empty() ? cod : go(cod, mc));
  };
  return go(t, m);
}

// Rename the refinement/argument binder of `t` to `nb`.
inline RTypeP rename_binder(const RTypeP& t, const std::string& nb) {
  if (t->binder == nb) return t;
  if (t->k == RType::K::Base)
    return rt_base(nb, t->base, subst(t->pred, rename1(t->base, t->binder, nb)));
  Sort bs = t->dom->k == RType::K::Base ? t->dom->base : Sort::Tensor;
  return rt_fun(nb, t->dom, subst_type(t->cod, rename1(bs, t->binder, nb)));
}

inline bool alpha_equal(const RTypeP& a, const RTypeP& b) {
  if (a->k != b->k) return false;
  if (a->k == RType::K::Base) {
    if (a->base != b->base) return false;
    if (a->binder == b->binder) return equal(a->pred, b->pred);
    std::set<std::string> avoid = fv_pred(a->pred);
    auto bf = fv_pred(b->pred);
    avoid.insert(bf.begin(), bf.end());
    std::string nb = fresh_avoid("$ae", avoid);
    return equal(subst(a->pred, rename1(a->base, a->binder, nb)),
                 subst(b->pred, rename1(b->base, b->binder, nb)));
  }
  if (!alpha_equal(a->dom, b->dom)) return false;
  if (a->binder == b->binder) return alpha_equal(a->cod, b->cod);
  std::set<std::string> avoid = fv_type(a->cod);
  auto bf = fv_type(b->cod);
  avoid.insert(bf.begin(), bf.end());
  std::string nb = fresh_avoid("$ae", avoid);
  Sort as = a->dom->k == RType::K::Base ? a->dom->base : Sort::Tensor;
  Sort bs = b->dom->k == RType::K::Base ? b->dom->base : Sort::Tensor;
  return alpha_equal(subst_type(a->cod, rename1(as, a->binder, nb)),
                     subst_type(b->cod, rename1(bs, b->binder, nb)));
}

// Pointwise meet; both components must share an erasure.
inline RTypeP meet(const RTypeP& a, const RTypeP& b) {
  if (!erasure_equal(a, b))
    throw InternalError("meet of types with different erasures: " + show(a) + " vs " + show(b));
  if (a->k == RType::K::Base) {
    RTypeP b2 = rename_binder(b, a->binder);
    if (equal(a->pred, b2->pred)) return a;
    return rt_base(a->binder, a->base, pr_and(a->pred, b2->pred));
  }
  RTypeP b2 = rename_binder(b, a->binder);
  return rt_fun(a->binder, meet(a->dom, b2->dom), meet(a->cod, b2->cod));
}

inline bool type_has_pvar(const RTypeP& t) {
  if (t->k == RType::K::Base) return has_pvar(t->pred);
  return type_has_pvar(t->dom) || type_has_pvar(t->cod);
}

// Selfification: the most precise type of a variable occurrence.
// Tensor values are observable only through their shape, booleans through
// their truth value, so those sorts selfify via the corresponding equality.
inline RTypeP selfify(const std::string& x, const RTypeP& t) {
  if (t->k == RType::K::Fun) return t;
  const std::string& y = t->binder == x ? t->binder + "'" : t->binder;
  PredP self;
  switch (t->base) {
    case Sort::Int: self = pr_eq_sz(sz_var(y), sz_var(x)); break;
    case Sort::IntList: self = pr_eq_sh(sh_var(y), sh_var(x)); break;
    case Sort::Tensor: self = pr_eq_sh(sh_shape_of(y), sh_shape_of(x)); break;
    case Sort::Bool:
      self = pr_or(pr_and(pr_bvar(y), pr_bvar(x)), pr_and(pr_not(pr_bvar(y)), pr_not(pr_bvar(x))));
      break;
  }
  return rt_base(y, t->base, self);
}

// ---- type environments -----------------------------------------------------

struct TypeEnv {
  std::vector<std::pair<std::string, RTypeP>> bindings;

  std::optional<RTypeP> lookup(const std::string& x) const {
    for (auto it = bindings.rbegin(); it != bindings.rend(); ++it)
      if (it->first == x) return it->second;
    return std::nullopt;
  }

  TypeEnv extended(const std::string& x, RTypeP t) const {
    TypeEnv e = *this;
    e.bindings.emplace_back(x, std::move(t));
    return e;
  }

  // Indices of bindings not shadowed by a later binding of the same name.
  std::vector<size_t> live() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < bindings.size(); ++i) {
      bool shadowed = false;
      for (size_t j = i + 1; j < bindings.size(); ++j)
        if (bindings[j].first == bindings[i].first) {
          shadowed = true;
          break;
        }
      if (!shadowed) out.push_back(i);
    }
    return out;
  }

  // refine(Gamma): conjunction of [x/binder]p over live base bindings.
  PredP refine() const {
    PredP out = pr_true();
    for (size_t i : live()) {
      const auto& [x, t] = bindings[i];
      if (t->k != RType::K::Base) continue;
      Subst m = rename1(t->base, t->binder, x);
      out = pr_and(out, subst(t->pred, m));
    }
    return out;
  }

  // ST(Gamma): the base-sorted prefix used for logical quantification.
  std::map<std::string, Sort> st() const {
    std::map<std::string, Sort> out;
    for (size_t i : live()) {
      const auto& [x, t] = bindings[i];
      if (t->k == RType::K::Base) out[x] = t->base;
    }
    return out;
  }

  std::set<std::string> names() const {
    std::set<std::string> out;
    for (const auto& [x, t] : bindings) {
      (void)t;
      out.insert(x);
    }
    return out;
  }
};

// ---- well-formedness -------------------------------------------------------

struct WfError : std::runtime_error {
  std::string subterm;
  WfError(const std::string& subterm_, const std::string& reason)
      : std::runtime_error(reason + ": " + subterm_), subterm(subterm_) {}
};

using SortEnv = std::map<std::string, Sort>;

inline void check_wf(const SortEnv& d, const SizeP& s);
inline void check_wf(const SortEnv& d, const ShapeP& s);
inline void check_wf(const SortEnv& d, const PredP& p, bool allow_pvars = false);

inline void require_sort(const SortEnv& d, const std::string& x, Sort want, const std::string& ctx) {
  auto it = d.find(x);
  if (it == d.end()) throw WfError(x, "unbound variable in " + ctx);
  if (it->second != want)
    throw WfError(x, "variable used at sort " + sort_name(want) + " but bound at sort " +
                         sort_name(it->second));
}

inline void check_wf(const SortEnv& d, const SizeP& s) {
  switch (s->k) {
    case Size::K::Lit: return;
    case Size::K::Var: require_sort(d, s->var, Sort::Int, "size expression"); return;
    case Size::K::Neg: check_wf(d, s->a); return;
    case Size::K::Add:
    case Size::K::Mul:
    case Size::K::Div: check_wf(d, s->a); check_wf(d, s->b); return;
    case Size::K::Head:
    case Size::K::Last:
    case Size::K::Len:
    case Size::K::Prod: check_wf(d, s->sh); return;
    case Size::K::Nth: check_wf(d, s->a); check_wf(d, s->sh); return;
  }
}

inline void check_wf(const SortEnv& d, const ShapeP& s) {
  switch (s->k) {
    case Shape::K::Lit:
      for (const auto& e : s->elems) check_wf(d, e);
      return;
    case Shape::K::Var: require_sort(d, s->var, Sort::IntList, "shape expression"); return;
    case Shape::K::ShapeOf: require_sort(d, s->var, Sort::Tensor, ".shape"); return;
    case Shape::K::Cons: check_wf(d, s->s1); check_wf(d, s->a); return;
    case Shape::K::Tail:
    case Shape::K::Init: check_wf(d, s->a); return;
    case Shape::K::InsertAt: check_wf(d, s->s1); check_wf(d, s->s2); check_wf(d, s->a); return;
    case Shape::K::DropAt: check_wf(d, s->s1); check_wf(d, s->a); return;
    case Shape::K::Swap: check_wf(d, s->s1); check_wf(d, s->s2); check_wf(d, s->a); return;
    case Shape::K::Append:
    case Shape::K::Reshape:
    case Shape::K::Broadcast:
    case Shape::K::Matmul: check_wf(d, s->a); check_wf(d, s->b); return;
  }
}

inline void check_wf(const SortEnv& d, const PredP& p, bool allow_pvars) {
  switch (p->k) {
    case Pred::K::True:
    case Pred::K::False: return;
    case Pred::K::EqSz:
    case Pred::K::Lt:
    case Pred::K::Le: check_wf(d, p->s1); check_wf(d, p->s2); return;
    case Pred::K::EqSh:
    case Pred::K::Brc:
    case Pred::K::Rsh: check_wf(d, p->sh1); check_wf(d, p->sh2); return;
    case Pred::K::BVar: require_sort(d, p->var, Sort::Bool, "predicate"); return;
    case Pred::K::Not: check_wf(d, p->p1, allow_pvars); return;
    case Pred::K::And:
    case Pred::K::Or:
      check_wf(d, p->p1, allow_pvars);
      check_wf(d, p->p2, allow_pvars);
      return;
    case Pred::K::PVar:
      if (!allow_pvars) throw WfError(show(p, 0), "predicate variable outside inference");
      for (const auto& a : p->deps) require_sort(d, a.var, a.sort, "PredVar dependency");
      for (const auto& a : p->params) require_sort(d, a.var, a.sort, "PredVar parameter");
      return;
  }
}

inline void check_wf_type(const SortEnv& d, const RTypeP& t, bool allow_pvars = false) {
  if (t->k == RType::K::Base) {
    SortEnv d2 = d;
    d2[t->binder] = t->base;
    check_wf(d2, t->pred, allow_pvars);
    return;
  }
  check_wf_type(d, t->dom, allow_pvars);
  SortEnv d2 = d;
  if (t->dom->k == RType::K::Base) d2[t->binder] = t->dom->base;
  check_wf_type(d2, t->cod, allow_pvars);
}

}  // namespace graten
