// Simple-type inference over the predicate-erased language.
//
// Every refinement type erases to a simple type: base sorts stay themselves
// and dependent arrows forget their binders and predicates.  Inference is
// plain unification with monomorphic lets — refinements, not type schemes,
// carry the per-binding generality in this language — so the result maps
// every term node to one ground simple type.  Unification variables that
// survive (possible only in dead code) default to int, with a warning.

#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "graten/basics.hpp"
#include "graten/parser.hpp"
#include "graten/terms.hpp"
#include "graten/types.hpp"

namespace graten {

// ---- simple types ------------------------------------------------------------

struct SType;
using STypeP = std::shared_ptr<SType>;

struct SType {
  enum class K { Base, Arrow, Var };
  K k = K::Base;
  Sort base = Sort::Int;  // Base
  STypeP dom, cod;        // Arrow
  int id = 0;             // Var
};

inline STypeP st_base(Sort b) {
  auto t = std::make_shared<SType>();
  t->k = SType::K::Base;
  t->base = b;
  return t;
}
inline STypeP st_arrow(STypeP dom, STypeP cod) {
  auto t = std::make_shared<SType>();
  t->k = SType::K::Arrow;
  t->dom = std::move(dom);
  t->cod = std::move(cod);
  return t;
}

inline std::string show(const STypeP& t) {
  switch (t->k) {
    case SType::K::Base: return sort_name(t->base);
    case SType::K::Var: return "?t" + std::to_string(t->id);
    case SType::K::Arrow: {
      std::string d = show(t->dom);
      if (t->dom->k == SType::K::Arrow) d = "(" + d + ")";
      return d + " -> " + show(t->cod);
    }
  }
  return "?";
}

inline bool stype_equal(const STypeP& a, const STypeP& b) {
  if (a->k != b->k) return false;
  switch (a->k) {
    case SType::K::Base: return a->base == b->base;
    case SType::K::Var: return a->id == b->id;
    case SType::K::Arrow:
      return stype_equal(a->dom, b->dom) && stype_equal(a->cod, b->cod);
  }
  return false;
}

// Forget binders and predicates.
inline STypeP erase_type(const RTypeP& t) {
  if (t->k == RType::K::Base) return st_base(t->base);
  return st_arrow(erase_type(t->dom), erase_type(t->cod));
}

// ---- errors -------------------------------------------------------------------

struct UnificationError : std::runtime_error {
  std::string left, right;  // the two irreconcilable types, printed
  Span span;
  UnificationError(std::string l, std::string r, Span sp, const std::string& detail)
      : std::runtime_error("type mismatch: " + l + " vs " + r +
                           (detail.empty() ? "" : " (" + detail + ")")),
        left(std::move(l)),
        right(std::move(r)),
        span(sp) {}
};

struct UnboundVarError : std::runtime_error {
  std::string name;
  Span span;
  UnboundVarError(std::string n, Span sp)
      : std::runtime_error("unbound variable '" + n + "'"), name(std::move(n)), span(sp) {}
};

// ---- inference ----------------------------------------------------------------

// Result of inference over a whole program: a ground simple type for every
// term node (keyed by node identity — valid for exactly the tree passed in),
// the type of each top-level binding, and defaulting warnings.
struct STypeTable {
  std::map<const SourceTerm*, STypeP> node;
  std::map<std::string, STypeP> top;
  std::vector<Diagnostic> warnings;

  const STypeP& at(const SrcP& m) const {
    auto it = node.find(m.get());
    if (it == node.end()) throw InternalError("no simple type recorded for node");
    return it->second;
  }
};

class SimpleInfer {
 public:
  using Env = std::map<std::string, STypeP>;

  static STypeTable run(const Program& p, const std::vector<StubDecl>& stubs) {
    SimpleInfer si;
    Env env;
    for (const auto& d : stubs) env[d.name] = erase_type(d.ty);
    for (const auto& l : p.lets) {
      STypeP t = si.infer(env, l.rhs);
      env[l.name] = t;  // monomorphic: later bindings see this exact type
      si.table_.top[l.name] = t;
    }
    si.infer(env, p.main);
    si.finalize(p);
    return std::move(si.table_);
  }

  static STypeTable run_term(const SrcP& m, const std::vector<StubDecl>& stubs) {
    Program p;
    p.main = m;
    return run(p, stubs);
  }

 private:
  STypeTable table_;
  std::vector<STypeP> binding_;  // unification variable bindings, by id
  int next_var_ = 0;

  STypeP fresh() {
    auto t = std::make_shared<SType>();
    t->k = SType::K::Var;
    t->id = next_var_++;
    binding_.push_back(nullptr);
    return t;
  }

  // Follow variable bindings one level (with path compression at the root).
  STypeP find(STypeP t) {
    while (t->k == SType::K::Var && binding_[t->id]) t = binding_[t->id];
    return t;
  }

  bool occurs(int id, const STypeP& t0) {
    STypeP t = find(t0);
    switch (t->k) {
      case SType::K::Var: return t->id == id;
      case SType::K::Base: return false;
      case SType::K::Arrow: return occurs(id, t->dom) || occurs(id, t->cod);
    }
    return false;
  }

  // Fully resolve a type; residual variables stay in place.
  STypeP zonk(const STypeP& t0) {
    STypeP t = find(t0);
    if (t->k == SType::K::Arrow) {
      STypeP d = zonk(t->dom), c = zonk(t->cod);
      if (d != t->dom || c != t->cod) return st_arrow(d, c);
    }
    return t;
  }

  void unify(const STypeP& a0, const STypeP& b0, Span sp) {
    STypeP a = find(a0), b = find(b0);
    if (a->k == SType::K::Var && b->k == SType::K::Var && a->id == b->id) return;
    if (a->k == SType::K::Var) {
      if (occurs(a->id, b))
        throw UnificationError(show(zonk(a)), show(zonk(b)), sp, "the type would be infinite");
      binding_[a->id] = b;
      return;
    }
    if (b->k == SType::K::Var) {
      unify(b, a, sp);
      return;
    }
    if (a->k == SType::K::Base && b->k == SType::K::Base) {
      if (a->base != b->base) throw UnificationError(show(a), show(b), sp, "");
      return;
    }
    if (a->k == SType::K::Arrow && b->k == SType::K::Arrow) {
      // Report the outermost mismatch, not the leaf, for readable errors.
      try {
        unify(a->dom, b->dom, sp);
        unify(a->cod, b->cod, sp);
      } catch (const UnificationError&) {
        throw UnificationError(show(zonk(a)), show(zonk(b)), sp, "");
      }
      return;
    }
    throw UnificationError(show(zonk(a)), show(zonk(b)), sp,
                           a->k == SType::K::Arrow ? "a function is not a base value"
                                                   : "a base value is not a function");
  }

  STypeP record(const SrcP& m, STypeP t) {
    table_.node[m.get()] = t;
    return t;
  }

  STypeP lookup(const Env& env, const std::string& x, Span sp) {
    auto it = env.find(x);
    if (it == env.end()) throw UnboundVarError(x, sp);
    return it->second;
  }

  STypeP infer(const Env& env, const SrcP& m) {
    switch (m->k) {
      case SourceTerm::K::Const:
        switch (m->c.k) {
          case Constant::K::Int: return record(m, st_base(Sort::Int));
          case Constant::K::Bool: return record(m, st_base(Sort::Bool));
          case Constant::K::IntList: return record(m, st_base(Sort::IntList));
          default: throw InternalError("constant kind outside the source language");
        }
      case SourceTerm::K::Var:
        return record(m, lookup(env, m->var, m->span));
      case SourceTerm::K::Lam: {
        STypeP a = m->ty ? erase_type(*m->ty) : fresh();
        Env env2 = env;
        env2[m->var] = a;
        STypeP b = infer(env2, m->m1);
        return record(m, st_arrow(a, b));
      }
      case SourceTerm::K::App: {
        STypeP tf = infer(env, m->m1);
        STypeP ta = lookup(env, m->var, m->span);
        STypeP r = fresh();
        unify(tf, st_arrow(ta, r), m->span);
        return record(m, r);
      }
      case SourceTerm::K::Annot: {
        STypeP want = erase_type(*m->ty);
        STypeP got = infer(env, m->m1);
        unify(got, want, m->span);
        return record(m, want);
      }
      case SourceTerm::K::Let: {
        STypeP t1 = infer(env, m->m1);
        Env env2 = env;
        env2[m->var] = t1;
        return record(m, infer(env2, m->m2));
      }
      case SourceTerm::K::Fix: {
        // The recursive binder gets its declared erasure when one is given.
        STypeP tf = m->ty ? erase_type(*m->ty) : st_arrow(fresh(), fresh());
        if (tf->k != SType::K::Arrow)
          throw UnificationError(show(tf), "_ -> _", m->span, "a recursive binding must be a function");
        Env env2 = env;
        env2[m->var] = tf;
        env2[m->var2] = tf->dom;
        STypeP tb = infer(env2, m->m1);
        unify(tb, tf->cod, m->span);
        return record(m, tf);
      }
      case SourceTerm::K::If: {
        STypeP tc = lookup(env, m->var, m->span);
        unify(tc, st_base(Sort::Bool), m->span);
        STypeP t1 = infer(env, m->m1);
        STypeP t2 = infer(env, m->m2);
        unify(t1, t2, m->span);
        return record(m, t1);
      }
    }
    throw InternalError("unreachable term kind");
  }

  // Zonk every recorded type; default residual variables to int, warning once
  // per variable in source order so output is deterministic.
  void finalize(const Program& p) {
    std::set<int> warned;
    for (const auto& l : p.lets) finalize_node(l.rhs, warned);
    finalize_node(p.main, warned);
    for (auto& [name, t] : table_.top) t = default_vars(zonk(t), nullptr, Span{}, nullptr);
  }

  void finalize_node(const SrcP& m, std::set<int>& warned) {
    auto it = table_.node.find(m.get());
    if (it != table_.node.end())
      it->second = default_vars(zonk(it->second), &warned, m->span, &table_.warnings);
    switch (m->k) {
      case SourceTerm::K::Const:
      case SourceTerm::K::Var: break;
      case SourceTerm::K::Lam:
      case SourceTerm::K::Annot:
      case SourceTerm::K::App:
      case SourceTerm::K::Fix: finalize_node(m->m1, warned); break;
      case SourceTerm::K::Let:
      case SourceTerm::K::If:
        finalize_node(m->m1, warned);
        finalize_node(m->m2, warned);
        break;
    }
  }

  static STypeP default_vars(const STypeP& t, std::set<int>* warned, Span sp,
                             std::vector<Diagnostic>* out) {
    switch (t->k) {
      case SType::K::Base: return t;
      case SType::K::Var: {
        if (warned && out && warned->insert(t->id).second)
          out->push_back(Diagnostic{"warning", "types/defaulted", sp,
                                    "unconstrained type defaulted to int"});
        return st_base(Sort::Int);
      }
      case SType::K::Arrow:
        return st_arrow(default_vars(t->dom, warned, sp, out),
                        default_vars(t->cod, warned, sp, out));
    }
    return t;
  }
};

inline STypeTable infer_simple(const Program& p, const std::vector<StubDecl>& stubs) {
  return SimpleInfer::run(p, stubs);
}

}  // namespace graten
