#pragma once

// Phase 3: translate an inferred source program into the target language,
// inserting runtime assertions exactly where subtyping could not be settled
// statically.
//
// The pieces, in order:
//   - subtype:            three-valued declarative subtyping over refinement
//                         types (Valid / Invalid / Unknown), quantifying over
//                         the base-sorted environment prefix.
//   - consistent_subtype: builds a cast function between two types of the
//                         same erasure. When the subtyping is Valid the cast
//                         is trivial (all assertions literally true); when no
//                         common value can inhabit both sides the cast is
//                         rejected outright; otherwise the target refinement
//                         is asserted at runtime.
//   - elaborate:          the syntax-directed translation. Casts are inserted
//                         at application arguments, annotations, branch joins
//                         and escaping let results; everything else is
//                         structural.
//   - erase_trivial_asserts: drops assertions that are literally true or
//                         provable from the ambient environment and path.
//   - check_target:       an independent bottom-up re-checker for target
//                         terms; elaborated programs must pass it at their
//                         reported types.
//   - emit_term / emit_program: deterministic pretty-printer for elaborated
//                         programs.

#include "graten/infer.hpp"

namespace graten {

// ---- errors ------------------------------------------------------------------

// A cast whose source and target refinements exclude each other: no value
// could ever pass the inserted assertion, so the program is rejected
// statically.
struct RejectedCast : std::runtime_error {
  Span span;
  std::string site;
  RejectedCast(Span sp, std::string site_, const std::string& what)
      : std::runtime_error(what), span(sp), site(std::move(site_)) {}
};

// A target term that does not re-check: the rule field names the typing rule
// whose premise failed.
struct TargetTypeError : std::runtime_error {
  std::string rule;
  Span span;
  TargetTypeError(std::string rule_, Span sp, const std::string& what)
      : std::runtime_error(rule_ + ": " + what), rule(std::move(rule_)), span(sp) {}
};

// ---- subtyping -----------------------------------------------------------------

inline Validity subtype(Solver& s, const TypeEnv& g, const PredP& path, const RTypeP& t1,
                        const RTypeP& t2);

namespace detail_elab {

// A binder name usable for both sides of a base comparison without capturing
// environment variables or either predicate's free variables.
inline std::string common_binder(const std::string& prefer, const TypeEnv& g, const RTypeP& t1,
                                 const RTypeP& t2) {
  std::set<std::string> avoid = g.names();
  auto add = [&](const RTypeP& t) {
    auto f = fv_type(t);  // free variables exclude the type's own binder
    avoid.insert(f.begin(), f.end());
  };
  add(t1);
  add(t2);
  return fresh_avoid(prefer, avoid);
}

inline PredP pred_at(const RTypeP& t, const std::string& b) {
  if (t->binder == b) return t->pred;
  return subst(t->pred, rename1(t->base, t->binder, b));
}

inline Validity join_validity(Validity a, Validity b) {
  if (a == Validity::Invalid || b == Validity::Invalid) return Validity::Invalid;
  if (a == Validity::Valid && b == Validity::Valid) return Validity::Valid;
  return Validity::Unknown;
}

}  // namespace detail_elab

inline Validity subtype(Solver& s, const TypeEnv& g, const PredP& path, const RTypeP& t1,
                        const RTypeP& t2) {
  if (!erasure_equal(t1, t2))
    throw InternalError("subtype on types with different erasures: " + show_erasure(t1) +
                        " vs " + show_erasure(t2));
  if (t1->k == RType::K::Base) {
    std::string b = detail_elab::common_binder(t1->binder, g, t1, t2);
    SortEnv prefix = g.st();
    prefix[b] = t1->base;
    PredP hyp = pr_and(pr_and(g.refine(), path), detail_elab::pred_at(t1, b));
    return s.check_validity(prefix, hyp, detail_elab::pred_at(t2, b)).verdict;
  }
  // Functions: contravariant domains, codomains under the target's domain.
  Validity dv = subtype(s, g, path, t2->dom, t1->dom);
  if (dv == Validity::Invalid) return Validity::Invalid;
  std::string x = detail_elab::common_binder(t1->binder, g, t1, t2);
  RTypeP r1 = rename_binder(t1, x), r2 = rename_binder(t2, x);
  Validity cv = subtype(s, g.extended(x, r2->dom), path, r1->cod, r2->cod);
  return detail_elab::join_validity(dv, cv);
}

// ---- consistent subtyping (cast construction) -----------------------------------

// The coercion from t1 to t2, as a function value of type t1 -> t2. `trivial`
// means every assertion inside is literally true; such casts are never
// inserted by the elaborator.
struct CastResult {
  ValueP fn;
  bool trivial = true;
};

// Administrative beta step: apply a cast function to a value by substituting
// into its body. Keeps elaborated programs free of literal redexes.
inline TermP apply_cast(const ValueP& castfn, const ValueP& arg) {
  if (castfn->k != Value::K::Lam) throw InternalError("cast is not a function value");
  return subst_term(castfn->body, castfn->x, arg, binder_sort(castfn->ty));
}

inline CastResult consistent_subtype(Solver& s, NameSupply& names, const TypeEnv& g,
                                     const PredP& path, const RTypeP& t1, const RTypeP& t2,
                                     Span sp, const std::string& site) {
  if (!erasure_equal(t1, t2))
    throw RejectedCast(sp, site,
                       "cannot cast between erasures " + show_erasure(t1) + " and " +
                           show_erasure(t2));
  Validity whole = subtype(s, g, path, t1, t2);
  if (t1->k == RType::K::Base) {
    std::string b = detail_elab::common_binder(t1->binder, g, t1, t2);
    PredP want = pr_true();
    if (whole != Validity::Valid) {
      SortEnv prefix = g.st();
      prefix[b] = t1->base;
      PredP conj = pr_and(pr_and(pr_and(g.refine(), path), detail_elab::pred_at(t1, b)),
                          detail_elab::pred_at(t2, b));
      if (s.check_sat(prefix, conj).verdict == Sat3::Unsat)
        throw RejectedCast(sp, site,
                           "no value satisfies both " + show(t1) + " and " + show(t2) +
                               " in this context");
      want = detail_elab::pred_at(t2, b);
    }
    ValueP fn = v_lam(b, t1, t_assert(want, t_val(v_var(b)), sp));
    return {fn, whole == Validity::Valid};
  }
  // Functions are cast by wrapping: incoming arguments are coerced into the
  // source domain, results out of the source codomain.
  std::string f = names.fresh("_c");
  std::string x = detail_elab::common_binder(t1->binder, g, t1, t2);
  RTypeP r1 = rename_binder(t1, x), r2 = rename_binder(t2, x);
  CastResult domc = consistent_subtype(s, names, g, path, r2->dom, r1->dom, sp, site);
  RTypeP met = meet(r1->dom, r2->dom);
  TypeEnv g2 = g.extended(x, met);
  CastResult codc = consistent_subtype(s, names, g2, path, r1->cod, r2->cod, sp, site);
  std::string y = names.fresh("_c");
  std::string z = names.fresh("_c");
  RTypeP zty = r1->dom->k == RType::K::Base
                   ? subst_type(r1->cod, rename1(r1->dom->base, x, y))
                   : r1->cod;
  TermP body = t_let(y, met, apply_cast(domc.fn, v_var(x)),
                     t_let(z, zty, t_app(t_val(v_var(f)), v_var(y)),
                           apply_cast(codc.fn, v_var(z)), sp),
                     sp);
  ValueP fn = v_lam(f, t1, t_val(v_lam(x, r2->dom, body)));
  return {fn, domc.trivial && codc.trivial};
}

// ---- assertion erasure -----------------------------------------------------------

namespace detail_elab {

inline PredP cond_pred_of(const ValueP& v) {
  if (v->k == Value::K::Var) return pr_bvar(v->var);
  if (v->k == Value::K::Const && v->c.k == Constant::K::Bool)
    return v->c.b ? pr_true() : pr_false();
  return pr_true();  // unreachable in well-sorted terms
}

inline bool provable(Solver& s, const TypeEnv& g, const PredP& path, const PredP& p) {
  if (p->k == Pred::K::True) return true;
  return s.check_validity(g.st(), pr_and(g.refine(), path), p).verdict == Validity::Valid;
}

// Shared walk for erasure and post-elaboration tidying. `tidy` additionally
// collapses administrative lets introduced by cast insertion (binders with
// the reserved "_c" prefix).
inline TermP clean_term(Solver& s, const TypeEnv& g, const PredP& path, const TermP& n, bool tidy);

inline ValueP clean_value(Solver& s, const TypeEnv& g, const PredP& path, const ValueP& v,
                          bool tidy) {
  switch (v->k) {
    case Value::K::Const: {
      if (v->c.k != Constant::K::Prim || v->c.args.empty()) return v;
      auto copy = std::make_shared<Value>(*v);
      for (auto& a : copy->c.args) a = clean_value(s, g, path, a, tidy);
      return copy;
    }
    case Value::K::Var: return v;
    case Value::K::Lam: {
      TypeEnv g2 = v->ty ? g.extended(v->x, v->ty) : g;
      return v_lam(v->x, v->ty, clean_term(s, g2, path, v->body, tidy));
    }
    case Value::K::Fix: {
      TypeEnv g2 = g;
      if (v->ty) {
        g2 = g2.extended(v->f, v->ty);
        if (v->ty->k == RType::K::Fun) {
          RTypeP r = v->ty->binder == v->x ? v->ty : rename_binder(v->ty, v->x);
          g2 = g2.extended(v->x, r->dom);
        }
      }
      return v_fix(v->f, v->ty, v->x, clean_term(s, g2, path, v->body, tidy));
    }
  }
  return v;
}

inline TermP clean_term(Solver& s, const TypeEnv& g, const PredP& path, const TermP& n,
                        bool tidy) {
  switch (n->k) {
    case TargetTerm::K::Val: return t_val(clean_value(s, g, path, n->v, tidy));
    case TargetTerm::K::App:
      return t_app(clean_term(s, g, path, n->n1, tidy), clean_value(s, g, path, n->v, tidy));
    case TargetTerm::K::Assert: {
      if (provable(s, g, path, n->pred)) return clean_term(s, g, path, n->n1, tidy);
      return t_assert(n->pred, clean_term(s, g, pr_and(path, n->pred), n->n1, tidy), n->span);
    }
    case TargetTerm::K::If: {
      PredP pc = cond_pred_of(n->v);
      return t_if(n->v, clean_term(s, g, pr_and(path, pc), n->n1, tidy),
                  clean_term(s, g, pr_and(path, pr_not(pc)), n->n2, tidy));
    }
    case TargetTerm::K::Let: {
      TermP rhs = clean_term(s, g, path, n->n1, tidy);
      TypeEnv g2 = n->ty ? g.extended(n->x, n->ty) : g;
      TermP body = clean_term(s, g2, path, n->n2, tidy);
      if (tidy && n->x.rfind("_c", 0) == 0) {
        if (rhs->k == TargetTerm::K::Val)
          return subst_term(body, n->x, rhs->v, binder_sort(n->ty));
        if (body->k == TargetTerm::K::Val && body->v->k == Value::K::Var &&
            body->v->var == n->x)
          return rhs;
      }
      return t_let(n->x, n->ty, rhs, body, n->span);
    }
  }
  return n;
}

}  // namespace detail_elab

// Remove assertions that are literally true or provable from the environment
// refinements and the path condition. Never removes anything else.
inline TermP erase_trivial_asserts(Solver& s, const TypeEnv& g, const PredP& path,
                                   const TermP& n) {
  return detail_elab::clean_term(s, g, path, n, /*tidy=*/false);
}

// ---- elaboration ------------------------------------------------------------------

struct ElabOptions {
  bool tidy = true;  // erase trivial assertions and collapse cast temporaries
};

struct ElabResult {
  std::vector<std::pair<std::string, TermP>> tops;  // elaborated top-level bindings
  TermP main;                                       // elaborated final expression
  TermP program;                                    // the whole program as nested lets
  RTypeP main_type;
  std::map<std::string, RTypeP> top_types;
};

class Elaborator {
 public:
  Elaborator(const Program& p, const std::vector<StubDecl>& stubs, const InferResult& inf,
             ElabOptions opt)
      : p_(p), inf_(inf), opt_(opt) {
    for (const auto& d : stubs) stubs_.emplace(d.name, d);
  }

  ElabResult run() {
    ElabResult r;
    TypeEnv env;
    for (const auto& l : p_.lets) {
      TermP n = go(l.rhs, env, pr_true());
      if (opt_.tidy) n = detail_elab::clean_term(solver_, env, pr_true(), n, true);
      RTypeP t = inf_.top.at(l.name);
      r.tops.emplace_back(l.name, n);
      r.top_types.emplace(l.name, t);
      env = env.extended(l.name, t);
    }
    TermP m = go(p_.main, env, pr_true());
    if (opt_.tidy) m = detail_elab::clean_term(solver_, env, pr_true(), m, true);
    r.main = m;
    r.main_type = inf_.main_type;
    TermP prog = m;
    for (auto it = r.tops.rbegin(); it != r.tops.rend(); ++it)
      prog = t_let(it->first, r.top_types.at(it->first), it->second, prog);
    r.program = prog;
    return r;
  }

 private:
  TermP go(const SrcP& m, const TypeEnv& env, const PredP& path) {
    switch (m->k) {
      case SourceTerm::K::Const: return t_val(const_value(m->c));
      case SourceTerm::K::Var: return t_val(occurrence(m->var, env));

      case SourceTerm::K::Lam: {
        RTypeP dom = inf_.binder_type(m);
        return t_val(v_lam(m->var, dom, go(m->m1, env.extended(m->var, dom), path)));
      }

      case SourceTerm::K::Fix: {
        RTypeP tf = inf_.binder_type(m);
        RTypeP tfr = tf->binder == m->var2 ? tf : rename_binder(tf, m->var2);
        TypeEnv env2 = env.extended(m->var, tf).extended(m->var2, tfr->dom);
        TermP body = go(m->m1, env2, path);
        body = coerce(body, inf_.node_type(m->m1), tfr->cod, env2, path, m->span,
                      "recursive function body");
        return t_val(v_fix(m->var, tf, m->var2, body));
      }

      case SourceTerm::K::App: {
        TermP fn = go(m->m1, env, path);
        RTypeP tf = inf_.node_type(m->m1);
        if (tf->k != RType::K::Fun)
          throw InternalError("application of a non-function type: " + show(tf));
        RTypeP ta = occurrence_type(m->var, env);
        CastResult c = consistent_subtype(solver_, names_, env, path, ta, tf->dom, m->span,
                                          "application argument");
        ValueP av = occurrence(m->var, env);
        if (c.trivial) return t_app(fn, av);
        TermP casted = apply_cast(c.fn, av);
        std::set<std::string> ff;
        fv_term(fn, ff);
        bool rebind = av->k == Value::K::Var && !ff.count(m->var);
        std::string b = rebind ? m->var : names_.fresh("_c");
        return t_let(b, tf->dom, casted, t_app(fn, v_var(b)), m->span);
      }

      case SourceTerm::K::Annot: {
        TermP n = go(m->m1, env, path);
        return coerce(n, inf_.node_type(m->m1), *m->ty, env, path, m->span, "annotation");
      }

      case SourceTerm::K::Let: {
        RTypeP t1 = inf_.binder_type(m);
        TermP n1 = go(m->m1, env, path);
        TypeEnv env2 = env.extended(m->var, t1);
        TermP n2 = go(m->m2, env2, path);
        RTypeP t2 = inf_.node_type(m->m2);
        if (fv_type(t2).count(m->var)) {
          RTypeP tex = inf_.node_type(m);
          if (fv_type(tex).count(m->var))
            throw WfError(show(tex), "let-bound variable escapes its scope in the result type");
          n2 = coerce(n2, t2, tex, env2, path, m->span, "let result");
        }
        return t_let(m->var, t1, n1, n2, m->span);
      }

      case SourceTerm::K::If: {
        RTypeP tj = inf_.node_type(m);
        PredP pc = pr_bvar(m->var);
        PredP pt = pr_and(path, pc), pe = pr_and(path, pr_not(pc));
        TermP n1 = coerce(go(m->m1, env, pt), inf_.node_type(m->m1), tj, env, pt, m->m1->span,
                          "branch join");
        TermP n2 = coerce(go(m->m2, env, pe), inf_.node_type(m->m2), tj, env, pe, m->m2->span,
                          "branch join");
        return t_if(v_var(m->var), n1, n2);
      }
    }
    throw InternalError("unreachable source-term kind");
  }

  // Wrap n (of type `from`) so that its result has type `to`, inserting an
  // assertion only when the subtyping is not settled statically.
  TermP coerce(TermP n, const RTypeP& from, const RTypeP& to, const TypeEnv& env,
               const PredP& path, Span sp, const std::string& site) {
    if (alpha_equal(from, to)) return n;
    CastResult c = consistent_subtype(solver_, names_, env, path, from, to, sp, site);
    if (c.trivial) return n;
    std::string b = names_.fresh("_c");
    return t_let(b, from, std::move(n), apply_cast(c.fn, v_var(b)), sp);
  }

  static ValueP const_value(const Constant& c) {
    switch (c.k) {
      case Constant::K::Int: return v_int(c.i);
      case Constant::K::Bool: return v_bool(c.b);
      case Constant::K::IntList: return v_list(c.list);
      case Constant::K::Prim:
      case Constant::K::Tensor: break;
    }
    throw InternalError("constant kind outside source programs");
  }

  ValueP occurrence(const std::string& x, const TypeEnv& env) const {
    if (env.lookup(x)) return v_var(x);
    if (stubs_.count(x)) return v_prim(x);
    throw InternalError("unbound variable '" + x + "' during elaboration");
  }

  RTypeP occurrence_type(const std::string& x, const TypeEnv& env) const {
    if (auto t = env.lookup(x)) return (*t)->k == RType::K::Fun ? *t : selfify(x, *t);
    auto it = stubs_.find(x);
    if (it != stubs_.end()) return default_stub_type(it->second);
    throw InternalError("unbound variable '" + x + "' during elaboration");
  }

  const Program& p_;
  const InferResult& inf_;
  ElabOptions opt_;
  std::map<std::string, StubDecl> stubs_;
  Solver solver_;
  NameSupply names_;

 public:
  // A stub type usable without per-occurrence inference: unknown predicate
  // parameters default to true (dynamic trust), value parameters must have
  // been instantiated earlier.
  static RTypeP default_stub_type(const StubDecl& d) {
    if (!d.value_params.empty())
      throw InternalError("stub '" + d.name + "' quantifies value parameters; instantiate first");
    RTypeP t = d.ty;
    for (const auto& b : d.pred_params) {
      Subst m;
      m.emplace(b, SubstVal{pr_true()});
      t = subst_type(t, m);
    }
    return t;
  }
};

inline ElabResult elaborate(const Program& p, const std::vector<StubDecl>& stubs,
                            const InferResult& inf, ElabOptions opt = {}) {
  return Elaborator(p, stubs, inf, opt).run();
}

inline ElabResult elaborate(const Program& p, const std::vector<StubDecl>& stubs,
                            ElabOptions opt = {}) {
  InferResult inf = infer_refinements(p, stubs);
  return Elaborator(p, stubs, inf, opt).run();
}

// ---- target re-checking --------------------------------------------------------

// Bottom-up reconstruction of target-term types. All subtyping obligations
// must come out Valid; assertion predicates extend the path condition before
// their continuation is examined, so inserted casts are exactly what makes
// the obligations provable.
class TargetChecker {
 public:
  TargetChecker(Solver& s, std::map<std::string, StubDecl> stubs)
      : s_(s), stubs_(std::move(stubs)) {}

  RTypeP synth(const TypeEnv& g, const PredP& path, const TermP& n) {
    switch (n->k) {
      case TargetTerm::K::Val: return value_type(g, path, n->v);

      case TargetTerm::K::App: {
        RTypeP tf = synth(g, path, n->n1);
        if (tf->k != RType::K::Fun)
          throw TargetTypeError("CT-App", n->span, "application of a non-function: " + show(tf));
        check_value(g, path, n->v, tf->dom);
        return app_result(g, tf, n->v);
      }

      case TargetTerm::K::Let: {
        check(g, path, n->n1, n->ty);
        TypeEnv g2 = g.extended(n->x, n->ty);
        RTypeP t2 = synth(g2, path, n->n2);
        if (fv_type(t2).count(n->x)) t2 = eliminate(g, g2, path, n, t2);
        return t2;
      }

      case TargetTerm::K::If: {
        PredP pc = cond_pred(g, n->v);
        RTypeP tt = synth(g, pr_and(path, pc), n->n1);
        RTypeP te = synth(g, pr_and(path, pr_not(pc)), n->n2);
        if (alpha_equal(tt, te)) return tt;
        if (try_sub(g, pr_and(path, pc), tt, te)) return te;
        if (try_sub(g, pr_and(path, pr_not(pc)), te, tt)) return tt;
        throw TargetTypeError("CT-If", n->span,
                              "branch types do not join: " + show(tt) + " vs " + show(te));
      }

      case TargetTerm::K::Assert: return synth(g, pr_and(path, n->pred), n->n1);
    }
    throw InternalError("unreachable target-term kind");
  }

  void check(const TypeEnv& g, const PredP& path, const TermP& n, const RTypeP& want) {
    switch (n->k) {
      case TargetTerm::K::Assert:
        check(g, pr_and(path, n->pred), n->n1, want);
        return;
      case TargetTerm::K::Let: {
        check(g, path, n->n1, n->ty);
        check(g.extended(n->x, n->ty), path, n->n2, want);
        return;
      }
      case TargetTerm::K::If: {
        PredP pc = cond_pred(g, n->v);
        check(g, pr_and(path, pc), n->n1, want);
        check(g, pr_and(path, pr_not(pc)), n->n2, want);
        return;
      }
      case TargetTerm::K::Val:
        if (n->v->k == Value::K::Lam && want->k == RType::K::Fun) {
          check_lam(g, path, n->v, want);
          return;
        }
        break;
      default: break;
    }
    RTypeP got = synth(g, path, n);
    require_sub(g, path, got, want, "CT-Sub", n->span);
  }

  RTypeP value_type(const TypeEnv& g, const PredP& path, const ValueP& v) {
    switch (v->k) {
      case Value::K::Const: return const_type(g, path, v->c);
      case Value::K::Var: {
        if (auto t = g.lookup(v->var))
          return (*t)->k == RType::K::Fun ? *t : selfify(v->var, *t);
        auto it = stubs_.find(v->var);
        if (it != stubs_.end()) return Elaborator::default_stub_type(it->second);
        throw TargetTypeError("CT-Var", Span{}, "unbound variable '" + v->var + "'");
      }
      case Value::K::Lam: {
        if (!v->ty) throw TargetTypeError("CT-Lam", Span{}, "unannotated function binder");
        RTypeP cod = synth(g.extended(v->x, v->ty), path, v->body);
        return rt_fun(v->x, v->ty, cod);
      }
      case Value::K::Fix: {
        if (!v->ty || v->ty->k != RType::K::Fun)
          throw TargetTypeError("CT-Fix", Span{}, "recursive binding needs a function type");
        RTypeP r = v->ty->binder == v->x ? v->ty : rename_binder(v->ty, v->x);
        check(g.extended(v->f, v->ty).extended(v->x, r->dom), path, v->body, r->cod);
        return v->ty;
      }
    }
    throw InternalError("unreachable value kind");
  }

 private:
  RTypeP const_type(const TypeEnv& g, const PredP& path, const Constant& c) {
    switch (c.k) {
      case Constant::K::Int: return rt_base("v", Sort::Int, pr_eq_sz(sz_var("v"), sz_lit(c.i)));
      case Constant::K::Bool:
        return rt_base("v", Sort::Bool, c.b ? pr_bvar("v") : pr_not(pr_bvar("v")));
      case Constant::K::IntList:
        return rt_base("v", Sort::IntList, pr_eq_sh(sh_var("v"), sh_lit_ints(c.list)));
      case Constant::K::Tensor:
        return rt_base("v", Sort::Tensor,
                       pr_eq_sh(sh_shape_of("v"), sh_lit_ints(c.tshape)));
      case Constant::K::Prim: {
        auto it = stubs_.find(c.prim);
        if (it == stubs_.end())
          throw TargetTypeError("CT-Con", Span{}, "unknown primitive '" + c.prim + "'");
        RTypeP t = Elaborator::default_stub_type(it->second);
        for (const auto& a : c.args) {
          if (t->k != RType::K::Fun)
            throw TargetTypeError("CT-App", Span{},
                                  "primitive '" + c.prim + "' applied to too many arguments");
          check_value(g, path, a, t->dom);
          t = app_result(g, t, a);
        }
        return t;
      }
    }
    throw InternalError("unreachable constant kind");
  }

  void check_value(const TypeEnv& g, const PredP& path, const ValueP& v, const RTypeP& want) {
    if ((v->k == Value::K::Lam || v->k == Value::K::Fix) && want->k == RType::K::Fun) {
      check(g, path, t_val(v), want);
      return;
    }
    RTypeP got = value_type(g, path, v);
    require_sub(g, path, got, want, "CT-Sub", Span{});
  }

  void check_lam(const TypeEnv& g, const PredP& path, const ValueP& v, const RTypeP& want) {
    if (!v->ty) throw TargetTypeError("CT-Lam", Span{}, "unannotated function binder");
    std::string x = v->x;
    TermP body = v->body;
    auto wf = fv_type(want);
    if (wf.count(x)) {
      std::set<std::string> avoid = wf;
      auto gn = g.names();
      avoid.insert(gn.begin(), gn.end());
      std::string nx = fresh_avoid(x, avoid);
      body = rename_term_var(body, x, nx, binder_sort(v->ty));
      x = nx;
    }
    RTypeP w = want->binder == x ? want : rename_binder(want, x);
    require_sub(g, path, w->dom, v->ty, "CT-Lam", Span{});
    check(g.extended(x, v->ty), path, body, w->cod);
  }

  RTypeP app_result(const TypeEnv& g, const RTypeP& tf, const ValueP& arg) {
    (void)g;
    if (tf->dom->k != RType::K::Base) return tf->cod;  // function binders never occur in types
    if (arg->k == Value::K::Var)
      return subst_type(tf->cod, rename1(tf->dom->base, tf->binder, arg->var));
    auto img = pred_image(arg);
    if (img) {
      Subst m;
      m.emplace(tf->binder, *img);
      return subst_type(tf->cod, m);
    }
    if (fv_type(tf->cod).count(tf->binder))
      throw TargetTypeError("CT-App", Span{},
                            "cannot substitute this argument into a dependent result type");
    return tf->cod;
  }

  PredP cond_pred(const TypeEnv& g, const ValueP& v) {
    if (v->k == Value::K::Var) {
      auto t = g.lookup(v->var);
      if (!t || (*t)->k != RType::K::Base || (*t)->base != Sort::Bool)
        throw TargetTypeError("CT-If", Span{}, "condition '" + v->var + "' is not a boolean");
      return pr_bvar(v->var);
    }
    if (v->k == Value::K::Const && v->c.k == Constant::K::Bool)
      return v->c.b ? pr_true() : pr_false();
    throw TargetTypeError("CT-If", Span{}, "condition is not a boolean value");
  }

  // The synthesized type of a let body mentions the bound variable; produce
  // an equal or weaker type over the outer scope.
  RTypeP eliminate(const TypeEnv& g, const TypeEnv& g2, const PredP& path, const TermP& n,
                   RTypeP t2) {
    Sort xs = binder_sort(n->ty);
    RTypeP rs = synth(g, path, n->n1);
    if (auto u = var_singleton(rs)) {
      if (*u != n->x) t2 = subst_type(t2, rename1(xs, n->x, *u));
    }
    if (fv_type(t2).count(n->x)) {
      if (auto img = lit_image(rs)) {
        Subst m;
        m.emplace(n->x, *img);
        t2 = subst_type(t2, m);
      }
    }
    if (fv_type(t2).count(n->x) && t2->k == RType::K::Base) {
      RTypeP self = selfify(n->x, rt_base(t2->binder, t2->base, pr_true()));
      if (equal(t2->pred, self->pred)) {
        // Widen the selfified type by every contextual fact about the binder.
        PredP out = pr_true();
        Subst ren = rename1(xs, n->x, t2->binder);
        for (const auto& c : conjuncts(pr_and(g2.refine(), path)))
          if (fv_pred(c).count(n->x)) out = pr_and(out, subst(c, ren));
        t2 = rt_base(t2->binder, t2->base, out);
      }
    }
    if (fv_type(t2).count(n->x))
      throw TargetTypeError("CT-Let", n->span,
                            "bound variable '" + n->x + "' escapes in type " + show(t2));
    return t2;
  }

  // Matches the selfified type of a variable occurrence: {b | b == u} at the
  // appropriate sort. Returns the referenced variable.
  static std::optional<std::string> var_singleton(const RTypeP& t) {
    if (t->k != RType::K::Base) return std::nullopt;
    const PredP& p = t->pred;
    const std::string& b = t->binder;
    auto other = [&](const std::string& l, const std::string& r) -> std::optional<std::string> {
      if (l == b && r != b) return r;
      if (r == b && l != b) return l;
      return std::nullopt;
    };
    switch (t->base) {
      case Sort::Int:
        if (p->k == Pred::K::EqSz && p->s1->k == Size::K::Var && p->s2->k == Size::K::Var)
          return other(p->s1->var, p->s2->var);
        return std::nullopt;
      case Sort::IntList:
        if (p->k == Pred::K::EqSh && p->sh1->k == Shape::K::Var && p->sh2->k == Shape::K::Var)
          return other(p->sh1->var, p->sh2->var);
        return std::nullopt;
      case Sort::Tensor:
        if (p->k == Pred::K::EqSh && p->sh1->k == Shape::K::ShapeOf &&
            p->sh2->k == Shape::K::ShapeOf)
          return other(p->sh1->var, p->sh2->var);
        return std::nullopt;
      case Sort::Bool: {
        RTypeP self = selfify("$u", rt_base(b, Sort::Bool, pr_true()));
        (void)self;
        // (v && u) || (not v && not u): match structurally.
        if (p->k != Pred::K::Or || p->p1->k != Pred::K::And || p->p2->k != Pred::K::And)
          return std::nullopt;
        const PredP& a1 = p->p1->p1;
        const PredP& a2 = p->p1->p2;
        if (a1->k != Pred::K::BVar || a2->k != Pred::K::BVar) return std::nullopt;
        return other(a1->var, a2->var);
      }
    }
    return std::nullopt;
  }

  // Matches a literal singleton: {b | b == literal}. Returns the value image.
  static std::optional<SubstVal> lit_image(const RTypeP& t) {
    if (t->k != RType::K::Base) return std::nullopt;
    const PredP& p = t->pred;
    const std::string& b = t->binder;
    auto lit_side = [&](const auto& l, const auto& r, auto isvar,
                        auto islit) -> std::optional<SubstVal> {
      if (isvar(l) && islit(r)) return SubstVal{r};
      if (isvar(r) && islit(l)) return SubstVal{l};
      return std::nullopt;
    };
    switch (t->base) {
      case Sort::Int:
        if (p->k == Pred::K::EqSz)
          return lit_side(
              p->s1, p->s2, [&](const SizeP& s) { return s->k == Size::K::Var && s->var == b; },
              [](const SizeP& s) { return s->k == Size::K::Lit; });
        return std::nullopt;
      case Sort::IntList:
        if (p->k == Pred::K::EqSh)
          return lit_side(
              p->sh1, p->sh2,
              [&](const ShapeP& s) { return s->k == Shape::K::Var && s->var == b; },
              [](const ShapeP& s) {
                if (s->k != Shape::K::Lit) return false;
                for (const auto& e : s->elems)
                  if (e->k != Size::K::Lit) return false;
                return true;
              });
        return std::nullopt;
      case Sort::Tensor:
        if (p->k == Pred::K::EqSh) {
          auto tensor_side = [&](const ShapeP& vs, const ShapeP& ls) -> std::optional<SubstVal> {
            if (vs->k != Shape::K::ShapeOf || vs->var != b || ls->k != Shape::K::Lit)
              return std::nullopt;
            std::vector<long long> dims;
            for (const auto& e : ls->elems) {
              if (e->k != Size::K::Lit) return std::nullopt;
              dims.push_back(e->lit);
            }
            return SubstVal{TensorSub{std::nullopt, dims}};
          };
          if (auto r = tensor_side(p->sh1, p->sh2)) return r;
          return tensor_side(p->sh2, p->sh1);
        }
        return std::nullopt;
      case Sort::Bool:
        if (p->k == Pred::K::BVar && p->var == b) return SubstVal{pr_true()};
        if (p->k == Pred::K::Not && p->p1->k == Pred::K::BVar && p->p1->var == b)
          return SubstVal{pr_false()};
        return std::nullopt;
    }
    return std::nullopt;
  }

  bool try_sub(const TypeEnv& g, const PredP& path, const RTypeP& a, const RTypeP& b) {
    if (!erasure_equal(a, b)) return false;
    return subtype(s_, g, path, a, b) == Validity::Valid;
  }

  void require_sub(const TypeEnv& g, const PredP& path, const RTypeP& got, const RTypeP& want,
                   const std::string& rule, Span sp) {
    if (!erasure_equal(got, want))
      throw TargetTypeError(rule, sp,
                            "erasure mismatch: " + show_erasure(got) + " vs " +
                                show_erasure(want));
    Validity v = subtype(s_, g, path, got, want);
    if (v != Validity::Valid)
      throw TargetTypeError(rule, sp,
                            std::string("subtyping not provable (") + validity_name(v) +
                                "): " + show(got) + " <: " + show(want));
  }

  Solver& s_;
  std::map<std::string, StubDecl> stubs_;
};

inline std::map<std::string, StubDecl> stub_map(const std::vector<StubDecl>& stubs) {
  std::map<std::string, StubDecl> m;
  for (const auto& d : stubs) m.emplace(d.name, d);
  return m;
}

inline RTypeP check_target(Solver& s, const std::map<std::string, StubDecl>& stubs,
                           const TypeEnv& g, const PredP& path, const TermP& n) {
  return TargetChecker(s, stubs).synth(g, path, n);
}

inline void check_target_at(Solver& s, const std::map<std::string, StubDecl>& stubs,
                            const TypeEnv& g, const PredP& path, const TermP& n,
                            const RTypeP& want) {
  TargetChecker(s, stubs).check(g, path, n, want);
}

// ---- emission -------------------------------------------------------------------

// Deterministic human-readable form of elaborated programs. Administrative
// lets that merely name a coerced application argument are folded back into
// argument position.
inline std::string emit_term(const TermP& n, int indent = 0);

inline std::string emit_value(const ValueP& v, bool atom, int indent) {
  switch (v->k) {
    case Value::K::Const: {
      std::string s = show_const(v->c);
      bool compound = v->c.k == Constant::K::Prim && !v->c.args.empty();
      return paren_if(atom && compound, s);
    }
    case Value::K::Var: return v->var;
    case Value::K::Lam:
      return paren_if(atom, "fun " + v->x + " -> " + emit_term(v->body, indent));
    case Value::K::Fix:
      return paren_if(atom, "fix " + v->f + " " + v->x + " -> " + emit_term(v->body, indent));
  }
  return "?";
}

inline std::string emit_fn_part(const TermP& fn, int indent) {
  std::string f = emit_term(fn, indent);
  bool simple = fn->k == TargetTerm::K::App ||
                (fn->k == TargetTerm::K::Val &&
                 (fn->v->k == Value::K::Var ||
                  (fn->v->k == Value::K::Const && fn->v->c.args.empty())));
  return simple ? f : "(" + f + ")";
}

inline std::string emit_term(const TermP& n, int indent) {
  switch (n->k) {
    case TargetTerm::K::Val: return emit_value(n->v, false, indent);
    case TargetTerm::K::App:
      return emit_fn_part(n->n1, indent) + " " + emit_value(n->v, true, indent);
    case TargetTerm::K::Let: {
      if (n->n2->k == TargetTerm::K::App && n->n2->v->k == Value::K::Var &&
          n->n2->v->var == n->x) {
        std::set<std::string> ff;
        fv_term(n->n2->n1, ff);
        if (!ff.count(n->x))
          return emit_fn_part(n->n2->n1, indent) + " (" + emit_term(n->n1, indent) + ")";
      }
      return "let " + n->x + " = " + emit_term(n->n1, indent + 1) + " in\n" +
             ind(indent) + emit_term(n->n2, indent);
    }
    case TargetTerm::K::If:
      return "if " + emit_value(n->v, true, indent) + " then " + emit_term(n->n1, indent + 1) +
             " else " + emit_term(n->n2, indent + 1);
    case TargetTerm::K::Assert:
      return "assert (" + show(n->pred, 0) + "); " + emit_term(n->n1, indent);
  }
  return "?";
}

inline std::string emit_program(const ElabResult& r) {
  std::string out;
  for (const auto& [name, term] : r.tops)
    out += "let " + name + " =\n  " + emit_term(term, 1) + "\n\n";
  out += "let _ =\n  " + emit_term(r.main, 1) + "\n";
  return out;
}

}  // namespace graten
