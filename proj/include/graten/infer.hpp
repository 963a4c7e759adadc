#pragma once

// Refinement inference. Runs after simple-type inference and before
// elaboration:
//
//   1. every unannotated binder, branch join and scope-escaping let result
//      receives a template type whose refinement is a fresh predicate
//      variable applied to the variables in scope;
//   2. the bidirectional walk of the program emits subtyping constraints
//      (application arguments, annotations, branch joins, recursive bodies);
//   3. constraints decompose into Horn-style clauses over the refinement
//      logic, and a fixpoint loop assigns each predicate variable a concrete
//      predicate (or `true` when nothing better is known).
//
// The solver is best-effort by design: clauses it cannot discharge are left
// standing and the elaborator turns them into runtime assertions. Solutions
// are only ever strengthened from facts present in the clauses themselves,
// so a solved program never rejects more than the declared types demand.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "graten/logic.hpp"
#include "graten/logic_engine.hpp"
#include "graten/parser.hpp"
#include "graten/simpletypes.hpp"
#include "graten/types.hpp"

namespace graten {

// Raised for user-facing type errors discovered during refinement inference
// (ill-scoped annotations and the like).
struct InferError : std::runtime_error {
  Span span;
  std::string code;
  InferError(std::string code_, Span s, const std::string& msg)
      : std::runtime_error(msg), span(s), code(std::move(code_)) {}
};

// ---- predicate variables ----------------------------------------------------

// Creation-time signature of a predicate variable: the dependency vector
// fixes which in-scope variables a solution may mention (the refinement
// binder is always the last dependency and the sole parameter).
struct PVarInfo {
  std::vector<PVarArg> deps;
  std::vector<PVarArg> params;
  Span span;
  std::string origin;  // "template" | "strengthen" | "stub"
};

class PVarRegistry {
 public:
  int fresh(std::vector<PVarArg> deps, std::vector<PVarArg> params, Span sp, std::string origin) {
    info_.push_back(PVarInfo{std::move(deps), std::move(params), sp, std::move(origin)});
    return static_cast<int>(info_.size()) - 1;
  }

  const PVarInfo& at(int id) const {
    if (id < 0 || id >= count()) throw InternalError("unknown predicate variable id");
    return info_[static_cast<size_t>(id)];
  }

  int count() const { return static_cast<int>(info_.size()); }

  // The variable applied to its own creation arguments.
  PredP occurrence(int id) const {
    const PVarInfo& i = at(id);
    return pr_pvar(id, i.deps, i.params);
  }

 private:
  std::vector<PVarInfo> info_;
};

inline void pvar_ids(const PredP& p, std::set<int>& out) {
  switch (p->k) {
    case Pred::K::PVar: out.insert(p->pvar_id); return;
    case Pred::K::Not: pvar_ids(p->p1, out); return;
    case Pred::K::And:
    case Pred::K::Or:
      pvar_ids(p->p1, out);
      pvar_ids(p->p2, out);
      return;
    default: return;
  }
}

inline void pvar_ids(const RTypeP& t, std::set<int>& out) {
  if (t->k == RType::K::Base) {
    pvar_ids(t->pred, out);
    return;
  }
  pvar_ids(t->dom, out);
  pvar_ids(t->cod, out);
}

// ---- solutions ---------------------------------------------------------------

// Maps solved predicate variables to bodies written over their creation
// arguments. Bodies never mention other solved variables (composition
// rewrites existing entries), so application is a single pass.
struct Solution {
  std::map<int, PredP> body;

  bool solved(int id) const { return body.count(id) != 0; }
};

inline PredP apply_solution(const PVarRegistry& reg, const Solution& th, const PredP& p) {
  if (th.body.empty()) return p;
  switch (p->k) {
    case Pred::K::PVar: {
      auto it = th.body.find(p->pvar_id);
      if (it == th.body.end()) return p;
      const PVarInfo& c = reg.at(p->pvar_id);
      if (c.deps.size() != p->deps.size() || c.params.size() != p->params.size())
        throw InternalError("predicate variable applied with the wrong arity");
      // Positional renaming from creation arguments to occurrence arguments.
      Subst m;
      for (size_t i = 0; i < c.deps.size(); ++i)
        if (c.deps[i].var != p->deps[i].var)
          m.merge(rename1(c.deps[i].sort, c.deps[i].var, p->deps[i].var));
      for (size_t i = 0; i < c.params.size(); ++i)
        if (c.params[i].var != p->params[i].var)
          m.merge(rename1(c.params[i].sort, c.params[i].var, p->params[i].var));
      return subst(it->second, m);
    }
    case Pred::K::Not: return pr_not(apply_solution(reg, th, p->p1));
    case Pred::K::And:
      return pr_and(apply_solution(reg, th, p->p1), apply_solution(reg, th, p->p2));
    case Pred::K::Or:
      return pr_or(apply_solution(reg, th, p->p1), apply_solution(reg, th, p->p2));
    default: return p;
  }
}

inline RTypeP apply_solution(const PVarRegistry& reg, const Solution& th, const RTypeP& t) {
  if (th.body.empty()) return t;
  if (t->k == RType::K::Base) return rt_base(t->binder, t->base, apply_solution(reg, th, t->pred));
  return rt_fun(t->binder, apply_solution(reg, th, t->dom), apply_solution(reg, th, t->cod));
}

inline TypeEnv apply_solution(const PVarRegistry& reg, const Solution& th, const TypeEnv& env) {
  if (th.body.empty()) return env;
  TypeEnv out;
  out.bindings.reserve(env.bindings.size());
  for (const auto& [x, t] : env.bindings) out.bindings.emplace_back(x, apply_solution(reg, th, t));
  return out;
}

// theta := [p -> body] composed with theta. `body` is written over p's
// creation arguments; existing entries are rewritten so no body ever
// mentions a solved variable.
inline void compose_solution(const PVarRegistry& reg, Solution& th, int id, PredP body) {
  if (th.solved(id)) throw InternalError("predicate variable solved twice");
  body = simplify_pred(apply_solution(reg, th, body));
  Solution one;
  one.body.emplace(id, body);
  for (auto& [k, v] : th.body) {
    (void)k;
    v = simplify_pred(apply_solution(reg, one, v));
  }
  th.body.emplace(id, std::move(body));
}

// ---- templates ---------------------------------------------------------------

inline std::vector<PVarArg> dep_args(const TypeEnv& env) {
  std::vector<PVarArg> out;
  for (size_t i : env.live()) {
    const auto& [x, t] = env.bindings[i];
    if (t->k == RType::K::Base) out.push_back(PVarArg{t->base, x});
  }
  return out;
}

// A type of the given simple shape whose every base refinement is a fresh
// predicate variable over `deps` plus the local binder. `first_binder`
// names the outermost argument binder when the caller has one (recursive
// function definitions); inner binders come from the name supply.
inline RTypeP make_template(const STypeP& st, const std::vector<PVarArg>& deps, PVarRegistry& reg,
                            NameSupply& names, Span sp, const std::string& first_binder = "") {
  if (st->k == SType::K::Var)
    throw InternalError("unresolved simple type reached template construction");
  std::set<std::string> used;
  for (const auto& d : deps) used.insert(d.var);
  if (st->k == SType::K::Base) {
    std::string b = fresh_avoid("v", used);
    std::vector<PVarArg> ds = deps;
    ds.push_back(PVarArg{st->base, b});
    std::vector<PVarArg> ps{PVarArg{st->base, b}};
    int id = reg.fresh(ds, ps, sp, "template");
    return rt_base(b, st->base, pr_pvar(id, std::move(ds), std::move(ps)));
  }
  std::string x = first_binder;
  while (x.empty() || used.count(x)) x = names.fresh("_a");
  RTypeP dom = make_template(st->dom, deps, reg, names, sp);
  std::vector<PVarArg> ds = deps;
  if (dom->k == RType::K::Base) ds.push_back(PVarArg{dom->base, x});
  RTypeP cod = make_template(st->cod, ds, reg, names, sp);
  return rt_fun(x, dom, cod);
}

// ---- constraints -------------------------------------------------------------

// One collected subtyping obligation: under `env` and the branch condition
// `path`, `lhs` must be consistently contained in `rhs`.
struct SubConstraint {
  TypeEnv env;
  PredP path;
  RTypeP lhs, rhs;
  Span span;
  std::string site;  // human-readable provenance, e.g. "application argument"
};

inline std::string show(const SubConstraint& c) {
  std::ostringstream os;
  os << "[";
  bool first = true;
  for (size_t i : c.env.live()) {
    const auto& [x, t] = c.env.bindings[i];
    if (!first) os << ", ";
    first = false;
    os << x << ":" << show(t);
  }
  os << "]";
  if (c.path->k != Pred::K::True) os << "; " << show(c.path, 0);
  os << " |- " << show(c.lhs) << " <: " << show(c.rhs) << "  (" << c.site << ")";
  return os.str();
}

// ---- clauses -----------------------------------------------------------------

// ctx /\ lhs => rhs, universally quantified over `prefix`. `ctx` carries the
// environment refinements and path condition, `lhs` the left refinement,
// `rhs` the right refinement (each a list of conjuncts).
struct Clause {
  SortEnv prefix;
  std::vector<PredP> ctx, lhs, rhs;
  Span span;
  std::string site;
  int serial = 0;
};

inline std::string show_members(const std::vector<PredP>& v) {
  if (v.empty()) return "true";
  std::vector<std::string> xs;
  xs.reserve(v.size());
  for (const auto& p : v) xs.push_back(show(p, 0));
  return join(xs, ", ");
}

inline std::string show(const Clause& c) {
  return show_members(c.ctx) + " |- " + show_members(c.lhs) + " => " + show_members(c.rhs);
}

// Normalize a predicate into clause members: simplify, split conjunctions,
// drop `true`, dedupe by print.
inline void push_members(const PredP& p, std::vector<PredP>& out, std::set<std::string>& seen) {
  for (const auto& q : conjuncts(simplify_pred(p))) {
    std::string s = show(q, 0);
    if (seen.insert(s).second) out.push_back(q);
  }
}

namespace detail_infer {

inline void decompose_sub(const TypeEnv& env, const PredP& path, const RTypeP& lhs,
                          const RTypeP& rhs, Span sp, const std::string& site,
                          std::vector<Clause>& out, int& serial) {
  if (lhs->k == RType::K::Base && rhs->k == RType::K::Base) {
    if (lhs->base != rhs->base)
      throw InternalError("subtyping at different base sorts: " + show(lhs) + " vs " + show(rhs));
    std::set<std::string> avoid = env.names();
    std::set<std::string> f;
    fv(lhs->pred, f);
    fv(rhs->pred, f);
    f.erase(lhs->binder);
    f.erase(rhs->binder);
    avoid.insert(f.begin(), f.end());
    std::string z = fresh_avoid(rhs->binder, avoid);
    Clause cl;
    cl.prefix = env.st();
    cl.prefix[z] = lhs->base;
    cl.span = sp;
    cl.site = site;
    cl.serial = serial++;
    std::set<std::string> seen_ctx, seen_lhs, seen_rhs;
    push_members(env.refine(), cl.ctx, seen_ctx);
    push_members(path, cl.ctx, seen_ctx);
    push_members(subst(lhs->pred, rename1(lhs->base, lhs->binder, z)), cl.lhs, seen_lhs);
    push_members(subst(rhs->pred, rename1(rhs->base, rhs->binder, z)), cl.rhs, seen_rhs);
    if (cl.rhs.empty()) return;  // trivially valid
    out.push_back(std::move(cl));
    return;
  }
  if (lhs->k == RType::K::Fun && rhs->k == RType::K::Fun) {
    decompose_sub(env, path, rhs->dom, lhs->dom, sp, site, out, serial);  // contravariant
    std::set<std::string> avoid = env.names();
    auto fl = fv_type(lhs);
    auto fr = fv_type(rhs);
    avoid.insert(fl.begin(), fl.end());
    avoid.insert(fr.begin(), fr.end());
    std::string z = fresh_avoid(rhs->binder, avoid);
    RTypeP lc = lhs->cod;
    if (lhs->dom->k == RType::K::Base && lhs->binder != z)
      lc = subst_type(lc, rename1(lhs->dom->base, lhs->binder, z));
    RTypeP rc = rhs->cod;
    if (rhs->dom->k == RType::K::Base && rhs->binder != z)
      rc = subst_type(rc, rename1(rhs->dom->base, rhs->binder, z));
    decompose_sub(env.extended(z, rhs->dom), path, lc, rc, sp, site, out, serial);
    return;
  }
  throw InternalError("subtyping across different type shapes: " + show(lhs) + " vs " + show(rhs));
}

}  // namespace detail_infer

inline std::vector<Clause> decompose_to_chc(const std::vector<SubConstraint>& cs,
                                            int serial_start = 0) {
  std::vector<Clause> out;
  int serial = serial_start;
  for (const auto& c : cs) detail_infer::decompose_sub(c.env, c.path, c.lhs, c.rhs, c.span, c.site, out, serial);
  return out;
}

// Drop right-hand members that literally appear on the left or that the
// validity engine proves from the predicate-variable-free hypotheses; drop
// clauses whose right side empties out or whose hypotheses are plainly false.
inline std::vector<Clause> simplify_clauses(std::vector<Clause> cs, Solver& solver) {
  std::vector<Clause> out;
  for (const auto& cl : cs) {
    Clause c;
    c.prefix = cl.prefix;
    c.span = cl.span;
    c.site = cl.site;
    c.serial = cl.serial;
    std::set<std::string> seen_ctx, seen_lhs, seen_rhs;
    for (const auto& p : cl.ctx) push_members(p, c.ctx, seen_ctx);
    for (const auto& p : cl.lhs) push_members(p, c.lhs, seen_lhs);

    bool vacuous = false;
    std::set<std::string> hyp_shows;
    PredP hyp = pr_true();
    for (const auto& p : c.ctx) {
      if (p->k == Pred::K::False) vacuous = true;
      hyp_shows.insert(show(p, 0));
      if (!has_pvar(p)) hyp = pr_and(hyp, p);
    }
    for (const auto& p : c.lhs) {
      if (p->k == Pred::K::False) vacuous = true;
      hyp_shows.insert(show(p, 0));
      if (!has_pvar(p)) hyp = pr_and(hyp, p);
    }
    if (vacuous) continue;

    std::vector<PredP> rhs_norm;
    for (const auto& p : cl.rhs) push_members(p, rhs_norm, seen_rhs);
    for (const auto& p : rhs_norm) {
      if (hyp_shows.count(show(p, 0))) continue;
      if (!has_pvar(p) &&
          solver.check_validity(c.prefix, hyp, p).verdict == Validity::Valid)
        continue;
      c.rhs.push_back(p);
    }
    if (c.rhs.empty()) continue;
    out.push_back(std::move(c));
  }
  return out;
}

inline Clause apply_solution(const PVarRegistry& reg, const Solution& th, const Clause& cl) {
  Clause c = cl;
  for (auto& p : c.ctx) p = apply_solution(reg, th, p);
  for (auto& p : c.lhs) p = apply_solution(reg, th, p);
  for (auto& p : c.rhs) p = apply_solution(reg, th, p);
  return c;
}

inline std::vector<Clause> apply_and_simplify(const PVarRegistry& reg, const Solution& th,
                                              const std::vector<Clause>& cs, Solver& solver) {
  std::vector<Clause> tmp;
  tmp.reserve(cs.size());
  for (const auto& cl : cs) tmp.push_back(apply_solution(reg, th, cl));
  return simplify_clauses(std::move(tmp), solver);
}

// ---- rewriting into a dependency set -----------------------------------------

// Equivalence classes of size and shape terms induced by the equality
// conjuncts of a clause. Used to re-express a predicate over a predicate
// variable's argument variables: any subterm with out-of-scope variables may
// be replaced by an equal term built from allowed ones.
class EqClasses {
 public:
  void add(const PredP& p) {
    if (p->k == Pred::K::EqSz) merge_sz(p->s1, p->s2);
    else if (p->k == Pred::K::EqSh) merge_sh(p->sh1, p->sh2);
  }

  std::optional<SizeP> rep_sz(const SizeP& t, const std::set<std::string>& allowed) const {
    auto it = six_.find(show(t, 0));
    if (it == six_.end()) return std::nullopt;
    return pick(sgroups_[static_cast<size_t>(it->second)], allowed);
  }

  std::optional<ShapeP> rep_sh(const ShapeP& t, const std::set<std::string>& allowed) const {
    auto it = hix_.find(show(t, false));
    if (it == hix_.end()) return std::nullopt;
    return pick(hgroups_[static_cast<size_t>(it->second)], allowed);
  }

 private:
  template <typename T>
  static std::optional<T> pick(const std::vector<T>& group, const std::set<std::string>& allowed) {
    const T* best = nullptr;
    size_t best_fv = 0;
    std::string best_show;
    for (const auto& m : group) {
      std::set<std::string> f;
      fv(m, f);
      bool ok = true;
      for (const auto& x : f)
        if (!allowed.count(x)) {
          ok = false;
          break;
        }
      if (!ok) continue;
      std::string s = to_show(m);
      if (!best || std::make_tuple(f.size(), s.size(), s) <
                       std::make_tuple(best_fv, best_show.size(), best_show)) {
        best = &m;
        best_fv = f.size();
        best_show = std::move(s);
      }
    }
    if (!best) return std::nullopt;
    return *best;
  }

  static std::string to_show(const SizeP& s) { return show(s, 0); }
  static std::string to_show(const ShapeP& s) { return show(s, false); }

  int group_sz(const SizeP& t) {
    std::string s = show(t, 0);
    auto it = six_.find(s);
    if (it != six_.end()) return it->second;
    int g = static_cast<int>(sgroups_.size());
    sgroups_.push_back({t});
    six_.emplace(std::move(s), g);
    return g;
  }

  int group_sh(const ShapeP& t) {
    std::string s = show(t, false);
    auto it = hix_.find(s);
    if (it != hix_.end()) return it->second;
    int g = static_cast<int>(hgroups_.size());
    hgroups_.push_back({t});
    hix_.emplace(std::move(s), g);
    return g;
  }

  void merge_sz(const SizeP& a, const SizeP& b) {
    int ga = group_sz(a), gb = group_sz(b);
    if (ga == gb) return;
    if (ga > gb) std::swap(ga, gb);  // keep the earlier group; deterministic
    for (const auto& m : sgroups_[static_cast<size_t>(gb)]) {
      six_[show(m, 0)] = ga;
      sgroups_[static_cast<size_t>(ga)].push_back(m);
    }
    sgroups_[static_cast<size_t>(gb)].clear();
  }

  void merge_sh(const ShapeP& a, const ShapeP& b) {
    int ga = group_sh(a), gb = group_sh(b);
    if (ga == gb) return;
    if (ga > gb) std::swap(ga, gb);
    for (const auto& m : hgroups_[static_cast<size_t>(gb)]) {
      hix_[show(m, false)] = ga;
      hgroups_[static_cast<size_t>(ga)].push_back(m);
    }
    hgroups_[static_cast<size_t>(gb)].clear();
  }

  std::map<std::string, int> six_, hix_;
  std::vector<std::vector<SizeP>> sgroups_;
  std::vector<std::vector<ShapeP>> hgroups_;
};

namespace detail_infer {

template <typename T>
inline bool fv_within(const T& t, const std::set<std::string>& allowed) {
  std::set<std::string> f;
  fv(t, f);
  for (const auto& x : f)
    if (!allowed.count(x)) return false;
  return true;
}

inline SizeP rewrite_sz(const SizeP& t, const std::set<std::string>& allowed, const EqClasses& eq);
inline ShapeP rewrite_sh(const ShapeP& t, const std::set<std::string>& allowed, const EqClasses& eq);

inline SizeP rewrite_sz(const SizeP& t, const std::set<std::string>& allowed, const EqClasses& eq) {
  if (fv_within(t, allowed)) return t;
  if (auto r = eq.rep_sz(t, allowed)) return *r;
  using K = Size::K;
  switch (t->k) {
    case K::Lit:
    case K::Var: return t;  // no equal in-scope term; the final check fails
    case K::Neg: return sz_neg(rewrite_sz(t->a, allowed, eq));
    case K::Add:
    case K::Mul:
    case K::Div:
      return sz_bin(t->k, rewrite_sz(t->a, allowed, eq), rewrite_sz(t->b, allowed, eq));
    case K::Head:
    case K::Last:
    case K::Len:
    case K::Prod: return sz_shape1(t->k, rewrite_sh(t->sh, allowed, eq));
    case K::Nth: return sz_nth(rewrite_sz(t->a, allowed, eq), rewrite_sh(t->sh, allowed, eq));
  }
  return t;
}

inline ShapeP rewrite_sh(const ShapeP& t, const std::set<std::string>& allowed, const EqClasses& eq) {
  if (fv_within(t, allowed)) return t;
  if (auto r = eq.rep_sh(t, allowed)) return *r;
  using K = Shape::K;
  switch (t->k) {
    case K::Lit: {
      std::vector<SizeP> es;
      es.reserve(t->elems.size());
      for (const auto& e : t->elems) es.push_back(rewrite_sz(e, allowed, eq));
      return sh_lit(std::move(es));
    }
    case K::Var:
    case K::ShapeOf: return t;
    case K::Cons: return sh_cons(rewrite_sz(t->s1, allowed, eq), rewrite_sh(t->a, allowed, eq));
    case K::Tail: return sh_tail(rewrite_sh(t->a, allowed, eq));
    case K::Init: return sh_init(rewrite_sh(t->a, allowed, eq));
    case K::InsertAt:
      return sh_insert_at(rewrite_sz(t->s1, allowed, eq), rewrite_sz(t->s2, allowed, eq),
                          rewrite_sh(t->a, allowed, eq));
    case K::DropAt:
      return sh_drop_at(rewrite_sz(t->s1, allowed, eq), rewrite_sh(t->a, allowed, eq));
    case K::Swap:
      return sh_swap(rewrite_sz(t->s1, allowed, eq), rewrite_sz(t->s2, allowed, eq),
                     rewrite_sh(t->a, allowed, eq));
    case K::Append:
    case K::Reshape:
    case K::Broadcast:
    case K::Matmul:
      return sh_bin(t->k, rewrite_sh(t->a, allowed, eq), rewrite_sh(t->b, allowed, eq));
  }
  return t;
}

inline PredP rewrite_pred(const PredP& p, const std::set<std::string>& allowed, const EqClasses& eq) {
  switch (p->k) {
    case Pred::K::EqSz: return pr_eq_sz(rewrite_sz(p->s1, allowed, eq), rewrite_sz(p->s2, allowed, eq));
    case Pred::K::Lt: return pr_lt(rewrite_sz(p->s1, allowed, eq), rewrite_sz(p->s2, allowed, eq));
    case Pred::K::Le: return pr_le(rewrite_sz(p->s1, allowed, eq), rewrite_sz(p->s2, allowed, eq));
    case Pred::K::EqSh: return pr_eq_sh(rewrite_sh(p->sh1, allowed, eq), rewrite_sh(p->sh2, allowed, eq));
    case Pred::K::Brc: return pr_brc(rewrite_sh(p->sh1, allowed, eq), rewrite_sh(p->sh2, allowed, eq));
    case Pred::K::Rsh: return pr_rsh(rewrite_sh(p->sh1, allowed, eq), rewrite_sh(p->sh2, allowed, eq));
    case Pred::K::Not: return pr_not(rewrite_pred(p->p1, allowed, eq));
    case Pred::K::And: return pr_and(rewrite_pred(p->p1, allowed, eq), rewrite_pred(p->p2, allowed, eq));
    case Pred::K::Or: return pr_or(rewrite_pred(p->p1, allowed, eq), rewrite_pred(p->p2, allowed, eq));
    default: return p;  // true/false/bool vars/predicate variables stay put
  }
}

}  // namespace detail_infer

// Re-express `p` using only variables in `allowed`, rewriting out-of-scope
// subterms through the equality classes. Returns nothing when some variable
// cannot be eliminated.
inline std::optional<PredP> express_over(const PredP& p0, const std::set<std::string>& allowed,
                                         const EqClasses& eq) {
  PredP p = simplify_pred(p0);
  if (detail_infer::fv_within(p, allowed)) return p;
  p = simplify_pred(detail_infer::rewrite_pred(p, allowed, eq));
  if (!detail_infer::fv_within(p, allowed)) return std::nullopt;
  return p;
}

// ---- the fixpoint solver -------------------------------------------------------

struct SolveStats {
  int iterations = 0;
  bool fuel_exhausted = false;
};

namespace detail_infer {

// Forward and inverse renamings between a variable's creation arguments and
// an occurrence's arguments. Solving through an occurrence requires the
// renaming to be invertible; otherwise the occurrence is skipped.
struct OccMaps {
  Subst fwd, inv;
};

inline std::optional<OccMaps> occurrence_renaming(const PVarRegistry& reg, const PredP& occ) {
  const PVarInfo& c = reg.at(occ->pvar_id);
  if (c.deps.size() != occ->deps.size() || c.params.size() != occ->params.size())
    throw InternalError("predicate variable applied with the wrong arity");
  std::map<std::string, std::string> f, g;
  auto add = [&](const PVarArg& from, const PVarArg& to) -> bool {
    if (from.sort != to.sort) return false;
    auto it = f.find(from.var);
    if (it != f.end()) return it->second == to.var;
    auto jt = g.find(to.var);
    if (jt != g.end()) return false;  // two creation names hit one occurrence name
    f.emplace(from.var, to.var);
    g.emplace(to.var, from.var);
    return true;
  };
  for (size_t i = 0; i < c.deps.size(); ++i)
    if (!add(c.deps[i], occ->deps[i])) return std::nullopt;
  for (size_t i = 0; i < c.params.size(); ++i)
    if (!add(c.params[i], occ->params[i])) return std::nullopt;
  OccMaps m;
  auto fill = [&](const PVarArg& from, const PVarArg& to) {
    if (from.var == to.var) return;
    m.fwd.merge(rename1(from.sort, from.var, to.var));
    m.inv.merge(rename1(from.sort, to.var, from.var));
  };
  for (size_t i = 0; i < c.deps.size(); ++i) fill(c.deps[i], occ->deps[i]);
  for (size_t i = 0; i < c.params.size(); ++i) fill(c.params[i], occ->params[i]);
  return m;
}

inline std::set<std::string> occ_arg_names(const PredP& occ) {
  std::set<std::string> out;
  for (const auto& a : occ->deps) out.insert(a.var);
  for (const auto& a : occ->params) out.insert(a.var);
  return out;
}

inline std::string dump_clauses(const std::vector<Clause>& cs) {
  std::string s;
  for (const auto& c : cs) {
    s += show(c);
    s += '\n';
  }
  return s;
}

}  // namespace detail_infer

// The fixpoint loop. Two alternating passes until the clause set stops
// changing (or empties, or the fuel bound trips):
//
//   pass 1: a clause whose right side is exactly one unsolved predicate
//           variable occurrence, heading no other clause's right side,
//           defines that variable from the clause's left refinement. The
//           candidate conjuncts are taken modulo the assignments made so
//           far and may themselves be predicate-variable occurrences (an
//           occurs check keeps the substitution acyclic); if nothing
//           re-expresses over the occurrence's arguments the variable is
//           left open for a later sweep or for batch-close defaulting.
//   pass 2: an unsolved variable occurring in a clause's hypotheses is
//           strengthened by the re-expressible concrete subset of the
//           clause's right side — members carrying predicate variables or
//           failing to rewrite over the occurrence's arguments stay behind
//           in the clause — conjoined with a fresh variable of the same
//           signature so later clauses can strengthen it further. An empty
//           subset is a strict no-op.
//
// Assignments substitute into the remaining clauses immediately; simplification
// then discharges whatever became provable. Returns the standing clauses.
inline std::vector<Clause> solve_clauses(PVarRegistry& reg, Solution& th, std::vector<Clause> cs,
                                         Solver& solver, SolveStats* stats = nullptr) {
  SolveStats local;
  SolveStats& st = stats ? *stats : local;

  std::set<int> initial;
  for (const auto& cl : cs) {
    for (const auto& p : cl.ctx) pvar_ids(p, initial);
    for (const auto& p : cl.lhs) pvar_ids(p, initial);
    for (const auto& p : cl.rhs) pvar_ids(p, initial);
  }
  const long long fuel =
      static_cast<long long>(cs.size()) * static_cast<long long>(std::max<size_t>(1, initial.size())) + 8;

  std::string prev;
  while (!cs.empty()) {
    std::string cur = detail_infer::dump_clauses(cs);
    if (cur == prev) break;
    prev = std::move(cur);
    if (st.iterations >= fuel) {
      st.fuel_exhausted = true;
      break;
    }
    ++st.iterations;

    // ---- pass 1: define from the left refinement ----
    bool assigned = false;
    for (const auto& cl : cs) {
      if (cl.rhs.size() != 1 || cl.rhs[0]->k != Pred::K::PVar) continue;
      const PredP occ = cl.rhs[0];
      const int id = occ->pvar_id;
      if (th.solved(id)) continue;
      bool heads_other = false;
      for (const auto& other : cs) {
        if (&other == &cl) continue;
        for (const auto& m : other.rhs) {
          std::set<int> ids;
          pvar_ids(m, ids);
          if (ids.count(id)) {
            heads_other = true;
            break;
          }
        }
        if (heads_other) break;
      }
      if (heads_other) continue;
      auto maps = detail_infer::occurrence_renaming(reg, occ);
      if (!maps) continue;
      const std::set<std::string> allowed = detail_infer::occ_arg_names(occ);
      // Candidates are the left members modulo the assignments already made
      // (including ones from earlier in this same sweep), split into
      // conjuncts. A candidate may itself be a predicate-variable occurrence
      // — argument chains between templates resolve through those — as long
      // as it never mentions the variable being defined, so the substitution
      // stays acyclic.
      std::vector<PredP> hyp_ctx, hyp_lhs;
      for (const auto& m : cl.ctx)
        for (const auto& c : conjuncts(simplify_pred(apply_solution(reg, th, m)))) hyp_ctx.push_back(c);
      for (const auto& m : cl.lhs)
        for (const auto& c : conjuncts(simplify_pred(apply_solution(reg, th, m)))) hyp_lhs.push_back(c);
      std::vector<PredP> parts;
      for (const auto& cand : hyp_lhs) {
        std::set<int> cand_ids;
        pvar_ids(cand, cand_ids);
        if (cand_ids.count(id)) continue;
        const std::string cand_show = show(cand, 0);
        EqClasses eq;
        for (const auto& m : hyp_ctx)
          if (!has_pvar(m)) eq.add(m);
        for (const auto& m : hyp_lhs)
          if (!has_pvar(m) && show(m, 0) != cand_show) eq.add(m);
        if (auto e = express_over(cand, allowed, eq)) parts.push_back(*e);
      }
      // Nothing expressible: leave the variable open rather than pinning it
      // to `true` — a later strengthening sweep may still reach it through a
      // template chain, and batch close defaults whatever stays unsolved.
      if (parts.empty()) continue;
      compose_solution(reg, th, id, subst(pr_conj(parts), maps->inv));
      assigned = true;
    }
    if (assigned) cs = apply_and_simplify(reg, th, cs, solver);

    // ---- pass 2: strengthen from the right side ----
    std::vector<int> serials;
    serials.reserve(cs.size());
    for (const auto& cl : cs) serials.push_back(cl.serial);
    for (int sn : serials) {
      auto find = [&]() -> const Clause* {
        for (const auto& c : cs)
          if (c.serial == sn) return &c;
        return nullptr;
      };
      const Clause* clp = find();
      if (!clp) continue;
      // Distinct occurrences of the same variable (different argument
      // renamings) are tried separately; once one solves it, the rest skip.
      std::vector<PredP> occs;
      std::set<std::string> seen;
      for (const auto& m : clp->ctx)
        if (m->k == Pred::K::PVar && seen.insert(show(m, 0)).second) occs.push_back(m);
      for (const auto& m : clp->lhs)
        if (m->k == Pred::K::PVar && seen.insert(show(m, 0)).second) occs.push_back(m);
      for (const auto& occ : occs) {
        clp = find();
        if (!clp) break;
        const int id = occ->pvar_id;
        if (th.solved(id)) continue;
        auto maps = detail_infer::occurrence_renaming(reg, occ);
        if (!maps) continue;
        const std::set<std::string> allowed = detail_infer::occ_arg_names(occ);
        EqClasses eq;
        for (const auto& m : clp->ctx)
          if (!has_pvar(m)) eq.add(m);
        for (const auto& m : clp->lhs)
          if (!has_pvar(m)) eq.add(m);
        // Strengthen by the re-expressible concrete subset of the right side.
        // Members carrying predicate variables and members that cannot be
        // rewritten over the occurrence's arguments stay behind in the clause;
        // an empty subset is a no-op (minting a fresh conjunct for nothing
        // would change the printed state every sweep and spin the loop).
        std::vector<PredP> parts;
        for (const auto& m : clp->rhs) {
          if (has_pvar(m)) continue;
          if (auto e = express_over(m, allowed, eq)) parts.push_back(*e);
        }
        if (parts.empty()) continue;
        const PVarInfo info = reg.at(id);
        const int fresh_id = reg.fresh(info.deps, info.params, clp->span, "strengthen");
        PredP body =
            pr_and(subst(pr_conj(parts), maps->inv), pr_pvar(fresh_id, info.deps, info.params));
        compose_solution(reg, th, id, std::move(body));
        cs = apply_and_simplify(reg, th, cs, solver);
      }
    }
  }
  return cs;
}

struct SolveOutcome {
  Solution theta;
  std::vector<Clause> remaining;
  SolveStats stats;
};

inline SolveOutcome solve_clauses(PVarRegistry& reg, std::vector<Clause> cs, Solver& solver) {
  SolveOutcome o;
  o.remaining = solve_clauses(reg, o.theta, std::move(cs), solver, &o.stats);
  return o;
}

// ---- the inference walk --------------------------------------------------------

struct InferOptions {
  bool record_dump = false;  // build the clause/solution trace
};

struct InferResult {
  std::map<std::string, RTypeP> top;           // top-level binding types (final)
  RTypeP main_type;                            // final type of the main expression
  std::map<const SourceTerm*, RTypeP> node;    // synthesized type of every node
  std::map<const SourceTerm*, RTypeP> binder;  // lam/fix binder and let binding types
  std::vector<SubConstraint> constraints;      // as collected, before solving
  std::vector<Clause> deferred;                // standing clauses of the top-level batches
  std::string dump;                            // batch trace (when requested)
  SolveStats stats;
  STypeTable simple;
  PVarRegistry registry;
  Solution theta;

  const RTypeP& node_type(const SrcP& m) const {
    auto it = node.find(m.get());
    if (it == node.end()) throw InternalError("no refinement type recorded for node");
    return it->second;
  }
  const RTypeP& binder_type(const SrcP& m) const {
    auto it = binder.find(m.get());
    if (it == binder.end()) throw InternalError("no binder type recorded for node");
    return it->second;
  }
};

class RefinementInfer {
 public:
  RefinementInfer(const Program& p, const std::vector<StubDecl>& stubs, InferOptions opt = {})
      : p_(p), opt_(opt) {
    for (const auto& d : stubs) stubs_.emplace(d.name, d);
    stub_list_ = stubs;
  }

  InferResult run() {
    if (!p_.main) throw InternalError("program has no main expression");
    res_.simple = SimpleInfer::run(p_, stub_list_);
    TypeEnv env;
    for (const auto& l : p_.lets) {
      Batch b = open_batch();
      RTypeP t = go(l.rhs, env, pr_true());
      close_batch(b, env, "let " + l.name, /*collect=*/true);
      t = apply_solution(reg_, theta_, t);
      env = env.extended(l.name, t);
      res_.top.emplace(l.name, t);
    }
    Batch b = open_batch();
    RTypeP t = go(p_.main, env, pr_true());
    close_batch(b, env, "main", /*collect=*/true);
    res_.main_type = apply_solution(reg_, theta_, t);

    // Safety net; the top-level batches already defaulted everything.
    for (int id = 0; id < reg_.count(); ++id)
      if (!theta_.solved(id)) compose_solution(reg_, theta_, id, pr_true());

    finalize();
    return std::move(res_);
  }

 private:
  struct Batch {
    size_t c_start;
    int pv_start;
  };

  Batch open_batch() { return Batch{constraints_.size(), reg_.count()}; }

  void close_batch(const Batch& b, const TypeEnv& env, const std::string& label, bool collect) {
    std::vector<SubConstraint> batch;
    for (size_t i = b.c_start; i < constraints_.size(); ++i) {
      SubConstraint c = constraints_[i];
      c.env = apply_solution(reg_, theta_, c.env);
      c.path = apply_solution(reg_, theta_, c.path);
      c.lhs = apply_solution(reg_, theta_, c.lhs);
      c.rhs = apply_solution(reg_, theta_, c.rhs);
      batch.push_back(std::move(c));
    }
    std::vector<Clause> cs = simplify_clauses(decompose_to_chc(batch), solver_);
    std::set<int> before;
    for (const auto& [id, body] : theta_.body) {
      (void)body;
      before.insert(id);
    }
    if (opt_.record_dump) {
      dump_ << "# solve " << label << ": " << batch.size() << " constraints, " << cs.size()
            << " clauses\n"
            << detail_infer::dump_clauses(cs);
    }
    SolveStats st;
    std::vector<Clause> remaining = solve_clauses(reg_, theta_, std::move(cs), solver_, &st);
    res_.stats.iterations += st.iterations;
    res_.stats.fuel_exhausted = res_.stats.fuel_exhausted || st.fuel_exhausted;

    // Default what this batch minted unless the environment still carries it.
    TypeEnv genv = apply_solution(reg_, theta_, env);
    std::set<int> live;
    for (const auto& [x, ty] : genv.bindings) {
      (void)x;
      pvar_ids(ty, live);
    }
    for (int id = b.pv_start; id < reg_.count(); ++id)
      if (!theta_.solved(id) && !live.count(id)) compose_solution(reg_, theta_, id, pr_true());

    std::vector<Clause> standing = apply_and_simplify(reg_, theta_, remaining, solver_);
    if (collect)
      res_.deferred.insert(res_.deferred.end(), standing.begin(), standing.end());
    if (opt_.record_dump) {
      dump_ << "# assignments after " << label << "\n";
      for (const auto& [id, body] : theta_.body)
        if (!before.count(id)) dump_ << show(reg_.occurrence(id), 0) << " := " << show(body, 0) << "\n";
      dump_ << "# standing after " << label << ": " << standing.size() << "\n"
            << detail_infer::dump_clauses(standing);
    }
  }

  RTypeP go(const SrcP& m, const TypeEnv& env, const PredP& path) {
    RTypeP t = go_raw(m, env, path);
    node_raw_[m.get()] = t;
    return t;
  }

  RTypeP go_raw(const SrcP& m, const TypeEnv& env, const PredP& path) {
    switch (m->k) {
      case SourceTerm::K::Const: return const_type(m->c);
      case SourceTerm::K::Var: return resolve_var(m->var, env);

      case SourceTerm::K::Lam: {
        const STypeP& st = res_.simple.at(m);
        RTypeP dom;
        if (m->ty) {
          check_annot(env, *m->ty, m->span);
          dom = *m->ty;
        } else {
          dom = make_template(st->dom, dep_args(env), reg_, names_, m->span);
        }
        binder_raw_[m.get()] = dom;
        RTypeP cod = go(m->m1, env.extended(m->var, dom), path);
        return rt_fun(m->var, dom, cod);
      }

      case SourceTerm::K::App: {
        RTypeP tf = go(m->m1, env, path);
        if (tf->k != RType::K::Fun)
          throw InternalError("application of a non-function type: " + show(tf));
        RTypeP ta = resolve_var(m->var, env);
        constraints_.push_back({env, path, ta, tf->dom, m->span, "application argument"});
        RTypeP r = tf->cod;
        if (tf->dom->k == RType::K::Base && tf->binder != m->var)
          r = subst_type(r, rename1(tf->dom->base, tf->binder, m->var));
        return r;
      }

      case SourceTerm::K::Annot: {
        RTypeP ti = go(m->m1, env, path);
        check_annot(env, *m->ty, m->span);
        constraints_.push_back({env, path, ti, *m->ty, m->span, "annotation"});
        return *m->ty;
      }

      case SourceTerm::K::Let: {
        Batch b = open_batch();
        RTypeP t1 = go(m->m1, env, path);
        close_batch(b, env, "let " + m->var, /*collect=*/false);
        t1 = apply_solution(reg_, theta_, t1);
        binder_raw_[m.get()] = t1;
        TypeEnv env2 = apply_solution(reg_, theta_, env).extended(m->var, t1);
        RTypeP t2 = apply_solution(reg_, theta_, go(m->m2, env2, path));
        if (fv_type(t2).count(m->var)) {
          // The binder escapes in the result type; constrain a template over
          // the outer scope instead and let the solver re-express it.
          RTypeP tex = make_template(res_.simple.at(m->m2), dep_args(env), reg_, names_, m->span);
          constraints_.push_back({env2, path, t2, tex, m->span, "let result"});
          t2 = tex;
        }
        return t2;
      }

      case SourceTerm::K::If: {
        resolve_var(m->var, env);  // uniform unbound-variable reporting
        PredP pc = pr_bvar(m->var);
        RTypeP tt = apply_solution(reg_, theta_, go(m->m1, env, pr_and(path, pc)));
        RTypeP te = apply_solution(reg_, theta_, go(m->m2, env, pr_and(path, pr_not(pc))));
        if (alpha_equal(tt, te)) return tt;
        RTypeP j = make_template(res_.simple.at(m), dep_args(env), reg_, names_, m->span);
        constraints_.push_back({env, pr_and(path, pc), tt, j, m->m1->span, "branch join"});
        constraints_.push_back({env, pr_and(path, pr_not(pc)), te, j, m->m2->span, "branch join"});
        return j;
      }

      case SourceTerm::K::Fix: {
        RTypeP tf;
        if (m->ty) {
          check_annot(env, *m->ty, m->span);
          tf = *m->ty;
        } else {
          tf = make_template(res_.simple.at(m), dep_args(env), reg_, names_, m->span, m->var2);
        }
        if (tf->k != RType::K::Fun)
          throw InternalError("recursive binding at non-function type: " + show(tf));
        RTypeP tfr = tf->binder == m->var2 ? tf : rename_binder(tf, m->var2);
        binder_raw_[m.get()] = tf;
        TypeEnv env2 = env.extended(m->var, tf).extended(m->var2, tfr->dom);
        RTypeP tb = go(m->m1, env2, path);
        constraints_.push_back({env2, path, tb, tfr->cod, m->span, "recursive function body"});
        return tf;
      }
    }
    throw InternalError("unreachable source-term kind");
  }

  static RTypeP const_type(const Constant& c) {
    switch (c.k) {
      case Constant::K::Int:
        return rt_base("v", Sort::Int, pr_eq_sz(sz_var("v"), sz_lit(c.i)));
      case Constant::K::Bool:
        return rt_base("v", Sort::Bool, c.b ? pr_bvar("v") : pr_not(pr_bvar("v")));
      case Constant::K::IntList:
        return rt_base("v", Sort::IntList, pr_eq_sh(sh_var("v"), sh_lit_ints(c.list)));
      case Constant::K::Prim:
      case Constant::K::Tensor: break;
    }
    throw InternalError("constant kind outside source programs");
  }

  RTypeP resolve_var(const std::string& x, const TypeEnv& env) {
    if (auto t = env.lookup(x)) return (*t)->k == RType::K::Fun ? *t : selfify(x, *t);
    auto it = stubs_.find(x);
    if (it != stubs_.end()) return instantiate_stub(it->second);
    throw InternalError("unbound variable '" + x + "' after simple-type checking");
  }

  RTypeP instantiate_stub(const StubDecl& d) {
    if (!d.value_params.empty())
      throw InternalError("stub '" + d.name +
                          "' quantifies value parameters; instantiate it before refinement "
                          "inference");
    RTypeP t = d.ty;
    for (const auto& b : d.pred_params) t = instantiate_pred_param(t, b, d.span);
    return t;
  }

  // Replace each use of the declared predicate parameter by a fresh
  // predicate variable over the refinement binder it appears under, making
  // the unknown intrinsic to that value. Every occurrence gets its own
  // variable.
  RTypeP instantiate_pred_param(const RTypeP& t, const std::string& b, Span sp) {
    if (t->k == RType::K::Fun)
      return rt_fun(t->binder, instantiate_pred_param(t->dom, b, sp),
                    instantiate_pred_param(t->cod, b, sp));
    std::function<PredP(const PredP&)> walk = [&](const PredP& p) -> PredP {
      switch (p->k) {
        case Pred::K::BVar:
          if (p->var == b) {
            std::vector<PVarArg> args{PVarArg{t->base, t->binder}};
            int id = reg_.fresh(args, args, sp, "stub");
            return pr_pvar(id, args, args);
          }
          return p;
        case Pred::K::Not: return pr_not(walk(p->p1));
        case Pred::K::And: return pr_and(walk(p->p1), walk(p->p2));
        case Pred::K::Or: return pr_or(walk(p->p1), walk(p->p2));
        default: return p;
      }
    };
    return rt_base(t->binder, t->base, walk(t->pred));
  }

  void check_annot(const TypeEnv& env, const RTypeP& ty, Span sp) {
    try {
      check_wf_type(env.st(), ty, /*allow_pvars=*/false);
    } catch (const WfError& e) {
      throw InferError("annotation-scope", sp, e.what());
    }
  }

  RTypeP finalize_type(const RTypeP& t) {
    RTypeP r = apply_solution(reg_, theta_, t);
    std::set<int> ids;
    pvar_ids(r, ids);
    if (!ids.empty())
      throw InternalError("unsolved predicate variable survived inference: " + show(r));
    return r;
  }

  void finalize() {
    for (const auto& [k, v] : node_raw_) res_.node[k] = finalize_type(v);
    for (const auto& [k, v] : binder_raw_) res_.binder[k] = finalize_type(v);
    for (auto& [k, v] : res_.top) {
      (void)k;
      v = finalize_type(v);
    }
    res_.main_type = finalize_type(res_.main_type);
    res_.constraints = constraints_;
    res_.registry = reg_;
    res_.theta = theta_;
    res_.dump = dump_.str();
  }

  const Program& p_;
  InferOptions opt_;
  std::map<std::string, StubDecl> stubs_;
  std::vector<StubDecl> stub_list_;
  PVarRegistry reg_;
  Solution theta_;
  Solver solver_;
  NameSupply names_;
  std::vector<SubConstraint> constraints_;
  std::map<const SourceTerm*, RTypeP> node_raw_, binder_raw_;
  std::ostringstream dump_;
  InferResult res_;
};

inline InferResult infer_refinements(const Program& p, const std::vector<StubDecl>& stubs,
                                     InferOptions opt = {}) {
  return RefinementInfer(p, stubs, opt).run();
}

}  // namespace graten
