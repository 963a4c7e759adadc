#pragma once

// Source terms (the surface language, ANF-disciplined: application arguments
// and if conditions are variables) and target terms (elaborated programs with
// typed lets and explicit assertions):
//
//   M ::= c | x | fun x -> M | M x | (M : tau) | let x = M in M
//       | fix f x -> M | if x then M else M
//   N ::= v | if v N N | N v | let x^tau = N in N | assert(p); N
//   v ::= c | x | [n;...;n] | fun x^tau -> N | fix(f^tau, x) -> N
//
// Constants cover literals, shape-carrying tensors and (possibly partially
// applied) primitives.

#include "graten/types.hpp"

namespace graten {

struct Value;
struct TargetTerm;
struct SourceTerm;
using ValueP = std::shared_ptr<const Value>;
using TermP = std::shared_ptr<const TargetTerm>;
using SrcP = std::shared_ptr<const SourceTerm>;

struct Constant {
  enum class K { Int, Bool, IntList, Prim, Tensor };
  K k = K::Int;
  long long i = 0;
  bool b = false;
  std::vector<long long> list;
  std::string prim;
  std::vector<ValueP> args;  // collected arguments of a partially applied primitive
  std::vector<long long> tshape;
};

struct Value {
  enum class K { Const, Var, Lam, Fix };
  K k;
  Constant c;
  std::string var;
  std::string x, f;  // Lam binder / Fix function name + binder
  RTypeP ty;         // Lam binder type / Fix function type
  TermP body;
};

struct TargetTerm {
  enum class K { Val, App, Let, If, Assert };
  K k;
  ValueP v;      // Val payload; App argument; If condition
  TermP n1, n2;  // App function; Let rhs/body; If branches; Assert continuation (n1)
  std::string x;  // Let binder
  RTypeP ty;      // Let binder type
  PredP pred;     // Assert predicate
  Span span;
};

// ---- constructors ----------------------------------------------------------

inline ValueP v_int(long long n) {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Const;
  v->c.k = Constant::K::Int;
  v->c.i = n;
  return v;
}
inline ValueP v_bool(bool b) {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Const;
  v->c.k = Constant::K::Bool;
  v->c.b = b;
  return v;
}
inline ValueP v_list(std::vector<long long> xs) {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Const;
  v->c.k = Constant::K::IntList;
  v->c.list = std::move(xs);
  return v;
}
inline ValueP v_tensor(std::vector<long long> shape) {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Const;
  v->c.k = Constant::K::Tensor;
  v->c.tshape = std::move(shape);
  return v;
}
inline ValueP v_prim(std::string name, std::vector<ValueP> args = {}) {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Const;
  v->c.k = Constant::K::Prim;
  v->c.prim = std::move(name);
  v->c.args = std::move(args);
  return v;
}
inline ValueP v_var(std::string x) {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Var;
  v->var = std::move(x);
  return v;
}
inline ValueP v_lam(std::string x, RTypeP ty, TermP body) {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Lam;
  v->x = std::move(x);
  v->ty = std::move(ty);
  v->body = std::move(body);
  return v;
}
inline ValueP v_fix(std::string f, RTypeP ty, std::string x, TermP body) {
  auto v = std::make_shared<Value>();
  v->k = Value::K::Fix;
  v->f = std::move(f);
  v->ty = std::move(ty);
  v->x = std::move(x);
  v->body = std::move(body);
  return v;
}

inline TermP t_val(ValueP v) {
  auto t = std::make_shared<TargetTerm>();
  t->k = TargetTerm::K::Val;
  t->v = std::move(v);
  return t;
}
inline TermP t_app(TermP fn, ValueP arg) {
  auto t = std::make_shared<TargetTerm>();
  t->k = TargetTerm::K::App;
  t->n1 = std::move(fn);
  t->v = std::move(arg);
  return t;
}
inline TermP t_let(std::string x, RTypeP ty, TermP rhs, TermP body, Span sp = {}) {
  auto t = std::make_shared<TargetTerm>();
  t->k = TargetTerm::K::Let;
  t->x = std::move(x);
  t->ty = std::move(ty);
  t->n1 = std::move(rhs);
  t->n2 = std::move(body);
  t->span = sp;
  return t;
}
inline TermP t_if(ValueP c, TermP n1, TermP n2) {
  auto t = std::make_shared<TargetTerm>();
  t->k = TargetTerm::K::If;
  t->v = std::move(c);
  t->n1 = std::move(n1);
  t->n2 = std::move(n2);
  return t;
}
inline TermP t_assert(PredP p, TermP cont, Span sp = {}) {
  auto t = std::make_shared<TargetTerm>();
  t->k = TargetTerm::K::Assert;
  t->pred = std::move(p);
  t->n1 = std::move(cont);
  t->span = sp;
  return t;
}

// ---- source terms ----------------------------------------------------------

struct SourceTerm {
  enum class K { Const, Var, Lam, App, Annot, Let, Fix, If };
  K k;
  Span span;
  Constant c;                  // Const (never Prim/Tensor in source)
  std::string var;             // Var name; Lam/Let binder; App arg var; Fix f; If cond var
  std::string var2;            // Fix argument binder
  std::optional<RTypeP> ty;    // Lam/Fix annotation; Annot type
  SrcP m1, m2;
};

inline SrcP s_mk(SourceTerm t) { return std::make_shared<SourceTerm>(std::move(t)); }
inline SrcP s_const(Constant c, Span sp = {}) {
  SourceTerm t;
  t.k = SourceTerm::K::Const;
  t.c = std::move(c);
  t.span = sp;
  return s_mk(std::move(t));
}
inline SrcP s_int(long long n, Span sp = {}) {
  Constant c;
  c.k = Constant::K::Int;
  c.i = n;
  return s_const(std::move(c), sp);
}
inline SrcP s_bool(bool b, Span sp = {}) {
  Constant c;
  c.k = Constant::K::Bool;
  c.b = b;
  return s_const(std::move(c), sp);
}
inline SrcP s_intlist(std::vector<long long> xs, Span sp = {}) {
  Constant c;
  c.k = Constant::K::IntList;
  c.list = std::move(xs);
  return s_const(std::move(c), sp);
}
inline SrcP s_var(std::string x, Span sp = {}) {
  SourceTerm t;
  t.k = SourceTerm::K::Var;
  t.var = std::move(x);
  t.span = sp;
  return s_mk(std::move(t));
}
inline SrcP s_lam(std::string x, std::optional<RTypeP> ty, SrcP body, Span sp = {}) {
  SourceTerm t;
  t.k = SourceTerm::K::Lam;
  t.var = std::move(x);
  t.ty = std::move(ty);
  t.m1 = std::move(body);
  t.span = sp;
  return s_mk(std::move(t));
}
inline SrcP s_app(SrcP fn, std::string argvar, Span sp = {}) {
  SourceTerm t;
  t.k = SourceTerm::K::App;
  t.m1 = std::move(fn);
  t.var = std::move(argvar);
  t.span = sp;
  return s_mk(std::move(t));
}
inline SrcP s_annot(SrcP m, RTypeP ty, Span sp = {}) {
  SourceTerm t;
  t.k = SourceTerm::K::Annot;
  t.m1 = std::move(m);
  t.ty = std::move(ty);
  t.span = sp;
  return s_mk(std::move(t));
}
inline SrcP s_let(std::string x, SrcP rhs, SrcP body, Span sp = {}) {
  SourceTerm t;
  t.k = SourceTerm::K::Let;
  t.var = std::move(x);
  t.m1 = std::move(rhs);
  t.m2 = std::move(body);
  t.span = sp;
  return s_mk(std::move(t));
}
inline SrcP s_fix(std::string f, std::optional<RTypeP> ty, std::string x, SrcP body, Span sp = {}) {
  SourceTerm t;
  t.k = SourceTerm::K::Fix;
  t.var = std::move(f);
  t.var2 = std::move(x);
  t.ty = std::move(ty);
  t.m1 = std::move(body);
  t.span = sp;
  return s_mk(std::move(t));
}
inline SrcP s_if(std::string condvar, SrcP m1, SrcP m2, Span sp = {}) {
  SourceTerm t;
  t.k = SourceTerm::K::If;
  t.var = std::move(condvar);
  t.m1 = std::move(m1);
  t.m2 = std::move(m2);
  t.span = sp;
  return s_mk(std::move(t));
}

// ---- free variables --------------------------------------------------------

inline void fv_value(const ValueP& v, std::set<std::string>& out);
inline void fv_term(const TermP& n, std::set<std::string>& out);

inline void fv_value(const ValueP& v, std::set<std::string>& out) {
  switch (v->k) {
    case Value::K::Const:
      for (const auto& a : v->c.args) fv_value(a, out);
      return;
    case Value::K::Var: out.insert(v->var); return;
    case Value::K::Lam: {
      std::set<std::string> b;
      fv_term(v->body, b);
      b.erase(v->x);
      if (v->ty) {
        auto tf = fv_type(v->ty);
        b.insert(tf.begin(), tf.end());
      }
      out.insert(b.begin(), b.end());
      return;
    }
    case Value::K::Fix: {
      std::set<std::string> b;
      fv_term(v->body, b);
      b.erase(v->x);
      b.erase(v->f);
      if (v->ty) {
        auto tf = fv_type(v->ty);
        b.insert(tf.begin(), tf.end());
      }
      out.insert(b.begin(), b.end());
      return;
    }
  }
}

inline void fv_term(const TermP& n, std::set<std::string>& out) {
  switch (n->k) {
    case TargetTerm::K::Val: fv_value(n->v, out); return;
    case TargetTerm::K::App: fv_term(n->n1, out); fv_value(n->v, out); return;
    case TargetTerm::K::Let: {
      fv_term(n->n1, out);
      if (n->ty) {
        auto tf = fv_type(n->ty);
        out.insert(tf.begin(), tf.end());
      }
      std::set<std::string> b;
      fv_term(n->n2, b);
      b.erase(n->x);
      out.insert(b.begin(), b.end());
      return;
    }
    case TargetTerm::K::If:
      fv_value(n->v, out);
      fv_term(n->n1, out);
      fv_term(n->n2, out);
      return;
    case TargetTerm::K::Assert: {
      auto pf = fv_pred(n->pred);
      out.insert(pf.begin(), pf.end());
      fv_term(n->n1, out);
      return;
    }
  }
}

inline std::set<std::string> fv_source(const SrcP& m) {
  std::set<std::string> out;
  std::function<void(const SrcP&)> go = [&](const SrcP& m) {
    switch (m->k) {
      case SourceTerm::K::Const: return;
      case SourceTerm::K::Var: out.insert(m->var); return;
      case SourceTerm::K::Lam: {
        auto inner = fv_source(m->m1);
        inner.erase(m->var);
        out.insert(inner.begin(), inner.end());
        if (m->ty) {
          auto tf = fv_type(*m->ty);
          out.insert(tf.begin(), tf.end());
        }
        return;
      }
      case SourceTerm::K::App: go(m->m1); out.insert(m->var); return;
      case SourceTerm::K::Annot: {
        go(m->m1);
        auto tf = fv_type(*m->ty);
        out.insert(tf.begin(), tf.end());
        return;
      }
      case SourceTerm::K::Let: {
        go(m->m1);
        auto inner = fv_source(m->m2);
        inner.erase(m->var);
        out.insert(inner.begin(), inner.end());
        return;
      }
      case SourceTerm::K::Fix: {
        auto inner = fv_source(m->m1);
        inner.erase(m->var);
        inner.erase(m->var2);
        out.insert(inner.begin(), inner.end());
        if (m->ty) {
          auto tf = fv_type(*m->ty);
          out.insert(tf.begin(), tf.end());
        }
        return;
      }
      case SourceTerm::K::If: out.insert(m->var); go(m->m1); go(m->m2); return;
    }
  };
  go(m);
  return out;
}

// ---- substitution of values into target terms ------------------------------
//
// Used by reduction (beta, fix unrolling, let) and by the elaborator's
// administrative beta step. Types and assertion predicates are substituted
// too; base-sorted values project into the predicate language, function
// values never occur in predicates (well-formedness).

inline std::optional<SubstVal> pred_image(const ValueP& v) {
  switch (v->k) {
    case Value::K::Var: return std::nullopt;  // handled per-sort by caller
    case Value::K::Const:
      switch (v->c.k) {
        case Constant::K::Int: return SubstVal{sz_lit(v->c.i)};
        case Constant::K::Bool: return SubstVal{v->c.b ? pr_true() : pr_false()};
        case Constant::K::IntList: return SubstVal{sh_lit_ints(v->c.list)};
        case Constant::K::Tensor: return SubstVal{TensorSub{std::nullopt, v->c.tshape}};
        case Constant::K::Prim: return std::nullopt;
      }
      return std::nullopt;
    default: return std::nullopt;
  }
}

inline ValueP subst_value(const ValueP& tgt, const std::string& x, const ValueP& v, Sort vsort);
inline TermP subst_term(const TermP& n, const std::string& x, const ValueP& v, Sort vsort);

// Sort-aware predicate substitution entry for [v/x].
inline std::optional<Subst> pred_entry(const std::string& x, const ValueP& v, Sort vsort) {
  if (v->k == Value::K::Var) return rename1(vsort, x, v->var);
  auto img = pred_image(v);
  if (!img) return std::nullopt;
  Subst m;
  m.emplace(x, *img);
  return m;
}

inline RTypeP subst_type_val(const RTypeP& t, const std::string& x, const ValueP& v, Sort vsort) {
  auto m = pred_entry(x, v, vsort);
  if (!m) return t;
  return subst_type(t, *m);
}

inline std::string freshen_against(const std::string& base, const std::set<std::string>& avoid) {
  return fresh_avoid(base, avoid);
}

inline Sort value_sort_guess(const ValueP& v) {
  // Only used for alpha-renaming of binders; function binders never occur in
  // predicates so the sort is irrelevant there.
  if (v->k == Value::K::Const) {
    switch (v->c.k) {
      case Constant::K::Int: return Sort::Int;
      case Constant::K::Bool: return Sort::Bool;
      case Constant::K::IntList: return Sort::IntList;
      case Constant::K::Tensor: return Sort::Tensor;
      case Constant::K::Prim: return Sort::Int;
    }
  }
  return Sort::Int;
}

inline Sort binder_sort(const RTypeP& ty) {
  if (ty && ty->k == RType::K::Base) return ty->base;
  return Sort::Int;
}

// Rename a term-level binder (and its predicate occurrences at `sort`).
inline TermP rename_term_var(const TermP& n, const std::string& from, const std::string& to, Sort sort) {
  return subst_term(n, from, v_var(to), sort);
}

inline ValueP subst_value(const ValueP& tgt, const std::string& x, const ValueP& v, Sort vsort) {
  switch (tgt->k) {
    case Value::K::Const: {
      if (tgt->c.k != Constant::K::Prim || tgt->c.args.empty()) return tgt;
      auto copy = std::make_shared<Value>(*tgt);
      for (auto& a : copy->c.args) a = subst_value(a, x, v, vsort);
      return copy;
    }
    case Value::K::Var: return tgt->var == x ? v : tgt;
    case Value::K::Lam: {
      RTypeP ty = tgt->ty ? subst_type_val(tgt->ty, x, v, vsort) : tgt->ty;
      if (tgt->x == x) return tgt->ty == ty ? tgt : v_lam(tgt->x, ty, tgt->body);
      std::string b = tgt->x;
      TermP body = tgt->body;
      std::set<std::string> vf;
      fv_value(v, vf);
      if (vf.count(b)) {
        std::set<std::string> avoid = vf;
        fv_term(body, avoid);
        std::string nb = freshen_against(b, avoid);
        body = rename_term_var(body, b, nb, binder_sort(ty));
        b = nb;
      }
      return v_lam(b, ty, subst_term(body, x, v, vsort));
    }
    case Value::K::Fix: {
      RTypeP ty = tgt->ty ? subst_type_val(tgt->ty, x, v, vsort) : tgt->ty;
      if (tgt->f == x || tgt->x == x) return tgt->ty == ty ? tgt : v_fix(tgt->f, ty, tgt->x, tgt->body);
      std::string f = tgt->f, b = tgt->x;
      TermP body = tgt->body;
      std::set<std::string> vf;
      fv_value(v, vf);
      std::set<std::string> avoid = vf;
      fv_term(body, avoid);
      if (vf.count(f)) {
        std::string nf = freshen_against(f, avoid);
        avoid.insert(nf);
        body = rename_term_var(body, f, nf, Sort::Int);
        f = nf;
      }
      if (vf.count(b)) {
        std::string nb = freshen_against(b, avoid);
        Sort bs = ty && ty->k == RType::K::Fun ? binder_sort(ty->dom) : Sort::Int;
        body = rename_term_var(body, b, nb, bs);
        b = nb;
      }
      return v_fix(f, ty, b, subst_term(body, x, v, vsort));
    }
  }
  return tgt;
}

inline TermP subst_term(const TermP& n, const std::string& x, const ValueP& v, Sort vsort) {
  auto pe = pred_entry(x, v, vsort);
  switch (n->k) {
    case TargetTerm::K::Val: return t_val(subst_value(n->v, x, v, vsort));
    case TargetTerm::K::App:
      return t_app(subst_term(n->n1, x, v, vsort), subst_value(n->v, x, v, vsort));
    case TargetTerm::K::If:
      return t_if(subst_value(n->v, x, v, vsort), subst_term(n->n1, x, v, vsort),
                  subst_term(n->n2, x, v, vsort));
    case TargetTerm::K::Assert: {
      PredP p = pe ? subst(n->pred, *pe) : n->pred;
      return t_assert(p, subst_term(n->n1, x, v, vsort), n->span);
    }
    case TargetTerm::K::Let: {
      TermP rhs = subst_term(n->n1, x, v, vsort);
      RTypeP ty = n->ty && pe ? subst_type(n->ty, *pe) : n->ty;
      if (n->x == x) return t_let(n->x, ty, rhs, n->n2, n->span);
      std::string b = n->x;
      TermP body = n->n2;
      std::set<std::string> vf;
      fv_value(v, vf);
      if (vf.count(b)) {
        std::set<std::string> avoid = vf;
        fv_term(body, avoid);
        std::string nb = freshen_against(b, avoid);
        body = rename_term_var(body, b, nb, binder_sort(ty));
        b = nb;
      }
      return t_let(b, ty, rhs, subst_term(body, x, v, vsort), n->span);
    }
  }
  return n;
}

// ---- printing --------------------------------------------------------------

inline std::string show_value(const ValueP& v, bool atom = false);
inline std::string show_term(const TermP& n, int indent = 0);

inline std::string show_const(const Constant& c) {
  switch (c.k) {
    case Constant::K::Int: return std::to_string(c.i);
    case Constant::K::Bool: return c.b ? "true" : "false";
    case Constant::K::IntList: {
      std::vector<std::string> parts;
      for (long long x : c.list) parts.push_back(std::to_string(x));
      return "[" + join(parts, "; ") + "]";
    }
    case Constant::K::Prim: {
      std::string out = c.prim;
      for (const auto& a : c.args) out += " " + show_value(a, true);
      return out;
    }
    case Constant::K::Tensor: {
      std::vector<std::string> parts;
      for (long long x : c.tshape) parts.push_back(std::to_string(x));
      return "tensor([" + join(parts, "; ") + "])";
    }
  }
  return "?";
}

inline std::string show_value(const ValueP& v, bool atom) {
  switch (v->k) {
    case Value::K::Const: {
      std::string s = show_const(v->c);
      bool compound = v->c.k == Constant::K::Prim && !v->c.args.empty();
      return paren_if(atom && compound, s);
    }
    case Value::K::Var: return v->var;
    case Value::K::Lam:
      return paren_if(atom, "fun " + v->x + " -> " + show_term(v->body));
    case Value::K::Fix:
      return paren_if(atom, "fix " + v->f + " " + v->x + " -> " + show_term(v->body));
  }
  return "?";
}

inline std::string ind(int n) { return std::string(static_cast<size_t>(n) * 2, ' '); }

inline std::string show_term(const TermP& n, int indent) {
  switch (n->k) {
    case TargetTerm::K::Val: return show_value(n->v);
    case TargetTerm::K::App: {
      std::string f = show_term(n->n1, indent);
      if (n->n1->k != TargetTerm::K::Val && n->n1->k != TargetTerm::K::App) f = "(" + f + ")";
      if (n->n1->k == TargetTerm::K::Val &&
          (n->n1->v->k == Value::K::Lam || n->n1->v->k == Value::K::Fix))
        f = "(" + f + ")";
      return f + " " + show_value(n->v, true);
    }
    case TargetTerm::K::Let:
      return "let " + n->x + " = " + show_term(n->n1, indent + 1) + " in\n" + ind(indent) +
             show_term(n->n2, indent);
    case TargetTerm::K::If:
      return "if " + show_value(n->v, true) + " then " + show_term(n->n1, indent + 1) + " else " +
             show_term(n->n2, indent + 1);
    case TargetTerm::K::Assert:
      return "assert (" + show(n->pred, 0) + "); " + show_term(n->n1, indent);
  }
  return "?";
}

inline std::string show_source(const SrcP& m, int indent = 0) {
  switch (m->k) {
    case SourceTerm::K::Const: return show_const(m->c);
    case SourceTerm::K::Var: return m->var;
    case SourceTerm::K::Lam: {
      std::string bind = m->ty ? "(" + m->var + " : " + show(*m->ty) + ")" : m->var;
      return "fun " + bind + " -> " + show_source(m->m1, indent);
    }
    case SourceTerm::K::App: {
      std::string f = show_source(m->m1, indent);
      if (m->m1->k != SourceTerm::K::Var && m->m1->k != SourceTerm::K::App &&
          m->m1->k != SourceTerm::K::Const)
        f = "(" + f + ")";
      return f + " " + m->var;
    }
    case SourceTerm::K::Annot:
      return "(" + show_source(m->m1, indent) + " : " + show(*m->ty) + ")";
    case SourceTerm::K::Let:
      return "let " + m->var + " = " + show_source(m->m1, indent + 1) + " in\n" + ind(indent) +
             show_source(m->m2, indent);
    case SourceTerm::K::Fix: {
      std::string f = m->ty ? "(" + m->var + " : " + show(*m->ty) + ")" : m->var;
      return "fix " + f + " " + m->var2 + " -> " + show_source(m->m1, indent);
    }
    case SourceTerm::K::If:
      return "if " + m->var + " then " + show_source(m->m1, indent + 1) + " else " +
             show_source(m->m2, indent + 1);
  }
  return "?";
}

// Alpha-equality of source terms modulo a free-variable renaming (used by the
// poly fallback-safety check, where one side renames a binding).
inline bool alpha_equal_source(const SrcP& a, const SrcP& b,
                               std::map<std::string, std::string> freemap = {}) {
  std::function<bool(const SrcP&, const SrcP&, std::map<std::string, std::string>)> go =
      [&](const SrcP& a, const SrcP& b, std::map<std::string, std::string> env) -> bool {
    auto names_match = [&](const std::string& na, const std::string& nb) {
      auto it = env.find(na);
      if (it != env.end()) return it->second == nb;
      auto fit = freemap.find(na);
      if (fit != freemap.end()) return fit->second == nb;
      return na == nb;
    };
    if (a->k != b->k) return false;
    switch (a->k) {
      case SourceTerm::K::Const: {
        const auto& ca = a->c;
        const auto& cb = b->c;
        if (ca.k != cb.k) return false;
        switch (ca.k) {
          case Constant::K::Int: return ca.i == cb.i;
          case Constant::K::Bool: return ca.b == cb.b;
          case Constant::K::IntList: return ca.list == cb.list;
          default: return false;
        }
      }
      case SourceTerm::K::Var: return names_match(a->var, b->var);
      case SourceTerm::K::Lam: {
        bool tya = a->ty.has_value(), tyb = b->ty.has_value();
        if (tya != tyb) return false;
        if (tya && !alpha_equal(*a->ty, *b->ty)) return false;
        env[a->var] = b->var;
        return go(a->m1, b->m1, env);
      }
      case SourceTerm::K::App:
        return go(a->m1, b->m1, env) && names_match(a->var, b->var);
      case SourceTerm::K::Annot:
        return alpha_equal(*a->ty, *b->ty) && go(a->m1, b->m1, env);
      case SourceTerm::K::Let: {
        if (!go(a->m1, b->m1, env)) return false;
        env[a->var] = b->var;
        return go(a->m2, b->m2, env);
      }
      case SourceTerm::K::Fix: {
        bool tya = a->ty.has_value(), tyb = b->ty.has_value();
        if (tya != tyb) return false;
        if (tya && !alpha_equal(*a->ty, *b->ty)) return false;
        env[a->var] = b->var;
        env[a->var2] = b->var2;
        return go(a->m1, b->m1, env);
      }
      case SourceTerm::K::If:
        return names_match(a->var, b->var) && go(a->m1, b->m1, env) && go(a->m2, b->m2, env);
    }
    return false;
  };
  return go(a, b, {});
}

// Count non-trivial assertions in a target term.
inline int count_asserts(const TermP& n) {
  switch (n->k) {
    case TargetTerm::K::Val:
      switch (n->v->k) {
        case Value::K::Lam:
        case Value::K::Fix: return count_asserts(n->v->body);
        default: return 0;
      }
    case TargetTerm::K::App: return count_asserts(n->n1) + count_asserts(t_val(n->v));
    case TargetTerm::K::Let: return count_asserts(n->n1) + count_asserts(n->n2);
    case TargetTerm::K::If:
      return count_asserts(n->n1) + count_asserts(n->n2) + count_asserts(t_val(n->v));
    case TargetTerm::K::Assert:
      return (n->pred->k == Pred::K::True ? 0 : 1) + count_asserts(n->n1);
  }
  return 0;
}

}  // namespace graten
