#pragma once

// Sizes, shapes and predicates: the refinement logic's term language.
//
//   s ::= n | x | -s | s+s | s*s | s/s | head S | last S | len S | nth s S | prod S
//   S ::= [s;...;s] | x | x.shape | cons s S | append S S | tail S | init S
//       | insertAt s s S | dropAt s S | swap s s S | reshape S S | broadcast S S | matmul S S
//   p ::= true | false | s=s | S=S | s<s | s<=s | x | not p | p && p | p || p
//       | broadcastable S S | reshapeable S S | <predicate variable application>
//
// Division is truncating (C semantics). Predicate variable applications are
// inference-internal; they never appear in elaborated output.

#include <cassert>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <variant>

#include "graten/basics.hpp"

namespace graten {

enum class Sort { Int, Bool, IntList, Tensor };

inline std::string sort_name(Sort s) {
  switch (s) {
    case Sort::Int: return "int";
    case Sort::Bool: return "bool";
    case Sort::IntList: return "int list";
    case Sort::Tensor: return "tensor";
  }
  return "?";
}

struct Size;
struct Shape;
struct Pred;
using SizeP = std::shared_ptr<const Size>;
using ShapeP = std::shared_ptr<const Shape>;
using PredP = std::shared_ptr<const Pred>;

struct Size {
  enum class K { Lit, Var, Neg, Add, Mul, Div, Head, Last, Len, Nth, Prod };
  K k;
  long long lit = 0;
  std::string var;
  SizeP a, b;    // operands for Neg/Add/Mul/Div, index for Nth
  ShapeP sh;     // operand for Head/Last/Len/Nth/Prod
};

struct Shape {
  enum class K {
    Lit, Var, ShapeOf, Cons, Append, Tail, Init, InsertAt, DropAt, Swap,
    Reshape, Broadcast, Matmul
  };
  K k;
  std::vector<SizeP> elems;  // Lit
  std::string var;           // Var (int list variable) / ShapeOf (tensor variable)
  SizeP s1, s2;              // size operands: Cons head, InsertAt/DropAt/Swap indices
  ShapeP a, b;               // shape operands
};

// A predicate-variable argument is always a program variable of base sort.
struct PVarArg {
  Sort sort;
  std::string var;
  bool operator==(const PVarArg& o) const { return sort == o.sort && var == o.var; }
};

struct Pred {
  enum class K { True, False, EqSz, EqSh, Lt, Le, BVar, Not, And, Or, Brc, Rsh, PVar };
  K k;
  SizeP s1, s2;
  ShapeP sh1, sh2;
  std::string var;  // BVar
  PredP p1, p2;
  // PVar: identity plus actual arguments for the declared dependency set and
  // parameter list. Dependency variables include the refinement binder.
  int pvar_id = -1;
  std::vector<PVarArg> deps;
  std::vector<PVarArg> params;
};

// ---- constructors ----------------------------------------------------------

inline SizeP sz_lit(long long n) {
  auto s = std::make_shared<Size>();
  s->k = Size::K::Lit;
  s->lit = n;
  return s;
}
inline SizeP sz_var(std::string x) {
  auto s = std::make_shared<Size>();
  s->k = Size::K::Var;
  s->var = std::move(x);
  return s;
}
inline SizeP sz_neg(SizeP a) {
  auto s = std::make_shared<Size>();
  s->k = Size::K::Neg;
  s->a = std::move(a);
  return s;
}
inline SizeP sz_bin(Size::K k, SizeP a, SizeP b) {
  auto s = std::make_shared<Size>();
  s->k = k;
  s->a = std::move(a);
  s->b = std::move(b);
  return s;
}
inline SizeP sz_add(SizeP a, SizeP b) { return sz_bin(Size::K::Add, std::move(a), std::move(b)); }
inline SizeP sz_sub(SizeP a, SizeP b) { return sz_add(std::move(a), sz_neg(std::move(b))); }
inline SizeP sz_mul(SizeP a, SizeP b) { return sz_bin(Size::K::Mul, std::move(a), std::move(b)); }
inline SizeP sz_div(SizeP a, SizeP b) { return sz_bin(Size::K::Div, std::move(a), std::move(b)); }
inline SizeP sz_shape1(Size::K k, ShapeP sh) {
  auto s = std::make_shared<Size>();
  s->k = k;
  s->sh = std::move(sh);
  return s;
}
inline SizeP sz_head(ShapeP sh) { return sz_shape1(Size::K::Head, std::move(sh)); }
inline SizeP sz_last(ShapeP sh) { return sz_shape1(Size::K::Last, std::move(sh)); }
inline SizeP sz_len(ShapeP sh) { return sz_shape1(Size::K::Len, std::move(sh)); }
inline SizeP sz_prod(ShapeP sh) { return sz_shape1(Size::K::Prod, std::move(sh)); }
inline SizeP sz_nth(SizeP i, ShapeP sh) {
  auto s = std::make_shared<Size>();
  s->k = Size::K::Nth;
  s->a = std::move(i);
  s->sh = std::move(sh);
  return s;
}

inline ShapeP sh_lit(std::vector<SizeP> elems) {
  auto s = std::make_shared<Shape>();
  s->k = Shape::K::Lit;
  s->elems = std::move(elems);
  return s;
}
inline ShapeP sh_lit_ints(const std::vector<long long>& ns) {
  std::vector<SizeP> es;
  es.reserve(ns.size());
  for (long long n : ns) es.push_back(sz_lit(n));
  return sh_lit(std::move(es));
}
inline ShapeP sh_var(std::string x) {
  auto s = std::make_shared<Shape>();
  s->k = Shape::K::Var;
  s->var = std::move(x);
  return s;
}
inline ShapeP sh_shape_of(std::string x) {
  auto s = std::make_shared<Shape>();
  s->k = Shape::K::ShapeOf;
  s->var = std::move(x);
  return s;
}
inline ShapeP sh_cons(SizeP h, ShapeP t) {
  auto s = std::make_shared<Shape>();
  s->k = Shape::K::Cons;
  s->s1 = std::move(h);
  s->a = std::move(t);
  return s;
}
inline ShapeP sh_bin(Shape::K k, ShapeP a, ShapeP b) {
  auto s = std::make_shared<Shape>();
  s->k = k;
  s->a = std::move(a);
  s->b = std::move(b);
  return s;
}
inline ShapeP sh_append(ShapeP a, ShapeP b) { return sh_bin(Shape::K::Append, std::move(a), std::move(b)); }
inline ShapeP sh_reshape(ShapeP a, ShapeP b) { return sh_bin(Shape::K::Reshape, std::move(a), std::move(b)); }
inline ShapeP sh_broadcast(ShapeP a, ShapeP b) { return sh_bin(Shape::K::Broadcast, std::move(a), std::move(b)); }
inline ShapeP sh_matmul(ShapeP a, ShapeP b) { return sh_bin(Shape::K::Matmul, std::move(a), std::move(b)); }
inline ShapeP sh_un(Shape::K k, ShapeP a) {
  auto s = std::make_shared<Shape>();
  s->k = k;
  s->a = std::move(a);
  return s;
}
inline ShapeP sh_tail(ShapeP a) { return sh_un(Shape::K::Tail, std::move(a)); }
inline ShapeP sh_init(ShapeP a) { return sh_un(Shape::K::Init, std::move(a)); }
inline ShapeP sh_insert_at(SizeP i, SizeP v, ShapeP a) {
  auto s = std::make_shared<Shape>();
  s->k = Shape::K::InsertAt;
  s->s1 = std::move(i);
  s->s2 = std::move(v);
  s->a = std::move(a);
  return s;
}
inline ShapeP sh_drop_at(SizeP i, ShapeP a) {
  auto s = std::make_shared<Shape>();
  s->k = Shape::K::DropAt;
  s->s1 = std::move(i);
  s->a = std::move(a);
  return s;
}
inline ShapeP sh_swap(SizeP i, SizeP j, ShapeP a) {
  auto s = std::make_shared<Shape>();
  s->k = Shape::K::Swap;
  s->s1 = std::move(i);
  s->s2 = std::move(j);
  s->a = std::move(a);
  return s;
}

inline PredP pr_true() {
  static PredP t = [] {
    auto p = std::make_shared<Pred>();
    p->k = Pred::K::True;
    return p;
  }();
  return t;
}
inline PredP pr_false() {
  static PredP f = [] {
    auto p = std::make_shared<Pred>();
    p->k = Pred::K::False;
    return p;
  }();
  return f;
}
inline PredP pr_eq_sz(SizeP a, SizeP b) {
  auto p = std::make_shared<Pred>();
  p->k = Pred::K::EqSz;
  p->s1 = std::move(a);
  p->s2 = std::move(b);
  return p;
}
inline PredP pr_eq_sh(ShapeP a, ShapeP b) {
  auto p = std::make_shared<Pred>();
  p->k = Pred::K::EqSh;
  p->sh1 = std::move(a);
  p->sh2 = std::move(b);
  return p;
}
inline PredP pr_lt(SizeP a, SizeP b) {
  auto p = std::make_shared<Pred>();
  p->k = Pred::K::Lt;
  p->s1 = std::move(a);
  p->s2 = std::move(b);
  return p;
}
inline PredP pr_le(SizeP a, SizeP b) {
  auto p = std::make_shared<Pred>();
  p->k = Pred::K::Le;
  p->s1 = std::move(a);
  p->s2 = std::move(b);
  return p;
}
inline PredP pr_bvar(std::string x) {
  auto p = std::make_shared<Pred>();
  p->k = Pred::K::BVar;
  p->var = std::move(x);
  return p;
}
inline PredP pr_not(PredP a) {
  auto p = std::make_shared<Pred>();
  p->k = Pred::K::Not;
  p->p1 = std::move(a);
  return p;
}
inline PredP pr_and(PredP a, PredP b) {
  if (a->k == Pred::K::True) return b;
  if (b->k == Pred::K::True) return a;
  auto p = std::make_shared<Pred>();
  p->k = Pred::K::And;
  p->p1 = std::move(a);
  p->p2 = std::move(b);
  return p;
}
inline PredP pr_or(PredP a, PredP b) {
  auto p = std::make_shared<Pred>();
  p->k = Pred::K::Or;
  p->p1 = std::move(a);
  p->p2 = std::move(b);
  return p;
}
inline PredP pr_brc(ShapeP a, ShapeP b) {
  auto p = std::make_shared<Pred>();
  p->k = Pred::K::Brc;
  p->sh1 = std::move(a);
  p->sh2 = std::move(b);
  return p;
}
inline PredP pr_rsh(ShapeP a, ShapeP b) {
  auto p = std::make_shared<Pred>();
  p->k = Pred::K::Rsh;
  p->sh1 = std::move(a);
  p->sh2 = std::move(b);
  return p;
}
inline PredP pr_pvar(int id, std::vector<PVarArg> deps, std::vector<PVarArg> params) {
  auto p = std::make_shared<Pred>();
  p->k = Pred::K::PVar;
  p->pvar_id = id;
  p->deps = std::move(deps);
  p->params = std::move(params);
  return p;
}

inline PredP pr_conj(const std::vector<PredP>& conjs) {
  PredP out = pr_true();
  for (const auto& c : conjs) out = pr_and(out, c);
  return out;
}

// ---- printing --------------------------------------------------------------
//
// Surface syntax, matching the parser. Builtin applications use juxtaposition
// (`nth 0 x.shape`), shape-of prints as `x.shape`.

inline std::string show(const SizeP& s, int prec = 0);
inline std::string show(const ShapeP& s, bool atom = false);
inline std::string show(const PredP& p, int prec = 0);

inline std::string paren_if(bool c, const std::string& s) { return c ? "(" + s + ")" : s; }

inline std::string show(const SizeP& s, int prec) {
  using K = Size::K;
  switch (s->k) {
    case K::Lit:
      // A negative literal reads back as a negation, so give it that precedence.
      return paren_if(s->lit < 0 && prec > 3, std::to_string(s->lit));
    case K::Var: return s->var;
    case K::Neg: return paren_if(prec > 3, "-" + show(s->a, 4));
    case K::Add: {
      // a + -b prints as a - b
      if (s->b->k == K::Neg)
        return paren_if(prec > 1, show(s->a, 1) + " - " + show(s->b->a, 2));
      if (s->b->k == K::Lit && s->b->lit < 0 && s->b->lit > std::numeric_limits<long long>::min())
        return paren_if(prec > 1, show(s->a, 1) + " - " + std::to_string(-s->b->lit));
      return paren_if(prec > 1, show(s->a, 1) + " + " + show(s->b, 2));
    }
    case K::Mul: return paren_if(prec > 2, show(s->a, 2) + " * " + show(s->b, 3));
    case K::Div: return paren_if(prec > 2, show(s->a, 2) + " / " + show(s->b, 3));
    case K::Head: return paren_if(prec > 4, "head " + show(s->sh, true));
    case K::Last: return paren_if(prec > 4, "last " + show(s->sh, true));
    case K::Len: return paren_if(prec > 4, "len " + show(s->sh, true));
    case K::Prod: return paren_if(prec > 4, "prod " + show(s->sh, true));
    case K::Nth: return paren_if(prec > 4, "nth " + show(s->a, 5) + " " + show(s->sh, true));
  }
  return "?";
}

inline std::string show(const ShapeP& s, bool atom) {
  using K = Shape::K;
  switch (s->k) {
    case K::Lit: {
      std::vector<std::string> parts;
      for (const auto& e : s->elems) parts.push_back(show(e, 0));
      return "[" + join(parts, "; ") + "]";
    }
    case K::Var: return s->var;
    case K::ShapeOf: return s->var + ".shape";
    case K::Cons: return paren_if(atom, "cons " + show(s->s1, 5) + " " + show(s->a, true));
    case K::Append: return paren_if(atom, "append " + show(s->a, true) + " " + show(s->b, true));
    case K::Tail: return paren_if(atom, "tail " + show(s->a, true));
    case K::Init: return paren_if(atom, "init " + show(s->a, true));
    case K::InsertAt:
      return paren_if(atom, "insertAt " + show(s->s1, 5) + " " + show(s->s2, 5) + " " + show(s->a, true));
    case K::DropAt: return paren_if(atom, "dropAt " + show(s->s1, 5) + " " + show(s->a, true));
    case K::Swap:
      return paren_if(atom, "swap " + show(s->s1, 5) + " " + show(s->s2, 5) + " " + show(s->a, true));
    case K::Reshape: return paren_if(atom, "reshape " + show(s->a, true) + " " + show(s->b, true));
    case K::Broadcast: return paren_if(atom, "broadcast " + show(s->a, true) + " " + show(s->b, true));
    case K::Matmul: return paren_if(atom, "matmul " + show(s->a, true) + " " + show(s->b, true));
  }
  return "?";
}

inline std::string show(const PredP& p, int prec) {
  using K = Pred::K;
  switch (p->k) {
    case K::True: return "true";
    case K::False: return "false";
    case K::EqSz: return paren_if(prec > 3, show(p->s1, 1) + " = " + show(p->s2, 1));
    case K::EqSh: return paren_if(prec > 3, show(p->sh1, false) + " = " + show(p->sh2, false));
    case K::Lt: return paren_if(prec > 3, show(p->s1, 1) + " < " + show(p->s2, 1));
    case K::Le: return paren_if(prec > 3, show(p->s1, 1) + " <= " + show(p->s2, 1));
    case K::BVar: return p->var;
    case K::Not: return paren_if(prec > 3, "not " + show(p->p1, 4));
    case K::And: return paren_if(prec > 2, show(p->p1, 2) + " && " + show(p->p2, 3));
    case K::Or: return paren_if(prec > 1, show(p->p1, 1) + " || " + show(p->p2, 2));
    case K::Brc:
      return paren_if(prec > 3, "broadcastable " + show(p->sh1, true) + " " + show(p->sh2, true));
    case K::Rsh:
      return paren_if(prec > 3, "reshapeable " + show(p->sh1, true) + " " + show(p->sh2, true));
    case K::PVar: {
      std::vector<std::string> ds, ps;
      for (const auto& d : p->deps) ds.push_back(d.var);
      for (const auto& a : p->params) ps.push_back(a.var);
      return "?P" + std::to_string(p->pvar_id) + "{" + join(ds, ",") + "}(" + join(ps, ",") + ")";
    }
  }
  return "?";
}

// ---- structural equality ---------------------------------------------------

inline bool equal(const SizeP& a, const SizeP& b);
inline bool equal(const ShapeP& a, const ShapeP& b);
inline bool equal(const PredP& a, const PredP& b);

inline bool equal(const SizeP& a, const SizeP& b) {
  if (a.get() == b.get()) return true;
  if (a->k != b->k) return false;
  switch (a->k) {
    case Size::K::Lit: return a->lit == b->lit;
    case Size::K::Var: return a->var == b->var;
    case Size::K::Neg: return equal(a->a, b->a);
    case Size::K::Add:
    case Size::K::Mul:
    case Size::K::Div: return equal(a->a, b->a) && equal(a->b, b->b);
    case Size::K::Head:
    case Size::K::Last:
    case Size::K::Len:
    case Size::K::Prod: return equal(a->sh, b->sh);
    case Size::K::Nth: return equal(a->a, b->a) && equal(a->sh, b->sh);
  }
  return false;
}

inline bool equal(const ShapeP& a, const ShapeP& b) {
  if (a.get() == b.get()) return true;
  if (a->k != b->k) return false;
  switch (a->k) {
    case Shape::K::Lit: {
      if (a->elems.size() != b->elems.size()) return false;
      for (size_t i = 0; i < a->elems.size(); ++i)
        if (!equal(a->elems[i], b->elems[i])) return false;
      return true;
    }
    case Shape::K::Var:
    case Shape::K::ShapeOf: return a->var == b->var;
    case Shape::K::Cons: return equal(a->s1, b->s1) && equal(a->a, b->a);
    case Shape::K::Tail:
    case Shape::K::Init: return equal(a->a, b->a);
    case Shape::K::InsertAt:
      return equal(a->s1, b->s1) && equal(a->s2, b->s2) && equal(a->a, b->a);
    case Shape::K::DropAt: return equal(a->s1, b->s1) && equal(a->a, b->a);
    case Shape::K::Swap:
      return equal(a->s1, b->s1) && equal(a->s2, b->s2) && equal(a->a, b->a);
    case Shape::K::Append:
    case Shape::K::Reshape:
    case Shape::K::Broadcast:
    case Shape::K::Matmul: return equal(a->a, b->a) && equal(a->b, b->b);
  }
  return false;
}

inline bool equal(const PredP& a, const PredP& b) {
  if (a.get() == b.get()) return true;
  if (a->k != b->k) return false;
  switch (a->k) {
    case Pred::K::True:
    case Pred::K::False: return true;
    case Pred::K::EqSz:
    case Pred::K::Lt:
    case Pred::K::Le: return equal(a->s1, b->s1) && equal(a->s2, b->s2);
    case Pred::K::EqSh:
    case Pred::K::Brc:
    case Pred::K::Rsh: return equal(a->sh1, b->sh1) && equal(a->sh2, b->sh2);
    case Pred::K::BVar: return a->var == b->var;
    case Pred::K::Not: return equal(a->p1, b->p1);
    case Pred::K::And:
    case Pred::K::Or: return equal(a->p1, b->p1) && equal(a->p2, b->p2);
    case Pred::K::PVar:
      return a->pvar_id == b->pvar_id && a->deps == b->deps && a->params == b->params;
  }
  return false;
}

// ---- free variables --------------------------------------------------------

inline void fv(const SizeP& s, std::set<std::string>& out);
inline void fv(const ShapeP& s, std::set<std::string>& out);
inline void fv(const PredP& p, std::set<std::string>& out);

inline void fv(const SizeP& s, std::set<std::string>& out) {
  switch (s->k) {
    case Size::K::Lit: return;
    case Size::K::Var: out.insert(s->var); return;
    case Size::K::Neg: fv(s->a, out); return;
    case Size::K::Add:
    case Size::K::Mul:
    case Size::K::Div: fv(s->a, out); fv(s->b, out); return;
    case Size::K::Head:
    case Size::K::Last:
    case Size::K::Len:
    case Size::K::Prod: fv(s->sh, out); return;
    case Size::K::Nth: fv(s->a, out); fv(s->sh, out); return;
  }
}

inline void fv(const ShapeP& s, std::set<std::string>& out) {
  switch (s->k) {
    case Shape::K::Lit:
      for (const auto& e : s->elems) fv(e, out);
      return;
    case Shape::K::Var:
    case Shape::K::ShapeOf: out.insert(s->var); return;
    case Shape::K::Cons: fv(s->s1, out); fv(s->a, out); return;
    case Shape::K::Tail:
    case Shape::K::Init: fv(s->a, out); return;
    case Shape::K::InsertAt: fv(s->s1, out); fv(s->s2, out); fv(s->a, out); return;
    case Shape::K::DropAt: fv(s->s1, out); fv(s->a, out); return;
    case Shape::K::Swap: fv(s->s1, out); fv(s->s2, out); fv(s->a, out); return;
    case Shape::K::Append:
    case Shape::K::Reshape:
    case Shape::K::Broadcast:
    case Shape::K::Matmul: fv(s->a, out); fv(s->b, out); return;
  }
}

inline void fv(const PredP& p, std::set<std::string>& out) {
  switch (p->k) {
    case Pred::K::True:
    case Pred::K::False: return;
    case Pred::K::EqSz:
    case Pred::K::Lt:
    case Pred::K::Le: fv(p->s1, out); fv(p->s2, out); return;
    case Pred::K::EqSh:
    case Pred::K::Brc:
    case Pred::K::Rsh: fv(p->sh1, out); fv(p->sh2, out); return;
    case Pred::K::BVar: out.insert(p->var); return;
    case Pred::K::Not: fv(p->p1, out); return;
    case Pred::K::And:
    case Pred::K::Or: fv(p->p1, out); fv(p->p2, out); return;
    case Pred::K::PVar:
      for (const auto& d : p->deps) out.insert(d.var);
      for (const auto& a : p->params) out.insert(a.var);
      return;
  }
}

inline std::set<std::string> fv_pred(const PredP& p) {
  std::set<std::string> out;
  fv(p, out);
  return out;
}

inline bool has_pvar(const PredP& p) {
  switch (p->k) {
    case Pred::K::PVar: return true;
    case Pred::K::Not: return has_pvar(p->p1);
    case Pred::K::And:
    case Pred::K::Or: return has_pvar(p->p1) || has_pvar(p->p2);
    default: return false;
  }
}

// ---- substitution ----------------------------------------------------------
//
// A substitution entry replaces a variable of one base sort. Tensor variables
// occur only under `.shape` and as PredVar arguments; substituting a tensor
// value therefore resolves `x.shape` to a shape literal, while a tensor
// rename just renames. Substituting a non-variable into a PredVar argument is
// an internal error: the inference phase only ever renames there, and
// elaborated predicates carry no PredVars.

struct TensorSub {
  std::optional<std::string> rename;
  std::optional<std::vector<long long>> shape;  // value substitution
};

using SubstVal = std::variant<SizeP, ShapeP, PredP, TensorSub>;
using Subst = std::map<std::string, SubstVal>;

inline SizeP subst(const SizeP& s, const Subst& m);
inline ShapeP subst(const ShapeP& s, const Subst& m);
inline PredP subst(const PredP& p, const Subst& m);

inline SizeP subst(const SizeP& s, const Subst& m) {
  switch (s->k) {
    case Size::K::Lit: return s;
    case Size::K::Var: {
      auto it = m.find(s->var);
      if (it == m.end()) return s;
      if (auto* sz = std::get_if<SizeP>(&it->second)) return *sz;
      throw InternalError("size variable " + s->var + " substituted at wrong sort");
    }
    case Size::K::Neg: return sz_neg(subst(s->a, m));
    case Size::K::Add: return sz_add(subst(s->a, m), subst(s->b, m));
    case Size::K::Mul: return sz_mul(subst(s->a, m), subst(s->b, m));
    case Size::K::Div: return sz_div(subst(s->a, m), subst(s->b, m));
    case Size::K::Head: return sz_head(subst(s->sh, m));
    case Size::K::Last: return sz_last(subst(s->sh, m));
    case Size::K::Len: return sz_len(subst(s->sh, m));
    case Size::K::Prod: return sz_prod(subst(s->sh, m));
    case Size::K::Nth: return sz_nth(subst(s->a, m), subst(s->sh, m));
  }
  return s;
}

inline ShapeP subst(const ShapeP& s, const Subst& m) {
  switch (s->k) {
    case Shape::K::Lit: {
      std::vector<SizeP> es;
      es.reserve(s->elems.size());
      for (const auto& e : s->elems) es.push_back(subst(e, m));
      return sh_lit(std::move(es));
    }
    case Shape::K::Var: {
      auto it = m.find(s->var);
      if (it == m.end()) return s;
      if (auto* sh = std::get_if<ShapeP>(&it->second)) return *sh;
      throw InternalError("list variable " + s->var + " substituted at wrong sort");
    }
    case Shape::K::ShapeOf: {
      auto it = m.find(s->var);
      if (it == m.end()) return s;
      if (auto* t = std::get_if<TensorSub>(&it->second)) {
        if (t->rename) return sh_shape_of(*t->rename);
        if (t->shape) return sh_lit_ints(*t->shape);
      }
      throw InternalError("tensor variable " + s->var + " substituted at wrong sort");
    }
    case Shape::K::Cons: return sh_cons(subst(s->s1, m), subst(s->a, m));
    case Shape::K::Tail: return sh_tail(subst(s->a, m));
    case Shape::K::Init: return sh_init(subst(s->a, m));
    case Shape::K::InsertAt: return sh_insert_at(subst(s->s1, m), subst(s->s2, m), subst(s->a, m));
    case Shape::K::DropAt: return sh_drop_at(subst(s->s1, m), subst(s->a, m));
    case Shape::K::Swap: return sh_swap(subst(s->s1, m), subst(s->s2, m), subst(s->a, m));
    case Shape::K::Append: return sh_append(subst(s->a, m), subst(s->b, m));
    case Shape::K::Reshape: return sh_reshape(subst(s->a, m), subst(s->b, m));
    case Shape::K::Broadcast: return sh_broadcast(subst(s->a, m), subst(s->b, m));
    case Shape::K::Matmul: return sh_matmul(subst(s->a, m), subst(s->b, m));
  }
  return s;
}

inline PVarArg subst_arg(const PVarArg& a, const Subst& m) {
  auto it = m.find(a.var);
  if (it == m.end()) return a;
  if (auto* sz = std::get_if<SizeP>(&it->second)) {
    if ((*sz)->k == Size::K::Var) return PVarArg{a.sort, (*sz)->var};
  } else if (auto* sh = std::get_if<ShapeP>(&it->second)) {
    if ((*sh)->k == Shape::K::Var) return PVarArg{a.sort, (*sh)->var};
  } else if (auto* pr = std::get_if<PredP>(&it->second)) {
    if ((*pr)->k == Pred::K::BVar) return PVarArg{a.sort, (*pr)->var};
  } else if (auto* t = std::get_if<TensorSub>(&it->second)) {
    if (t->rename) return PVarArg{a.sort, *t->rename};
  }
  throw InternalError("PredVar argument " + a.var + " substituted by a non-variable");
}

inline PredP subst(const PredP& p, const Subst& m) {
  switch (p->k) {
    case Pred::K::True:
    case Pred::K::False: return p;
    case Pred::K::EqSz: return pr_eq_sz(subst(p->s1, m), subst(p->s2, m));
    case Pred::K::Lt: return pr_lt(subst(p->s1, m), subst(p->s2, m));
    case Pred::K::Le: return pr_le(subst(p->s1, m), subst(p->s2, m));
    case Pred::K::EqSh: return pr_eq_sh(subst(p->sh1, m), subst(p->sh2, m));
    case Pred::K::Brc: return pr_brc(subst(p->sh1, m), subst(p->sh2, m));
    case Pred::K::Rsh: return pr_rsh(subst(p->sh1, m), subst(p->sh2, m));
    case Pred::K::BVar: {
      auto it = m.find(p->var);
      if (it == m.end()) return p;
      if (auto* pr = std::get_if<PredP>(&it->second)) return *pr;
      throw InternalError("bool variable " + p->var + " substituted at wrong sort");
    }
    case Pred::K::Not: return pr_not(subst(p->p1, m));
    case Pred::K::And: {
      auto p1 = subst(p->p1, m);
      auto p2 = subst(p->p2, m);
      auto q = std::make_shared<Pred>();
      q->k = Pred::K::And;
      q->p1 = std::move(p1);
      q->p2 = std::move(p2);
      return q;
    }
    case Pred::K::Or: return pr_or(subst(p->p1, m), subst(p->p2, m));
    case Pred::K::PVar: {
      std::vector<PVarArg> ds, ps;
      ds.reserve(p->deps.size());
      ps.reserve(p->params.size());
      for (const auto& d : p->deps) ds.push_back(subst_arg(d, m));
      for (const auto& a : p->params) ps.push_back(subst_arg(a, m));
      return pr_pvar(p->pvar_id, std::move(ds), std::move(ps));
    }
  }
  return p;
}

// Convenience: single-variable rename at a given sort.
inline Subst rename1(Sort sort, const std::string& from, const std::string& to) {
  Subst m;
  switch (sort) {
    case Sort::Int: m.emplace(from, sz_var(to)); break;
    case Sort::Bool: m.emplace(from, pr_bvar(to)); break;
    case Sort::IntList: m.emplace(from, sh_var(to)); break;
    case Sort::Tensor: m.emplace(from, TensorSub{to, std::nullopt}); break;
  }
  return m;
}

// Flatten a predicate into its top-level conjuncts, dropping `true`.
inline void conjuncts(const PredP& p, std::vector<PredP>& out) {
  if (p->k == Pred::K::And) {
    conjuncts(p->p1, out);
    conjuncts(p->p2, out);
    return;
  }
  if (p->k == Pred::K::True) return;
  out.push_back(p);
}

inline std::vector<PredP> conjuncts(const PredP& p) {
  std::vector<PredP> out;
  conjuncts(p, out);
  return out;
}

}  // namespace graten
