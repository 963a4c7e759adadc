// Validity / satisfiability engine tests.
//
// The oracle below is an independent re-implementation of the predicate
// semantics (exception style, explicit padding for broadcasting, recursive
// list handling). Engine verdicts are cross-checked against exhaustive
// oracle enumeration over small domains: syntactic Valid/Unsat claims must
// never be refuted by the oracle, and every Invalid/Sat witness must replay.

#include <gtest/gtest.h>

#include <functional>
#include <thread>

#include "graten/logic.hpp"

#include "gen_common.hpp"

using namespace graten;

// ===== independent oracle ====================================================

namespace oracle {

struct Err {};

struct Val {
  char tag;  // 'i' int, 'b' bool, 'l' list, 't' tensor
  long long i = 0;
  bool b = false;
  std::vector<long long> xs;
};

using Env = std::map<std::string, Val>;

long long osz(const Env& e, const SizeP& s);
std::vector<long long> osh(const Env& e, const ShapeP& s);
bool opred(const Env& e, const PredP& p);

std::vector<long long> pad_left(std::vector<long long> v, size_t n) {
  while (v.size() < n) v.insert(v.begin(), 1);
  return v;
}

long long osz(const Env& e, const SizeP& s) {
  switch (s->k) {
    case Size::K::Lit: return s->lit;
    case Size::K::Var: {
      auto it = e.find(s->var);
      if (it == e.end() || it->second.tag != 'i') throw Err{};
      return it->second.i;
    }
    case Size::K::Neg: return -osz(e, s->a);
    case Size::K::Add: return osz(e, s->a) + osz(e, s->b);
    case Size::K::Mul: return osz(e, s->a) * osz(e, s->b);
    case Size::K::Div: {
      long long a = osz(e, s->a), b = osz(e, s->b);
      if (b == 0) throw Err{};
      return a / b;
    }
    case Size::K::Head: {
      auto l = osh(e, s->sh);
      if (l.empty()) throw Err{};
      return l[0];
    }
    case Size::K::Last: {
      auto l = osh(e, s->sh);
      if (l.empty()) throw Err{};
      return l[l.size() - 1];
    }
    case Size::K::Len: return (long long)osh(e, s->sh).size();
    case Size::K::Prod: {
      long long p = 1;
      for (long long d : osh(e, s->sh)) p = p * d;
      return p;
    }
    case Size::K::Nth: {
      long long idx = osz(e, s->a);
      auto l = osh(e, s->sh);
      if (idx < 0 || (size_t)idx >= l.size()) throw Err{};
      return l[(size_t)idx];
    }
  }
  throw Err{};
}

std::vector<long long> osh(const Env& e, const ShapeP& s) {
  switch (s->k) {
    case Shape::K::Lit: {
      std::vector<long long> out;
      for (const auto& el : s->elems) out.push_back(osz(e, el));
      return out;
    }
    case Shape::K::Var: {
      auto it = e.find(s->var);
      if (it == e.end() || it->second.tag != 'l') throw Err{};
      return it->second.xs;
    }
    case Shape::K::ShapeOf: {
      auto it = e.find(s->var);
      if (it == e.end() || it->second.tag != 't') throw Err{};
      return it->second.xs;
    }
    case Shape::K::Cons: {
      long long h = osz(e, s->s1);
      auto t = osh(e, s->a);
      t.insert(t.begin(), h);
      return t;
    }
    case Shape::K::Append: {
      auto a = osh(e, s->a);
      for (long long d : osh(e, s->b)) a.push_back(d);
      return a;
    }
    case Shape::K::Tail: {
      auto a = osh(e, s->a);
      if (a.empty()) throw Err{};
      a.erase(a.begin());
      return a;
    }
    case Shape::K::Init: {
      auto a = osh(e, s->a);
      if (a.empty()) throw Err{};
      a.pop_back();
      return a;
    }
    case Shape::K::InsertAt: {
      long long i = osz(e, s->s1), v = osz(e, s->s2);
      auto a = osh(e, s->a);
      if (i < 0 || (size_t)i > a.size()) throw Err{};
      a.insert(a.begin() + (size_t)i, v);
      return a;
    }
    case Shape::K::DropAt: {
      long long i = osz(e, s->s1);
      auto a = osh(e, s->a);
      if (i < 0 || (size_t)i >= a.size()) throw Err{};
      a.erase(a.begin() + (size_t)i);
      return a;
    }
    case Shape::K::Swap: {
      long long i = osz(e, s->s1), j = osz(e, s->s2);
      auto a = osh(e, s->a);
      if (i < 0 || (size_t)i >= a.size() || j < 0 || (size_t)j >= a.size()) throw Err{};
      long long tmp = a[(size_t)i];
      a[(size_t)i] = a[(size_t)j];
      a[(size_t)j] = tmp;
      return a;
    }
    case Shape::K::Reshape: {
      auto from = osh(e, s->a);
      auto to = osh(e, s->b);
      long long p = 1;
      for (long long d : from) {
        if (d < 0) throw Err{};
        p *= d;
      }
      long long q = 1;
      int wilds = 0;
      for (long long d : to) {
        if (d == -1) {
          wilds++;
          continue;
        }
        if (d < 0) throw Err{};
        q *= d;
      }
      if (wilds > 1) throw Err{};
      if (wilds == 1) {
        if (q <= 0 || p % q != 0) throw Err{};
        for (auto& d : to)
          if (d == -1) d = p / q;
        return to;
      }
      if (p != q) throw Err{};
      return to;
    }
    case Shape::K::Broadcast: {
      auto a = osh(e, s->a), b = osh(e, s->b);
      size_t n = a.size() > b.size() ? a.size() : b.size();
      a = pad_left(a, n);
      b = pad_left(b, n);
      std::vector<long long> out;
      for (size_t k = 0; k < n; ++k) {
        if (a[k] == b[k]) out.push_back(a[k]);
        else if (a[k] == 1) out.push_back(b[k]);
        else if (b[k] == 1) out.push_back(a[k]);
        else throw Err{};
      }
      return out;
    }
    case Shape::K::Matmul: {
      auto a = osh(e, s->a), b = osh(e, s->b);
      if (a.size() < 2 || b.size() < 2) throw Err{};
      long long m = a[a.size() - 2], k1 = a[a.size() - 1];
      long long k2 = b[b.size() - 2], n = b[b.size() - 1];
      if (k1 != k2) throw Err{};
      std::vector<long long> ba(a.begin(), a.end() - 2), bb(b.begin(), b.end() - 2);
      size_t bn = ba.size() > bb.size() ? ba.size() : bb.size();
      ba = pad_left(ba, bn);
      bb = pad_left(bb, bn);
      std::vector<long long> out;
      for (size_t k = 0; k < bn; ++k) {
        if (ba[k] == bb[k]) out.push_back(ba[k]);
        else if (ba[k] == 1) out.push_back(bb[k]);
        else if (bb[k] == 1) out.push_back(ba[k]);
        else throw Err{};
      }
      out.push_back(m);
      out.push_back(n);
      return out;
    }
  }
  throw Err{};
}

bool opred(const Env& e, const PredP& p) {
  switch (p->k) {
    case Pred::K::True: return true;
    case Pred::K::False: return false;
    case Pred::K::EqSz: return osz(e, p->s1) == osz(e, p->s2);
    case Pred::K::Lt: return osz(e, p->s1) < osz(e, p->s2);
    case Pred::K::Le: return osz(e, p->s1) <= osz(e, p->s2);
    case Pred::K::EqSh: return osh(e, p->sh1) == osh(e, p->sh2);
    case Pred::K::BVar: {
      auto it = e.find(p->var);
      if (it == e.end() || it->second.tag != 'b') throw Err{};
      return it->second.b;
    }
    case Pred::K::Not: return !opred(e, p->p1);
    case Pred::K::And: {
      bool a = opred(e, p->p1);
      bool b = opred(e, p->p2);
      return a && b;
    }
    case Pred::K::Or: {
      bool a = opred(e, p->p1);
      bool b = opred(e, p->p2);
      return a || b;
    }
    case Pred::K::Brc: {
      auto a = osh(e, p->sh1), b = osh(e, p->sh2);
      size_t n = a.size() > b.size() ? a.size() : b.size();
      a = pad_left(a, n);
      b = pad_left(b, n);
      for (size_t k = 0; k < n; ++k)
        if (a[k] != b[k] && a[k] != 1 && b[k] != 1) return false;
      return true;
    }
    case Pred::K::Rsh: {
      // defined via the reshape attempt
      try {
        osh(e, sh_reshape(p->sh1, p->sh2));
        return true;
      } catch (Err&) {
        // distinguish "arguments error" from "not reshapeable": recompute args
        auto from = osh(e, p->sh1);
        auto to = osh(e, p->sh2);
        (void)from;
        (void)to;
        return false;
      }
    }
    case Pred::K::PVar: throw Err{};
  }
  throw Err{};
}

// three-valued wrapper: nullopt on error
std::optional<bool> opred3(const Env& e, const PredP& p) {
  try {
    return opred(e, p);
  } catch (Err&) {
    return std::nullopt;
  }
}

// enumerate all oracle environments over small domains
struct Domains {
  std::vector<long long> ints{-2, -1, 0, 1, 2, 3};
  std::vector<long long> elems{0, 1, 2, 3};
  int max_len = 2;
};

std::vector<Val> domain_for(graten::Sort s, const Domains& d) {
  std::vector<Val> out;
  switch (s) {
    case Sort::Int:
      for (long long v : d.ints) out.push_back(Val{'i', v, false, {}});
      break;
    case Sort::Bool:
      out.push_back(Val{'b', 0, false, {}});
      out.push_back(Val{'b', 0, true, {}});
      break;
    case Sort::IntList:
    case Sort::Tensor: {
      char tag = s == Sort::Tensor ? 't' : 'l';
      std::vector<std::vector<long long>> lists{{}};
      for (int l = 0; l < d.max_len; ++l) {
        size_t start = 0;
        std::vector<std::vector<long long>> next;
        for (size_t i = start; i < lists.size(); ++i)
          if ((int)lists[i].size() == l)
            for (long long e : d.elems) {
              auto x = lists[i];
              x.push_back(e);
              next.push_back(x);
            }
        for (auto& x : next) lists.push_back(x);
      }
      for (auto& l : lists) out.push_back(Val{tag, 0, false, l});
      break;
    }
  }
  return out;
}

// visit every assignment; return false from the visitor to stop early
bool for_all_envs(const SortEnv& prefix, const Domains& d,
                  const std::function<bool(const Env&)>& visit) {
  std::vector<std::pair<std::string, std::vector<Val>>> doms;
  for (const auto& [n, s] : prefix) doms.push_back({n, domain_for(s, d)});
  std::vector<size_t> idx(doms.size(), 0);
  while (true) {
    Env e;
    for (size_t i = 0; i < doms.size(); ++i) e[doms[i].first] = doms[i].second[idx[i]];
    if (!visit(e)) return false;
    size_t i = doms.size();
    bool carried = false;
    while (i > 0) {
      --i;
      if (++idx[i] < doms[i].second.size()) {
        carried = true;
        break;
      }
      idx[i] = 0;
    }
    if (!carried) return true;
  }
}

Env from_assignment(const Assignment& a) {
  Env e;
  for (const auto& [n, v] : a) {
    switch (v.sort) {
      case Sort::Int: e[n] = Val{'i', v.i, false, {}}; break;
      case Sort::Bool: e[n] = Val{'b', 0, v.b, {}}; break;
      case Sort::IntList: e[n] = Val{'l', 0, false, v.list}; break;
      case Sort::Tensor: e[n] = Val{'t', 0, false, v.list}; break;
    }
  }
  return e;
}

}  // namespace oracle

// ===== evaluation pinned cases ================================================

namespace {

Assignment mk(std::initializer_list<std::pair<std::string, LogicVal>> xs) {
  Assignment a;
  for (auto& [k, v] : xs) a[k] = v;
  return a;
}

}  // namespace

TEST(Eval, TruncatingDivision) {
  Assignment a;
  EXPECT_EQ(eval_size(a, sz_div(sz_lit(7), sz_lit(2))), 3);
  EXPECT_EQ(eval_size(a, sz_div(sz_lit(-7), sz_lit(2))), -3);
  EXPECT_EQ(eval_size(a, sz_div(sz_lit(7), sz_lit(-2))), -3);
  EXPECT_EQ(eval_size(a, sz_div(sz_lit(-7), sz_lit(-2))), 3);
  EXPECT_FALSE(eval_size(a, sz_div(sz_lit(1), sz_lit(0))).has_value());
}

TEST(Eval, ListPartiality) {
  Assignment a = mk({{"t", LogicVal::of_tensor({4, 5})}});
  EXPECT_EQ(eval_size(a, sz_nth(sz_lit(1), sh_shape_of("t"))), 5);
  EXPECT_FALSE(eval_size(a, sz_nth(sz_lit(2), sh_shape_of("t"))).has_value());
  EXPECT_FALSE(eval_size(a, sz_nth(sz_lit(-1), sh_shape_of("t"))).has_value());
  EXPECT_FALSE(eval_size(a, sz_head(sh_lit({}))).has_value());
  EXPECT_FALSE(eval_size(a, sz_last(sh_lit({}))).has_value());
  EXPECT_FALSE(eval_shape(a, sh_tail(sh_lit({}))).has_value());
  EXPECT_EQ(eval_size(a, sz_prod(sh_lit({}))), 1);
  EXPECT_EQ(eval_size(a, sz_len(sh_shape_of("t"))), 2);
}

TEST(Eval, BroadcastReshapeMatmul) {
  Assignment a;
  auto sh = [&](std::vector<long long> v) { return sh_lit_ints(v); };
  EXPECT_EQ(eval_pred(a, pr_brc(sh({3, 1}), sh({1, 4}))), true);
  EXPECT_EQ(eval_pred(a, pr_brc(sh({3, 2}), sh({4}))), false);
  EXPECT_EQ(eval_shape(a, sh_broadcast(sh({3, 1}), sh({1, 4}))),
            (std::vector<long long>{3, 4}));
  EXPECT_EQ(eval_shape(a, sh_broadcast(sh({2, 3}), sh({3}))),
            (std::vector<long long>{2, 3}));
  EXPECT_FALSE(eval_shape(a, sh_broadcast(sh({2}), sh({3}))).has_value());

  EXPECT_EQ(eval_pred(a, pr_rsh(sh({2, 6}), sh({3, 4}))), true);
  EXPECT_EQ(eval_pred(a, pr_rsh(sh({2, 6}), sh({5}))), false);
  EXPECT_EQ(eval_shape(a, sh_reshape(sh({2, 6}), sh({-1, 4}))),
            (std::vector<long long>{3, 4}));
  EXPECT_FALSE(eval_shape(a, sh_reshape(sh({2, 6}), sh({-1, -1}))).has_value());
  EXPECT_FALSE(eval_shape(a, sh_reshape(sh({2, 6}), sh({-1, 5}))).has_value());
  EXPECT_EQ(eval_pred(a, pr_rsh(sh({0}), sh({-1}))), true);  // wildcard resolves to 0
  EXPECT_EQ(eval_pred(a, pr_rsh(sh({0}), sh({-1, 0}))), false);  // known product must be positive

  EXPECT_EQ(eval_shape(a, sh_matmul(sh({5, 2, 3}), sh({3, 4}))),
            (std::vector<long long>{5, 2, 4}));
  EXPECT_EQ(eval_shape(a, sh_matmul(sh({2, 3}), sh({3, 4}))),
            (std::vector<long long>{2, 4}));
  EXPECT_FALSE(eval_shape(a, sh_matmul(sh({2, 3}), sh({4, 5}))).has_value());
  EXPECT_FALSE(eval_shape(a, sh_matmul(sh({3}), sh({3, 4}))).has_value());
  EXPECT_EQ(eval_shape(a, sh_matmul(sh({7, 1, 2, 3}), sh({4, 3, 5}))),
            (std::vector<long long>{7, 4, 2, 5}));
}

TEST(Eval, StrictConnectives) {
  Assignment a = mk({{"t", LogicVal::of_tensor({})}});
  auto err = pr_eq_sz(sz_head(sh_shape_of("t")), sz_lit(1));
  // an erroring operand poisons the connective even when the other side decides
  EXPECT_FALSE(eval_pred(a, pr_and(pr_false(), err)).has_value());
  EXPECT_FALSE(eval_pred(a, pr_or(pr_true(), err)).has_value());
  EXPECT_FALSE(eval_pred(a, pr_not(err)).has_value());
}

TEST(Eval, AgreesWithOracle) {
  testgen::Gen g(2024);
  auto prefix = testgen::scope();
  oracle::Domains dom;
  dom.ints = {-2, 0, 1, 2};
  dom.elems = {0, 1, 2};
  int checked = 0;
  for (int k = 0; k < 35; ++k) {
    PredP p = g.pred(3);
    oracle::for_all_envs(prefix, dom, [&](const oracle::Env& e) {
      Assignment a;
      for (const auto& [n, v] : e) {
        switch (v.tag) {
          case 'i': a[n] = LogicVal::of_int(v.i); break;
          case 'b': a[n] = LogicVal::of_bool(v.b); break;
          case 'l': a[n] = LogicVal::of_list(v.xs); break;
          case 't': a[n] = LogicVal::of_tensor(v.xs); break;
        }
      }
      auto got = eval_pred(a, p);
      auto want = oracle::opred3(e, p);
      EXPECT_EQ(got, want) << show(p, 0) << "  at " << show_assignment(a);
      ++checked;
      return got == want;
    });
  }
  EXPECT_GT(checked, 25000);
}

// ===== simplification =========================================================

TEST(Simplify, BasicRules) {
  EXPECT_EQ(show(simplify_size(sz_add(sz_var("i"), sz_lit(0))), 0), "i");
  EXPECT_EQ(show(simplify_size(sz_mul(sz_lit(1), sz_var("i"))), 0), "i");
  EXPECT_EQ(show(simplify_size(sz_div(sz_var("i"), sz_lit(1))), 0), "i");
  EXPECT_EQ(show(simplify_size(sz_len(sh_lit({sz_var("i"), sz_lit(2)}))), 0), "2");
  EXPECT_EQ(show(simplify_size(sz_prod(sh_lit({sz_var("i"), sz_lit(2)}))), 0), "i * 2");
  // a partial element blocks the erasing rule
  auto partial = sz_div(sz_lit(1), sz_var("i"));
  EXPECT_EQ(show(simplify_size(sz_len(sh_lit({partial}))), 0), "len [1 / i]");
  EXPECT_EQ(show(simplify_size(sz_mul(sz_lit(0), partial)), 0), "0 * (1 / i)");
  EXPECT_EQ(show(simplify_size(sz_mul(sz_lit(0), sz_var("i"))), 0), "0");
  EXPECT_EQ(show(simplify_pred(pr_eq_sh(sh_lit_ints({2, 3}), sh_lit_ints({2, 3}))), 0),
            "true");
  EXPECT_EQ(show(simplify_pred(pr_eq_sh(sh_lit_ints({2}), sh_lit_ints({2, 3}))), 0),
            "false");
  EXPECT_EQ(show(simplify_pred(pr_and(pr_bvar("b"), pr_bvar("b"))), 0), "b");
}

TEST(Simplify, PreservesEvaluationExactly) {
  testgen::Gen g(77);
  auto prefix = testgen::scope();
  oracle::Domains dom;
  dom.ints = {-2, 0, 1, 2};
  dom.elems = {0, 1, 2};
  for (int k = 0; k < 40; ++k) {
    PredP p = g.pred(3);
    PredP q = simplify_pred(p);
    oracle::for_all_envs(prefix, dom, [&](const oracle::Env& e) {
      auto before = oracle::opred3(e, p);
      Assignment a;
      for (const auto& [n, v] : e) {
        switch (v.tag) {
          case 'i': a[n] = LogicVal::of_int(v.i); break;
          case 'b': a[n] = LogicVal::of_bool(v.b); break;
          case 'l': a[n] = LogicVal::of_list(v.xs); break;
          case 't': a[n] = LogicVal::of_tensor(v.xs); break;
        }
      }
      auto after = eval_pred(a, q);
      EXPECT_EQ(before, after) << "p:  " << show(p, 0) << "\nq:  " << show(q, 0)
                               << "\nat " << show_assignment(a);
      return before == after;
    });
  }
}

TEST(Simplify, Idempotent) {
  testgen::Gen g(31337);
  for (int k = 0; k < 200; ++k) {
    PredP p = g.pred(3);
    PredP q = simplify_pred(p);
    PredP r = simplify_pred(q);
    EXPECT_TRUE(equal(q, r)) << show(p, 0) << "\n-> " << show(q, 0) << "\n-> "
                             << show(r, 0);
  }
}

// ===== frozen verdicts ========================================================

TEST(Verdicts, IntFacts) {
  SortEnv env{{"x", Sort::Int}};
  auto r1 = check_validity(env, pr_eq_sz(sz_var("x"), sz_lit(3)),
                           pr_lt(sz_lit(0), sz_var("x")));
  EXPECT_EQ(r1.verdict, Validity::Valid);

  auto r2 = check_validity(env, pr_lt(sz_lit(0), sz_var("x")),
                           pr_eq_sz(sz_var("x"), sz_lit(3)));
  ASSERT_EQ(r2.verdict, Validity::Invalid);
  ASSERT_TRUE(r2.witness.has_value());
  auto e = oracle::from_assignment(*r2.witness);
  EXPECT_TRUE(*oracle::opred3(e, pr_lt(sz_lit(0), sz_var("x"))));
  EXPECT_FALSE(*oracle::opred3(e, pr_eq_sz(sz_var("x"), sz_lit(3))));

  // arithmetic normalization: x + x = 2 * x
  auto r3 = check_validity(env, pr_true(),
                           pr_eq_sz(sz_add(sz_var("x"), sz_var("x")),
                                    sz_mul(sz_lit(2), sz_var("x"))));
  EXPECT_EQ(r3.verdict, Validity::Valid);
}

TEST(Verdicts, Contradiction) {
  SortEnv env{{"x", Sort::Int}};
  auto hyp = pr_and(pr_eq_sz(sz_var("x"), sz_lit(20)), pr_eq_sz(sz_var("x"), sz_lit(10)));
  EXPECT_EQ(check_validity(env, hyp, pr_false()).verdict, Validity::Valid);
  EXPECT_EQ(check_sat(env, hyp).verdict, Sat3::Unsat);

  SortEnv envt{{"t", Sort::Tensor}};
  auto hyp2 = pr_and(pr_eq_sh(sh_shape_of("t"), sh_lit_ints({2})),
                     pr_eq_sh(sh_shape_of("t"), sh_lit_ints({2, 2})));
  EXPECT_EQ(check_sat(envt, hyp2).verdict, Sat3::Unsat);
}

TEST(Verdicts, DivisionWitness) {
  // nth 0 x.shape / 2 = 10 is satisfiable; [20] is one model
  SortEnv env{{"x", Sort::Tensor}};
  auto p = pr_eq_sz(sz_div(sz_nth(sz_lit(0), sh_shape_of("x")), sz_lit(2)), sz_lit(10));
  auto r = check_sat(env, p);
  ASSERT_EQ(r.verdict, Sat3::Sat);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_TRUE(*oracle::opred3(oracle::from_assignment(*r.witness), p));
  // the canonical model replays as well
  oracle::Env canon;
  canon["x"] = oracle::Val{'t', 0, false, {20}};
  EXPECT_TRUE(*oracle::opred3(canon, p));
}

TEST(Verdicts, LengthEnrichment) {
  // len x.shape = 1  entails  x.shape = [nth 0 x.shape / 1]
  SortEnv env{{"x", Sort::Tensor}};
  auto hyp = pr_eq_sz(sz_len(sh_shape_of("x")), sz_lit(1));
  auto goal = pr_eq_sh(sh_shape_of("x"),
                       sh_lit({sz_div(sz_nth(sz_lit(0), sh_shape_of("x")), sz_lit(1))}));
  EXPECT_EQ(check_validity(env, hyp, goal).verdict, Validity::Valid);
}

TEST(Verdicts, CongruenceJoin) {
  // a = head S, a = 3, S = [x; y]  |-  x = 3
  SortEnv env{{"a", Sort::Int}, {"x", Sort::Int}, {"y", Sort::Int}, {"S", Sort::IntList}};
  auto hyp = pr_conj({pr_eq_sz(sz_var("a"), sz_head(sh_var("S"))),
                      pr_eq_sz(sz_var("a"), sz_lit(3)),
                      pr_eq_sh(sh_var("S"), sh_lit({sz_var("x"), sz_var("y")}))});
  EXPECT_EQ(check_validity(env, hyp, pr_eq_sz(sz_var("x"), sz_lit(3))).verdict,
            Validity::Valid);
}

TEST(Verdicts, BroadcastableFromShapes) {
  SortEnv env{{"t", Sort::Tensor}, {"u", Sort::Tensor}};
  auto hyp = pr_and(pr_eq_sh(sh_shape_of("t"), sh_lit_ints({3, 1})),
                    pr_eq_sh(sh_shape_of("u"), sh_lit_ints({1, 4})));
  EXPECT_EQ(check_validity(env, hyp, pr_brc(sh_shape_of("t"), sh_shape_of("u"))).verdict,
            Validity::Valid);
  EXPECT_EQ(check_validity(env, pr_true(), pr_brc(sh_shape_of("t"), sh_shape_of("t"))).verdict,
            Validity::Valid);
}

TEST(Verdicts, KnownIncompleteness) {
  // transitivity of < is true but outside the syntactic fragment, and the
  // bounded search cannot refute it: documented Unknown
  SortEnv env{{"x", Sort::Int}, {"y", Sort::Int}, {"z", Sort::Int}};
  auto hyp = pr_and(pr_lt(sz_var("x"), sz_var("y")), pr_lt(sz_var("y"), sz_var("z")));
  EXPECT_EQ(check_validity(env, hyp, pr_lt(sz_var("x"), sz_var("z"))).verdict,
            Validity::Unknown);
}

TEST(Verdicts, ErroringGoalIsNotValid) {
  // head of a possibly-empty shape: x.shape = x.shape would be trivially
  // derivable, but the goal can error, so it must not be declared Valid
  SortEnv env{{"x", Sort::Tensor}};
  auto goal = pr_eq_sz(sz_head(sh_shape_of("x")), sz_head(sh_shape_of("x")));
  auto r = check_validity(env, pr_true(), goal);
  EXPECT_EQ(r.verdict, Validity::Invalid);  // witness: the rank-0 tensor
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_FALSE(oracle::opred3(oracle::from_assignment(*r.witness), goal).has_value());
  // under a hypothesis that defines the head, it becomes valid
  auto hyp = pr_eq_sz(sz_len(sh_shape_of("x")), sz_lit(2));
  EXPECT_EQ(check_validity(env, hyp, goal).verdict, Validity::Valid);
}

TEST(Verdicts, SearchBoundOverrides) {
  // x = 100 is satisfiable but outside the default range and not a literal
  // product; a caller-provided extra candidate finds it
  SortEnv env{{"x", Sort::Int}};
  auto big = pr_and(pr_eq_sz(sz_mul(sz_var("x"), sz_var("x")), sz_lit(10000)),
                    pr_lt(sz_lit(0), sz_var("x")));
  EXPECT_EQ(check_sat(env, big).verdict, Sat3::Unknown);
  SearchBounds b;
  b.extra_ints = {100};
  auto r = check_sat(env, big, b);
  ASSERT_EQ(r.verdict, Sat3::Sat);
  EXPECT_EQ(r.witness->at("x").i, 100);
}

// ===== randomized soundness ===================================================

TEST(Soundness, RandomQueriesAgainstOracle) {
  testgen::Gen g(987654321);
  auto prefix = testgen::scope();
  oracle::Domains dom;
  dom.ints = {-2, -1, 0, 1, 2};
  dom.elems = {0, 1, 2};
  SearchBounds bounds;
  bounds.full_budget = 20000;
  bounds.sample_budget = 4000;

  int sat = 0, unsat = 0, valid = 0, invalid = 0;
  for (int k = 0; k < 120; ++k) {
    PredP p = g.pred(2);
    auto rs = check_sat(prefix, p, bounds);
    if (rs.verdict == Sat3::Sat) {
      ++sat;
      auto v = oracle::opred3(oracle::from_assignment(*rs.witness), p);
      ASSERT_TRUE(v.has_value() && *v) << show(p, 0);
    } else if (rs.verdict == Sat3::Unsat) {
      ++unsat;
      bool clean = oracle::for_all_envs(prefix, dom, [&](const oracle::Env& e) {
        auto v = oracle::opred3(e, p);
        return !(v.has_value() && *v);
      });
      ASSERT_TRUE(clean) << "oracle refutes Unsat for: " << show(p, 0);
    }

    PredP hyp = g.pred(2);
    PredP goal = g.pred(2);
    auto rv = check_validity(prefix, hyp, goal, bounds);
    if (rv.verdict == Validity::Valid) {
      ++valid;
      bool clean = oracle::for_all_envs(prefix, dom, [&](const oracle::Env& e) {
        auto h = oracle::opred3(e, hyp);
        if (!(h.has_value() && *h)) return true;
        auto gv = oracle::opred3(e, goal);
        return gv.has_value() && *gv;
      });
      ASSERT_TRUE(clean) << "oracle refutes Valid for: " << show(hyp, 0) << "  =>  "
                         << show(goal, 0);
    } else if (rv.verdict == Validity::Invalid) {
      ++invalid;
      auto e = oracle::from_assignment(*rv.witness);
      auto h = oracle::opred3(e, hyp);
      ASSERT_TRUE(h.has_value() && *h);
      auto gv = oracle::opred3(e, goal);
      ASSERT_FALSE(gv.has_value() && *gv);
    }
  }
  // the engine must actually decide a reasonable share of random queries
  EXPECT_GT(sat + unsat, 48);
  EXPECT_GT(valid + invalid, 48);
}

TEST(Soundness, Deterministic) {
  testgen::Gen g(5150);
  auto prefix = testgen::scope();
  for (int k = 0; k < 40; ++k) {
    PredP hyp = g.pred(2), goal = g.pred(2);
    auto a = check_validity(prefix, hyp, goal);
    auto b = check_validity(prefix, hyp, goal);
    EXPECT_EQ(a.verdict, b.verdict);
    EXPECT_EQ(a.witness.has_value(), b.witness.has_value());
    if (a.witness) EXPECT_EQ(show_assignment(*a.witness), show_assignment(*b.witness));
  }
}

TEST(SolverCache, HitsAndThreadSafety) {
  Solver solver;
  SortEnv env{{"x", Sort::Int}};
  auto hyp = pr_eq_sz(sz_var("x"), sz_lit(3));
  auto goal = pr_lt(sz_lit(0), sz_var("x"));
  auto r1 = solver.check_validity(env, hyp, goal);
  auto r2 = solver.check_validity(env, hyp, goal);
  EXPECT_EQ(r1.verdict, r2.verdict);
  EXPECT_GE(solver.cache_hits(), 1u);

  std::vector<std::thread> ts;
  std::atomic<int> valid_count{0};
  for (int i = 0; i < 8; ++i)
    ts.emplace_back([&] {
      for (int k = 0; k < 50; ++k) {
        auto r = solver.check_validity(env, hyp, goal);
        if (r.verdict == Validity::Valid) ++valid_count;
      }
    });
  for (auto& t : ts) t.join();
  EXPECT_EQ(valid_count.load(), 400);
}

TEST(SolverCache, UnknownLogger) {
  Solver solver;
  std::vector<LoggedQuery> logged;
  solver.set_unknown_logger([&](const LoggedQuery& q) { logged.push_back(q); });
  SortEnv env{{"x", Sort::Int}, {"y", Sort::Int}, {"z", Sort::Int}};
  auto hyp = pr_and(pr_lt(sz_var("x"), sz_var("y")), pr_lt(sz_var("y"), sz_var("z")));
  auto goal = pr_lt(sz_var("x"), sz_var("z"));
  solver.check_validity(env, hyp, goal);
  solver.check_validity(env, hyp, goal);  // cached: not logged twice
  ASSERT_EQ(logged.size(), 1u);
  EXPECT_TRUE(logged[0].validity_mode);
}
