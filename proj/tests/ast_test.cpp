// Core syntax layer: predicates, refinement types, terms, and the
// substitution / environment operations everything else builds on.

#include <gtest/gtest.h>

#include "graten/terms.hpp"
#include "graten/types.hpp"

using namespace graten;

namespace {

RTypeP int_eq(const std::string& binder, long long n) {
  return rt_base(binder, Sort::Int, pr_eq_sz(sz_var(binder), sz_lit(n)));
}

}  // namespace

TEST(Printing, SizesShapesPreds) {
  auto s = sz_add(sz_var("x"), sz_neg(sz_lit(2)));
  EXPECT_EQ(show(s, 0), "x - 2");
  auto m = sz_mul(sz_add(sz_var("x"), sz_lit(1)), sz_var("y"));
  EXPECT_EQ(show(m, 0), "(x + 1) * y");
  auto d = sz_div(sz_nth(sz_lit(0), sh_shape_of("x")), sz_lit(2));
  EXPECT_EQ(show(d, 0), "nth 0 x.shape / 2");
  auto sh = sh_lit({sz_lit(3), sz_var("n")});
  EXPECT_EQ(show(sh), "[3; n]");
  auto p = pr_and(pr_eq_sh(sh_shape_of("v"), sh_lit_ints({10})),
                  pr_lt(sz_lit(0), sz_var("n")));
  EXPECT_EQ(show(p, 0), "v.shape = [10] && 0 < n");
}

TEST(Printing, Types) {
  EXPECT_EQ(show(rt_simple(Sort::Int)), "int");
  EXPECT_EQ(show(rt_tensor_of(sh_lit_ints({10}))), "tensor([10])");
  auto t = rt_fun("x", rt_simple(Sort::Int),
                  rt_base("v", Sort::Int, pr_eq_sz(sz_var("v"), sz_var("x"))));
  EXPECT_EQ(show(t), "x:int -> { v : int | v = x }");
  // binder not free in the codomain: printed anonymously
  auto t2 = rt_fun("x", rt_simple(Sort::Int), rt_simple(Sort::Bool));
  EXPECT_EQ(show(t2), "int -> bool");
}

TEST(Subst, SizeShapePred) {
  Subst m;
  m["n"] = SubstVal{sz_lit(4)};
  auto s = subst(sz_add(sz_var("n"), sz_var("k")), m);
  EXPECT_EQ(show(s, 0), "4 + k");

  Subst ms;
  ms["S"] = SubstVal{sh_lit_ints({2, 3})};
  auto sh = subst(sh_append(sh_var("S"), sh_var("T")), ms);
  EXPECT_EQ(show(sh), "append [2; 3] T");

  Subst mt;
  mt["x"] = SubstVal{TensorSub{std::nullopt, std::vector<long long>{5, 5}}};
  auto p = subst(pr_eq_sh(sh_shape_of("x"), sh_var("S")), mt);
  EXPECT_EQ(show(p, 0), "[5; 5] = S");
}

TEST(Subst, SortMismatchThrows) {
  Subst m;
  m["x"] = SubstVal{sz_lit(1)};  // int image for a shape position
  EXPECT_THROW(subst(sh_var("x"), m), InternalError);
}

TEST(Subst, TypeCaptureAvoidance) {
  // (x:int -> {v:int | v = x + y})[y := x]  must rename the bound x
  auto cod = rt_base("v", Sort::Int,
                     pr_eq_sz(sz_var("v"), sz_add(sz_var("x"), sz_var("y"))));
  auto t = rt_fun("x", rt_simple(Sort::Int), cod);
  Subst m = rename1(Sort::Int, "y", "x");
  auto r = subst_type(t, m);
  auto expect = rt_fun("z", rt_simple(Sort::Int),
                       rt_base("v", Sort::Int,
                               pr_eq_sz(sz_var("v"), sz_add(sz_var("z"), sz_var("x")))));
  EXPECT_TRUE(alpha_equal(r, expect)) << show(r);
  EXPECT_FALSE(alpha_equal(r, t));
}

TEST(Types, AlphaEqual) {
  auto a = rt_fun("x", rt_simple(Sort::Int),
                  rt_base("v", Sort::Int, pr_eq_sz(sz_var("v"), sz_var("x"))));
  auto b = rt_fun("y", rt_simple(Sort::Int),
                  rt_base("w", Sort::Int, pr_eq_sz(sz_var("w"), sz_var("y"))));
  EXPECT_TRUE(alpha_equal(a, b));
  auto c = rt_fun("y", rt_simple(Sort::Int),
                  rt_base("w", Sort::Int, pr_eq_sz(sz_var("w"), sz_lit(1))));
  EXPECT_FALSE(alpha_equal(a, c));
}

TEST(Types, Meet) {
  auto a = rt_base("v", Sort::Int, pr_lt(sz_lit(0), sz_var("v")));
  auto b = int_eq("w", 3);
  auto m = meet(a, b);
  ASSERT_EQ(m->k, RType::K::Base);
  EXPECT_EQ(show(m), "{ v : int | 0 < v && v = 3 }");
  // meet with itself returns the operand unchanged
  EXPECT_EQ(show(meet(a, a)), show(a));
  // erasure mismatch
  EXPECT_THROW(meet(a, rt_simple(Sort::Bool)), InternalError);
  // function meet is pointwise
  auto f = rt_fun("x", a, int_eq("v", 1));
  auto g = rt_fun("y", b, int_eq("v", 1));
  auto fm = meet(f, g);
  ASSERT_EQ(fm->k, RType::K::Fun);
  EXPECT_EQ(show(fm->dom), "{ v : int | 0 < v && v = 3 }");
}

TEST(Types, Selfify) {
  auto t = rt_base("v", Sort::Int, pr_lt(sz_lit(0), sz_var("v")));
  EXPECT_EQ(show(selfify("x", t)), "{ v : int | v = x }");
  auto tt = rt_simple(Sort::Tensor);
  EXPECT_EQ(show(selfify("x", tt)), "tensor(x.shape)");
  auto tb = rt_simple(Sort::Bool);
  EXPECT_EQ(show(selfify("x", tb)), "{ v : bool | v && x || not v && not x }");
  // binder clash: x's own name as binder forces a rename
  auto tx = rt_base("x", Sort::Int, pr_true());
  EXPECT_EQ(show(selfify("x", tx)), "{ x' : int | x' = x }");
  // functions selfify to themselves
  auto f = rt_fun("x", rt_simple(Sort::Int), rt_simple(Sort::Int));
  EXPECT_TRUE(alpha_equal(selfify("g", f), f));
}

TEST(Env, RefineAndPrefix) {
  TypeEnv env;
  env = env.extended("x", int_eq("v", 1));
  env = env.extended("f", rt_fun("a", rt_simple(Sort::Int), rt_simple(Sort::Int)));
  env = env.extended("y", rt_base("v", Sort::Tensor,
                                  pr_eq_sh(sh_shape_of("v"), sh_lit_ints({2}))));
  env = env.extended("x", int_eq("v", 2));  // shadows the first x
  EXPECT_EQ(show(env.refine(), 0), "y.shape = [2] && x = 2");
  auto st = env.st();
  ASSERT_EQ(st.size(), 2u);
  EXPECT_EQ(st.at("x"), Sort::Int);
  EXPECT_EQ(st.at("y"), Sort::Tensor);
  EXPECT_EQ(show(*env.lookup("x")), "{ v : int | v = 2 }");
  EXPECT_FALSE(env.lookup("zzz").has_value());
}

TEST(Wf, RejectsUnboundAndWrongSort) {
  SortEnv se{{"n", Sort::Int}, {"t", Sort::Tensor}};
  EXPECT_NO_THROW(check_wf(se, pr_eq_sz(sz_var("n"), sz_nth(sz_lit(0), sh_shape_of("t"))), false));
  EXPECT_THROW(check_wf(se, pr_eq_sz(sz_var("m"), sz_lit(0)), false), WfError);
  // t is a tensor: bare shape-var use is ill-sorted
  EXPECT_THROW(check_wf(se, pr_eq_sh(sh_var("t"), sh_lit_ints({1})), false), WfError);
  // shape-of over a non-tensor
  EXPECT_THROW(check_wf(se, pr_eq_sh(sh_shape_of("n"), sh_lit_ints({1})), false), WfError);
  // predicate variables only where allowed
  auto pv = pr_pvar(0, {PVarArg{Sort::Int, "n"}}, {});
  EXPECT_THROW(check_wf(se, pv, false), WfError);
  EXPECT_NO_THROW(check_wf(se, pv, true));
}

TEST(Wf, TypeBinderScoping) {
  // x:{v:int | v = 0} -> {w:tensor | nth x w.shape = 1} is well formed
  auto t = rt_fun("x", int_eq("v", 0),
                  rt_base("w", Sort::Tensor,
                          pr_eq_sz(sz_nth(sz_var("x"), sh_shape_of("w")), sz_lit(1))));
  EXPECT_NO_THROW(check_wf_type({}, t, false));
  // codomain referencing an unbound name is rejected
  auto bad = rt_fun("x", int_eq("v", 0),
                    rt_base("w", Sort::Int, pr_eq_sz(sz_var("w"), sz_var("q"))));
  EXPECT_THROW(check_wf_type({}, bad, false), WfError);
}

TEST(Terms, ValueSubstCaptureAvoidance) {
  // (fun y -> x) [x := y]  must not capture: result body is the OUTER y
  auto lam = v_lam("y", rt_simple(Sort::Int), t_val(v_var("x")));
  auto r = subst_value(lam, "x", v_var("y"), Sort::Int);
  ASSERT_EQ(r->k, Value::K::Lam);
  EXPECT_NE(r->x, "y");
  ASSERT_EQ(r->body->k, TargetTerm::K::Val);
  EXPECT_EQ(r->body->v->var, "y");
}

TEST(Terms, SubstIntoAssertsAndTypes) {
  // let z^{v:int | v = x} = x in assert (z = x); z   with [x := 7]
  auto ty = rt_base("v", Sort::Int, pr_eq_sz(sz_var("v"), sz_var("x")));
  auto body = t_assert(pr_eq_sz(sz_var("z"), sz_var("x")), t_val(v_var("z")), Span{});
  auto n = t_let("z", ty, t_val(v_var("x")), body, Span{});
  auto r = subst_term(n, "x", v_int(7), Sort::Int);
  ASSERT_EQ(r->k, TargetTerm::K::Let);
  EXPECT_EQ(show(r->ty), "{ v : int | v = 7 }");
  ASSERT_EQ(r->n2->k, TargetTerm::K::Assert);
  EXPECT_EQ(show(r->n2->pred, 0), "z = 7");
}

TEST(Terms, CountAsserts) {
  auto inner = t_assert(pr_eq_sz(sz_var("x"), sz_lit(1)), t_val(v_var("x")), Span{});
  auto lam = v_lam("x", rt_simple(Sort::Int), inner);
  auto top = t_assert(pr_true(), t_val(lam), Span{});
  EXPECT_EQ(count_asserts(top), 1);  // assert true does not count
}

TEST(Terms, SourcePrinting) {
  auto m = s_let("x", s_int(1, Span{}),
                 s_app(s_var("f", Span{}), "x", Span{}), Span{});
  EXPECT_EQ(show_source(m, 0), "let x = 1 in\nf x");
  auto lam = s_lam("x", rt_simple(Sort::Int), s_var("x", Span{}), Span{});
  EXPECT_EQ(show_source(lam, 0), "fun (x : int) -> x");
  auto plain = s_lam("x", std::nullopt, s_var("x", Span{}), Span{});
  EXPECT_EQ(show_source(plain, 0), "fun x -> x");
}

TEST(Terms, AlphaEqualSource) {
  auto a = s_lam("x", std::nullopt, s_var("x", Span{}), Span{});
  auto b = s_lam("y", std::nullopt, s_var("y", Span{}), Span{});
  EXPECT_TRUE(alpha_equal_source(a, b, {}));
  // free-name map: f on the left corresponds to g on the right
  auto fa = s_app(s_var("f", Span{}), "z", Span{});
  auto gb = s_app(s_var("g", Span{}), "z", Span{});
  EXPECT_FALSE(alpha_equal_source(fa, gb, {}));
  EXPECT_TRUE(alpha_equal_source(fa, gb, {{"f", "g"}}));
}

TEST(Misc, FreshAvoid) {
  std::set<std::string> avoid{"x", "x'"};
  EXPECT_EQ(fresh_avoid("x", avoid), "x'1");
  EXPECT_EQ(fresh_avoid("y", avoid), "y");
}

TEST(Misc, Conjuncts) {
  auto p = pr_and(pr_and(pr_bvar("a"), pr_true()), pr_bvar("b"));
  auto cs = conjuncts(p);
  ASSERT_EQ(cs.size(), 2u);
  EXPECT_EQ(show(cs[0], 0), "a");
  EXPECT_EQ(show(cs[1], 0), "b");
  EXPECT_TRUE(conjuncts(pr_true()).empty());
}
