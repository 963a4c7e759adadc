// Concrete-syntax tests: programs, stubs, types, predicates; normalization of
// applications and conditions into let form; printer/parser stability.

#include <gtest/gtest.h>

#include "graten/parser.hpp"
#include "gen_common.hpp"

using namespace graten;

namespace {

const char* kFig1 = R"(
let model s =
  let f = load 0 in
  let g = load 1 in
  fun x -> let y = f x in g y

let _ = model 1 (Tensor.rand [20])
)";

const char* kFig2 = R"(
let model s =
  let f = load 0 in
  let g = load 1 in
  fun x -> let y = if s = 1 then x else f x in g y

let _ = 0
)";

const char* kFig3 = R"(
let model s =
  let f = load 0 in
  let g = load 1 in
  fun x ->
    let y = ((if s = 1 then x else f x) : tensor([nth 0 x.shape / s])) in
    g y

let _ = 0
)";

std::string pp(const Program& p) { return show_program(p); }

}  // namespace

TEST(Programs, IntroFamilyParsesAndIsStable) {
  for (const char* text : {kFig1, kFig2, kFig3}) {
    Program p = Parser::parse_program(text);
    std::string once = pp(p);
    Program p2 = Parser::parse_program(once);
    std::string twice = pp(p2);
    EXPECT_EQ(once, twice) << once;
    EXPECT_TRUE(alpha_equal_source(p.to_term(), p2.to_term()));
  }
}

TEST(Programs, TopLevelShape) {
  Program p = Parser::parse_program(kFig1);
  ASSERT_EQ(p.lets.size(), 1u);
  EXPECT_EQ(p.lets[0].name, "model");
  // let model s = ... is a unary lambda
  ASSERT_EQ(p.lets[0].rhs->k, SourceTerm::K::Lam);
  EXPECT_EQ(p.lets[0].rhs->var, "s");
  // main is the anonymous final binding
  ASSERT_EQ(p.main->k, SourceTerm::K::Let);  // hoisted arguments
}

TEST(Programs, ApplicationNormalization) {
  // f (g x) becomes let t = g x in f t
  Program p = Parser::parse_program("let f = load 0 in let g = load 1 in f (g x)");
  SrcP m = p.main;
  ASSERT_EQ(m->k, SourceTerm::K::Let);
  ASSERT_EQ(m->m2->k, SourceTerm::K::Let);
  SrcP inner = m->m2->m2;  // under f and g
  ASSERT_EQ(inner->k, SourceTerm::K::Let);
  EXPECT_EQ(inner->var.rfind("_t", 0), 0u) << inner->var;
  ASSERT_EQ(inner->m1->k, SourceTerm::K::App);  // g x
  EXPECT_EQ(inner->m1->var, "x");
  ASSERT_EQ(inner->m2->k, SourceTerm::K::App);  // f t
  EXPECT_EQ(inner->m2->var, inner->var);
}

TEST(Programs, IfConditionHoisted) {
  Program p = Parser::parse_program("let pick s x y = if s = 1 then x else y\nlet _ = 0");
  // body: let _t0 = 1 in let _t1 = eqi s _t0 in if _t1 then x else y
  SrcP body = p.lets[0].rhs;
  for (int i = 0; i < 3; ++i) {
    ASSERT_EQ(body->k, SourceTerm::K::Lam);
    body = body->m1;
  }
  ASSERT_EQ(body->k, SourceTerm::K::Let);
  ASSERT_EQ(body->m2->k, SourceTerm::K::Let);
  SrcP rhs = body->m2->m1;
  ASSERT_EQ(rhs->k, SourceTerm::K::App);
  ASSERT_EQ(rhs->m1->k, SourceTerm::K::App);
  ASSERT_EQ(rhs->m1->m1->k, SourceTerm::K::Var);
  EXPECT_EQ(rhs->m1->m1->var, "eqi");
  SrcP iff = body->m2->m2;
  ASSERT_EQ(iff->k, SourceTerm::K::If);
  EXPECT_EQ(iff->var, body->m2->var);
}

TEST(Programs, PipesLabelsAndLetRec) {
  const char* text = R"(
let rec loop i x = if i <= 0 then x else loop (i - 1) x ~is_training |> relu
let _ = loop 3 (zeros [2; 3])
)";
  Program p = Parser::parse_program(text);
  ASSERT_EQ(p.lets[0].rhs->k, SourceTerm::K::Fix);
  EXPECT_EQ(p.lets[0].rhs->var, "loop");
  EXPECT_EQ(p.lets[0].rhs->var2, "i");
  std::string once = pp(p);
  EXPECT_EQ(once, pp(Parser::parse_program(once)));
  // ~is_training punning resolves to the variable, which ends up free here
  auto fvs = fv_source(p.lets[0].rhs);
  EXPECT_TRUE(fvs.count("is_training"));
  EXPECT_TRUE(fvs.count("relu"));
}

TEST(Programs, ListLiteralsAndConsChains) {
  Program lit = Parser::parse_program("let _ = f [1; 2; 3]");
  // hoisted: let _t0 = [1;2;3] in f _t0
  ASSERT_EQ(lit.main->k, SourceTerm::K::Let);
  ASSERT_EQ(lit.main->m1->k, SourceTerm::K::Const);
  EXPECT_EQ(lit.main->m1->c.k, Constant::K::IntList);
  EXPECT_EQ(lit.main->m1->c.list, (std::vector<long long>{1, 2, 3}));

  Program dyn = Parser::parse_program("let _ = f [n; 2]");
  // non-literal element: cons n (cons 2 [])
  std::string s = pp(dyn);
  EXPECT_NE(s.find("cons"), std::string::npos) << s;
  EXPECT_EQ(s, pp(Parser::parse_program(s)));
}

TEST(Programs, NegativeLiteralsAndUnaryMinus) {
  Program p = Parser::parse_program("let _ = reshape t [-1]");
  std::string s = pp(p);
  EXPECT_NE(s.find("[-1]"), std::string::npos) << s;
  Program q = Parser::parse_program("let f x = 0 - x\nlet _ = 0");
  std::string qs = pp(q);
  EXPECT_NE(qs.find("subi"), std::string::npos) << qs;
}

TEST(Programs, AnnotationOnParenthesizedExpr) {
  Program p = Parser::parse_program("let _ = (zeros [3] : { v : tensor | v.shape = [3] })");
  SrcP m = p.main;
  // pending lets wrap inside the annotated parenthesis
  ASSERT_EQ(m->k, SourceTerm::K::Annot);
  EXPECT_EQ(show(*m->ty), "tensor([3])");  // shape-equality refinement prints sugared
}

TEST(Errors, SpansAndMessages) {
  EXPECT_THROW(Parser::parse_program("let x = in"), ParseError);
  EXPECT_THROW(Parser::parse_program("let x = (* never closed"), ParseError);
  EXPECT_THROW(Parser::parse_program("let x = 1\nlet x = 2\nlet _ = x"), ParseError);
  EXPECT_THROW(Parser::parse_program("let _ = 1\nlet y = 2"), ParseError);
  EXPECT_THROW(Parser::parse_program("let f = fun -> 1\nlet _ = 0"), ParseError);
  try {
    Parser::parse_program("let x =\n  in x");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.span.line, 2);
    EXPECT_NE(std::string(e.what()).find("empty right-hand side"), std::string::npos);
  }
}

TEST(Stubs, PreludeStyleDeclarations) {
  const char* text = R"(
(* transpose expects a matrix *)
val tr : x:{ v : tensor | len v.shape = 2 } -> tensor([nth 1 x.shape; nth 0 x.shape])
val cat_ : d:int -> x:tensor -> y:tensor -> tensor
val Tensor.stack : int -> tensor -> tensor
val Layer.forward : forall b1:bool, b2:bool. (x:{ v : tensor | b1 } -> { w : tensor | b2 }) -> y:{ v : tensor | b1 } -> { w : tensor | b2 }
val sequential : forall S1 S2. (tensor(S1) -> tensor(S2)) -> tensor(S1) -> tensor(S2)
)";
  auto ds = Parser::parse_stubs(text);
  ASSERT_EQ(ds.size(), 5u);
  EXPECT_EQ(ds[0].name, "tr");
  EXPECT_EQ(show(ds[0].ty),
            "x:{ v : tensor | len v.shape = 2 } -> tensor([nth 1 x.shape; nth 0 x.shape])");
  EXPECT_EQ(ds[2].name, "stack");  // Tensor. prefix is stripped
  EXPECT_EQ(ds[3].pred_params, (std::vector<std::string>{"b1", "b2"}));
  ASSERT_EQ(ds[4].value_params.size(), 2u);
  EXPECT_EQ(ds[4].value_params[0].first, "S1");
  EXPECT_EQ(ds[4].value_params[0].second, Sort::IntList);
  // stability under printing
  for (const auto& d : ds) {
    auto again = Parser::parse_stubs(show_stub(d));
    ASSERT_EQ(again.size(), 1u);
    EXPECT_TRUE(alpha_equal(d.ty, again[0].ty)) << show_stub(d);
  }
}

TEST(Stubs, IllSortedRefinementRejected) {
  EXPECT_THROW(Parser::parse_stubs("val f : { v : int | v.shape = [1] } -> int"), WfError);
  EXPECT_THROW(Parser::parse_stubs("val f : x:{ v : tensor | len x.shape = 2 } -> int"), WfError);
}

TEST(Types, SurfaceForms) {
  SortEnv empty;
  EXPECT_EQ(show(Parser::parse_type("int")), "int");
  EXPECT_EQ(show(Parser::parse_type("int list")), "int list");
  EXPECT_EQ(show(Parser::parse_type("bool -> int")), "bool -> int");
  EXPECT_EQ(show(Parser::parse_type("tensor([10])")), "tensor([10])");
  EXPECT_EQ(show(Parser::parse_type("(int -> int) -> int")), "(int -> int) -> int");
  auto dep = Parser::parse_type("s:int -> x:{ v : tensor | len v.shape = 1 } -> tensor([nth 0 x.shape / s])");
  EXPECT_EQ(show(dep), "s:int -> x:{ v : tensor | len v.shape = 1 } -> tensor([nth 0 x.shape / s])");
  // tensor(S) sugar round-trips through the desugared form
  auto sug = Parser::parse_type("tensor([2; 3])");
  ASSERT_EQ(sug->k, RType::K::Base);
  EXPECT_EQ(sug->pred->k, Pred::K::EqSh);
}

TEST(Preds, SurfaceForms) {
  SortEnv env = testgen::scope();
  EXPECT_EQ(show(Parser::parse_pred("x.shape = [10]", {{"x", Sort::Tensor}}), 0), "x.shape = [10]");
  auto p = Parser::parse_pred("len t.shape = 1 && nth 0 t.shape / i = 10", env);
  EXPECT_EQ(p->k, Pred::K::And);
  auto q = Parser::parse_pred("not (b || i < j)", env);
  EXPECT_EQ(q->k, Pred::K::Not);
  auto r = Parser::parse_pred("broadcastable t.shape (tail u.shape)", env);
  EXPECT_EQ(r->k, Pred::K::Brc);
  auto s = Parser::parse_pred("reshapeable L [prod L; -1]", env);
  EXPECT_EQ(s->k, Pred::K::Rsh);
  // precedence: && binds tighter than ||, comparisons tighter than both
  auto t = Parser::parse_pred("i = 1 && j = 2 || b", env);
  EXPECT_EQ(t->k, Pred::K::Or);
  EXPECT_EQ(t->p1->k, Pred::K::And);
}

TEST(Preds, PrinterParserFixpoint) {
  testgen::Gen g(424242);
  SortEnv env = testgen::scope();
  for (int k = 0; k < 400; ++k) {
    PredP p = g.pred(3);
    std::string s1 = show(p, 0);
    PredP q;
    try {
      q = Parser::parse_pred(s1, env);
    } catch (const ParseError& e) {
      FAIL() << "failed to reparse: " << s1 << "\n  " << e.what();
    }
    std::string s2 = show(q, 0);
    EXPECT_EQ(s1, s2) << "printer/parser disagree";
  }
}

TEST(Terms, GeneratedProgramFixpoint) {
  // Compose program text from fragments, parse, and require print stability.
  std::mt19937_64 rng(7);
  const char* rhss[] = {
      "fun x -> x",
      "fun (x : tensor) -> relu x",
      "fix go n -> if n <= 0 then 0 else go (n - 1)",
      "let a = zeros [2] in let b = relu a in matmul a b",
      "(rand [4; 4] : { v : tensor | len v.shape = 2 })",
      "[1; 2] ",
      "f 1 |> g |> h 2",
      "if flag then 1 + 2 * 3 else 4 / 5 - 6",
  };
  for (int rep = 0; rep < 50; ++rep) {
    std::string text;
    int n = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i)
      text += "let d" + std::to_string(i) + " = " + rhss[rng() % std::size(rhss)] + "\n";
    text += "let _ = d0\n";
    Program p = Parser::parse_program(text);
    std::string once = pp(p);
    EXPECT_EQ(once, pp(Parser::parse_program(once))) << once;
  }
}
