// Simple-type inference: unification, monomorphic lets, declared erasures,
// defaulting, and full-program annotation coverage.

#include <gtest/gtest.h>

#include "graten/simpletypes.hpp"

using namespace graten;

namespace {

std::vector<StubDecl> prims() {
  return Parser::parse_stubs(R"(
val addi : int -> int -> int
val subi : int -> int -> int
val lei : int -> int -> bool
val load : int -> tensor -> tensor
val rand : int list -> tensor
val relu : tensor -> tensor
)");
}

const char* kModel = R"(
let model s =
  let f = (load 0 : x:{ v : tensor | len v.shape = 1 } -> tensor([nth 0 x.shape / s])) in
  let g = (load 1 : tensor([10]) -> tensor([1])) in
  fun x -> let y = f x in g y

let _ = model 1 (rand [20])
)";

void collect(const SrcP& m, std::vector<SrcP>& out) {
  out.push_back(m);
  switch (m->k) {
    case SourceTerm::K::Const:
    case SourceTerm::K::Var: break;
    case SourceTerm::K::Lam:
    case SourceTerm::K::Annot:
    case SourceTerm::K::App:
    case SourceTerm::K::Fix: collect(m->m1, out); break;
    case SourceTerm::K::Let:
    case SourceTerm::K::If:
      collect(m->m1, out);
      collect(m->m2, out);
      break;
  }
}

bool ground(const STypeP& t) {
  if (t->k == SType::K::Var) return false;
  if (t->k == SType::K::Arrow) return ground(t->dom) && ground(t->cod);
  return true;
}

}  // namespace

TEST(SimpleTypes, LambdaOverIntPrimitive) {
  Program p = Parser::parse_program("let f = fun x -> x + 1\nlet _ = f 2");
  auto tt = infer_simple(p, prims());
  EXPECT_EQ(show(tt.top.at("f")), "int -> int");
  EXPECT_TRUE(tt.warnings.empty());
}

TEST(SimpleTypes, ModelErasure) {
  Program p = Parser::parse_program(kModel);
  auto tt = infer_simple(p, prims());
  EXPECT_EQ(show(tt.top.at("model")), "int -> tensor -> tensor");
  EXPECT_TRUE(tt.warnings.empty());
}

TEST(SimpleTypes, BranchesMustAgree) {
  Program p = Parser::parse_program("let f = fun b -> if b then 1 else [1; 2]\nlet _ = 0");
  try {
    infer_simple(p, prims());
    FAIL() << "expected a unification failure";
  } catch (const UnificationError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("int"), std::string::npos);
    EXPECT_NE(msg.find("int list"), std::string::npos);
    EXPECT_GT(e.span.line, 0);
  }
}

TEST(SimpleTypes, LetsAreMonomorphic) {
  Program p =
      Parser::parse_program("let _ = let id = fun x -> x in let a = id 1 in id [1; 2]");
  EXPECT_THROW(infer_simple(p, prims()), UnificationError);
}

TEST(SimpleTypes, FixUsesDeclaredErasure) {
  Program p = Parser::parse_program(
      "let f = fix (go : n:int -> int) n -> if n <= 0 then 0 else go (n - 1)\nlet _ = 0");
  auto tt = infer_simple(p, prims());
  EXPECT_EQ(show(tt.top.at("f")), "int -> int");
}

TEST(SimpleTypes, FixWithoutAnnotationStillInfers) {
  Program p = Parser::parse_program(
      "let rec go n = if n <= 0 then 0 else go (n - 1)\nlet _ = go 3");
  auto tt = infer_simple(p, prims());
  EXPECT_EQ(show(tt.top.at("go")), "int -> int");
}

TEST(SimpleTypes, ResidualVariablesDefaultToIntWithWarning) {
  Program p = Parser::parse_program("let f = fun x -> 1\nlet _ = 0");
  auto tt = infer_simple(p, prims());
  EXPECT_EQ(show(tt.top.at("f")), "int -> int");
  ASSERT_EQ(tt.warnings.size(), 1u);
  EXPECT_EQ(tt.warnings[0].code, "types/defaulted");
  EXPECT_EQ(tt.warnings[0].severity, "warning");
}

TEST(SimpleTypes, AnnotationsConstrain) {
  Program ok = Parser::parse_program("let _ = ((fun x -> x) : int -> int)");
  auto tt = infer_simple(ok, prims());
  EXPECT_EQ(show(tt.at(ok.main)), "int -> int");

  Program bad = Parser::parse_program("let _ = (1 : bool)");
  EXPECT_THROW(infer_simple(bad, prims()), UnificationError);
}

TEST(SimpleTypes, UnboundVariableIsReported) {
  Program p = Parser::parse_program("let _ = nosuch");
  try {
    infer_simple(p, prims());
    FAIL() << "expected an unbound-variable failure";
  } catch (const UnboundVarError& e) {
    EXPECT_EQ(e.name, "nosuch");
  }
}

TEST(SimpleTypes, InfiniteTypesAreRejected) {
  Program p = Parser::parse_program("let _ = fix f x -> f f");
  EXPECT_THROW(infer_simple(p, prims()), UnificationError);
}

TEST(SimpleTypes, CrossBindingUseRefinesEarlierBinding) {
  Program p = Parser::parse_program(
      "let apply = fun f -> fun x -> f x\nlet _ = apply relu (rand [2])");
  auto tt = infer_simple(p, prims());
  EXPECT_EQ(show(tt.top.at("apply")), "(tensor -> tensor) -> tensor -> tensor");
  EXPECT_TRUE(tt.warnings.empty());
}

TEST(SimpleTypes, EveryNodeCarriesAGroundType) {
  Program p = Parser::parse_program(kModel);
  auto tt = infer_simple(p, prims());
  std::vector<SrcP> nodes;
  for (const auto& l : p.lets) collect(l.rhs, nodes);
  collect(p.main, nodes);
  ASSERT_GT(nodes.size(), 10u);
  for (const auto& n : nodes) {
    auto it = tt.node.find(n.get());
    ASSERT_NE(it, tt.node.end()) << show_source(n, 0);
    EXPECT_TRUE(ground(it->second)) << show(it->second);
  }
}

TEST(SimpleTypes, DeterministicAcrossRuns) {
  Program p = Parser::parse_program(kModel);
  auto a = infer_simple(p, prims());
  auto b = infer_simple(p, prims());
  std::vector<SrcP> nodes;
  for (const auto& l : p.lets) collect(l.rhs, nodes);
  collect(p.main, nodes);
  std::string sa, sb;
  for (const auto& n : nodes) {
    sa += show(a.node.at(n.get())) + "\n";
    sb += show(b.node.at(n.get())) + "\n";
  }
  EXPECT_EQ(sa, sb);
}
