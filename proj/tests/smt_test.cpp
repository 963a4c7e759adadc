// SMT-LIB2 export tests. The oracle is a miniature s-expression reader and
// evaluator, written first and independent of the emitter: it replays a
// candidate model against every (assert ...) in the emitted text, so the
// encoding can be checked against direct predicate evaluation.

#include <gtest/gtest.h>

#include <cctype>

#include "graten/smt.hpp"

#include "gen_common.hpp"

using namespace graten;

// ===== s-expression oracle ====================================================

namespace sexpr {

struct Node {
  bool atom = false;
  std::string text;
  std::vector<Node> kids;
};

struct Reader {
  const std::string& s;
  size_t pos = 0;
  explicit Reader(const std::string& src) : s(src) {}

  void skip_ws() {
    while (pos < s.size()) {
      if (s[pos] == ';') {
        while (pos < s.size() && s[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  bool done() {
    skip_ws();
    return pos >= s.size();
  }

  Node next() {
    skip_ws();
    if (pos >= s.size()) throw std::runtime_error("sexpr: eof");
    if (s[pos] == '(') {
      ++pos;
      Node n;
      while (true) {
        skip_ws();
        if (pos >= s.size()) throw std::runtime_error("sexpr: unclosed list");
        if (s[pos] == ')') {
          ++pos;
          return n;
        }
        n.kids.push_back(next());
      }
    }
    Node n;
    n.atom = true;
    size_t start = pos;
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) &&
           s[pos] != '(' && s[pos] != ')')
      ++pos;
    n.text = s.substr(start, pos - start);
    return n;
  }
};

struct V {
  bool is_bool = false;
  bool b = false;
  long long i = 0;
};

using Env = std::map<std::string, V>;

inline long long euclid_div(long long a, long long b) {
  long long q = a / b;
  long long r = a % b;
  if (r < 0) q += (b > 0 ? -1 : 1);
  return q;
}

inline long long euclid_mod(long long a, long long b) { return a - euclid_div(a, b) * b; }

V eval(const Node& n, const Env& env) {
  if (n.atom) {
    if (n.text == "true") return V{true, true, 0};
    if (n.text == "false") return V{true, false, 0};
    auto it = env.find(n.text);
    if (it != env.end()) return it->second;
    return V{false, false, std::stoll(n.text)};
  }
  if (n.kids.empty()) throw std::runtime_error("sexpr: empty application");
  if (!n.kids[0].atom) throw std::runtime_error("sexpr: head not an atom");
  const std::string& op = n.kids[0].text;
  auto arg = [&](size_t i) { return eval(n.kids[i], env); };
  if (op == "ite") return arg(1).b ? arg(2) : arg(3);
  if (op == "and") {
    for (size_t i = 1; i < n.kids.size(); ++i)
      if (!arg(i).b) return V{true, false, 0};
    return V{true, true, 0};
  }
  if (op == "or") {
    for (size_t i = 1; i < n.kids.size(); ++i)
      if (arg(i).b) return V{true, true, 0};
    return V{true, false, 0};
  }
  if (op == "not") return V{true, !arg(1).b, 0};
  if (op == "=>") return V{true, !arg(1).b || arg(2).b, 0};
  if (op == "=") {
    V a = arg(1), b = arg(2);
    return V{true, a.is_bool ? a.b == b.b : a.i == b.i, 0};
  }
  if (op == "<") return V{true, arg(1).i < arg(2).i, 0};
  if (op == "<=") return V{true, arg(1).i <= arg(2).i, 0};
  if (op == ">") return V{true, arg(1).i > arg(2).i, 0};
  if (op == ">=") return V{true, arg(1).i >= arg(2).i, 0};
  if (op == "+") {
    long long acc = 0;
    for (size_t i = 1; i < n.kids.size(); ++i) acc += arg(i).i;
    return V{false, false, acc};
  }
  if (op == "*") {
    long long acc = 1;
    for (size_t i = 1; i < n.kids.size(); ++i) acc *= arg(i).i;
    return V{false, false, acc};
  }
  if (op == "-") {
    if (n.kids.size() == 2) return V{false, false, -arg(1).i};
    return V{false, false, arg(1).i - arg(2).i};
  }
  if (op == "div") {
    long long b = arg(2).i;
    if (b == 0) throw std::runtime_error("sexpr: div by zero");
    return V{false, false, euclid_div(arg(1).i, b)};
  }
  if (op == "mod") {
    long long b = arg(2).i;
    if (b == 0) throw std::runtime_error("sexpr: mod by zero");
    return V{false, false, euclid_mod(arg(1).i, b)};
  }
  if (op == "tdiv") {
    long long a = arg(1).i, b = arg(2).i;
    if (b == 0) throw std::runtime_error("sexpr: tdiv by zero");
    return V{false, false, a / b};
  }
  throw std::runtime_error("sexpr: unknown operator " + op);
}

// replay a model against every assert in the script; true iff all hold
bool replay(const std::string& script, const Env& env) {
  Reader r(script);
  while (!r.done()) {
    Node n = r.next();
    if (n.atom || n.kids.empty() || !n.kids[0].atom) continue;
    if (n.kids[0].text != "assert") continue;
    V v = eval(n.kids[1], env);
    if (!v.is_bool) throw std::runtime_error("sexpr: assert of non-boolean");
    if (!v.b) return false;
  }
  return true;
}

// environment mapping for the emitter's naming scheme
Env model_of(const Assignment& a, int elem_bound) {
  Env env;
  for (const auto& [name, val] : a) {
    std::string base = "v_" + name;
    switch (val.sort) {
      case Sort::Int: env[base] = V{false, false, val.i}; break;
      case Sort::Bool: env[base] = V{true, val.b, 0}; break;
      case Sort::IntList:
      case Sort::Tensor: {
        env[base + "_len"] = V{false, false, static_cast<long long>(val.list.size())};
        for (int i = 0; i < elem_bound; ++i)
          env[base + "_e" + std::to_string(i)] =
              V{false, false, i < static_cast<int>(val.list.size()) ? val.list[i] : 0};
        break;
      }
    }
  }
  return env;
}

}  // namespace sexpr

// ===== tests =================================================================

TEST(Sexpr, EuclideanVsTruncating) {
  // oracle self-checks for the two division semantics
  EXPECT_EQ(sexpr::euclid_div(7, 2), 3);
  EXPECT_EQ(sexpr::euclid_div(-7, 2), -4);
  EXPECT_EQ(sexpr::euclid_div(7, -2), -3);
  EXPECT_EQ(sexpr::euclid_div(-7, -2), 4);
  EXPECT_EQ(sexpr::euclid_mod(-7, 2), 1);
  // the tdiv definition in the header must equal truncation when replayed
  std::string defn = "(assert (= (ite (>= a 0) (div a b) (- (div (- a) b))) q))";
  for (long long a : {-7LL, -6LL, -1LL, 0LL, 1LL, 6LL, 7LL})
    for (long long b : {-3LL, -2LL, 2LL, 3LL}) {
      sexpr::Env env{{"a", sexpr::V{false, false, a}},
                     {"b", sexpr::V{false, false, b}},
                     {"q", sexpr::V{false, false, a / b}}};
      EXPECT_TRUE(sexpr::replay(defn, env)) << a << " / " << b;
    }
}

TEST(Emit, SatQueryReplaysWitness) {
  SortEnv env{{"x", Sort::Tensor}};
  auto p = pr_eq_sz(sz_div(sz_nth(sz_lit(0), sh_shape_of("x")), sz_lit(2)), sz_lit(10));
  std::string script = emit_smtlib2(env, p, p, false);
  EXPECT_NE(script.find("(declare-const v_x_len Int)"), std::string::npos);
  EXPECT_NE(script.find("(check-sat)"), std::string::npos);

  Assignment good;
  good["x"] = LogicVal::of_tensor({20});
  EXPECT_TRUE(sexpr::replay(script, sexpr::model_of(good, 8)));

  Assignment bad;
  bad["x"] = LogicVal::of_tensor({7});
  EXPECT_FALSE(sexpr::replay(script, sexpr::model_of(bad, 8)));
}

TEST(Emit, ValidityQueryReplaysCounterexample) {
  SortEnv env{{"x", Sort::Int}};
  auto hyp = pr_lt(sz_lit(0), sz_var("x"));
  auto goal = pr_eq_sz(sz_var("x"), sz_lit(3));
  auto r = check_validity(env, hyp, goal);
  ASSERT_EQ(r.verdict, Validity::Invalid);
  std::string script = emit_smtlib2(env, hyp, goal, true);
  // the counterexample satisfies hyp AND (not goal)
  EXPECT_TRUE(sexpr::replay(script, sexpr::model_of(*r.witness, 8)));
  // a model of the implication does not
  Assignment sat3;
  sat3["x"] = LogicVal::of_int(3);
  EXPECT_FALSE(sexpr::replay(script, sexpr::model_of(sat3, 8)));
}

TEST(Emit, EncodingErrors) {
  SortEnv env{{"t", Sort::Tensor}, {"u", Sort::Tensor}};
  auto shape_fn = pr_eq_sh(sh_reshape(sh_shape_of("t"), sh_lit_ints({2, 2})),
                           sh_shape_of("u"));
  EXPECT_THROW(emit_smtlib2(env, shape_fn, shape_fn, false), EncodingError);
  auto bc = pr_eq_sh(sh_broadcast(sh_shape_of("t"), sh_shape_of("u")), sh_shape_of("u"));
  EXPECT_THROW(emit_smtlib2(env, bc, bc, false), EncodingError);
  auto mm = pr_eq_sh(sh_matmul(sh_shape_of("t"), sh_shape_of("u")), sh_shape_of("u"));
  EXPECT_THROW(emit_smtlib2(env, mm, mm, false), EncodingError);
  auto pv = pr_pvar(1, {PVarArg{Sort::Tensor, "t"}}, {});
  EXPECT_THROW(emit_smtlib2(env, pv, pv, false), EncodingError);
  // shape literal longer than the element bound
  auto wide = pr_eq_sh(sh_shape_of("t"), sh_lit_ints({1, 1, 1, 1, 1}));
  EXPECT_THROW(emit_smtlib2(env, wide, wide, false, 4), EncodingError);
  EXPECT_NO_THROW(emit_smtlib2(env, wide, wide, false, 8));
}

TEST(Emit, BroadcastableAndReshapeable) {
  SortEnv env{{"t", Sort::Tensor}, {"u", Sort::Tensor}};
  auto p = pr_and(pr_brc(sh_shape_of("t"), sh_shape_of("u")),
                  pr_rsh(sh_shape_of("t"), sh_lit_ints({3, -1})));
  std::string script = emit_smtlib2(env, p, p, false);
  Assignment good;
  good["t"] = LogicVal::of_tensor({6, 1});
  good["u"] = LogicVal::of_tensor({4});
  // broadcastable([6;1],[4]) and reshapeable([6;1] -> [3;-1]) both hold
  EXPECT_TRUE(sexpr::replay(script, sexpr::model_of(good, 8)));
  Assignment bad;
  bad["t"] = LogicVal::of_tensor({6, 2});
  bad["u"] = LogicVal::of_tensor({4});
  EXPECT_FALSE(sexpr::replay(script, sexpr::model_of(bad, 8)));
}

TEST(Emit, AgreesWithEvaluationOnDefinedPoints) {
  // On assignments where direct evaluation is defined, the emitted formula
  // replays to the same truth value. (Partial operations are totalized in
  // the export, so undefined points are exempt.)
  testgen::Gen g(4242);
  auto prefix = testgen::scope();
  std::mt19937_64 rng(99);
  int compared = 0;
  for (int k = 0; k < 80; ++k) {
    PredP p = g.pred(2);
    std::string script;
    try {
      script = emit_smtlib2(prefix, p, p, false);
    } catch (const EncodingError&) {
      continue;  // contains a shape function: not exportable
    }
    for (int trial = 0; trial < 40; ++trial) {
      Assignment a;
      auto rnd_list = [&] {
        std::vector<long long> l(rng() % 3);
        for (auto& e : l) e = static_cast<long long>(rng() % 4);
        return l;
      };
      a["i"] = LogicVal::of_int(static_cast<long long>(rng() % 7) - 3);
      a["j"] = LogicVal::of_int(static_cast<long long>(rng() % 7) - 3);
      a["b"] = LogicVal::of_bool(rng() % 2 == 0);
      a["L"] = LogicVal::of_list(rnd_list());
      a["t"] = LogicVal::of_tensor(rnd_list());
      a["u"] = LogicVal::of_tensor(rnd_list());
      auto direct = eval_pred(a, p);
      if (!direct.has_value()) continue;
      bool replayed = sexpr::replay(script, sexpr::model_of(a, 8));
      EXPECT_EQ(replayed, *direct) << show(p, 0) << "\nat " << show_assignment(a);
      ++compared;
    }
  }
  EXPECT_GT(compared, 500);
}

TEST(Emit, LoggedQueryOverload) {
  LoggedQuery q;
  q.prefix = SortEnv{{"x", Sort::Int}};
  q.hyp = pr_lt(sz_lit(0), sz_var("x"));
  q.goal = pr_lt(sz_var("x"), sz_lit(10));
  q.validity_mode = true;
  std::string script = emit_smtlib2(q);
  EXPECT_NE(script.find("(assert (< 0 v_x))"), std::string::npos);
  EXPECT_NE(script.find("(assert (not (< v_x 10)))"), std::string::npos);
}
