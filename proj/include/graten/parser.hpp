#pragma once

// Concrete syntax for programs (.gt) and primitive-signature stubs (.gti).
//
// Programs:
//   decl   ::= "let" ["rec"] name param* "=" expr        (top level, no "in")
//   main   ::= "let _ =" expr | expr                     (final declaration)
//   expr   ::= "let" ["rec"] binder param* "=" expr "in" expr
//            | "fun" param+ "->" expr
//            | "fix" fparam param "->" expr
//            | "if" expr "then" expr "else" expr
//            | pipe
//   pipe   ::= cmp ("|>" cmp)*                           (x |> f  ==  f x)
//   cmp    ::= add [("=" | "<" | "<=") add]              (int prims eqi/lti/lei)
//   add    ::= mul (("+" | "-") mul)*                    (addi/subi)
//   mul    ::= unary (("*" | "/") unary)*                (muli/divi)
//   unary  ::= "-" unary | app
//   app    ::= atom atom*                                (left associative)
//   atom   ::= int | "true" | "false" | ident | "[" elems "]"
//            | "(" expr [":" type] ")" | "~" label [":" atom]
//
// Applications and if conditions are normalized on the fly: every non-variable
// argument is hoisted into a fresh "let" in evaluation order (left to right),
// so the resulting AST satisfies the ANF discipline of SourceTerm. List
// literals with non-literal elements become chains of the `cons` primitive.
// A leading "Tensor." qualifier is stripped from identifiers; "Layer." and
// other qualifiers are kept as part of the name.
//
// Types:
//   type   ::= [name ":"] tatom ["->" type]
//   tatom  ::= "int" ["list"] | "bool" | "tensor" ["(" shape ")"]
//            | "{" binder ":" sort "|" pred "}" | "(" type ")"
//
// Predicates (the printers in pred.hpp define the canonical layout):
//   pred   ::= pand ("||" pand)*
//   pand   ::= pnot ("&&" pnot)*
//   pnot   ::= "not" pnot | patom
//   patom  ::= "true" | "false" | "broadcastable" shatom shatom
//            | "reshapeable" shatom shatom | operand ("=" | "<" | "<=") operand
//            | boolvar | "(" pred ")"
//
// Comments are OCaml style "(* ... *)" and nest.

#include <cctype>
#include <variant>

#include "graten/terms.hpp"

namespace graten {

// ---- programs and stubs ------------------------------------------------------

struct TopLet {
  std::string name;
  SrcP rhs;
  Span span;
};

struct Program {
  std::vector<TopLet> lets;
  SrcP main;

  // The whole program as one nested-let expression.
  SrcP to_term() const {
    SrcP t = main;
    for (auto it = lets.rbegin(); it != lets.rend(); ++it)
      t = s_let(it->name, it->rhs, t, it->span);
    return t;
  }
};

struct StubDecl {
  std::string name;
  RTypeP ty;
  // Shape/size parameters quantified by "forall" (poly extension); each
  // entry's sort is IntList (default) or Int.
  std::vector<std::pair<std::string, Sort>> value_params;
  // Boolean predicate parameters (refinement-polymorphic stubs).
  std::vector<std::string> pred_params;
  Span span;

  SortEnv param_env() const {
    SortEnv env;
    for (const auto& [n, s] : value_params) env[n] = s;
    for (const auto& n : pred_params) env[n] = Sort::Bool;
    return env;
  }
};

inline std::string show_program(const Program& p) {
  std::string out;
  for (const auto& l : p.lets) out += "let " + l.name + " = " + show_source(l.rhs, 1) + "\n\n";
  out += "let _ = " + show_source(p.main, 1) + "\n";
  return out;
}

inline std::string show_stub(const StubDecl& d) {
  std::string out = "val " + d.name + " : ";
  if (!d.value_params.empty() || !d.pred_params.empty()) {
    std::vector<std::string> qs;
    for (const auto& [n, s] : d.value_params) qs.push_back(s == Sort::Int ? n + ":int" : n);
    for (const auto& n : d.pred_params) qs.push_back(n + ":bool");
    out += "forall " + join(qs, " ") + ". ";
  }
  out += show(d.ty);
  return out;
}

// ---- lexer -------------------------------------------------------------------

namespace parse_detail {

struct Token {
  enum class K { Ident, Int, Sym, End };
  K k = K::End;
  std::string text;
  long long ival = 0;
  Span span;
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

inline std::vector<Token> lex(const std::string& text) {
  std::vector<Token> out;
  size_t i = 0;
  int line = 1, col = 1;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n && i < text.size(); ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto here = [&]() {
    Span s;
    s.line = line;
    s.col = col;
    s.end_line = line;
    s.end_col = col;
    return s;
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '(' && i + 1 < text.size() && text[i + 1] == '*') {
      Span start = here();
      int depth = 0;
      while (i < text.size()) {
        if (text[i] == '(' && i + 1 < text.size() && text[i + 1] == '*') {
          ++depth;
          advance(2);
        } else if (text[i] == '*' && i + 1 < text.size() && text[i + 1] == ')') {
          --depth;
          advance(2);
          if (depth == 0) break;
        } else {
          advance(1);
        }
      }
      if (depth != 0) throw ParseError("parse/comment", start, "unterminated comment");
      continue;
    }
    Token t;
    t.span = here();
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      t.k = Token::K::Int;
      t.text = text.substr(i, j - i);
      t.ival = std::stoll(t.text);
      advance(j - i);
      t.span.end_line = line;
      t.span.end_col = col;
      out.push_back(std::move(t));
      continue;
    }
    if (ident_start(c)) {
      size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      std::string name = text.substr(i, j - i);
      // Fold module-qualified names: an Uppercase segment followed by
      // ".letter" extends the identifier (Layer.of_fn, Tensor.rand).
      while (j + 1 < text.size() && text[j] == '.' && ident_start(text[j + 1]) &&
             std::isupper(static_cast<unsigned char>(name[0]))) {
        size_t k = j + 1;
        while (k < text.size() && ident_char(text[k])) ++k;
        name += text.substr(j, k - j);
        j = k;
      }
      t.k = Token::K::Ident;
      t.text = std::move(name);
      advance(j - i);
      t.span.end_line = line;
      t.span.end_col = col;
      out.push_back(std::move(t));
      continue;
    }
    static const char* two[] = {"->", "|>", "&&", "||", "<="};
    bool matched = false;
    for (const char* s : two) {
      if (text.compare(i, 2, s) == 0) {
        t.k = Token::K::Sym;
        t.text = s;
        advance(2);
        matched = true;
        break;
      }
    }
    if (!matched) {
      static const std::string singles = "()[]{};:,.+-*/~|<=_?";
      if (singles.find(c) == std::string::npos)
        throw ParseError("parse/char", t.span, std::string("unexpected character '") + c + "'");
      t.k = Token::K::Sym;
      t.text = std::string(1, c);
      advance(1);
    }
    t.span.end_line = line;
    t.span.end_col = col;
    out.push_back(std::move(t));
  }
  Token end;
  end.k = Token::K::End;
  end.span = here();
  out.push_back(std::move(end));
  return out;
}

}  // namespace parse_detail

// ---- parser ------------------------------------------------------------------

class Parser {
 public:
  explicit Parser(const std::string& text) : toks_(parse_detail::lex(text)) {
    for (const auto& t : toks_)
      if (t.k == Tok::K::Ident) used_names_.insert(t.text);
  }

  static Program parse_program(const std::string& text) { return Parser(text).p_program(); }
  static std::vector<StubDecl> parse_stubs(const std::string& text) { return Parser(text).p_stubfile(); }
  static RTypeP parse_type(const std::string& text, const SortEnv& env = {}) {
    Parser p(text);
    SortEnv e = env;
    RTypeP t = p.p_type(e);
    p.expect_end();
    return t;
  }
  static PredP parse_pred(const std::string& text, const SortEnv& env = {}) {
    Parser p(text);
    SortEnv e = env;
    PredP q = p.p_pred(e);
    p.expect_end();
    return q;
  }
  static SrcP parse_expr(const std::string& text) {
    Parser p(text);
    TermEnv env;
    SrcP e = p.p_expr_boundary(env);
    p.expect_end();
    return e;
  }

 private:
  using Tok = parse_detail::Token;
  using Operand = std::variant<SizeP, ShapeP>;
  // Term binders with their annotation-derived sorts; nullopt = unknown.
  using TermEnv = std::map<std::string, std::optional<Sort>>;

  std::vector<Tok> toks_;
  size_t pos_ = 0;
  int temp_counter_ = 0;
  std::set<std::string> used_names_;

  // -- token helpers --
  const Tok& peek(size_t ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  bool at_sym(const std::string& s) const {
    return peek().k == Tok::K::Sym && peek().text == s;
  }
  bool at_ident(const std::string& s) const {
    return peek().k == Tok::K::Ident && peek().text == s;
  }
  bool accept_sym(const std::string& s) {
    if (!at_sym(s)) return false;
    ++pos_;
    return true;
  }
  bool accept_ident(const std::string& s) {
    if (!at_ident(s)) return false;
    ++pos_;
    return true;
  }
  Tok expect_sym(const std::string& s) {
    if (!at_sym(s)) fail("expected '" + s + "'", {s});
    return toks_[pos_++];
  }
  Tok expect_ident_tok() {
    if (peek().k != Tok::K::Ident) fail("expected identifier", {"<identifier>"});
    return toks_[pos_++];
  }
  void expect_keyword(const std::string& s) {
    if (!accept_ident(s)) fail("expected '" + s + "'", {s});
  }
  void expect_end() {
    if (peek().k != Tok::K::End) fail("expected end of input", {"<end>"});
  }
  [[noreturn]] void fail(const std::string& msg, std::vector<std::string> expected = {}) const {
    std::string m = msg;
    const Tok& t = peek();
    std::string got = t.k == Tok::K::End ? "<end>" : t.text;
    m += "; got '" + got + "'";
    if (!expected.empty()) m += " (expected: " + join(expected, ", ") + ")";
    throw ParseError("parse/syntax", t.span, m);
  }

  static bool is_keyword(const std::string& s) {
    static const std::set<std::string> kw = {"let", "rec", "in",  "fun",    "fix",
                                             "if",  "then", "else", "val", "forall"};
    return kw.count(s) > 0;
  }
  static bool is_size_fn(const std::string& s) {
    return s == "head" || s == "last" || s == "len" || s == "prod" || s == "nth";
  }
  static bool is_shape_fn(const std::string& s) {
    return s == "cons" || s == "append" || s == "tail" || s == "init" || s == "insertAt" ||
           s == "dropAt" || s == "swap" || s == "reshape" || s == "broadcast" || s == "matmul";
  }
  static bool is_base_keyword(const std::string& s) {
    return s == "int" || s == "bool" || s == "tensor" || s == "list";
  }

  std::string fresh_temp() {
    for (;;) {
      std::string n = "_t" + std::to_string(temp_counter_++);
      if (!used_names_.count(n)) return n;
    }
  }

  // ==== predicates ============================================================

  PredP p_pred(SortEnv& env) {
    PredP p = p_pand(env);
    while (accept_sym("||")) p = pr_or(p, p_pand(env));
    return p;
  }
  PredP p_pand(SortEnv& env) {
    PredP p = p_pnot(env);
    while (accept_sym("&&")) p = pr_and(p, p_pnot(env));
    return p;
  }
  PredP p_pnot(SortEnv& env) {
    if (accept_ident("not")) return pr_not(p_pnot(env));
    return p_patom(env);
  }

  PredP p_patom(SortEnv& env) {
    if (accept_ident("true")) return pr_true();
    if (accept_ident("false")) return pr_false();
    if (accept_ident("broadcastable")) {
      ShapeP a = p_shape_atom(env);
      ShapeP b = p_shape_atom(env);
      return pr_brc(a, b);
    }
    if (accept_ident("reshapeable")) {
      ShapeP a = p_shape_atom(env);
      ShapeP b = p_shape_atom(env);
      return pr_rsh(a, b);
    }
    size_t save = pos_;
    try {
      Operand a = p_operand(env);
      Span sp = peek().span;
      if (accept_sym("=")) {
        Operand b = p_operand(env);
        return mk_eq(a, b, env, sp);
      }
      if (accept_sym("<")) return pr_lt(need_size(a, sp), need_size(p_operand(env), sp));
      if (accept_sym("<=")) return pr_le(need_size(a, sp), need_size(p_operand(env), sp));
      fail("expected comparison operator", {"=", "<", "<="});
    } catch (const ParseError&) {
      pos_ = save;
    }
    if (accept_sym("(")) {
      PredP p = p_pred(env);
      expect_sym(")");
      return p;
    }
    if (peek().k == Tok::K::Ident && !is_keyword(peek().text) && !is_size_fn(peek().text) &&
        !is_shape_fn(peek().text)) {
      // A bare identifier is a boolean variable.
      const std::string name = peek().text;
      auto it = env.find(name);
      if (it == env.end() || it->second == Sort::Bool) {
        ++pos_;
        return pr_bvar(name);
      }
    }
    fail("expected predicate", {"true", "false", "not", "(", "<comparison>"});
  }

  PredP mk_eq(Operand a, Operand b, const SortEnv& env, Span sp) {
    // Coerce an unknown bare variable on one side to the other side's sort.
    auto coerce = [&](Operand& shaped, Operand& other) {
      if (std::holds_alternative<ShapeP>(shaped) && std::holds_alternative<SizeP>(other)) {
        const SizeP& s = std::get<SizeP>(other);
        if (s->k == Size::K::Var && !env.count(s->var)) other = Operand(sh_var(s->var));
      }
    };
    coerce(a, b);
    coerce(b, a);
    if (std::holds_alternative<ShapeP>(a) != std::holds_alternative<ShapeP>(b))
      throw ParseError("parse/sort", sp, "comparing a shape with a size");
    if (std::holds_alternative<ShapeP>(a))
      return pr_eq_sh(std::get<ShapeP>(a), std::get<ShapeP>(b));
    return pr_eq_sz(std::get<SizeP>(a), std::get<SizeP>(b));
  }

  SizeP need_size(const Operand& o, Span sp) {
    if (!std::holds_alternative<SizeP>(o))
      throw ParseError("parse/sort", sp, "expected an integer expression, found a shape");
    return std::get<SizeP>(o);
  }
  ShapeP need_shape(const Operand& o, Span sp) {
    if (std::holds_alternative<ShapeP>(o)) return std::get<ShapeP>(o);
    const SizeP& s = std::get<SizeP>(o);
    if (s->k == Size::K::Var) return sh_var(s->var);
    throw ParseError("parse/sort", sp, "expected a shape expression, found a size");
  }

  Operand p_operand(SortEnv& env) {
    Operand a = p_opmul(env);
    for (;;) {
      Span sp = peek().span;
      if (accept_sym("+")) {
        a = Operand(sz_add(need_size(a, sp), need_size(p_opmul(env), sp)));
      } else if (accept_sym("-")) {
        a = Operand(sz_sub(need_size(a, sp), need_size(p_opmul(env), sp)));
      } else {
        return a;
      }
    }
  }
  Operand p_opmul(SortEnv& env) {
    Operand a = p_opfactor(env);
    for (;;) {
      Span sp = peek().span;
      if (accept_sym("*")) {
        a = Operand(sz_mul(need_size(a, sp), need_size(p_opfactor(env), sp)));
      } else if (accept_sym("/")) {
        a = Operand(sz_div(need_size(a, sp), need_size(p_opfactor(env), sp)));
      } else {
        return a;
      }
    }
  }
  Operand p_opfactor(SortEnv& env) {
    if (at_sym("-")) {
      Span sp = peek().span;
      ++pos_;
      // Always a negation node, even over a literal, so printing is stable.
      return Operand(sz_neg(need_size(p_opfactor(env), sp)));
    }
    return p_opprimary(env);
  }

  Operand p_opprimary(SortEnv& env) {
    const Tok& t = peek();
    if (t.k == Tok::K::Int) {
      ++pos_;
      return Operand(sz_lit(t.ival));
    }
    if (accept_sym("[")) {
      std::vector<SizeP> elems;
      if (!at_sym("]")) {
        for (;;) {
          Span sp = peek().span;
          elems.push_back(need_size(p_operand(env), sp));
          if (!accept_sym(";")) break;
        }
      }
      expect_sym("]");
      return Operand(sh_lit(std::move(elems)));
    }
    if (accept_sym("(")) {
      Operand o = p_operand(env);
      expect_sym(")");
      return o;
    }
    if (t.k != Tok::K::Ident || is_keyword(t.text))
      fail("expected a size or shape expression", {"<int>", "[", "(", "<identifier>"});
    const std::string name = t.text;
    if (name == "head" || name == "last" || name == "len" || name == "prod") {
      ++pos_;
      ShapeP s = p_shape_atom(env);
      if (name == "head") return Operand(sz_head(s));
      if (name == "last") return Operand(sz_last(s));
      if (name == "len") return Operand(sz_len(s));
      return Operand(sz_prod(s));
    }
    if (name == "nth") {
      ++pos_;
      SizeP i = p_size_atom(env);
      return Operand(sz_nth(i, p_shape_atom(env)));
    }
    if (name == "cons") {
      ++pos_;
      SizeP h = p_size_atom(env);
      return Operand(sh_cons(h, p_shape_atom(env)));
    }
    if (name == "append" || name == "reshape" || name == "broadcast" || name == "matmul") {
      ++pos_;
      ShapeP a = p_shape_atom(env);
      ShapeP b = p_shape_atom(env);
      if (name == "append") return Operand(sh_append(a, b));
      if (name == "reshape") return Operand(sh_reshape(a, b));
      if (name == "broadcast") return Operand(sh_broadcast(a, b));
      return Operand(sh_matmul(a, b));
    }
    if (name == "tail" || name == "init") {
      ++pos_;
      ShapeP a = p_shape_atom(env);
      return Operand(name == "tail" ? sh_tail(a) : sh_init(a));
    }
    if (name == "insertAt" || name == "swap") {
      ++pos_;
      SizeP i = p_size_atom(env);
      SizeP j = p_size_atom(env);
      ShapeP a = p_shape_atom(env);
      return Operand(name == "insertAt" ? sh_insert_at(i, j, a) : sh_swap(i, j, a));
    }
    if (name == "dropAt") {
      ++pos_;
      SizeP i = p_size_atom(env);
      return Operand(sh_drop_at(i, p_shape_atom(env)));
    }
    // Variable occurrence.
    ++pos_;
    if (accept_sym(".")) {
      expect_keyword("shape");
      return Operand(sh_shape_of(name));
    }
    auto it = env.find(name);
    if (it != env.end()) {
      switch (it->second) {
        case Sort::Int: return Operand(sz_var(name));
        case Sort::IntList: return Operand(sh_var(name));
        case Sort::Tensor:
          throw ParseError("parse/sort", t.span,
                           "tensor variable '" + name + "' used without .shape");
        case Sort::Bool:
          throw ParseError("parse/sort", t.span,
                           "boolean variable '" + name + "' in arithmetic position");
      }
    }
    return Operand(sz_var(name));  // unknown: default to a size variable
  }

  SizeP p_size_atom(SortEnv& env) {
    const Tok& t = peek();
    if (t.k == Tok::K::Int) {
      ++pos_;
      return sz_lit(t.ival);
    }
    if (at_sym("-")) {
      ++pos_;
      if (peek().k == Tok::K::Int) {
        long long v = peek().ival;
        ++pos_;
        return sz_neg(sz_lit(v));
      }
      fail("expected integer literal after '-'", {"<int>"});
    }
    if (accept_sym("(")) {
      Span sp = peek().span;
      SizeP s = need_size(p_operand(env), sp);
      expect_sym(")");
      return s;
    }
    if (t.k == Tok::K::Ident && !is_keyword(t.text) && !is_size_fn(t.text) &&
        !is_shape_fn(t.text)) {
      ++pos_;
      return sz_var(t.text);
    }
    fail("expected a size atom", {"<int>", "(", "<identifier>"});
  }

  ShapeP p_shape_atom(SortEnv& env) {
    const Tok& t = peek();
    if (accept_sym("[")) {
      std::vector<SizeP> elems;
      if (!at_sym("]")) {
        for (;;) {
          Span sp = peek().span;
          elems.push_back(need_size(p_operand(env), sp));
          if (!accept_sym(";")) break;
        }
      }
      expect_sym("]");
      return sh_lit(std::move(elems));
    }
    if (accept_sym("(")) {
      Span sp = peek().span;
      ShapeP s = need_shape(p_operand(env), sp);
      expect_sym(")");
      return s;
    }
    if (t.k == Tok::K::Ident && !is_keyword(t.text) && !is_size_fn(t.text) &&
        !is_shape_fn(t.text)) {
      ++pos_;
      if (accept_sym(".")) {
        expect_keyword("shape");
        return sh_shape_of(t.text);
      }
      return sh_var(t.text);
    }
    fail("expected a shape atom", {"[", "(", "<identifier>"});
  }

  // ==== types =================================================================

  RTypeP p_type(SortEnv& env) {
    // Dependent binder: IDENT ":" not opening a refinement record.
    if (peek().k == Tok::K::Ident && !is_keyword(peek().text) && !is_base_keyword(peek().text) &&
        peek(1).k == Tok::K::Sym && peek(1).text == ":") {
      std::string binder = peek().text;
      pos_ += 2;
      RTypeP dom = p_type_atom(env);
      expect_sym("->");
      SortEnv env2 = env;
      if (dom->k == RType::K::Base) env2[binder] = dom->base;
      RTypeP cod = p_type(env2);
      return rt_fun(std::move(binder), std::move(dom), std::move(cod));
    }
    RTypeP dom = p_type_atom(env);
    if (accept_sym("->")) {
      RTypeP cod = p_type(env);
      return rt_fun("_", std::move(dom), std::move(cod));
    }
    return dom;
  }

  Sort p_sort_name() {
    if (accept_ident("int")) {
      if (accept_ident("list")) return Sort::IntList;
      return Sort::Int;
    }
    if (accept_ident("bool")) return Sort::Bool;
    if (accept_ident("tensor")) return Sort::Tensor;
    fail("expected a base type", {"int", "int list", "bool", "tensor"});
  }

  RTypeP p_type_atom(SortEnv& env) {
    if (at_ident("int") || at_ident("bool")) return rt_simple(p_sort_name());
    if (accept_ident("tensor")) {
      if (accept_sym("(")) {
        Span sp = peek().span;
        ShapeP s = need_shape(p_operand(env), sp);
        expect_sym(")");
        std::set<std::string> sfv;
        fv(s, sfv);
        std::string binder = fresh_avoid("v", sfv);
        return rt_tensor_of(std::move(s), binder);
      }
      return rt_simple(Sort::Tensor);
    }
    if (accept_sym("{")) {
      std::string binder = expect_ident_tok().text;
      expect_sym(":");
      Sort sort = p_sort_name();
      expect_sym("|");
      SortEnv env2 = env;
      env2[binder] = sort;
      PredP p = p_pred(env2);
      expect_sym("}");
      return rt_base(std::move(binder), sort, std::move(p));
    }
    if (accept_sym("(")) {
      RTypeP t = p_type(env);
      expect_sym(")");
      return t;
    }
    fail("expected a type", {"int", "bool", "tensor", "{", "("});
  }

  // ==== terms =================================================================

  struct Pending {
    std::vector<std::tuple<std::string, SrcP, Span>> lets;
  };

  static SrcP wrap_pending(Pending& pend, SrcP body) {
    for (auto it = pend.lets.rbegin(); it != pend.lets.rend(); ++it)
      body = s_let(std::get<0>(*it), std::get<1>(*it), body, std::get<2>(*it));
    return body;
  }

  std::string to_var(const SrcP& e, Pending& pend) {
    if (e->k == SourceTerm::K::Var) return e->var;
    std::string name = fresh_temp();
    pend.lets.emplace_back(name, e, e->span);
    return name;
  }

  SortEnv term_to_sort_env(const TermEnv& env) {
    SortEnv out;
    for (const auto& [n, s] : env)
      if (s) out[n] = *s;
    return out;
  }

  SrcP p_expr_boundary(TermEnv& env) {
    Pending pend;
    SrcP e = p_expr(env, pend);
    return wrap_pending(pend, e);
  }

  // One function parameter: IDENT | "_" | "(" IDENT ":" type ")" | "~" IDENT.
  // Returns (name, annotation).
  std::pair<std::string, std::optional<RTypeP>> p_param(TermEnv& env) {
    if (accept_sym("~")) {
      std::string name = expect_ident_tok().text;
      return {name, std::nullopt};
    }
    if (peek().k == Tok::K::Ident && !is_keyword(peek().text))
      return {toks_[pos_++].text, std::nullopt};
    if (accept_sym("(")) {
      std::string name = expect_ident_tok().text;
      expect_sym(":");
      SortEnv senv = term_to_sort_env(env);
      RTypeP ty = p_type(senv);
      expect_sym(")");
      return {name, std::optional<RTypeP>(ty)};
    }
    fail("expected a parameter", {"<identifier>", "(", "~"});
  }

  bool at_param_start() const {
    if (peek().k == Tok::K::Ident && !is_keyword(peek().text)) return true;
    return at_sym("(") || at_sym("~");
  }

  static std::optional<Sort> erasure_sort(const std::optional<RTypeP>& ty) {
    if (ty && (*ty)->k == RType::K::Base) return (*ty)->base;
    return std::nullopt;
  }

  SrcP p_expr(TermEnv& env, Pending& pend) {
    Span sp = peek().span;
    if (accept_ident("let")) {
      bool isrec = accept_ident("rec");
      std::string name = expect_ident_tok().text;
      if (is_keyword(name)) fail("invalid binder name");
      std::vector<std::pair<std::string, std::optional<RTypeP>>> params;
      while (at_param_start()) params.push_back(p_param(env));
      expect_sym("=");
      SrcP rhs = p_let_rhs(env, isrec, name, params, sp);
      expect_keyword("in");
      TermEnv env2 = env;
      env2[name] = std::nullopt;
      SrcP body = p_expr_inline(env2);
      return s_let(name, rhs, body, sp);
    }
    if (accept_ident("fun")) {
      std::vector<std::pair<std::string, std::optional<RTypeP>>> params;
      while (at_param_start()) params.push_back(p_param(env));
      if (params.empty()) fail("expected a parameter after 'fun'");
      expect_sym("->");
      TermEnv env2 = env;
      for (const auto& [n, ty] : params) env2[n] = erasure_sort(ty);
      SrcP body = p_expr_boundary(env2);
      for (auto it = params.rbegin(); it != params.rend(); ++it)
        body = s_lam(it->first, it->second, body, sp);
      return body;
    }
    if (accept_ident("fix")) {
      std::string f;
      std::optional<RTypeP> fty;
      if (accept_sym("(")) {
        f = expect_ident_tok().text;
        expect_sym(":");
        SortEnv senv = term_to_sort_env(env);
        fty = p_type(senv);
        expect_sym(")");
      } else {
        f = expect_ident_tok().text;
      }
      auto [x, xty] = p_param(env);
      if (xty) fail("fix argument annotations belong on the fix type");
      expect_sym("->");
      TermEnv env2 = env;
      env2[f] = std::nullopt;
      env2[x] = fty && (*fty)->k == RType::K::Fun ? erasure_sort((*fty)->dom) : std::nullopt;
      SrcP body = p_expr_boundary(env2);
      return s_fix(f, fty, x, body, sp);
    }
    if (accept_ident("if")) {
      SrcP cond = p_pipe(env, pend);
      std::string cv = to_var(cond, pend);
      expect_keyword("then");
      TermEnv env2 = env;
      SrcP b1 = p_expr_boundary(env2);
      expect_keyword("else");
      SrcP b2 = p_expr_boundary(env2);
      return s_if(cv, b1, b2, sp);
    }
    return p_pipe(env, pend);
  }

  // A let body continues the current expression but owns its hoisted
  // temporaries (they may reference the new binder).
  SrcP p_expr_inline(TermEnv& env) {
    Pending inner;
    SrcP e = p_expr(env, inner);
    return wrap_pending(inner, e);
  }

  SrcP p_let_rhs(TermEnv& env, bool isrec,
                 const std::string& name,
                 const std::vector<std::pair<std::string, std::optional<RTypeP>>>& params,
                 Span sp) {
    TermEnv env2 = env;
    if (isrec) env2[name] = std::nullopt;
    for (const auto& [n, ty] : params) env2[n] = erasure_sort(ty);
    SrcP body = p_expr_boundary(env2);
    if (isrec) {
      if (params.empty()) fail("'let rec' requires at least one parameter");
      SrcP inner = body;
      for (size_t i = params.size(); i-- > 1;)
        inner = s_lam(params[i].first, params[i].second, inner, sp);
      if (params[0].second)
        fail("annotate recursive functions with an explicit fix type instead");
      return s_fix(name, std::nullopt, params[0].first, inner, sp);
    }
    SrcP rhs = body;
    for (auto it = params.rbegin(); it != params.rend(); ++it)
      rhs = s_lam(it->first, it->second, rhs, sp);
    return rhs;
  }

  SrcP p_pipe(TermEnv& env, Pending& pend) {
    SrcP a = p_cmp(env, pend);
    while (at_sym("|>")) {
      Span sp = peek().span;
      ++pos_;
      std::string av = to_var(a, pend);  // pipeline input evaluates first
      SrcP f = p_cmp(env, pend);
      a = s_app(f, av, sp);
    }
    return a;
  }

  // Left operand is hoisted before the right operand is parsed so the
  // emitted lets follow source order.
  template <typename ParseRhs>
  SrcP prim2(const std::string& prim, SrcP a, Span sp, Pending& pend, ParseRhs rhs) {
    std::string av = to_var(a, pend);
    std::string bv = to_var(rhs(), pend);
    return s_app(s_app(s_var(prim, sp), av, sp), bv, sp);
  }

  SrcP p_cmp(TermEnv& env, Pending& pend) {
    SrcP a = p_add(env, pend);
    Span sp = peek().span;
    auto rhs = [&] { return p_add(env, pend); };
    if (accept_sym("=")) return prim2("eqi", a, sp, pend, rhs);
    if (accept_sym("<=")) return prim2("lei", a, sp, pend, rhs);
    if (accept_sym("<")) return prim2("lti", a, sp, pend, rhs);
    return a;
  }
  SrcP p_add(TermEnv& env, Pending& pend) {
    SrcP a = p_mul(env, pend);
    for (;;) {
      Span sp = peek().span;
      auto rhs = [&] { return p_mul(env, pend); };
      if (accept_sym("+")) a = prim2("addi", a, sp, pend, rhs);
      else if (accept_sym("-")) a = prim2("subi", a, sp, pend, rhs);
      else return a;
    }
  }
  SrcP p_mul(TermEnv& env, Pending& pend) {
    SrcP a = p_unary(env, pend);
    for (;;) {
      Span sp = peek().span;
      auto rhs = [&] { return p_unary(env, pend); };
      if (accept_sym("*")) a = prim2("muli", a, sp, pend, rhs);
      else if (accept_sym("/")) a = prim2("divi", a, sp, pend, rhs);
      else return a;
    }
  }
  SrcP p_unary(TermEnv& env, Pending& pend) {
    if (at_sym("-")) {
      Span sp = peek().span;
      ++pos_;
      SrcP e = p_unary(env, pend);
      if (e->k == SourceTerm::K::Const && e->c.k == Constant::K::Int) return s_int(-e->c.i, sp);
      return prim2("subi", s_int(0, sp), sp, pend, [&] { return e; });
    }
    return p_app(env, pend);
  }

  bool at_atom_start() const {
    const Tok& t = peek();
    if (t.k == Tok::K::Int) return true;
    if (t.k == Tok::K::Ident) return !is_keyword(t.text);
    if (t.k == Tok::K::Sym) return t.text == "(" || t.text == "[" || t.text == "~";
    return false;
  }

  SrcP p_app(TermEnv& env, Pending& pend) {
    SrcP f = p_atom(env, pend);
    while (at_atom_start()) {
      Span sp = peek().span;
      SrcP arg = p_atom(env, pend);
      f = s_app(f, to_var(arg, pend), sp);
    }
    return f;
  }

  SrcP p_atom(TermEnv& env, Pending& pend) {
    const Tok& t = peek();
    Span sp = t.span;
    if (t.k == Tok::K::Int) {
      ++pos_;
      return s_int(t.ival, sp);
    }
    if (accept_ident("true")) return s_bool(true, sp);
    if (accept_ident("false")) return s_bool(false, sp);
    if (t.k == Tok::K::Ident && !is_keyword(t.text)) {
      ++pos_;
      std::string name = t.text;
      // OCaml-Torch tensor primitives live in a module; the prelude declares
      // them unqualified.
      if (name.rfind("Tensor.", 0) == 0) name = name.substr(7);
      return s_var(name, sp);
    }
    if (accept_sym("~")) {
      std::string label = expect_ident_tok().text;
      if (accept_sym(":")) return p_atom(env, pend);
      return s_var(label, sp);  // label punning: ~x means x
    }
    if (accept_sym("[")) {
      std::vector<SrcP> elems;
      if (!at_sym("]")) {
        for (;;) {
          elems.push_back(p_cmp(env, pend));
          if (!accept_sym(";")) break;
        }
      }
      expect_sym("]");
      bool all_lit = true;
      for (const auto& e : elems)
        if (e->k != SourceTerm::K::Const || e->c.k != Constant::K::Int) all_lit = false;
      if (all_lit) {
        std::vector<long long> xs;
        for (const auto& e : elems) xs.push_back(e->c.i);
        return s_intlist(std::move(xs), sp);
      }
      // Non-literal elements: build cons e0 (cons e1 ... []) with the
      // elements evaluated left to right.
      std::vector<std::string> names;
      for (const auto& e : elems) names.push_back(to_var(e, pend));
      SrcP acc = s_intlist({}, sp);
      for (size_t i = elems.size(); i-- > 0;) {
        SrcP node = s_app(s_app(s_var("cons", sp), names[i], sp), to_var(acc, pend), sp);
        acc = node;
      }
      return acc;
    }
    if (accept_sym("(")) {
      SrcP e = p_expr_boundary(env);
      if (accept_sym(":")) {
        SortEnv senv = term_to_sort_env(env);
        RTypeP ty = p_type(senv);
        expect_sym(")");
        return s_annot(e, ty, sp);
      }
      expect_sym(")");
      return e;
    }
    fail("expected an expression", {"<int>", "true", "false", "<identifier>", "[", "(", "~"});
  }

  // ==== programs ==============================================================

  Program p_program() {
    Program prog;
    bool have_main = false;
    while (peek().k != Tok::K::End) {
      Span sp = peek().span;
      if (at_ident("let")) {
        size_t save = pos_;
        int tsave = temp_counter_;
        ++pos_;
        bool isrec = accept_ident("rec");
        bool anon = false;
        std::string name;
        if (at_ident("_")) {
          ++pos_;
          anon = true;
          name = "_";
        } else if (peek().k == Tok::K::Ident && !is_keyword(peek().text)) {
          name = toks_[pos_++].text;
        } else {
          fail("expected a top-level binder", {"<identifier>", "_"});
        }
        std::vector<std::pair<std::string, std::optional<RTypeP>>> params;
        TermEnv env = top_env(prog);
        while (at_param_start()) params.push_back(p_param(env));
        expect_sym("=");
        if (at_ident("in") || peek().k == Tok::K::End)
          throw ParseError("parse/syntax", peek().span, "empty right-hand side in let binding");
        SrcP rhs = p_let_rhs(env, isrec, name, params, sp);
        if (accept_ident("in")) {
          // This "let" opens the main expression rather than a declaration.
          pos_ = save;
          temp_counter_ = tsave;
          TermEnv env2 = top_env(prog);
          prog.main = p_expr_boundary(env2);
          have_main = true;
          break;
        }
        if (anon) {
          if (isrec || !params.empty())
            throw ParseError("parse/syntax", sp, "anonymous binding takes no parameters");
          prog.main = rhs;
          have_main = true;
          if (peek().k != Tok::K::End)
            throw ParseError("parse/syntax", peek().span,
                             "the anonymous binding must be the final declaration");
          break;
        }
        for (const auto& l : prog.lets)
          if (l.name == name)
            throw ParseError("parse/dup", sp, "duplicate top-level name '" + name + "'");
        prog.lets.push_back(TopLet{name, rhs, sp});
      } else {
        TermEnv env = top_env(prog);
        prog.main = p_expr_boundary(env);
        have_main = true;
        break;
      }
    }
    expect_end();
    if (!have_main) prog.main = s_int(0);
    return prog;
  }

  TermEnv top_env(const Program& prog) {
    TermEnv env;
    for (const auto& l : prog.lets) env[l.name] = std::nullopt;
    return env;
  }

  // ==== stub files ============================================================

  std::vector<StubDecl> p_stubfile() {
    std::vector<StubDecl> out;
    while (peek().k != Tok::K::End) {
      Span sp = peek().span;
      expect_keyword("val");
      std::string name = expect_ident_tok().text;
      if (name.rfind("Tensor.", 0) == 0) name = name.substr(7);
      expect_sym(":");
      StubDecl d;
      d.name = std::move(name);
      d.span = sp;
      if (accept_ident("forall")) {
        for (;;) {
          std::string pn = expect_ident_tok().text;
          Sort ps = Sort::IntList;
          if (accept_sym(":")) ps = p_sort_name();
          if (ps == Sort::Bool) d.pred_params.push_back(pn);
          else if (ps == Sort::Int || ps == Sort::IntList) d.value_params.emplace_back(pn, ps);
          else fail("quantified parameters must be int, int list, or bool");
          accept_sym(",");
          if (accept_sym(".")) break;
          if (peek().k != Tok::K::Ident) fail("expected a quantified parameter or '.'");
        }
      }
      SortEnv env = d.param_env();
      d.ty = p_type(env);
      check_wf_type(env, d.ty, /*allow_pvars=*/false);
      out.push_back(std::move(d));
    }
    return out;
  }
};

// Convenience free functions mirroring the class entry points.
inline Program parse_program(const std::string& text) { return Parser::parse_program(text); }
inline std::vector<StubDecl> parse_stubs(const std::string& text) {
  return Parser::parse_stubs(text);
}
inline RTypeP parse_type(const std::string& text, const SortEnv& env = {}) {
  return Parser::parse_type(text, env);
}
inline PredP parse_pred(const std::string& text, const SortEnv& env = {}) {
  return Parser::parse_pred(text, env);
}

}  // namespace graten
