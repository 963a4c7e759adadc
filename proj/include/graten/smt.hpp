#pragma once

// SMT-LIB2 export of solver queries, for offline cross-checking with an
// external solver. Lists and tensors are encoded as a symbolic length plus a
// fixed number of element slots; out-of-range selections default to 0, and
// division is totalized, so the exported theory agrees with evaluation on
// defined points and over-approximates elsewhere.
//
// Shape-valued operations whose result length is not statically bounded in a
// useful way (reshape / broadcast / matmul as functions) and inference-internal
// predicate variables are not encodable and raise EncodingError; the
// broadcastable / reshapeable predicates are encoded in full.

#include <cctype>
#include <sstream>

#include "graten/logic.hpp"

namespace graten {

struct EncodingError : std::runtime_error {
  explicit EncodingError(const std::string& what) : std::runtime_error(what) {}
};

namespace smt_detail {

struct SymList {
  std::string len;
  std::vector<std::string> elems;  // exactly K entries
};

class Emitter {
 public:
  explicit Emitter(int elem_bound) : K(elem_bound) {}

  std::string emit(const SortEnv& prefix, const PredP& hyp, const PredP& goal,
                   bool validity_mode) {
    std::ostringstream out;
    out << "(set-logic ALL)\n";
    out << "; truncating division (rounds toward zero)\n";
    out << "(define-fun tdiv ((a Int) (b Int)) Int"
           " (ite (>= a 0) (div a b) (- (div (- a) b))))\n";
    for (const auto& [name, sort] : prefix) {
      switch (sort) {
        case Sort::Int:
          out << "(declare-const " << mangle(name) << " Int)\n";
          break;
        case Sort::Bool:
          out << "(declare-const " << mangle(name) << " Bool)\n";
          break;
        case Sort::IntList:
        case Sort::Tensor: {
          std::string base = mangle(name);
          out << "(declare-const " << base << "_len Int)\n";
          out << "(assert (and (<= 0 " << base << "_len) (<= " << base << "_len "
              << K << ")))\n";
          for (int i = 0; i < K; ++i)
            out << "(declare-const " << base << "_e" << i << " Int)\n";
          break;
        }
      }
    }
    if (validity_mode) {
      out << "; validity: unsat means the implication holds\n";
      out << "(assert " << epred(hyp) << ")\n";
      out << "(assert (not " << epred(goal) << "))\n";
    } else {
      out << "; satisfiability of the conjunction\n";
      out << "(assert " << epred(hyp) << ")\n";
    }
    out << "(check-sat)\n(get-model)\n";
    return out.str();
  }

 private:
  int K;

  static std::string mangle(const std::string& name) {
    std::string out = "v_";
    for (char c : name)
      out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_') ? c : '_';
    return out;
  }

  static std::string app(const std::string& op, const std::vector<std::string>& args) {
    std::string s = "(" + op;
    for (const auto& a : args) s += " " + a;
    return s + ")";
  }

  static std::string num(long long v) {
    if (v < 0) return "(- " + std::to_string(-v) + ")";
    return std::to_string(v);
  }

  std::string esz(const SizeP& s) {
    using K_ = Size::K;
    switch (s->k) {
      case K_::Lit: return num(s->lit);
      case K_::Var: return mangle(s->var);
      case K_::Neg: return app("-", {esz(s->a)});
      case K_::Add: return app("+", {esz(s->a), esz(s->b)});
      case K_::Mul: return app("*", {esz(s->a), esz(s->b)});
      case K_::Div: return app("tdiv", {esz(s->a), esz(s->b)});
      case K_::Head: return nth_expr(esh(s->sh), "0");
      case K_::Last: {
        SymList l = esh(s->sh);
        return nth_expr(l, app("-", {l.len, "1"}));
      }
      case K_::Len: return esh(s->sh).len;
      case K_::Prod: return prod_expr(esh(s->sh));
      case K_::Nth: return nth_expr(esh(s->sh), esz(s->a));
    }
    throw EncodingError("unhandled size construct");
  }

  SymList esh(const ShapeP& s) {
    using K_ = Shape::K;
    switch (s->k) {
      case K_::Lit: {
        if (static_cast<int>(s->elems.size()) > K)
          throw EncodingError("shape literal longer than the element bound");
        SymList out;
        out.len = std::to_string(s->elems.size());
        for (const auto& e : s->elems) out.elems.push_back(esz(e));
        out.elems.resize(K, "0");
        return out;
      }
      case K_::Var:
      case K_::ShapeOf: {
        std::string base = mangle(s->var);
        SymList out;
        out.len = base + "_len";
        for (int i = 0; i < K; ++i) out.elems.push_back(base + "_e" + std::to_string(i));
        return out;
      }
      case K_::Cons: {
        SymList t = esh(s->a);
        SymList out;
        out.len = app("+", {"1", t.len});
        out.elems.push_back(esz(s->s1));
        for (int i = 1; i < K; ++i) out.elems.push_back(t.elems[i - 1]);
        return out;
      }
      case K_::Append: {
        SymList a = esh(s->a), b = esh(s->b);
        SymList out;
        out.len = app("+", {a.len, b.len});
        for (int i = 0; i < K; ++i) {
          std::string idx = std::to_string(i);
          out.elems.push_back(app("ite", {app("<", {idx, a.len}), a.elems[i],
                                          nth_expr(b, app("-", {idx, a.len}))}));
        }
        return out;
      }
      case K_::Tail: {
        SymList a = esh(s->a);
        SymList out;
        out.len = app("-", {a.len, "1"});
        for (int i = 0; i < K; ++i)
          out.elems.push_back(i + 1 < K ? a.elems[i + 1] : std::string("0"));
        return out;
      }
      case K_::Init: {
        SymList a = esh(s->a);
        SymList out;
        out.len = app("-", {a.len, "1"});
        out.elems = a.elems;
        return out;
      }
      case K_::InsertAt: {
        SymList a = esh(s->a);
        std::string i = esz(s->s1), v = esz(s->s2);
        SymList out;
        out.len = app("+", {a.len, "1"});
        for (int j = 0; j < K; ++j) {
          std::string js = std::to_string(j);
          std::string before = a.elems[j];
          std::string after = j > 0 ? a.elems[j - 1] : std::string("0");
          out.elems.push_back(app(
              "ite", {app("<", {js, i}), before, app("ite", {app("=", {js, i}), v, after})}));
        }
        return out;
      }
      case K_::DropAt: {
        SymList a = esh(s->a);
        std::string i = esz(s->s1);
        SymList out;
        out.len = app("-", {a.len, "1"});
        for (int j = 0; j < K; ++j) {
          std::string js = std::to_string(j);
          std::string shifted = j + 1 < K ? a.elems[j + 1] : std::string("0");
          out.elems.push_back(app("ite", {app("<", {js, i}), a.elems[j], shifted}));
        }
        return out;
      }
      case K_::Swap: {
        SymList a = esh(s->a);
        std::string i = esz(s->s1), j = esz(s->s2);
        SymList out;
        out.len = a.len;
        for (int m = 0; m < K; ++m) {
          std::string ms = std::to_string(m);
          out.elems.push_back(
              app("ite", {app("=", {ms, i}), nth_expr(a, j),
                          app("ite", {app("=", {ms, j}), nth_expr(a, i), a.elems[m]})}));
        }
        return out;
      }
      case K_::Reshape: throw EncodingError("reshape is not encodable as a shape function");
      case K_::Broadcast: throw EncodingError("broadcast is not encodable as a shape function");
      case K_::Matmul: throw EncodingError("matmul is not encodable as a shape function");
    }
    throw EncodingError("unhandled shape construct");
  }

  std::string nth_expr(const SymList& l, const std::string& idx) {
    // right-fold ite chain; out-of-range selections default to 0
    std::string out = "0";
    for (int i = K - 1; i >= 0; --i)
      out = app("ite", {app("=", {idx, std::to_string(i)}), l.elems[i], out});
    return out;
  }

  std::string prod_expr(const SymList& l) {
    std::string out = "1";
    for (int i = K - 1; i >= 0; --i)
      out = app("ite", {app("<", {std::to_string(i), l.len}),
                        app("*", {l.elems[i], out}), out});
    // multiply elements at indices < len only: rebuilt as a guarded product
    // from the innermost slot outward
    return out;
  }

  // element i positions from the right end, missing dimensions read as 1
  std::string rev_elem(const SymList& l, int i) {
    std::string idx = app("-", {l.len, std::to_string(i + 1)});
    return app("ite", {app("<=", {std::to_string(i + 1), l.len}), nth_expr(l, idx), "1"});
  }

  std::string epred(const PredP& p) {
    using K_ = Pred::K;
    switch (p->k) {
      case K_::True: return "true";
      case K_::False: return "false";
      case K_::EqSz: return app("=", {esz(p->s1), esz(p->s2)});
      case K_::Lt: return app("<", {esz(p->s1), esz(p->s2)});
      case K_::Le: return app("<=", {esz(p->s1), esz(p->s2)});
      case K_::BVar: return mangle(p->var);
      case K_::Not: return app("not", {epred(p->p1)});
      case K_::And: return app("and", {epred(p->p1), epred(p->p2)});
      case K_::Or: return app("or", {epred(p->p1), epred(p->p2)});
      case K_::EqSh: {
        SymList a = esh(p->sh1), b = esh(p->sh2);
        std::vector<std::string> cs{app("=", {a.len, b.len})};
        for (int i = 0; i < K; ++i)
          cs.push_back(app("=>", {app("<", {std::to_string(i), a.len}),
                                  app("=", {a.elems[i], b.elems[i]})}));
        return app("and", cs);
      }
      case K_::Brc: {
        SymList a = esh(p->sh1), b = esh(p->sh2);
        std::string maxlen = app("ite", {app(">=", {a.len, b.len}), a.len, b.len});
        std::vector<std::string> cs;
        for (int i = 0; i < K; ++i) {
          std::string x = rev_elem(a, i), y = rev_elem(b, i);
          cs.push_back(app("=>", {app("<", {std::to_string(i), maxlen}),
                                  app("or", {app("=", {x, y}), app("=", {x, "1"}),
                                             app("=", {y, "1"})})}));
        }
        return cs.empty() ? "true" : app("and", cs);
      }
      case K_::Rsh: {
        SymList a = esh(p->sh1), b = esh(p->sh2);
        std::vector<std::string> nonneg1, nonneg2;
        for (int i = 0; i < K; ++i) {
          std::string is = std::to_string(i);
          nonneg1.push_back(
              app("=>", {app("<", {is, a.len}), app(">=", {a.elems[i], "0"})}));
          nonneg2.push_back(app(
              "=>", {app("<", {is, b.len}),
                     app("or", {app(">=", {b.elems[i], "0"}),
                                app("=", {b.elems[i], "(- 1)"})})}));
        }
        std::string p1 = prod_expr(a);
        std::string wilds = "0";
        std::string q = "1";
        for (int i = K - 1; i >= 0; --i) {
          std::string is = std::to_string(i);
          std::string inb = app("<", {is, b.len});
          std::string isw = app("and", {inb, app("=", {b.elems[i], "(- 1)"})});
          wilds = app("+", {app("ite", {isw, "1", "0"}), wilds});
          q = app("*", {app("ite", {app("and", {inb, app("not", {app("=", {b.elems[i],
                                                                           "(- 1)"})})}),
                              b.elems[i], "1"}),
                        q});
        }
        std::string exact = app("=", {p1, q});
        std::string onewild =
            app("and", {app("=", {wilds, "1"}), app(">", {q, "0"}),
                        app("=", {app("mod", {p1, q}), "0"})});
        std::vector<std::string> all = nonneg1;
        all.insert(all.end(), nonneg2.begin(), nonneg2.end());
        all.push_back(app("ite", {app("=", {wilds, "0"}), exact, onewild}));
        return app("and", all);
      }
      case K_::PVar:
        throw EncodingError("predicate variables are inference-internal and not encodable");
    }
    throw EncodingError("unhandled predicate construct");
  }
};

}  // namespace smt_detail

inline std::string emit_smtlib2(const SortEnv& prefix, const PredP& hyp, const PredP& goal,
                                bool validity_mode, int elem_bound = 8) {
  smt_detail::Emitter e(elem_bound);
  return e.emit(prefix, hyp, goal, validity_mode);
}

inline std::string emit_smtlib2(const LoggedQuery& q, int elem_bound = 8) {
  return emit_smtlib2(q.prefix, q.hyp, q.goal, q.validity_mode, elem_bound);
}

}  // namespace graten
