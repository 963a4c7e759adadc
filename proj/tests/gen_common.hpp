#pragma once

// Deterministic random generator for predicate syntax, shared by test
// binaries. Generates terms over a fixed scope: i, j : int; b : bool;
// L : int list; t, u : tensor. Partial operations are included on purpose so
// error propagation gets exercised.

#include <random>

#include "graten/pred.hpp"
#include "graten/types.hpp"

namespace testgen {

using namespace graten;

inline SortEnv scope() {
  return SortEnv{{"i", Sort::Int}, {"j", Sort::Int}, {"b", Sort::Bool},
                 {"L", Sort::IntList}, {"t", Sort::Tensor}, {"u", Sort::Tensor}};
}

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  int pick(int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }

  SizeP size(int depth) {
    if (depth <= 0) {
      switch (pick(4)) {
        case 0: return sz_lit(pick(6) - 2);
        case 1: return sz_var("i");
        case 2: return sz_var("j");
        default: return sz_lit(pick(3));
      }
    }
    switch (pick(10)) {
      case 0: return sz_neg(size(depth - 1));
      case 1: return sz_add(size(depth - 1), size(depth - 1));
      case 2: return sz_mul(size(depth - 1), size(depth - 1));
      case 3: return sz_div(size(depth - 1), size(depth - 1));
      case 4: return sz_head(shape(depth - 1));
      case 5: return sz_last(shape(depth - 1));
      case 6: return sz_len(shape(depth - 1));
      case 7: return sz_prod(shape(depth - 1));
      case 8: return sz_nth(size(depth - 1), shape(depth - 1));
      default: return size(0);
    }
  }

  ShapeP shape(int depth) {
    if (depth <= 0) {
      switch (pick(4)) {
        case 0: return sh_var("L");
        case 1: return sh_shape_of("t");
        case 2: return sh_shape_of("u");
        default: {
          std::vector<SizeP> es;
          int n = pick(3);
          for (int k = 0; k < n; ++k) es.push_back(sz_lit(pick(4)));
          return sh_lit(std::move(es));
        }
      }
    }
    switch (pick(12)) {
      case 0: return sh_cons(size(depth - 1), shape(depth - 1));
      case 1: return sh_append(shape(depth - 1), shape(depth - 1));
      case 2: return sh_tail(shape(depth - 1));
      case 3: return sh_init(shape(depth - 1));
      case 4: return sh_insert_at(size(depth - 1), size(depth - 1), shape(depth - 1));
      case 5: return sh_drop_at(size(depth - 1), shape(depth - 1));
      case 6: return sh_swap(size(depth - 1), size(depth - 1), shape(depth - 1));
      case 7: return sh_reshape(shape(depth - 1), shape(depth - 1));
      case 8: return sh_broadcast(shape(depth - 1), shape(depth - 1));
      case 9: return sh_matmul(shape(depth - 1), shape(depth - 1));
      default: {
        std::vector<SizeP> es;
        int n = pick(3);
        for (int k = 0; k < n; ++k) es.push_back(size(depth - 1));
        return sh_lit(std::move(es));
      }
    }
  }

  PredP pred(int depth) {
    if (depth <= 0) {
      switch (pick(5)) {
        case 0: return pr_true();
        case 1: return pr_false();
        case 2: return pr_bvar("b");
        case 3: return pr_eq_sz(size(0), size(0));
        default: return pr_eq_sh(shape(0), shape(0));
      }
    }
    switch (pick(10)) {
      case 0: return pr_eq_sz(size(depth - 1), size(depth - 1));
      case 1: return pr_eq_sh(shape(depth - 1), shape(depth - 1));
      case 2: return pr_lt(size(depth - 1), size(depth - 1));
      case 3: return pr_le(size(depth - 1), size(depth - 1));
      case 4: return pr_not(pred(depth - 1));
      case 5: return pr_and(pred(depth - 1), pred(depth - 1));
      case 6: return pr_or(pred(depth - 1), pred(depth - 1));
      case 7: return pr_brc(shape(depth - 1), shape(depth - 1));
      case 8: return pr_rsh(shape(depth - 1), shape(depth - 1));
      default: return pred(0);
    }
  }

  // A generator variant producing shallow predicates without partial
  // operations, used where total formulas are needed.
  SizeP total_size(int depth) {
    if (depth <= 0) {
      switch (pick(3)) {
        case 0: return sz_lit(pick(6) - 2);
        case 1: return sz_var("i");
        default: return sz_var("j");
      }
    }
    switch (pick(4)) {
      case 0: return sz_neg(total_size(depth - 1));
      case 1: return sz_add(total_size(depth - 1), total_size(depth - 1));
      case 2: return sz_mul(total_size(depth - 1), total_size(depth - 1));
      default: return sz_len(total_shape());
    }
  }

  ShapeP total_shape() {
    switch (pick(4)) {
      case 0: return sh_var("L");
      case 1: return sh_shape_of("t");
      case 2: return sh_shape_of("u");
      default: {
        std::vector<SizeP> es;
        int n = pick(3);
        for (int k = 0; k < n; ++k) es.push_back(sz_lit(pick(4)));
        return sh_lit(std::move(es));
      }
    }
  }

  PredP total_pred(int depth) {
    if (depth <= 0) {
      switch (pick(4)) {
        case 0: return pr_bvar("b");
        case 1: return pr_eq_sz(total_size(1), total_size(1));
        case 2: return pr_eq_sh(total_shape(), total_shape());
        default: return pr_le(total_size(1), total_size(1));
      }
    }
    switch (pick(6)) {
      case 0: return pr_not(total_pred(depth - 1));
      case 1: return pr_and(total_pred(depth - 1), total_pred(depth - 1));
      case 2: return pr_or(total_pred(depth - 1), total_pred(depth - 1));
      case 3: return pr_brc(total_shape(), total_shape());
      case 4: return pr_lt(total_size(1), total_size(1));
      default: return total_pred(0);
    }
  }
};

}  // namespace testgen
