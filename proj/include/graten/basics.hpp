#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace graten {

// Half-open byte/character positions, 1-based lines and columns.
struct Span {
  int line = 0;
  int col = 0;
  int end_line = 0;
  int end_col = 0;

  bool known() const { return line > 0; }
  std::string str() const {
    if (!known()) return "<builtin>";
    std::ostringstream os;
    os << line << ":" << col;
    return os.str();
  }
};

// Deterministic fresh-name supply. One instance per pipeline run so that
// emitted programs and reports are reproducible byte for byte.
class NameSupply {
 public:
  // Reserved prefixes: "_t" (ANF temporaries), "_c" (cast binders),
  // "_S" (shape parameters), "_p"/"_q" (predicate variables' print names).
  std::string fresh(const std::string& prefix) { return prefix + std::to_string(counter_++); }
  int fresh_id() { return counter_++; }

 private:
  int counter_ = 0;
};

// FNV-1a, used for memo keys and query file names.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* d = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = d[v & 0xf];
    v >>= 4;
  }
  return out;
}

struct Diagnostic {
  std::string severity;  // "error" | "warning" | "note"
  std::string code;      // stable diagnostic code, see docs/diagnostics.md
  Span span;
  std::string message;
};

// Raised for malformed input programs: lexing, parsing, scoping, sort errors.
struct ParseError : std::runtime_error {
  Span span;
  std::string code;
  ParseError(std::string code_, Span s, const std::string& msg)
      : std::runtime_error(msg), span(s), code(std::move(code_)) {}
};

// Raised when an internal invariant is broken; never expected on any input.
struct InternalError : std::logic_error {
  explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace graten
