#ifndef FLOWCK_DIAGNOSTIC_HPP
#define FLOWCK_DIAGNOSTIC_HPP

#include <optional>
#include <string>
#include <vector>

#include "flowck/core.hpp"
#include "flowck/deps.hpp"
#include "flowck/policy.hpp"

namespace flowck {

enum class Severity { Violation, Error, Warning, Internal };

std::string to_string(Severity s);
std::optional<Severity> severity_from_string(const std::string& s);

/// A flow rule as cited by a diagnostic.
struct RuleRef {
  std::string text;
  bool permit = false;
  SourceSpan span;

  static RuleRef of(const FlowRule& r) { return RuleRef{r.str(), r.permit, r.span}; }
  friend bool operator==(const RuleRef&, const RuleRef&) = default;
};

/// Diagnostic kinds. Violations: flow-violation, fn-flow, call-flow,
/// capture-flow. Errors: everything else.
struct Diagnostic {
  std::string file;
  Severity severity = Severity::Error;
  std::string kind;
  SourceSpan span;
  std::string source;       // offending source leaf, if any
  std::string destination;  // destination leaf or `fn f`, if any
  std::optional<RuleRef> rule;         // governing rule
  std::optional<RuleRef> callee_rule;  // contract rule that permitted the flow, for calls
  std::string message;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

/// Total order used for output: file, span start, kind, then the rest.
bool diagnostic_less(const Diagnostic& a, const Diagnostic& b);
void sort_diagnostics(std::vector<Diagnostic>& diags);

inline constexpr int kSchemaVersion = 1;

/// One JSON array, each object tagged with "schema": 1.
std::string diagnostics_to_json(const std::vector<Diagnostic>& diags, int indent = 2);
/// Inverse of diagnostics_to_json; throws std::runtime_error on malformed input.
std::vector<Diagnostic> diagnostics_from_json(const std::string& text);

struct FunctionDump {
  std::string file;
  std::string function;
  /// Every rule declared while checking, with the scope depth it entered at.
  std::vector<std::pair<size_t, FlowRule>> policy;
  DepEnv deps;  // Π at the end of the body
};

std::string policy_dump_json(const std::vector<FunctionDump>& dumps);
std::string deps_dump_json(const std::vector<FunctionDump>& dumps);

}  // namespace flowck

#endif  // FLOWCK_DIAGNOSTIC_HPP
