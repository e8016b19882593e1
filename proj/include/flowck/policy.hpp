#ifndef FLOWCK_POLICY_HPP
#define FLOWCK_POLICY_HPP

// Flow-policy storage and resolution.
//
// A PolicyEnv is a stack of lexical scopes of flow rules. Resolution picks,
// among the rules that apply to a (source, destination) pair, the ones that
// are maximally specific; if any of those denies, the flow is denied.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowck/core.hpp"

namespace flowck {

/// a1 covers a2: `*` covers every place (not function destinations); a
/// place covers its syntactic extensions; `fn f` covers only itself.
bool covers(const AccessExpr& a1, const AccessExpr& a2);

class ContradictionError : public std::runtime_error {
 public:
  ContradictionError(FlowRule existing, FlowRule incoming);
  const FlowRule& existing() const { return existing_; }
  const FlowRule& incoming() const { return incoming_; }

 private:
  FlowRule existing_;
  FlowRule incoming_;
};

class PolicyEnv {
 public:
  PolicyEnv() : scopes_(1) {}

  void push_scope() { scopes_.emplace_back(); }
  void pop_scope();
  size_t depth() const { return scopes_.size(); }

  /// Appends to the innermost scope. Throws ContradictionError if that scope
  /// already holds the same (source, dest) with the opposite permission.
  /// A `*` source is rejected with std::invalid_argument.
  void declare(FlowRule rule);

  const std::vector<std::vector<FlowRule>>& scopes() const { return scopes_; }
  /// Outer scopes first, declaration order within a scope.
  std::vector<FlowRule> flattened() const;
  bool empty() const;

 private:
  std::vector<std::vector<FlowRule>> scopes_;
};

/// Result of resolution. `rule` is empty for the default `(*, *, allow)`.
struct Permission {
  AccessExpr source;
  AccessExpr dest;
  bool permit = true;
  std::optional<FlowRule> rule;
};

Permission get_min_perms(const Place& src, const AccessExpr& dst, const PolicyEnv& env);

struct FlowWitness {
  Place source;
  AccessExpr dest;
  Permission governing;
};

struct AllowResult {
  bool allowed = true;
  std::optional<FlowWitness> witness;  // first violating pair
  explicit operator bool() const { return allowed; }
};

AllowResult is_allowed(const PlaceSet& sources, const std::vector<AccessExpr>& dests,
                       const PolicyEnv& env);

/// Formal root name -> caller places it stands for. An empty list (or a
/// missing entry) drops every rule that mentions the formal.
using Substitution = std::map<std::string, std::vector<Place>>;

/// Rewrites contract rules into caller terms. A leading dereference of a
/// reference formal is absorbed: both `out` and `*out` name the referent.
std::vector<FlowRule> substitute(const std::vector<FlowRule>& contract, const Substitution& subst);

/// One leaf of data handed to a callee: its formal-side place and the
/// caller-side dependencies it carries.
struct ArgLeaf {
  Place formal;
  PlaceSet sources;
};

/// One leaf reachable through a uniq-ref argument.
struct OutLeaf {
  Place formal;
  Place actual;
};

struct CallViolation {
  Place source;
  Place dest;
  Permission caller;                  // the caller's denying resolution
  std::optional<FlowRule> callee_rule;  // the contract rule that permits it, in caller terms
};

struct CallCheck {
  std::vector<CallViolation> violations;
  /// Actual out leaf -> caller sources the callee may write into it.
  std::map<Place, PlaceSet> reaching;
  bool ok() const { return violations.empty(); }
};

/// Checks that every flow the callee contract permits into a uniq-ref
/// argument is also permitted by the caller. Contract rules are resolved in
/// the callee's formal space; `subst` renders them in caller terms for
/// witnesses.
CallCheck caller_implies(const PolicyEnv& caller, const PolicyEnv& callee_contract,
                         const std::vector<ArgLeaf>& args, const std::vector<OutLeaf>& outs,
                         const Substitution& subst);

}  // namespace flowck

#endif  // FLOWCK_POLICY_HPP
