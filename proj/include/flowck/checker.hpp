#ifndef FLOWCK_CHECKER_HPP
#define FLOWCK_CHECKER_HPP

// The flow checker: types every function body while threading the stack
// environment, the dependency environment Π, the policy environment Ψ, and
// the branch dependencies Ξ, and reports every flow the policy denies.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowck/core.hpp"
#include "flowck/deps.hpp"
#include "flowck/diagnostic.hpp"

namespace flowck {

struct CheckOptions {
  /// Functions `fn io!()` expands to. Defaults to the program's io primitives.
  std::optional<std::vector<std::string>> io_alias;
  /// Record Ψ and Π for --dump-policy / --dump-deps.
  bool record_dumps = false;
};

struct CheckReport {
  std::vector<Diagnostic> diagnostics;  // sorted
  std::vector<FunctionDump> dumps;      // in function order
};

/// Checks function bodies in parallel (OpenMP). Output is identical to the
/// serial path.
CheckReport check_program_report(const Program& prog, const CheckOptions& opts = {});
CheckReport check_program_report_serial(const Program& prog, const CheckOptions& opts = {});

/// Empty iff the program is flow-safe.
std::vector<Diagnostic> check_program(const Program& prog, const CheckOptions& opts = {});
std::vector<Diagnostic> check_program_serial(const Program& prog, const CheckOptions& opts = {});

struct Loan {
  Ownership own = Ownership::Shrd;
  Place place;
  friend bool operator==(const Loan&, const Loan&) = default;
  friend auto operator<=>(const Loan&, const Loan&) = default;
};

using LoanSet = std::set<Loan>;

/// Γ. Source names map to internal names (unique per function, so shadowed
/// bindings keep separate places); internal names map to types. Reference
/// leaves record the places they may point to.
struct StackEnv {
  std::vector<std::map<std::string, std::string>> scopes;
  std::map<std::string, Type> types;
  /// Internal names whose references have unknown (caller-side) referents.
  /// Their referents are materialized as `*name` places on first use.
  std::set<std::string> params;
  std::set<Place> moved;
  std::map<Place, std::set<Place>> origins;

  std::optional<std::string> lookup(const std::string& name) const;
  void bind(const std::string& name, const std::string& internal, Type t);
  std::optional<Type> type_of(const Place& p, const StructTable& structs) const;
  /// Every moved place overlapping `p`.
  std::optional<Place> moved_overlap(const Place& p) const;
  /// Referents of a reference leaf; creates the parameter referent if `leaf`
  /// is rooted at a parameter or another parameter referent.
  std::optional<std::set<Place>> referents(const Place& leaf, const Type& ref_type);
};

struct LoanResolution {
  LoanSet loans;
  Type type;
  /// Reference leaves dereferenced on the way, with their dependencies.
  PlaceSet pointer_deps;
  bool through_shrd = false;
  std::string error;  // empty on success
  std::string error_kind;  // unknown-variable, unknown-origin, or type-mismatch
  bool ok() const { return error.empty(); }
};

/// Resolves a place expression to the concrete places it may alias. Field
/// selection through a reference dereferences implicitly.
LoanResolution resolve_loans(StackEnv& gamma, const DepEnv& pi, const PlaceExpr& p, Ownership own,
                             const StructTable& structs);

}  // namespace flowck

#endif  // FLOWCK_CHECKER_HPP
