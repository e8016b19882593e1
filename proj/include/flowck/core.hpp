#ifndef FLOWCK_CORE_HPP
#define FLOWCK_CORE_HPP

// Abstract syntax of the flow-checked core language: places, access
// expressions, types, expressions, and the leaf decomposition that all
// dependency tracking is built on.

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace flowck {

struct SourceSpan {
  uint32_t file_id = 0;
  uint32_t start = 0;
  uint32_t end = 0;
  uint32_t line = 0;
  uint32_t column = 0;

  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
  friend auto operator<=>(const SourceSpan&, const SourceSpan&) = default;
};

/// A field selector. Numeric projections are stored as their decimal text
/// ("0", "1"), named fields as the name, method-like selectors with a
/// trailing "()".
using Selector = std::string;
using Path = std::vector<Selector>;

bool is_prefix(const Path& prefix, const Path& path);

/// A dereference-free location: a variable and a path into it.
struct Place {
  std::string root;
  Path path;

  Place() = default;
  explicit Place(std::string r, Path p = {}) : root(std::move(r)), path(std::move(p)) {}

  Place child(const Selector& s) const;
  Place extended(const Path& suffix) const;
  bool is_prefix_of(const Place& other) const;
  bool overlaps(const Place& other) const;
  std::string str() const;

  friend bool operator==(const Place&, const Place&) = default;
  friend auto operator<=>(const Place&, const Place&) = default;
};

using PlaceSet = std::set<Place>;

/// Internal variable names carry a "#n" suffix when a binding shadows an
/// earlier one of the same name. This strips it for display.
std::string display_name(const std::string& internal);

struct PlaceOp {
  enum class Kind { Deref, Project };
  Kind kind = Kind::Project;
  Selector field;

  friend bool operator==(const PlaceOp&, const PlaceOp&) = default;
  friend auto operator<=>(const PlaceOp&, const PlaceOp&) = default;
};

/// x | *p | p.f. Ops are applied left to right after the root.
struct PlaceExpr {
  std::string root;
  std::vector<PlaceOp> ops;

  bool has_deref() const;
  /// Only meaningful when !has_deref().
  Place as_place() const;
  static PlaceExpr from_place(const Place& p);
  size_t projection_count() const;
  std::string str() const;

  friend bool operator==(const PlaceExpr&, const PlaceExpr&) = default;
  friend auto operator<=>(const PlaceExpr&, const PlaceExpr&) = default;
};

/// Operand of a flow rule: `*`, a place expression, `fn f`, or the `fn io!()`
/// alias (expanded by the checker).
struct AccessExpr {
  enum class Kind { Wildcard, Place, Fn, FnAlias };
  Kind kind = Kind::Wildcard;
  PlaceExpr place;
  std::string name;

  static AccessExpr wildcard() { return {}; }
  static AccessExpr of_place(PlaceExpr p) { return {Kind::Place, std::move(p), {}}; }
  static AccessExpr of_place(const Place& p) { return of_place(PlaceExpr::from_place(p)); }
  static AccessExpr of_fn(std::string f) { return {Kind::Fn, {}, std::move(f)}; }
  static AccessExpr of_alias(std::string a) { return {Kind::FnAlias, {}, std::move(a)}; }

  bool is_wildcard() const { return kind == Kind::Wildcard; }
  bool is_place() const { return kind == Kind::Place; }
  bool is_fn() const { return kind == Kind::Fn; }
  std::string str() const;

  friend bool operator==(const AccessExpr&, const AccessExpr&) = default;
  friend auto operator<=>(const AccessExpr&, const AccessExpr&) = default;
};

/// Specificity of an access expression. `*` is 0, below every place
/// (which is at least 1). `fn f` ranks like a root-only place.
int specificity(const AccessExpr& a);

/// `source ->! dest` (permit = false) or `source -> dest` (permit = true).
struct FlowRule {
  AccessExpr source;
  AccessExpr dest;
  bool permit = false;
  SourceSpan span;

  std::string str() const;
  /// Structural equality ignoring spans.
  bool same_as(const FlowRule& o) const {
    return source == o.source && dest == o.dest && permit == o.permit;
  }
};

enum class Ownership { Shrd, Uniq };

enum class TypeKind { Unit, U32, Bool, Tuple, Struct, Sum, Ref, Closure };

struct Type {
  TypeKind kind = TypeKind::Unit;
  // Tuple components, the two sum payloads, the referent of a reference,
  // or the parameter types of a closure.
  std::vector<Type> elems;
  std::string name;  // struct name
  Ownership own = Ownership::Shrd;
  int closure_id = -1;

  static Type unit() { return {}; }
  static Type u32() { return {TypeKind::U32, {}, {}, Ownership::Shrd, -1}; }
  static Type boolean() { return {TypeKind::Bool, {}, {}, Ownership::Shrd, -1}; }
  static Type tuple(std::vector<Type> elems) {
    return {TypeKind::Tuple, std::move(elems), {}, Ownership::Shrd, -1};
  }
  static Type structure(std::string name) {
    return {TypeKind::Struct, {}, std::move(name), Ownership::Shrd, -1};
  }
  static Type sum(Type left, Type right) {
    return {TypeKind::Sum, {std::move(left), std::move(right)}, {}, Ownership::Shrd, -1};
  }
  static Type ref(Ownership own, Type referent) {
    return {TypeKind::Ref, {std::move(referent)}, {}, own, -1};
  }
  static Type closure(int id, std::vector<Type> params) {
    return {TypeKind::Closure, std::move(params), {}, Ownership::Shrd, id};
  }

  bool is_ref() const { return kind == TypeKind::Ref; }
  const Type& referent() const { return elems.at(0); }
  std::string str() const;

  friend bool operator==(const Type&, const Type&) = default;
};

struct FieldDef {
  std::string name;
  Type type;
};

struct StructDef {
  std::string name;
  std::vector<FieldDef> fields;
  SourceSpan span;
};

class StructTable {
 public:
  void add(StructDef def);
  const StructDef* find(const std::string& name) const;
  bool empty() const { return defs_.empty(); }
  const std::map<std::string, StructDef>& all() const { return defs_; }

 private:
  std::map<std::string, StructDef> defs_;
};

/// Type of the component selected by `sel`, if the type has one.
std::optional<Type> project_type(const Type& t, const Selector& sel, const StructTable& structs);

/// Base types, shared references, and tuples/sums of copyable types.
bool copyable(const Type& t, const StructTable& structs);

struct Leaf {
  Path context;  // position of the leaf relative to the decomposed place
  Place place;
  Type type;
};

/// Decomposes `p : t` into its leaves. Base types, references, sums,
/// closures, and recursive struct occurrences are leaves; tuples and
/// structs recurse. Never empty.
std::vector<Leaf> leaves(const Place& p, const Type& t, const StructTable& structs);

/// Leaf contexts only.
std::vector<Path> leaf_paths(const Type& t, const StructTable& structs);

// ---------------------------------------------------------------------------
// Expressions

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class UseMode { Auto, Move, Copy };

struct Param {
  std::string name;
  Type type;
  SourceSpan span;
};

struct ConstExpr {
  enum class Kind { Unit, Int, Bool };
  Kind kind = Kind::Unit;
  uint32_t value = 0;
  bool synthetic = false;  // implicit unit at the end of a block
};

struct UseExpr {
  UseMode mode = UseMode::Auto;
  PlaceExpr place;
};

struct TupleExpr {
  std::vector<ExprPtr> elems;
};

struct StructExpr {
  std::string name;
  std::vector<std::pair<std::string, ExprPtr>> fields;
};

struct VariantExpr {
  Type sum;
  bool right = false;
  ExprPtr payload;
};

struct BorrowExpr {
  Ownership own = Ownership::Shrd;
  PlaceExpr place;
};

struct LetExpr {
  std::string name;
  std::optional<Type> annot;
  std::vector<FlowRule> with_rules;
  ExprPtr init;
  ExprPtr body;
};

struct AssignExpr {
  PlaceExpr target;
  ExprPtr value;
};

struct IfExpr {
  ExprPtr guard;
  ExprPtr then_branch;
  ExprPtr else_branch;
  bool has_else = true;
};

struct SeqExpr {
  ExprPtr first;
  ExprPtr second;
};

struct BlockExpr {
  ExprPtr body;
};

struct FlowDeclExpr {
  FlowRule rule;
};

struct AllowExpr {
  ExprPtr inner;
};

struct CallExpr {
  std::string callee;
  std::vector<ExprPtr> args;
};

struct ClosureExpr {
  std::vector<Param> params;
  ExprPtr body;
};

struct Expr {
  using Node = std::variant<ConstExpr, UseExpr, TupleExpr, StructExpr, VariantExpr, BorrowExpr,
                            LetExpr, AssignExpr, IfExpr, SeqExpr, BlockExpr, FlowDeclExpr,
                            AllowExpr, CallExpr, ClosureExpr>;
  Node node;
  SourceSpan span;

  template <class T>
  const T* as() const {
    return std::get_if<T>(&node);
  }
};

template <class T>
ExprPtr make_expr(T node, SourceSpan span = {}) {
  return std::make_shared<const Expr>(Expr{Expr::Node(std::move(node)), span});
}

/// Structural AST equality, ignoring spans and synthetic markers.
bool same_expr(const Expr& a, const Expr& b);

struct FuncDef {
  std::string name;
  std::vector<Param> params;
  std::vector<FlowRule> contract;  // leading `flow` statements
  ExprPtr body;                    // null for primitives
  bool primitive = false;
  bool io = false;
  SourceSpan span;

  bool is_ref_param(size_t i) const { return params.at(i).type.is_ref(); }
};

struct Program {
  std::string file;
  StructTable structs;
  std::vector<FuncDef> functions;
  std::string entry;

  const FuncDef* find_function(const std::string& name) const;
  /// Names of all io-effect primitives, in declaration order.
  std::vector<std::string> io_functions() const;
};

}  // namespace flowck

#endif  // FLOWCK_CORE_HPP
