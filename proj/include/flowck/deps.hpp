#ifndef FLOWCK_DEPS_HPP
#define FLOWCK_DEPS_HPP

// Dependency trees and the dependency environment.

#include <map>
#include <stdexcept>

#include "flowck/core.hpp"

namespace flowck {

/// Thrown when two trees that should share a type's shape do not. Always a
/// checker bug, never a user error.
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A value's dependencies, one set of leaf places per leaf of its type,
/// addressed by the leaf's context path.
class DeltaTree {
 public:
  DeltaTree() = default;

  /// All leaves of `t`, each empty.
  static DeltaTree empty(const Type& t, const StructTable& structs);
  /// A single-leaf tree (root context).
  static DeltaTree single(PlaceSet deps);

  const PlaceSet& at(const Path& context) const;
  PlaceSet& at(const Path& context);
  bool has(const Path& context) const { return leaves_.count(context) != 0; }
  const std::map<Path, PlaceSet>& leaves() const { return leaves_; }
  std::map<Path, PlaceSet>& leaves() { return leaves_; }

  /// Nests `child` under selector `sel`.
  void graft(const Selector& sel, const DeltaTree& child);
  /// Adds `extra` to every leaf.
  void add_all(const PlaceSet& extra);
  /// Collapses to a single leaf holding the union of every leaf.
  DeltaTree collapsed() const;
  /// The subtree at `prefix`, with contexts made relative to it.
  DeltaTree subtree(const Path& prefix) const;

  friend bool operator==(const DeltaTree&, const DeltaTree&) = default;

 private:
  std::map<Path, PlaceSet> leaves_;
};

/// Π: leaf place -> dependency set. Absent keys read as empty.
class DepEnv {
 public:
  const PlaceSet& get(const Place& leaf) const;
  void set(const Place& leaf, PlaceSet deps) { map_[leaf] = std::move(deps); }
  void add(const Place& leaf, const PlaceSet& deps);
  const std::map<Place, PlaceSet>& entries() const { return map_; }
  /// Leaf-wise union.
  void join(const DepEnv& other);

  friend bool operator==(const DepEnv&, const DepEnv&) = default;

 private:
  std::map<Place, PlaceSet> map_;
};

/// Ξ: leaf places the current control path depends on.
using BranchDeps = PlaceSet;

/// Each leaf c of `p : t` maps to {c[p]} ∪ Π(c[p]).
DeltaTree delta_place(const Place& p, const Type& t, const DepEnv& env,
                      const StructTable& structs);

/// Leaf-wise union of two trees of type `t`, plus `extra` on every leaf.
DeltaTree delta_merge(const DeltaTree& a, const DeltaTree& b, const PlaceSet& extra,
                      const Type& t, const StructTable& structs);

/// Strong update: each leaf c of `p : t` becomes δ[c] ∪ extra.
void assign_deps(DepEnv& env, const Place& p, const Type& t, const DeltaTree& delta,
                 const PlaceSet& extra, const StructTable& structs);

/// Union of every leaf set.
PlaceSet delta_leaves(const DeltaTree& delta);

DeltaTree delta_empty(const Type& t, const StructTable& structs);

}  // namespace flowck

#endif  // FLOWCK_DEPS_HPP
