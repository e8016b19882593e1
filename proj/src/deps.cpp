#include "flowck/deps.hpp"

namespace flowck {

namespace {

const PlaceSet kEmpty;

std::string path_str(const Path& p) {
  std::string out = "<root>";
  for (const auto& s : p) out += "." + s;
  return out;
}

void check_shape(const DeltaTree& d, const std::vector<Path>& paths, const char* what) {
  if (d.leaves().size() != paths.size()) {
    throw ShapeError(std::string(what) + ": tree has " + std::to_string(d.leaves().size()) +
                     " leaves, type has " + std::to_string(paths.size()));
  }
  for (const auto& p : paths) {
    if (!d.has(p)) throw ShapeError(std::string(what) + ": missing leaf " + path_str(p));
  }
}

}  // namespace

DeltaTree DeltaTree::empty(const Type& t, const StructTable& structs) {
  DeltaTree d;
  for (auto& p : leaf_paths(t, structs)) d.leaves_.emplace(std::move(p), PlaceSet{});
  return d;
}

DeltaTree DeltaTree::single(PlaceSet deps) {
  DeltaTree d;
  d.leaves_.emplace(Path{}, std::move(deps));
  return d;
}

const PlaceSet& DeltaTree::at(const Path& context) const {
  auto it = leaves_.find(context);
  if (it == leaves_.end()) throw ShapeError("no delta leaf at " + path_str(context));
  return it->second;
}

PlaceSet& DeltaTree::at(const Path& context) {
  auto it = leaves_.find(context);
  if (it == leaves_.end()) throw ShapeError("no delta leaf at " + path_str(context));
  return it->second;
}

void DeltaTree::graft(const Selector& sel, const DeltaTree& child) {
  for (const auto& [ctx, deps] : child.leaves_) {
    Path p{sel};
    p.insert(p.end(), ctx.begin(), ctx.end());
    leaves_[std::move(p)] = deps;
  }
}

void DeltaTree::add_all(const PlaceSet& extra) {
  if (extra.empty()) return;
  for (auto& [ctx, deps] : leaves_) deps.insert(extra.begin(), extra.end());
}

DeltaTree DeltaTree::collapsed() const { return single(delta_leaves(*this)); }

DeltaTree DeltaTree::subtree(const Path& prefix) const {
  DeltaTree d;
  for (const auto& [ctx, deps] : leaves_) {
    if (is_prefix(prefix, ctx)) d.leaves_.emplace(Path(ctx.begin() + prefix.size(), ctx.end()), deps);
  }
  return d;
}

const PlaceSet& DepEnv::get(const Place& leaf) const {
  auto it = map_.find(leaf);
  return it == map_.end() ? kEmpty : it->second;
}

void DepEnv::add(const Place& leaf, const PlaceSet& deps) {
  if (deps.empty()) return;
  map_[leaf].insert(deps.begin(), deps.end());
}

void DepEnv::join(const DepEnv& other) {
  for (const auto& [leaf, deps] : other.map_) map_[leaf].insert(deps.begin(), deps.end());
}

DeltaTree delta_place(const Place& p, const Type& t, const DepEnv& env,
                      const StructTable& structs) {
  DeltaTree d;
  for (const auto& leaf : leaves(p, t, structs)) {
    PlaceSet deps = env.get(leaf.place);
    deps.insert(leaf.place);
    d.leaves().emplace(leaf.context, std::move(deps));
  }
  return d;
}

DeltaTree delta_merge(const DeltaTree& a, const DeltaTree& b, const PlaceSet& extra,
                      const Type& t, const StructTable& structs) {
  auto paths = leaf_paths(t, structs);
  check_shape(a, paths, "delta_merge(lhs)");
  check_shape(b, paths, "delta_merge(rhs)");
  DeltaTree out = a;
  for (const auto& p : paths) {
    const auto& rhs = b.at(p);
    out.at(p).insert(rhs.begin(), rhs.end());
  }
  out.add_all(extra);
  return out;
}

void assign_deps(DepEnv& env, const Place& p, const Type& t, const DeltaTree& delta,
                 const PlaceSet& extra, const StructTable& structs) {
  for (const auto& leaf : leaves(p, t, structs)) {
    PlaceSet deps = delta.at(leaf.context);
    deps.insert(extra.begin(), extra.end());
    env.set(leaf.place, std::move(deps));
  }
}

PlaceSet delta_leaves(const DeltaTree& delta) {
  PlaceSet out;
  for (const auto& [ctx, deps] : delta.leaves()) out.insert(deps.begin(), deps.end());
  return out;
}

DeltaTree delta_empty(const Type& t, const StructTable& structs) {
  return DeltaTree::empty(t, structs);
}

}  // namespace flowck
