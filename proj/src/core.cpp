#include "flowck/core.hpp"

#include <algorithm>
#include <functional>

namespace flowck {

bool is_prefix(const Path& prefix, const Path& path) {
  if (prefix.size() > path.size()) return false;
  return std::equal(prefix.begin(), prefix.end(), path.begin());
}

Place Place::child(const Selector& s) const {
  Place out = *this;
  out.path.push_back(s);
  return out;
}

Place Place::extended(const Path& suffix) const {
  Place out = *this;
  out.path.insert(out.path.end(), suffix.begin(), suffix.end());
  return out;
}

bool Place::is_prefix_of(const Place& other) const {
  return root == other.root && is_prefix(path, other.path);
}

bool Place::overlaps(const Place& other) const {
  return is_prefix_of(other) || other.is_prefix_of(*this);
}

std::string display_name(const std::string& internal) {
  auto hash = internal.find('#');
  return hash == std::string::npos ? internal : internal.substr(0, hash);
}

std::string Place::str() const {
  std::string name = display_name(root);
  // Referents of reference parameters are rooted at "*p".
  std::string out = (!name.empty() && name[0] == '*' && !path.empty()) ? "(" + name + ")" : name;
  for (const auto& s : path) out += "." + s;
  return out;
}

bool PlaceExpr::has_deref() const {
  return std::any_of(ops.begin(), ops.end(),
                     [](const PlaceOp& op) { return op.kind == PlaceOp::Kind::Deref; });
}

Place PlaceExpr::as_place() const {
  Place p(root);
  for (const auto& op : ops) {
    if (op.kind == PlaceOp::Kind::Project) p.path.push_back(op.field);
  }
  return p;
}

PlaceExpr PlaceExpr::from_place(const Place& p) {
  PlaceExpr e;
  e.root = p.root;
  for (const auto& s : p.path) e.ops.push_back({PlaceOp::Kind::Project, s});
  return e;
}

size_t PlaceExpr::projection_count() const {
  return static_cast<size_t>(std::count_if(ops.begin(), ops.end(), [](const PlaceOp& op) {
    return op.kind == PlaceOp::Kind::Project;
  }));
}

std::string PlaceExpr::str() const {
  std::string out = display_name(root);
  for (const auto& op : ops) {
    if (op.kind == PlaceOp::Kind::Deref) {
      out = "*" + out;
    } else {
      // `*r.f` would bind the projection first.
      if (!out.empty() && out[0] == '*') out = "(" + out + ")";
      out += "." + op.field;
    }
  }
  return out;
}

std::string AccessExpr::str() const {
  switch (kind) {
    case Kind::Wildcard:
      return "*";
    case Kind::Place:
      return place.str();
    case Kind::Fn:
      return "fn " + name;
    case Kind::FnAlias:
      return "fn " + name + "!()";
  }
  return "?";
}

int specificity(const AccessExpr& a) {
  switch (a.kind) {
    case AccessExpr::Kind::Wildcard:
      return 0;
    case AccessExpr::Kind::Place:
      return 1 + static_cast<int>(a.place.projection_count());
    case AccessExpr::Kind::Fn:
    case AccessExpr::Kind::FnAlias:
      return 1;
  }
  return 0;
}

std::string FlowRule::str() const {
  return source.str() + (permit ? " -> " : " ->! ") + dest.str();
}

std::string Type::str() const {
  switch (kind) {
    case TypeKind::Unit:
      return "unit";
    case TypeKind::U32:
      return "u32";
    case TypeKind::Bool:
      return "bool";
    case TypeKind::Tuple: {
      std::string out = "(";
      for (size_t i = 0; i < elems.size(); ++i) {
        if (i) out += ", ";
        out += elems[i].str();
      }
      if (elems.size() == 1) out += ",";
      return out + ")";
    }
    case TypeKind::Struct:
      return name;
    case TypeKind::Sum:
      return "either<" + elems[0].str() + ", " + elems[1].str() + ">";
    case TypeKind::Ref:
      return std::string("&") + (own == Ownership::Uniq ? "uniq " : "shrd ") + elems[0].str();
    case TypeKind::Closure: {
      std::string out = "closure#" + std::to_string(closure_id) + "(";
      for (size_t i = 0; i < elems.size(); ++i) {
        if (i) out += ", ";
        out += elems[i].str();
      }
      return out + ")";
    }
  }
  return "?";
}

void StructTable::add(StructDef def) {
  auto name = def.name;
  defs_.insert_or_assign(std::move(name), std::move(def));
}

const StructDef* StructTable::find(const std::string& name) const {
  auto it = defs_.find(name);
  return it == defs_.end() ? nullptr : &it->second;
}

std::optional<Type> project_type(const Type& t, const Selector& sel, const StructTable& structs) {
  if (t.kind == TypeKind::Tuple) {
    if (sel.empty() || !std::all_of(sel.begin(), sel.end(), ::isdigit)) return std::nullopt;
    size_t idx = std::stoul(sel);
    if (idx >= t.elems.size()) return std::nullopt;
    return t.elems[idx];
  }
  if (t.kind == TypeKind::Struct) {
    const StructDef* def = structs.find(t.name);
    if (!def) return std::nullopt;
    for (const auto& f : def->fields) {
      if (f.name == sel) return f.type;
    }
  }
  return std::nullopt;
}

bool copyable(const Type& t, const StructTable& structs) {
  switch (t.kind) {
    case TypeKind::Unit:
    case TypeKind::U32:
    case TypeKind::Bool:
      return true;
    case TypeKind::Ref:
      return t.own == Ownership::Shrd;
    case TypeKind::Tuple:
    case TypeKind::Sum:
      return std::all_of(t.elems.begin(), t.elems.end(),
                         [&](const Type& e) { return copyable(e, structs); });
    case TypeKind::Struct:
    case TypeKind::Closure:
      return false;
  }
  return false;
}

namespace {

void collect_leaves(const Place& p, const Type& t, const StructTable& structs, Path& ctx,
                    std::vector<std::string>& open_structs, std::vector<Leaf>& out) {
  if (t.kind == TypeKind::Tuple && !t.elems.empty()) {
    for (size_t i = 0; i < t.elems.size(); ++i) {
      ctx.push_back(std::to_string(i));
      collect_leaves(p, t.elems[i], structs, ctx, open_structs, out);
      ctx.pop_back();
    }
    return;
  }
  if (t.kind == TypeKind::Struct) {
    const StructDef* def = structs.find(t.name);
    bool recursive =
        std::find(open_structs.begin(), open_structs.end(), t.name) != open_structs.end();
    if (def && !recursive && !def->fields.empty()) {
      open_structs.push_back(t.name);
      for (const auto& f : def->fields) {
        ctx.push_back(f.name);
        collect_leaves(p, f.type, structs, ctx, open_structs, out);
        ctx.pop_back();
      }
      open_structs.pop_back();
      return;
    }
  }
  out.push_back(Leaf{ctx, p.extended(ctx), t});
}

}  // namespace

std::vector<Leaf> leaves(const Place& p, const Type& t, const StructTable& structs) {
  std::vector<Leaf> out;
  Path ctx;
  std::vector<std::string> open;
  collect_leaves(p, t, structs, ctx, open, out);
  return out;
}

std::vector<Path> leaf_paths(const Type& t, const StructTable& structs) {
  std::vector<Path> out;
  for (auto& l : leaves(Place(""), t, structs)) out.push_back(std::move(l.context));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool same_ptr(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return same_expr(*a, *b);
}

bool same_rules(const std::vector<FlowRule>& a, const std::vector<FlowRule>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_as(b[i])) return false;
  }
  return true;
}

bool same_params(const std::vector<Param>& a, const std::vector<Param>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || !(a[i].type == b[i].type)) return false;
  }
  return true;
}

struct SameVisitor {
  const Expr::Node& other;

  bool operator()(const ConstExpr& a) const {
    const auto& b = std::get<ConstExpr>(other);
    return a.kind == b.kind && a.value == b.value;
  }
  bool operator()(const UseExpr& a) const {
    const auto& b = std::get<UseExpr>(other);
    return a.mode == b.mode && a.place == b.place;
  }
  bool operator()(const TupleExpr& a) const {
    const auto& b = std::get<TupleExpr>(other);
    if (a.elems.size() != b.elems.size()) return false;
    for (size_t i = 0; i < a.elems.size(); ++i) {
      if (!same_ptr(a.elems[i], b.elems[i])) return false;
    }
    return true;
  }
  bool operator()(const StructExpr& a) const {
    const auto& b = std::get<StructExpr>(other);
    if (a.name != b.name || a.fields.size() != b.fields.size()) return false;
    for (size_t i = 0; i < a.fields.size(); ++i) {
      if (a.fields[i].first != b.fields[i].first ||
          !same_ptr(a.fields[i].second, b.fields[i].second))
        return false;
    }
    return true;
  }
  bool operator()(const VariantExpr& a) const {
    const auto& b = std::get<VariantExpr>(other);
    return a.sum == b.sum && a.right == b.right && same_ptr(a.payload, b.payload);
  }
  bool operator()(const BorrowExpr& a) const {
    const auto& b = std::get<BorrowExpr>(other);
    return a.own == b.own && a.place == b.place;
  }
  bool operator()(const LetExpr& a) const {
    const auto& b = std::get<LetExpr>(other);
    return a.name == b.name && a.annot == b.annot && same_rules(a.with_rules, b.with_rules) &&
           same_ptr(a.init, b.init) && same_ptr(a.body, b.body);
  }
  bool operator()(const AssignExpr& a) const {
    const auto& b = std::get<AssignExpr>(other);
    return a.target == b.target && same_ptr(a.value, b.value);
  }
  bool operator()(const IfExpr& a) const {
    const auto& b = std::get<IfExpr>(other);
    return same_ptr(a.guard, b.guard) && same_ptr(a.then_branch, b.then_branch) &&
           same_ptr(a.else_branch, b.else_branch);
  }
  bool operator()(const SeqExpr& a) const {
    const auto& b = std::get<SeqExpr>(other);
    return same_ptr(a.first, b.first) && same_ptr(a.second, b.second);
  }
  bool operator()(const BlockExpr& a) const {
    return same_ptr(a.body, std::get<BlockExpr>(other).body);
  }
  bool operator()(const FlowDeclExpr& a) const {
    return a.rule.same_as(std::get<FlowDeclExpr>(other).rule);
  }
  bool operator()(const AllowExpr& a) const {
    return same_ptr(a.inner, std::get<AllowExpr>(other).inner);
  }
  bool operator()(const CallExpr& a) const {
    const auto& b = std::get<CallExpr>(other);
    if (a.callee != b.callee || a.args.size() != b.args.size()) return false;
    for (size_t i = 0; i < a.args.size(); ++i) {
      if (!same_ptr(a.args[i], b.args[i])) return false;
    }
    return true;
  }
  bool operator()(const ClosureExpr& a) const {
    const auto& b = std::get<ClosureExpr>(other);
    return same_params(a.params, b.params) && same_ptr(a.body, b.body);
  }
};

}  // namespace

bool same_expr(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(SameVisitor{b.node}, a.node);
}

const FuncDef* Program::find_function(const std::string& name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::vector<std::string> Program::io_functions() const {
  std::vector<std::string> out;
  for (const auto& f : functions) {
    if (f.primitive && f.io) out.push_back(f.name);
  }
  return out;
}

}  // namespace flowck
