#include "flowck/checker.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

#ifdef FLOWCK_HAVE_OPENMP
#include <omp.h>
#endif

#include "flowck/policy.hpp"

namespace flowck {

// ---------------------------------------------------------------------------
// StackEnv

std::optional<std::string> StackEnv::lookup(const std::string& name) const {
  for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
    auto f = it->find(name);
    if (f != it->end()) return f->second;
  }
  return std::nullopt;
}

void StackEnv::bind(const std::string& name, const std::string& internal, Type t) {
  if (scopes.empty()) scopes.emplace_back();
  scopes.back()[name] = internal;
  types[internal] = std::move(t);
}

std::optional<Type> StackEnv::type_of(const Place& p, const StructTable& structs) const {
  auto it = types.find(p.root);
  if (it == types.end()) return std::nullopt;
  std::optional<Type> t = it->second;
  for (const auto& sel : p.path) {
    t = project_type(*t, sel, structs);
    if (!t) return std::nullopt;
  }
  return t;
}

std::optional<Place> StackEnv::moved_overlap(const Place& p) const {
  for (const auto& m : moved) {
    if (m.overlaps(p)) return m;
  }
  return std::nullopt;
}

std::optional<std::set<Place>> StackEnv::referents(const Place& leaf, const Type& ref_type) {
  auto it = origins.find(leaf);
  if (it != origins.end()) return it->second;
  if (!ref_type.is_ref()) return std::nullopt;
  if (!params.count(leaf.root) && (leaf.root.empty() || leaf.root[0] != '*')) return std::nullopt;
  std::string name = "*" + leaf.root;
  for (const auto& s : leaf.path) name += "." + s;
  Place phantom(name);
  types[name] = ref_type.referent();
  params.insert(name);
  origins[leaf] = {phantom};
  return std::set<Place>{phantom};
}

namespace {

void deref_step(StackEnv& gamma, const DepEnv& pi, std::set<Place>& current, Type& type,
                LoanResolution& out) {
  if (type.own == Ownership::Shrd) out.through_shrd = true;
  std::set<Place> next;
  for (const auto& p : current) {
    out.pointer_deps.insert(p);
    const auto& deps = pi.get(p);
    out.pointer_deps.insert(deps.begin(), deps.end());
    auto refs = gamma.referents(p, type);
    if (!refs) {
      out.error = "reference `" + p.str() + "` has no known origin";
      out.error_kind = "unknown-origin";
      return;
    }
    next.insert(refs->begin(), refs->end());
  }
  current = std::move(next);
  Type referent = type.referent();
  type = std::move(referent);
}

}  // namespace

LoanResolution resolve_loans(StackEnv& gamma, const DepEnv& pi, const PlaceExpr& p, Ownership own,
                             const StructTable& structs) {
  LoanResolution out;
  auto internal = gamma.lookup(p.root);
  if (!internal) {
    out.error = "unknown variable `" + p.root + "`";
    out.error_kind = "unknown-variable";
    return out;
  }
  std::set<Place> current{Place(*internal)};
  Type type = gamma.types.at(*internal);
  for (const auto& op : p.ops) {
    if (op.kind == PlaceOp::Kind::Deref) {
      if (!type.is_ref()) {
        out.error = "cannot dereference `" + p.str() + "`: not a reference";
        out.error_kind = "type-mismatch";
        return out;
      }
      deref_step(gamma, pi, current, type, out);
      if (!out.ok()) return out;
      continue;
    }
    while (type.is_ref()) {
      deref_step(gamma, pi, current, type, out);
      if (!out.ok()) return out;
    }
    auto next = project_type(type, op.field, structs);
    if (!next) {
      out.error = "type " + type.str() + " has no field `" + op.field + "`";
      out.error_kind = "type-mismatch";
      return out;
    }
    std::set<Place> moved_on;
    for (const auto& c : current) moved_on.insert(c.child(op.field));
    current = std::move(moved_on);
    type = std::move(*next);
  }
  for (const auto& c : current) out.loans.insert(Loan{own, c});
  out.type = std::move(type);
  return out;
}

namespace {

// ---------------------------------------------------------------------------

struct Value {
  bool ok = true;
  Type type;
  DeltaTree delta = DeltaTree::single({});
  /// Referents of the value's reference leaves, by leaf context.
  std::map<Path, std::set<Place>> origins;
  /// Places the value was read from; rendered into callee contracts.
  std::vector<Place> sources;
};

Value failed() {
  Value v;
  v.ok = false;
  return v;
}

struct ClosureInfo {
  std::vector<Place> captures;
  std::set<Place> mutated;
  std::vector<Type> params;
};

struct Shared {
  const Program& prog;
  const CheckOptions& opts;
  std::vector<std::string> io_set;
  /// Contract of every function, resolved over its formals.
  std::map<std::string, PolicyEnv> contracts;
};

class FunctionChecker {
 public:
  FunctionChecker(const Shared& shared, const FuncDef& fn)
      : shared_(shared), structs_(shared.prog.structs), fn_(fn) {}

  /// Binds the formals and declares the contract. Diagnostics are recorded
  /// unless the caller discards them.
  void enter() {
    gamma_.scopes.emplace_back();
    for (const auto& p : fn_.params) {
      std::string internal = fresh(p.name);
      gamma_.bind(p.name, internal, p.type);
      gamma_.params.insert(internal);
    }
    for (const auto& r : fn_.contract) declare_rule(r);
  }

  void run() {
    enter();
    if (fn_.body) check(*fn_.body);
  }

  const PolicyEnv& policy() const { return psi_; }
  std::vector<Diagnostic> diags;
  std::vector<std::pair<size_t, FlowRule>> declared;
  const DepEnv& deps() const { return pi_; }

 private:
  const Shared& shared_;
  const StructTable& structs_;
  const FuncDef& fn_;

  StackEnv gamma_;
  DepEnv pi_;
  PolicyEnv psi_;
  BranchDeps xi_;
  std::set<std::string> poisoned_;
  std::map<std::string, int> name_counts_;
  std::map<int, ClosureInfo> closures_;
  int next_closure_ = 0;
  /// Rules as written, by span; diagnostics cite these rather than the
  /// resolved operands.
  std::map<SourceSpan, std::string> written_;

  struct Snapshot {
    StackEnv gamma;
    DepEnv pi;
    BranchDeps xi;
    std::set<std::string> poisoned;
  };
  Snapshot save() const { return {gamma_, pi_, xi_, poisoned_}; }
  void restore(Snapshot s) {
    gamma_ = std::move(s.gamma);
    pi_ = std::move(s.pi);
    xi_ = std::move(s.xi);
    poisoned_ = std::move(s.poisoned);
  }

  std::string fresh(const std::string& name) {
    int n = name_counts_[name]++;
    return n == 0 ? name : name + "#" + std::to_string(n);
  }

  // -- diagnostics ----------------------------------------------------------

  void error(const std::string& kind, const SourceSpan& span, std::string message) {
    Diagnostic d;
    d.file = shared_.prog.file;
    d.severity = Severity::Error;
    d.kind = kind;
    d.span = span;
    d.message = std::move(message);
    diags.push_back(std::move(d));
  }

  void violation(const std::string& kind, const SourceSpan& span, const Place& source,
                 const AccessExpr& dest, const Permission& governing,
                 const std::optional<FlowRule>& callee_rule = std::nullopt) {
    Diagnostic d;
    d.file = shared_.prog.file;
    d.severity = Severity::Violation;
    d.kind = kind;
    d.span = span;
    d.source = source.str();
    d.destination = dest.str();
    if (governing.rule) d.rule = cite(*governing.rule);
    if (callee_rule) d.callee_rule = RuleRef::of(*callee_rule);
    d.message = "flow from `" + d.source + "` to `" + d.destination + "` is denied";
    if (d.rule) d.message += " by `" + d.rule->text + "`";
    if (callee_rule) d.message += "; the callee permits it via `" + callee_rule->str() + "`";
    diags.push_back(std::move(d));
  }

  RuleRef cite(const FlowRule& r) const {
    RuleRef ref = RuleRef::of(r);
    auto it = written_.find(r.span);
    if (it != written_.end()) ref.text = it->second;
    return ref;
  }

  /// Checks `sources` into one destination; reports the first denied source.
  bool check_flow(const std::string& kind, const SourceSpan& span, const PlaceSet& sources,
                  const AccessExpr& dest) {
    auto r = is_allowed(sources, {dest}, psi_);
    if (r) return true;
    violation(kind, span, r.witness->source, r.witness->dest, r.witness->governing);
    return false;
  }

  // -- places ---------------------------------------------------------------

  /// Leaves nested below a recursive struct occurrence are tracked at that
  /// occurrence.
  Place anchor(const Place& p) const {
    if (p.path.empty()) return p;
    auto it = gamma_.types.find(p.root);
    if (it == gamma_.types.end()) return p;
    for (const auto& l : leaves(Place(p.root), it->second, structs_)) {
      if (l.place.path.size() < p.path.size() && l.place.is_prefix_of(p)) return l.place;
    }
    return p;
  }

  DeltaTree read_place(const Place& p, const Type& t) const {
    Place a = anchor(p);
    if (a == p) return delta_place(p, t, pi_, structs_);
    DeltaTree d = DeltaTree::empty(t, structs_);
    PlaceSet s = pi_.get(a);
    s.insert(a);
    d.add_all(s);
    return d;
  }

  /// Referents of every reference leaf inside `p : t`, by leaf context.
  std::map<Path, std::set<Place>> read_origins(const Place& p, const Type& t) {
    std::map<Path, std::set<Place>> out;
    for (const auto& l : leaves(p, t, structs_)) {
      if (!l.type.is_ref()) continue;
      if (auto refs = gamma_.referents(l.place, l.type)) out[l.context].insert(refs->begin(), refs->end());
    }
    return out;
  }

  bool is_poisoned(const std::string& user_name) const {
    auto internal = gamma_.lookup(user_name);
    return internal && poisoned_.count(*internal);
  }

  std::set<std::string> live_roots() const {
    std::set<std::string> out;
    for (const auto& s : gamma_.scopes)
      for (const auto& [name, internal] : s) out.insert(internal);
    return out;
  }

  std::optional<Place> borrower_of(const Place& p) const {
    auto live = live_roots();
    for (const auto& [ref, targets] : gamma_.origins) {
      if (!live.count(ref.root)) continue;
      for (const auto& t : targets) {
        if (t.overlaps(p)) return ref;
      }
    }
    return std::nullopt;
  }

  // -- rules ----------------------------------------------------------------

  /// Concrete operands a rule operand stands for; nullopt after an error.
  std::optional<std::vector<AccessExpr>> resolve_operand(const AccessExpr& a,
                                                         const SourceSpan& span) {
    switch (a.kind) {
      case AccessExpr::Kind::Wildcard:
        return std::vector<AccessExpr>{a};
      case AccessExpr::Kind::Fn:
        if (!shared_.prog.find_function(a.name)) {
          error("unknown-function", span, "unknown function `" + a.name + "` in flow rule");
          return std::nullopt;
        }
        return std::vector<AccessExpr>{a};
      case AccessExpr::Kind::FnAlias: {
        std::vector<AccessExpr> out;
        for (const auto& f : shared_.io_set) out.push_back(AccessExpr::of_fn(f));
        return out;
      }
      case AccessExpr::Kind::Place:
        break;
    }
    if (is_poisoned(a.place.root)) return std::nullopt;
    PlaceExpr pe = a.place;
    auto res = resolve_loans(gamma_, pi_, pe, Ownership::Shrd, structs_);
    if (!res.ok()) {
      error(res.error_kind, span,
            res.error + " in flow rule");
      return std::nullopt;
    }
    // A reference operand names the reference and whatever it is known to
    // point to.
    std::vector<AccessExpr> out;
    while (true) {
      for (const auto& l : res.loans) out.push_back(AccessExpr::of_place(l.place));
      if (!res.type.is_ref()) break;
      pe.ops.push_back({PlaceOp::Kind::Deref, {}});
      res = resolve_loans(gamma_, pi_, pe, Ownership::Shrd, structs_);
      if (!res.ok()) break;
    }
    return out;
  }

  void declare_rule(const FlowRule& rule) {
    written_.emplace(rule.span, rule.str());
    auto srcs = resolve_operand(rule.source, rule.span);
    auto dsts = resolve_operand(rule.dest, rule.span);
    if (!srcs || !dsts) return;
    for (const auto& s : *srcs) {
      for (const auto& d : *dsts) {
        FlowRule r{s, d, rule.permit, rule.span};
        try {
          psi_.declare(r);
          declared.emplace_back(psi_.depth(), r);
        } catch (const ContradictionError& e) {
          Diagnostic diag;
          diag.file = shared_.prog.file;
          diag.severity = Severity::Error;
          diag.kind = "contradiction";
          diag.span = rule.span;
          diag.source = s.str();
          diag.destination = d.str();
          diag.rule = cite(e.existing());
          diag.message = "flow rule `" + rule.str() + "` contradicts `" + diag.rule->text + "`";
          diags.push_back(std::move(diag));
        } catch (const std::invalid_argument& e) {
          error("type-mismatch", rule.span, e.what());
        }
      }
    }
  }

  // -- expressions ----------------------------------------------------------

  Value check(const Expr& e) {
    return std::visit([&](const auto& node) { return check_node(node, e); }, e.node);
  }

  Value check_node(const ConstExpr& c, const Expr&) {
    Value v;
    switch (c.kind) {
      case ConstExpr::Kind::Unit:
        v.type = Type::unit();
        break;
      case ConstExpr::Kind::Int:
        v.type = Type::u32();
        break;
      case ConstExpr::Kind::Bool:
        v.type = Type::boolean();
        break;
    }
    return v;
  }

  Value check_node(const UseExpr& u, const Expr& e) {
    if (is_poisoned(u.place.root)) return failed();
    auto res = resolve_loans(gamma_, pi_, u.place, Ownership::Shrd, structs_);
    if (!res.ok()) {
      error(res.error_kind, e.span, res.error);
      return failed();
    }
    const Type& t = res.type;
    const bool can_copy = copyable(t, structs_);
    bool move = u.mode == UseMode::Move || (u.mode == UseMode::Auto && !can_copy);
    if (u.mode == UseMode::Move && can_copy) {
      error("move-of-copyable", e.span, "`" + u.place.str() + "` has copyable type " + t.str() +
                                            "; use `copy`");
      move = false;
    }
    if (u.mode == UseMode::Copy && !can_copy) {
      error("copy-of-noncopyable", e.span,
            "cannot copy `" + u.place.str() + "` of type " + t.str());
      return failed();
    }
    Value v;
    v.type = t;
    if (move) {
      if (u.place.has_deref() || res.loans.size() != 1 ||
          res.loans.begin()->place.root != *gamma_.lookup(u.place.root)) {
        error("move-out-of-reference", e.span, "cannot move `" + u.place.str() + "` out of a reference");
        return failed();
      }
      const Place p = res.loans.begin()->place;
      if (auto m = gamma_.moved_overlap(p)) {
        error("use-after-move", e.span, "`" + u.place.str() + "` was moved out");
        return failed();
      }
      if (auto b = borrower_of(p)) {
        error("move-while-borrowed", e.span,
              "cannot move `" + u.place.str() + "` while `" + b->str() + "` borrows it");
        return failed();
      }
      v.delta = read_place(p, t);
      v.origins = read_origins(p, t);
      v.sources.push_back(p);
      gamma_.moved.insert(p);
      return v;
    }
    bool first = true;
    for (const auto& loan : res.loans) {
      if (gamma_.moved_overlap(loan.place)) {
        error("use-after-move", e.span, "`" + u.place.str() + "` was moved out");
        return failed();
      }
      DeltaTree d = read_place(loan.place, t);
      v.delta = first ? d : delta_merge(v.delta, d, {}, t, structs_);
      first = false;
      for (auto& [ctx, refs] : read_origins(loan.place, t)) v.origins[ctx].insert(refs.begin(), refs.end());
      v.sources.push_back(loan.place);
    }
    v.delta.add_all(res.pointer_deps);
    return v;
  }

  Value check_node(const TupleExpr& t, const Expr&) {
    Value v;
    v.delta = DeltaTree();
    std::vector<Type> elems;
    bool ok = true;
    for (size_t i = 0; i < t.elems.size(); ++i) {
      Value c = check(*t.elems[i]);
      ok = ok && c.ok;
      elems.push_back(c.type);
      const std::string sel = std::to_string(i);
      v.delta.graft(sel, c.delta);
      for (auto& [ctx, refs] : c.origins) {
        Path p{sel};
        p.insert(p.end(), ctx.begin(), ctx.end());
        v.origins[p] = refs;
      }
    }
    if (!ok) return failed();
    v.type = Type::tuple(std::move(elems));
    v.delta = fit(v.delta, v.type);
    return v;
  }

  /// Reshapes a tree built bottom-up to the leaf structure of `t`.
  DeltaTree fit(const DeltaTree& d, const Type& t) const {
    DeltaTree out;
    for (const auto& path : leaf_paths(t, structs_)) {
      PlaceSet s;
      for (const auto& [ctx, deps] : d.leaves()) {
        if (is_prefix(path, ctx)) s.insert(deps.begin(), deps.end());
      }
      out.leaves().emplace(path, std::move(s));
    }
    return out;
  }

  Value check_node(const StructExpr& s, const Expr& e) {
    const StructDef* def = structs_.find(s.name);
    std::map<std::string, Value> vals;
    bool ok = true;
    for (const auto& [name, fe] : s.fields) {
      Value c = check(*fe);
      ok = ok && c.ok;
      if (vals.count(name)) {
        error("type-mismatch", e.span, "field `" + name + "` given twice");
        ok = false;
      }
      vals[name] = std::move(c);
    }
    if (!def) {
      error("type-mismatch", e.span, "unknown struct `" + s.name + "`");
      return failed();
    }
    if (!ok) return failed();
    Value v;
    v.delta = DeltaTree();
    for (const auto& f : def->fields) {
      auto it = vals.find(f.name);
      if (it == vals.end()) {
        error("type-mismatch", e.span, "missing field `" + f.name + "` in " + s.name);
        return failed();
      }
      if (it->second.type != f.type) {
        error("type-mismatch", e.span, "field `" + f.name + "` expects " + f.type.str() + ", got " +
                                           it->second.type.str());
        return failed();
      }
      v.delta.graft(f.name, it->second.delta);
      for (auto& [ctx, refs] : it->second.origins) {
        Path p{f.name};
        p.insert(p.end(), ctx.begin(), ctx.end());
        v.origins[p] = refs;
      }
      vals.erase(it);
    }
    if (!vals.empty()) {
      error("type-mismatch", e.span, s.name + " has no field `" + vals.begin()->first + "`");
      return failed();
    }
    v.type = Type::structure(s.name);
    v.delta = fit(v.delta, v.type);
    return v;
  }

  Value check_node(const VariantExpr& ve, const Expr& e) {
    Value c = check(*ve.payload);
    if (!c.ok) return failed();
    const Type& want = ve.sum.elems.at(ve.right ? 1 : 0);
    if (c.type != want) {
      error("type-mismatch", e.span, "variant payload expects " + want.str() + ", got " + c.type.str());
      return failed();
    }
    Value v;
    v.type = ve.sum;
    v.delta = DeltaTree::single(delta_leaves(c.delta));
    return v;
  }

  Value check_node(const BorrowExpr& b, const Expr& e) {
    if (is_poisoned(b.place.root)) return failed();
    auto res = resolve_loans(gamma_, pi_, b.place, b.own, structs_);
    if (!res.ok()) {
      error(res.error_kind, e.span, res.error);
      return failed();
    }
    if (b.own == Ownership::Uniq && res.through_shrd) {
      error("uniq-borrow-through-shared", e.span,
            "cannot borrow `" + b.place.str() + "` uniquely through a shared reference");
      return failed();
    }
    Value v;
    v.type = Type::ref(b.own, res.type);
    v.delta = DeltaTree::single(res.pointer_deps);
    for (const auto& l : res.loans) {
      if (gamma_.moved_overlap(l.place)) {
        error("use-after-move", e.span, "`" + b.place.str() + "` was moved out");
        return failed();
      }
      v.origins[{}].insert(l.place);
    }
    return v;
  }

  Value check_node(const LetExpr& let, const Expr& e) {
    Value init = check(*let.init);
    Type t = init.type;
    bool poisoned = !init.ok;
    if (let.annot) {
      if (init.ok && init.type != *let.annot) {
        error("type-mismatch", e.span, "`" + let.name + "` is declared " + let.annot->str() +
                                           " but initialized with " + init.type.str());
      }
      poisoned = false;
      if (!init.ok || init.type != *let.annot) {
        init.delta = delta_empty(*let.annot, structs_);
        init.origins.clear();
      }
      t = *let.annot;
    }
    const std::string internal = fresh(let.name);
    gamma_.scopes.emplace_back();
    gamma_.bind(let.name, internal, t);
    if (poisoned) poisoned_.insert(internal);
    psi_.push_scope();
    for (const auto& r : let.with_rules) declare_rule(r);

    const Place x(internal);
    if (!poisoned) {
      for (const auto& leaf : leaves(x, t, structs_)) {
        PlaceSet sources = init.delta.at(leaf.context);
        sources.insert(xi_.begin(), xi_.end());
        check_flow("flow-violation", e.span, sources, AccessExpr::of_place(leaf.place));
      }
      assign_deps(pi_, x, t, init.delta, xi_, structs_);
      for (const auto& [ctx, refs] : init.origins) gamma_.origins[x.extended(ctx)] = refs;
    }

    Value body = check(*let.body);
    psi_.pop_scope();
    gamma_.scopes.pop_back();
    return body;
  }

  Value check_node(const AssignExpr& a, const Expr& e) {
    Value rhs = check(*a.value);
    Value unit;
    if (is_poisoned(a.target.root)) return unit;
    auto res = resolve_loans(gamma_, pi_, a.target, Ownership::Uniq, structs_);
    if (!res.ok()) {
      error(res.error_kind, e.span, res.error);
      return unit;
    }
    if (res.through_shrd) {
      error("assign-through-shared", e.span,
            "cannot assign to `" + a.target.str() + "` through a shared reference");
      return unit;
    }
    if (!rhs.ok) return unit;
    if (rhs.type != res.type) {
      error("type-mismatch", e.span, "cannot assign " + rhs.type.str() + " to `" + a.target.str() +
                                         "` of type " + res.type.str());
      return unit;
    }
    const Type& t = res.type;
    PlaceSet extra = xi_;
    extra.insert(res.pointer_deps.begin(), res.pointer_deps.end());
    for (const auto& loan : res.loans) {
      for (const auto& leaf : leaves(loan.place, t, structs_)) {
        PlaceSet sources = rhs.delta.at(leaf.context);
        sources.insert(extra.begin(), extra.end());
        check_flow("flow-violation", e.span, sources, AccessExpr::of_place(anchor(leaf.place)));
      }
    }
    const bool strong =
        res.loans.size() == 1 && anchor(res.loans.begin()->place) == res.loans.begin()->place;
    if (strong) {
      const Place p = res.loans.begin()->place;
      assign_deps(pi_, p, t, rhs.delta, extra, structs_);
      std::erase_if(gamma_.moved, [&](const Place& m) { return p.is_prefix_of(m); });
      std::erase_if(gamma_.origins, [&](const auto& kv) { return p.is_prefix_of(kv.first); });
      for (const auto& [ctx, refs] : rhs.origins) gamma_.origins[p.extended(ctx)] = refs;
    } else {
      for (const auto& loan : res.loans) {
        for (const auto& leaf : leaves(loan.place, t, structs_)) {
          PlaceSet deps = rhs.delta.at(leaf.context);
          deps.insert(extra.begin(), extra.end());
          pi_.add(anchor(leaf.place), deps);
        }
        for (const auto& [ctx, refs] : rhs.origins)
          gamma_.origins[loan.place.extended(ctx)].insert(refs.begin(), refs.end());
      }
    }
    return unit;
  }

  Value check_node(const IfExpr& i, const Expr& e) {
    Value g = check(*i.guard);
    if (g.ok && g.type != Type::boolean()) {
      error("type-mismatch", i.guard->span, "condition has type " + g.type.str() + ", expected bool");
    }
    const BranchDeps saved_xi = xi_;
    const PlaceSet guard_deps = delta_leaves(g.delta);
    xi_.insert(guard_deps.begin(), guard_deps.end());
    const BranchDeps arm_xi = xi_;

    Snapshot before = save();
    Value a = check(*i.then_branch);
    Snapshot after_then = save();
    restore(std::move(before));
    Value b = check(*i.else_branch);

    gamma_.moved.insert(after_then.gamma.moved.begin(), after_then.gamma.moved.end());
    for (auto& [k, t] : after_then.gamma.types) gamma_.types.emplace(k, t);
    for (auto& [k, refs] : after_then.gamma.origins) gamma_.origins[k].insert(refs.begin(), refs.end());
    gamma_.params.insert(after_then.gamma.params.begin(), after_then.gamma.params.end());
    pi_.join(after_then.pi);
    poisoned_.insert(after_then.poisoned.begin(), after_then.poisoned.end());
    xi_ = saved_xi;

    if (!a.ok || !b.ok) return failed();
    if (a.type != b.type) {
      error("branch-type-mismatch", e.span,
            "branches have types " + a.type.str() + " and " + b.type.str());
      return failed();
    }
    Value v;
    v.type = a.type;
    v.delta = delta_merge(a.delta, b.delta, arm_xi, a.type, structs_);
    v.origins = a.origins;
    for (auto& [ctx, refs] : b.origins) v.origins[ctx].insert(refs.begin(), refs.end());
    return v;
  }

  Value check_node(const SeqExpr& s, const Expr&) {
    check(*s.first);
    return check(*s.second);
  }

  Value check_node(const BlockExpr& b, const Expr&) {
    gamma_.scopes.emplace_back();
    psi_.push_scope();
    Value v = check(*b.body);
    psi_.pop_scope();
    gamma_.scopes.pop_back();
    return v;
  }

  Value check_node(const FlowDeclExpr& f, const Expr&) {
    declare_rule(f.rule);
    return Value{};
  }

  Value check_node(const AllowExpr& a, const Expr&) {
    Value v = check(*a.inner);
    if (!v.ok) return v;
    v.delta = delta_empty(v.type, structs_);
    v.sources.clear();
    return v;
  }

  // -- calls ----------------------------------------------------------------

  /// Sources a by-value argument hands over: its leaves plus the referents of
  /// any reference it contains.
  PlaceSet referent_deps(const std::set<Place>& refs) {
    PlaceSet out;
    for (const auto& r : refs) {
      auto t = gamma_.type_of(r, structs_);
      if (!t) continue;
      out.merge(delta_leaves(read_place(r, *t)));
    }
    return out;
  }

  struct Marshalled {
    std::vector<ArgLeaf> args;
    std::vector<OutLeaf> outs;
    Substitution subst;
    PlaceSet all_sources;
  };

  Marshalled marshal(const std::vector<Param>& params, const std::vector<Value>& vals) {
    Marshalled m;
    for (size_t i = 0; i < params.size(); ++i) {
      const Param& p = params[i];
      const Value& v = vals[i];
      if (p.type.is_ref()) {
        const std::string star = "*" + p.name;
        auto it = v.origins.find(Path{});
        std::set<Place> refs = it == v.origins.end() ? std::set<Place>{} : it->second;
        const PlaceSet& ptr = v.delta.at({});
        m.args.push_back(ArgLeaf{Place(p.name), ptr});
        m.all_sources.insert(ptr.begin(), ptr.end());
        const Type& rt = p.type.referent();
        std::map<Path, PlaceSet> per_ctx;
        for (const auto& r : refs) {
          for (const auto& leaf : leaves(r, rt, structs_)) {
            Place a = anchor(leaf.place);
            PlaceSet s = pi_.get(a);
            s.insert(a);
            s.insert(ptr.begin(), ptr.end());
            per_ctx[leaf.context].merge(s);
            if (p.type.own == Ownership::Uniq) m.outs.push_back(OutLeaf{Place(star).extended(leaf.context), a});
          }
        }
        for (auto& [ctx, s] : per_ctx) {
          m.all_sources.insert(s.begin(), s.end());
          m.args.push_back(ArgLeaf{Place(star).extended(ctx), std::move(s)});
        }
        m.subst[p.name] = std::vector<Place>(refs.begin(), refs.end());
        m.subst[star] = m.subst[p.name];
      } else {
        for (const auto& [ctx, deps] : v.delta.leaves()) {
          PlaceSet s = deps;
          auto o = v.origins.find(ctx);
          if (o != v.origins.end()) {
            s.merge(referent_deps(o->second));
            std::string star = "*" + p.name;
            for (const auto& sel : ctx) star += "." + sel;
            m.subst[star] = std::vector<Place>(o->second.begin(), o->second.end());
          }
          m.all_sources.insert(s.begin(), s.end());
          m.args.push_back(ArgLeaf{Place(p.name).extended(ctx), std::move(s)});
        }
        m.subst[p.name] = v.sources;
      }
    }
    m.args.push_back(ArgLeaf{Place("%branch"), xi_});
    m.all_sources.insert(xi_.begin(), xi_.end());
    return m;
  }

  bool args_match(const std::string& callee, const std::vector<Type>& want,
                  const std::vector<Value>& vals, const SourceSpan& span) {
    if (want.size() != vals.size()) {
      error("arity-mismatch", span, "`" + callee + "` takes " + std::to_string(want.size()) +
                                        " argument(s), got " + std::to_string(vals.size()));
      return false;
    }
    bool ok = true;
    for (size_t i = 0; i < vals.size(); ++i) {
      if (!vals[i].ok) {
        ok = false;
        continue;
      }
      if (vals[i].type != want[i]) {
        error("type-mismatch", span, "argument " + std::to_string(i + 1) + " of `" + callee +
                                         "` expects " + want[i].str() + ", got " +
                                         vals[i].type.str());
        ok = false;
      }
    }
    return ok;
  }

  Value check_node(const CallExpr& c, const Expr& e) {
    std::vector<Value> vals;
    for (const auto& a : c.args) vals.push_back(check(*a));
    Value unit;

    if (auto internal = gamma_.lookup(c.callee)) {
      const Type& t = gamma_.types.at(*internal);
      if (poisoned_.count(*internal)) return unit;
      if (t.kind != TypeKind::Closure) {
        error("type-mismatch", e.span, "`" + c.callee + "` of type " + t.str() + " is not callable");
        return unit;
      }
      if (!args_match(c.callee, t.elems, vals, e.span)) return unit;
      apply_closure(Place(*internal), closures_.at(t.closure_id), vals, e.span);
      return unit;
    }

    const FuncDef* f = shared_.prog.find_function(c.callee);
    if (!f) {
      error("unknown-function", e.span, "unknown function `" + c.callee + "`");
      return unit;
    }
    std::vector<Type> want;
    for (const auto& p : f->params) want.push_back(p.type);
    if (!args_match(c.callee, want, vals, e.span)) return unit;

    Marshalled m = marshal(f->params, vals);
    const AccessExpr fn_dest = AccessExpr::of_fn(f->name);
    for (const auto& s : m.all_sources) {
      if (!check_flow("fn-flow", e.span, {s}, fn_dest)) break;
    }

    auto cit = shared_.contracts.find(f->name);
    static const PolicyEnv kNone;
    const PolicyEnv& contract = cit == shared_.contracts.end() ? kNone : cit->second;
    CallCheck cc = caller_implies(psi_, contract, m.args, m.outs, m.subst);
    for (const auto& v : cc.violations) {
      violation("call-flow", e.span, v.source, AccessExpr::of_place(v.dest), v.caller, v.callee_rule);
    }
    for (const auto& [actual, reach] : cc.reaching) pi_.add(actual, reach);
    return unit;
  }

  void apply_closure(const Place& self, const ClosureInfo& info, const std::vector<Value>& vals,
                     const SourceSpan& span) {
    std::vector<Param> params;
    for (size_t i = 0; i < info.params.size(); ++i)
      params.push_back(Param{"%" + std::to_string(i), info.params[i], {}});
    Marshalled m = marshal(params, vals);

    PlaceSet arg_sources;
    for (const auto& a : m.args) {
      if (a.formal.root != "%branch") arg_sources.insert(a.sources.begin(), a.sources.end());
    }
    for (const auto& cap : info.captures) {
      auto t = gamma_.type_of(cap, structs_);
      if (!t) continue;
      for (const auto& leaf : leaves(cap, *t, structs_)) {
        for (const auto& s : arg_sources) {
          if (!check_flow("capture-flow", span, {s}, AccessExpr::of_place(leaf.place))) break;
        }
      }
    }

    PlaceSet carried = arg_sources;
    PlaceSet own = pi_.get(self);
    own.insert(self);
    carried.merge(own);
    carried.insert(xi_.begin(), xi_.end());
    auto write = [&](const Place& dest, const std::string& kind) {
      check_flow(kind, span, carried, AccessExpr::of_place(dest));
      pi_.add(dest, carried);
    };
    for (const auto& mp : info.mutated) {
      auto t = gamma_.type_of(mp, structs_);
      if (!t) continue;
      for (const auto& leaf : leaves(mp, *t, structs_)) write(anchor(leaf.place), "capture-flow");
    }
    for (const auto& out : m.outs) write(out.actual, "flow-violation");
  }

  // -- closures -------------------------------------------------------------

  /// Free variables of a closure body, with the places it assigns or
  /// uniquely borrows.
  struct FreeVars {
    std::set<std::string> names;
    std::vector<PlaceExpr> written;
  };

  void free_vars(const Expr& e, std::vector<std::set<std::string>>& bound, FreeVars& out) const {
    auto is_bound = [&](const std::string& n) {
      return std::any_of(bound.begin(), bound.end(), [&](const auto& s) { return s.count(n) != 0; });
    };
    auto use = [&](const std::string& n) {
      if (!is_bound(n)) out.names.insert(n);
    };
    auto write = [&](const PlaceExpr& p) {
      if (!is_bound(p.root)) out.written.push_back(p);
    };
    auto operand = [&](const AccessExpr& a) {
      if (a.is_place()) use(a.place.root);
    };
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, UseExpr>) {
            use(n.place.root);
          } else if constexpr (std::is_same_v<T, TupleExpr>) {
            for (const auto& x : n.elems) free_vars(*x, bound, out);
          } else if constexpr (std::is_same_v<T, StructExpr>) {
            for (const auto& [f, x] : n.fields) free_vars(*x, bound, out);
          } else if constexpr (std::is_same_v<T, VariantExpr>) {
            free_vars(*n.payload, bound, out);
          } else if constexpr (std::is_same_v<T, BorrowExpr>) {
            use(n.place.root);
            if (n.own == Ownership::Uniq) write(n.place);
          } else if constexpr (std::is_same_v<T, LetExpr>) {
            free_vars(*n.init, bound, out);
            bound.emplace_back();
            bound.back().insert(n.name);
            for (const auto& r : n.with_rules) {
              operand(r.source);
              operand(r.dest);
            }
            free_vars(*n.body, bound, out);
            bound.pop_back();
          } else if constexpr (std::is_same_v<T, AssignExpr>) {
            free_vars(*n.value, bound, out);
            use(n.target.root);
            write(n.target);
          } else if constexpr (std::is_same_v<T, IfExpr>) {
            free_vars(*n.guard, bound, out);
            free_vars(*n.then_branch, bound, out);
            free_vars(*n.else_branch, bound, out);
          } else if constexpr (std::is_same_v<T, SeqExpr>) {
            free_vars(*n.first, bound, out);
            free_vars(*n.second, bound, out);
          } else if constexpr (std::is_same_v<T, BlockExpr>) {
            free_vars(*n.body, bound, out);
          } else if constexpr (std::is_same_v<T, FlowDeclExpr>) {
            operand(n.rule.source);
            operand(n.rule.dest);
          } else if constexpr (std::is_same_v<T, AllowExpr>) {
            free_vars(*n.inner, bound, out);
          } else if constexpr (std::is_same_v<T, CallExpr>) {
            if (gamma_.lookup(n.callee)) use(n.callee);
            for (const auto& x : n.args) free_vars(*x, bound, out);
          } else if constexpr (std::is_same_v<T, ClosureExpr>) {
            bound.emplace_back();
            for (const auto& p : n.params) bound.back().insert(p.name);
            free_vars(*n.body, bound, out);
            bound.pop_back();
          }
        },
        e.node);
  }

  Value check_node(const ClosureExpr& c, const Expr& e) {
    FreeVars fv;
    std::vector<std::set<std::string>> bound(1);
    for (const auto& p : c.params) bound[0].insert(p.name);
    free_vars(*c.body, bound, fv);

    ClosureInfo info;
    for (const auto& p : c.params) info.params.push_back(p.type);
    for (const auto& n : fv.names) {
      // Unknown names are reported when the body is checked.
      if (auto internal = gamma_.lookup(n)) info.captures.emplace_back(*internal);
    }
    for (const auto& w : fv.written) {
      if (is_poisoned(w.root)) continue;
      auto res = resolve_loans(gamma_, pi_, w, Ownership::Uniq, structs_);
      if (!res.ok()) continue;
      for (const auto& l : res.loans) info.mutated.insert(l.place);
    }

    Value v;
    PlaceSet deps;
    for (const auto& cap : info.captures) {
      const Type& t = gamma_.types.at(cap.root);
      deps.merge(delta_leaves(read_place(cap, t)));
      for (const auto& [ctx, refs] : read_origins(cap, t)) deps.merge(referent_deps(refs));
    }

    Snapshot outer = save();
    xi_.clear();
    gamma_.scopes.emplace_back();
    for (const auto& p : c.params) {
      std::string internal = fresh(p.name);
      gamma_.bind(p.name, internal, p.type);
      gamma_.params.insert(internal);
    }
    const int id = next_closure_++;
    closures_[id] = info;
    const auto moved_before = gamma_.moved;
    check(*c.body);
    for (const auto& m : gamma_.moved) {
      if (moved_before.count(m)) continue;
      bool captured = std::any_of(info.captures.begin(), info.captures.end(),
                                  [&](const Place& cap) { return cap.root == m.root; });
      if (captured) {
        error("closure-moves-capture", e.span, "closure moves captured `" + m.str() + "`");
      }
    }
    restore(std::move(outer));

    v.type = Type::closure(id, info.params);
    v.delta = DeltaTree::single(std::move(deps));
    return v;
  }
};

Shared make_shared(const Program& prog, const CheckOptions& opts) {
  Shared shared{prog, opts, opts.io_alias ? *opts.io_alias : prog.io_functions(), {}};
  for (const auto& f : prog.functions) {
    FunctionChecker fc(shared, f);
    fc.enter();
    shared.contracts.emplace(f.name, fc.policy());
  }
  return shared;
}

struct FunctionResult {
  std::vector<Diagnostic> diags;
  FunctionDump dump;
};

FunctionResult check_function(const Shared& shared, const FuncDef& f) {
  FunctionResult out;
  out.dump.file = shared.prog.file;
  out.dump.function = f.name;
  FunctionChecker fc(shared, f);
  try {
    fc.run();
    out.diags = std::move(fc.diags);
    if (shared.opts.record_dumps) {
      out.dump.policy = fc.declared;
      out.dump.deps = fc.deps();
    }
  } catch (const std::exception& e) {
    out.diags = std::move(fc.diags);
    Diagnostic d;
    d.file = shared.prog.file;
    d.severity = Severity::Internal;
    d.kind = "internal";
    d.span = f.span;
    d.message = std::string("internal checker error in `") + f.name + "`: " + e.what();
    out.diags.push_back(std::move(d));
  }
  return out;
}

CheckReport assemble(std::vector<FunctionResult>& results, bool record_dumps) {
  CheckReport report;
  for (auto& r : results) {
    report.diagnostics.insert(report.diagnostics.end(), std::make_move_iterator(r.diags.begin()),
                              std::make_move_iterator(r.diags.end()));
    if (record_dumps) report.dumps.push_back(std::move(r.dump));
  }
  sort_diagnostics(report.diagnostics);
  report.diagnostics.erase(std::unique(report.diagnostics.begin(), report.diagnostics.end()),
                           report.diagnostics.end());
  return report;
}

}  // namespace

CheckReport check_program_report_serial(const Program& prog, const CheckOptions& opts) {
  const Shared shared = make_shared(prog, opts);
  std::vector<FunctionResult> results;
  results.reserve(prog.functions.size());
  for (const auto& f : prog.functions) results.push_back(check_function(shared, f));
  return assemble(results, opts.record_dumps);
}

CheckReport check_program_report(const Program& prog, const CheckOptions& opts) {
  const Shared shared = make_shared(prog, opts);
  const auto n = static_cast<std::ptrdiff_t>(prog.functions.size());
  std::vector<FunctionResult> results(prog.functions.size());
#ifdef FLOWCK_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    results[static_cast<size_t>(i)] = check_function(shared, prog.functions[static_cast<size_t>(i)]);
  }
  return assemble(results, opts.record_dumps);
}

std::vector<Diagnostic> check_program(const Program& prog, const CheckOptions& opts) {
  return check_program_report(prog, opts).diagnostics;
}

std::vector<Diagnostic> check_program_serial(const Program& prog, const CheckOptions& opts) {
  return check_program_report_serial(prog, opts).diagnostics;
}

}  // namespace flowck
