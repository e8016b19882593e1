#include "flowck/policy.hpp"

#include <algorithm>
#include <tuple>

namespace flowck {

namespace {

bool ops_prefix(const std::vector<PlaceOp>& prefix, const std::vector<PlaceOp>& ops) {
  if (prefix.size() > ops.size()) return false;
  return std::equal(prefix.begin(), prefix.end(), ops.begin());
}

}  // namespace

bool covers(const AccessExpr& a1, const AccessExpr& a2) {
  using K = AccessExpr::Kind;
  switch (a1.kind) {
    case K::Wildcard:
      return a2.kind == K::Wildcard || a2.kind == K::Place;
    case K::Place:
      return a2.kind == K::Place && a1.place.root == a2.place.root &&
             ops_prefix(a1.place.ops, a2.place.ops);
    case K::Fn:
    case K::FnAlias:
      return a1 == a2;
  }
  return false;
}

ContradictionError::ContradictionError(FlowRule existing, FlowRule incoming)
    : std::runtime_error("flow rule `" + incoming.str() + "` contradicts `" + existing.str() + "`"),
      existing_(std::move(existing)),
      incoming_(std::move(incoming)) {}

void PolicyEnv::pop_scope() {
  if (scopes_.size() <= 1) throw std::logic_error("PolicyEnv: popping the outermost scope");
  scopes_.pop_back();
}

void PolicyEnv::declare(FlowRule rule) {
  if (rule.source.is_wildcard()) throw std::invalid_argument("`*` cannot be a flow source");
  if (rule.source.is_fn() || rule.source.kind == AccessExpr::Kind::FnAlias)
    throw std::invalid_argument("a function cannot be a flow source");
  auto& scope = scopes_.back();
  for (const auto& r : scope) {
    if (r.source == rule.source && r.dest == rule.dest && r.permit != rule.permit)
      throw ContradictionError(r, rule);
  }
  scope.push_back(std::move(rule));
}

std::vector<FlowRule> PolicyEnv::flattened() const {
  std::vector<FlowRule> out;
  for (const auto& s : scopes_) out.insert(out.end(), s.begin(), s.end());
  return out;
}

bool PolicyEnv::empty() const {
  return std::all_of(scopes_.begin(), scopes_.end(), [](const auto& s) { return s.empty(); });
}

// Every applicable rule's source is a prefix of the queried source and its
// destination a prefix of the queried destination (or `*`), so applicable
// rules sit on a grid indexed by (source specificity, dest specificity) and
// "more specific in both" is grid dominance. Later declarations overwrite
// their cell, which is how inner scopes shadow outer ones.
Permission get_min_perms(const Place& src, const AccessExpr& dst, const PolicyEnv& env) {
  const AccessExpr query_src = AccessExpr::of_place(src);
  const int rows = 2 + static_cast<int>(src.path.size());
  const int cols = std::max(2, 1 + specificity(dst));
  std::vector<const FlowRule*> grid(static_cast<size_t>(rows * cols), nullptr);

  for (const auto& scope : env.scopes()) {
    for (const auto& rule : scope) {
      if (!covers(rule.source, query_src) || !covers(rule.dest, dst)) continue;
      int i = specificity(rule.source);
      int j = specificity(rule.dest);
      grid[static_cast<size_t>(i * cols + j)] = &rule;
    }
  }

  // Pareto frontier: per row keep the deepest occupied column; a row's
  // candidate is maximal iff it is deeper than every candidate below it.
  std::vector<const FlowRule*> frontier;
  bool default_maximal = true;
  int best_col = -1;
  for (int i = rows - 1; i >= 0; --i) {
    int col = -1;
    for (int j = cols - 1; j >= 0; --j) {
      if (grid[static_cast<size_t>(i * cols + j)]) {
        col = j;
        break;
      }
    }
    if (col > best_col) {
      frontier.push_back(grid[static_cast<size_t>(i * cols + col)]);
      best_col = col;
    }
  }
  // The implicit default sits at (0, 0) and is dominated by any rule.
  default_maximal = frontier.empty();

  if (default_maximal) {
    return Permission{AccessExpr::wildcard(), AccessExpr::wildcard(), true, std::nullopt};
  }

  bool any_deny = std::any_of(frontier.begin(), frontier.end(),
                              [](const FlowRule* r) { return !r->permit; });
  const FlowRule* chosen = nullptr;
  for (const FlowRule* r : frontier) {
    if (r->permit == !any_deny) {
      if (!chosen ||
          std::make_tuple(r->source.str(), r->dest.str()) <
              std::make_tuple(chosen->source.str(), chosen->dest.str()))
        chosen = r;
    }
  }
  return Permission{chosen->source, chosen->dest, chosen->permit, *chosen};
}

AllowResult is_allowed(const PlaceSet& sources, const std::vector<AccessExpr>& dests,
                       const PolicyEnv& env) {
  if (env.empty()) return {};
  for (const auto& s : sources) {
    for (const auto& d : dests) {
      Permission p = get_min_perms(s, d, env);
      if (!p.permit) return AllowResult{false, FlowWitness{s, d, std::move(p)}};
    }
  }
  return {};
}

namespace {

// Expands one operand; nullopt when the rule must be dropped.
std::optional<std::vector<AccessExpr>> subst_operand(const AccessExpr& a,
                                                     const Substitution& subst) {
  if (!a.is_place()) return std::vector<AccessExpr>{a};
  auto it = subst.find(a.place.root);
  if (it == subst.end() || it->second.empty()) return std::nullopt;
  std::vector<PlaceOp> tail = a.place.ops;
  if (!tail.empty() && tail.front().kind == PlaceOp::Kind::Deref) tail.erase(tail.begin());
  std::vector<AccessExpr> out;
  for (const auto& actual : it->second) {
    PlaceExpr pe = PlaceExpr::from_place(actual);
    pe.ops.insert(pe.ops.end(), tail.begin(), tail.end());
    out.push_back(AccessExpr::of_place(std::move(pe)));
  }
  return out;
}

}  // namespace

std::vector<FlowRule> substitute(const std::vector<FlowRule>& contract, const Substitution& subst) {
  std::vector<FlowRule> out;
  for (const auto& rule : contract) {
    auto srcs = subst_operand(rule.source, subst);
    auto dsts = subst_operand(rule.dest, subst);
    if (!srcs || !dsts) continue;
    for (const auto& s : *srcs) {
      for (const auto& d : *dsts) {
        out.push_back(FlowRule{s, d, rule.permit, rule.span});
      }
    }
  }
  return out;
}

CallCheck caller_implies(const PolicyEnv& caller, const PolicyEnv& callee_contract,
                         const std::vector<ArgLeaf>& args, const std::vector<OutLeaf>& outs,
                         const Substitution& subst) {
  CallCheck result;
  std::set<std::pair<Place, Place>> reported;
  for (const auto& out : outs) {
    auto& reach = result.reaching[out.actual];
    const AccessExpr formal_dest = AccessExpr::of_place(out.formal);
    const AccessExpr actual_dest = AccessExpr::of_place(out.actual);
    for (const auto& arg : args) {
      Permission callee = get_min_perms(arg.formal, formal_dest, callee_contract);
      if (!callee.permit) continue;
      std::optional<FlowRule> callee_rule;
      if (callee.rule) {
        auto mapped = substitute({*callee.rule}, subst);
        callee_rule = mapped.empty() ? *callee.rule : mapped.front();
      }
      for (const auto& s : arg.sources) {
        reach.insert(s);
        Permission p = get_min_perms(s, actual_dest, caller);
        if (p.permit || !reported.emplace(s, out.actual).second) continue;
        result.violations.push_back(CallViolation{s, out.actual, std::move(p), callee_rule});
      }
    }
  }
  return result;
}

}  // namespace flowck
