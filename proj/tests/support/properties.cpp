#include "properties.hpp"

#include <algorithm>
#include <sstream>

#include "closure_oracle.hpp"
#include "flowck/checker.hpp"
#include "flowck/deps.hpp"
#include "flowck/parser.hpp"
#include "flowck/policy.hpp"
#include "policy_gen.hpp"
#include "type_gen.hpp"

namespace props {

using namespace flowck;

namespace {

std::string describe(const std::vector<oracle::ScopedRule>& rules, const Place& s, const AccessExpr& d) {
  std::ostringstream out;
  for (const auto& r : rules) out << "  [" << r.scope << "] " << r.rule.str() << "\n";
  out << "  query " << s.str() << " => " << d.str();
  return out.str();
}

bool is_leaf_set(const std::vector<Leaf>& ls, const Place& p) {
  if (ls.empty()) return false;
  for (size_t i = 0; i < ls.size(); ++i) {
    if (!p.is_prefix_of(ls[i].place)) return false;
    for (size_t j = 0; j < ls.size(); ++j) {
      if (i != j && is_prefix(ls[i].context, ls[j].context)) return false;
    }
  }
  return true;
}

}  // namespace

Outcome policy_case(std::mt19937_64& rng, int queries) {
  auto rules = gen::random_rule_set(rng);
  PolicyEnv env = gen::build_env(rules);
  PolicyEnv shuffled = gen::build_env(gen::shuffle_within_scopes(rng, rules));
  for (int q = 0; q < queries; ++q) {
    Place src = gen::random_query_source(rng);
    AccessExpr dst = gen::random_query_dest(rng);
    oracle::Resolution expected = oracle::resolve(rules, src, dst);
    Permission got = get_min_perms(src, dst, env);
    bool same = expected.permit == got.permit && expected.defaulted == !got.rule.has_value() &&
                expected.source == got.source && expected.dest == got.dest;
    if (!same) {
      return {false, "oracle mismatch: expected " + expected.source.str() + " / " + expected.dest.str() +
                         (expected.permit ? " permit" : " deny") + ", got " + got.source.str() + " / " +
                         got.dest.str() + (got.permit ? " permit" : " deny") + "\n" +
                         describe(rules, src, dst)};
    }
    if (got.rule && (!covers(got.source, AccessExpr::of_place(src)) || !covers(got.dest, dst))) {
      return {false, "result does not cover the query\n" + describe(rules, src, dst)};
    }
    Permission perm = get_min_perms(src, dst, shuffled);
    if (perm.permit != got.permit || perm.source != got.source || perm.dest != got.dest) {
      return {false, "order dependence\n" + describe(rules, src, dst)};
    }
  }
  return {};
}

Outcome delta_laws_case(std::mt19937_64& rng, int max_depth) {
  StructTable structs = gen::random_structs(rng);
  Type t = gen::random_type(rng, structs, std::uniform_int_distribution<int>(1, max_depth)(rng));
  auto a = gen::random_delta(rng, t, structs);
  auto b = gen::random_delta(rng, t, structs);
  auto c = gen::random_delta(rng, t, structs);
  const auto empty = delta_empty(t, structs);
  const PlaceSet none;
  const std::string ty = " at type " + t.str();

  auto ab_c = delta_merge(delta_merge(a, b, none, t, structs), c, none, t, structs);
  auto a_bc = delta_merge(a, delta_merge(b, c, none, t, structs), none, t, structs);
  if (!(ab_c == a_bc)) return {false, "merge is not associative" + ty};
  if (!(delta_merge(a, b, none, t, structs) == delta_merge(b, a, none, t, structs)))
    return {false, "merge is not commutative" + ty};
  if (!(delta_merge(a, a, none, t, structs) == a)) return {false, "merge is not idempotent" + ty};
  if (!(delta_merge(a, empty, none, t, structs) == a) || !(delta_merge(empty, a, none, t, structs) == a))
    return {false, "empty is not the merge identity" + ty};

  // Read-back after a strong update.
  Place p("v", {"0"});
  DepEnv pi;
  for (const auto& leaf : leaves(p, t, structs)) pi.set(leaf.place, gen::random_places(rng));
  PlaceSet extra = gen::random_places(rng, 2);
  assign_deps(pi, p, t, a, extra, structs);
  PlaceSet expect = delta_leaves(a);
  expect.insert(extra.begin(), extra.end());
  for (const auto& leaf : leaves(p, t, structs)) expect.insert(leaf.place);
  if (delta_leaves(delta_place(p, t, pi, structs)) != expect) return {false, "assign/read-back law fails" + ty};
  for (const auto& [leaf, deps] : pi.entries()) {
    auto ls = leaves(p, t, structs);
    bool is_leaf = std::any_of(ls.begin(), ls.end(), [&](const Leaf& l) { return l.place == leaf; });
    if (!is_leaf) return {false, "dependency key " + leaf.str() + " is not a leaf" + ty};
  }

  // Leaf partition.
  auto ls = leaves(p, t, structs);
  if (!is_leaf_set(ls, p)) return {false, "leaves overlap or escape the place" + ty};
  std::vector<Path> got;
  for (const auto& l : ls) got.push_back(l.context);
  auto want = gen::scalar_paths(t, structs);
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  if (got != want) return {false, "leaf contexts differ from the scalar positions" + ty};
  return {};
}

ProgramOutcome closure_case(std::mt19937_64& rng, const gen::ProgramShape& shape) {
  ProgramOutcome out;
  out.program = gen::random_program(rng, shape);
  auto parsed = parse_program(out.program, "generated.ifc");
  if (!parsed.ok()) {
    out.ok = false;
    out.detail = "generated program does not parse: " + parsed.errors.front().message;
    return out;
  }
  auto diags = check_program(*parsed.program);
  for (const auto& d : diags) {
    if (d.severity != Severity::Violation) {
      out.ok = false;
      out.detail = "unexpected " + d.kind + ": " + d.message;
      return out;
    }
  }
  oracle::ClosureResult closure;
  try {
    closure = oracle::dependency_closure(*parsed.program, "main");
  } catch (const oracle::Unsupported& e) {
    out.ok = false;
    out.detail = std::string("oracle cannot handle the program: ") + e.what();
    return out;
  }
  out.accepted = diags.empty();
  if (out.accepted) {
    if (!closure.denied.empty()) {
      auto [s, d] = *closure.denied.begin();
      out.ok = false;
      out.detail = "accepted, but the oracle denies " + s + " -> " + d;
    }
    return out;
  }
  for (const auto& d : diags) {
    if (!closure.denied.count({d.source, d.destination})) {
      out.ok = false;
      out.detail = "reported " + d.source + " -> " + d.destination + " is not an oracle-denied pair";
      return out;
    }
  }
  return out;
}

}  // namespace props
