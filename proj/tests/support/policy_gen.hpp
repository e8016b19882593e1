#ifndef FLOWCK_TEST_POLICY_GEN_HPP
#define FLOWCK_TEST_POLICY_GEN_HPP

// Random scoped rule sets and queries over a small vocabulary of roots and
// selectors, so rules overlap often.

#include <random>
#include <vector>

#include "flowck/core.hpp"
#include "flowck/policy.hpp"
#include "policy_oracle.hpp"

namespace gen {

struct RuleSetShape {
  int max_rules = 8;
  int max_depth = 3;   // selectors after the root
  int max_scopes = 3;
};

/// Contradiction-free within every scope: a rule whose (source, dest) pair
/// already appears in its scope with the opposite permission is skipped.
std::vector<oracle::ScopedRule> random_rule_set(std::mt19937_64& rng, const RuleSetShape& shape = {});

flowck::Place random_query_source(std::mt19937_64& rng, int max_depth = 3);
flowck::AccessExpr random_query_dest(std::mt19937_64& rng, int max_depth = 3);

/// Declares the rules into a fresh environment, pushing a scope whenever the
/// scope index grows.
flowck::PolicyEnv build_env(const std::vector<oracle::ScopedRule>& rules);

/// The same rules with declaration order shuffled inside each scope.
std::vector<oracle::ScopedRule> shuffle_within_scopes(std::mt19937_64& rng,
                                                      std::vector<oracle::ScopedRule> rules);

}  // namespace gen

#endif
