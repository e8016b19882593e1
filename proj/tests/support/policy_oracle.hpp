#ifndef FLOWCK_TEST_POLICY_ORACLE_HPP
#define FLOWCK_TEST_POLICY_ORACLE_HPP

// Brute-force flow-rule resolution. Enumerates every applicable rule and
// keeps the ones no other applicable rule beats, using only the pairwise
// comparison (both operands at least as specific, one strictly). Shares no
// code with the library's resolver.

#include <vector>

#include "flowck/core.hpp"

namespace oracle {

struct ScopedRule {
  size_t scope = 0;  // 0 = outermost
  flowck::FlowRule rule;
};

struct Resolution {
  bool permit = true;
  bool defaulted = true;
  flowck::AccessExpr source;
  flowck::AccessExpr dest;
};

bool covers(const flowck::AccessExpr& a, const flowck::AccessExpr& b);

/// Rules in declaration order, outer scopes first.
Resolution resolve(const std::vector<ScopedRule>& rules, const flowck::Place& src,
                   const flowck::AccessExpr& dst);

}  // namespace oracle

#endif
