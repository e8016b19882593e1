#include "doctest.h"
#include "flowck/diagnostic.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace flowck;

namespace {

Diagnostic sample(uint32_t start, std::string kind) {
  Diagnostic d;
  d.file = "a.ifc";
  d.severity = Severity::Violation;
  d.kind = std::move(kind);
  d.span = SourceSpan{0, start, start + 4, 3, 5};
  d.source = "s";
  d.destination = "t";
  d.rule = RuleRef{"s ->! *", false, SourceSpan{0, 1, 8, 1, 2}};
  d.message = "flow from `s` to `t` is denied";
  return d;
}

}  // namespace

TEST_CASE("diagnostic JSON round trip") {
  std::vector<Diagnostic> diags{sample(10, "flow-violation"), sample(30, "call-flow")};
  diags[1].callee_rule = RuleRef{"v -> out", true, SourceSpan{0, 2, 9, 2, 1}};
  diags[1].severity = Severity::Error;
  CHECK(diagnostics_from_json(diagnostics_to_json(diags)) == diags);
  CHECK(diagnostics_from_json(diagnostics_to_json(diags, -1)) == diags);
}

TEST_CASE("round trip on checker output") {
  auto text = testutil::fn_program("s: u32", "flow s ->! *;\nlet t: u32 = copy s;\nlet u: u32 = copy t;");
  auto diags = testutil::check(text);
  REQUIRE_FALSE(diags.empty());
  CHECK(diagnostics_from_json(diagnostics_to_json(diags)) == diags);
}

TEST_CASE("every object carries the schema version") {
  auto j = nlohmann::json::parse(diagnostics_to_json({sample(1, "flow-violation")}));
  REQUIRE(j.is_array());
  CHECK(j[0]["schema"] == 1);
  CHECK(j[0]["severity"] == "violation");
  CHECK(j[0]["callee_rule"].is_null());
  CHECK(nlohmann::json::parse(diagnostics_to_json({})).empty());
}

TEST_CASE("malformed input is rejected") {
  CHECK_THROWS_AS(diagnostics_from_json("{"), std::runtime_error);
  CHECK_THROWS_AS(diagnostics_from_json("{}"), std::runtime_error);
  CHECK_THROWS_AS(diagnostics_from_json("[{\"schema\": 2}]"), std::runtime_error);
  auto j = nlohmann::json::parse(diagnostics_to_json({sample(1, "flow-violation")}));
  j[0]["severity"] = "fatal";
  CHECK_THROWS_AS(diagnostics_from_json(j.dump()), std::runtime_error);
}

TEST_CASE("ordering is by file, span, then kind") {
  std::vector<Diagnostic> diags{sample(30, "fn-flow"), sample(10, "flow-violation"),
                                sample(10, "call-flow")};
  diags.push_back(sample(5, "flow-violation"));
  diags.back().file = "b.ifc";
  sort_diagnostics(diags);
  CHECK(diags[0].kind == "call-flow");
  CHECK(diags[1].kind == "flow-violation");
  CHECK(diags[2].kind == "fn-flow");
  CHECK(diags[3].file == "b.ifc");
}

TEST_CASE("severity names") {
  for (auto s : {Severity::Violation, Severity::Error, Severity::Warning, Severity::Internal}) {
    CHECK(severity_from_string(to_string(s)) == s);
  }
  CHECK_FALSE(severity_from_string("nope"));
}

TEST_CASE("policy and dependency dumps") {
  CheckOptions opts;
  opts.record_dumps = true;
  auto prog = testutil::parse_ok(
      testutil::fn_program("s: u32", "flow s ->! *;\nlet t: u32 = copy s with flow s -> t;"));
  auto report = check_program_report(prog, opts);
  auto policy = nlohmann::json::parse(policy_dump_json(report.dumps));
  REQUIRE(policy.size() == 1);
  CHECK(policy[0]["function"] == "main");
  REQUIRE(policy[0]["rules"].size() == 2);
  CHECK(policy[0]["rules"][0]["rule"] == "s ->! *");
  CHECK(policy[0]["rules"][1]["rule"] == "s -> t");
  CHECK(policy[0]["rules"][1]["scope_depth"].get<int>() > policy[0]["rules"][0]["scope_depth"].get<int>());
  auto deps = nlohmann::json::parse(deps_dump_json(report.dumps));
  CHECK(deps[0]["deps"]["t"] == nlohmann::json::array({"s"}));
}
