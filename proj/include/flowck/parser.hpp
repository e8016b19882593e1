#ifndef FLOWCK_PARSER_HPP
#define FLOWCK_PARSER_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowck/core.hpp"

namespace flowck {

struct ParseError {
  SourceSpan span;
  std::string expected;  // short summary of what would have been accepted
  std::string message;
};

struct ParseResult {
  std::optional<Program> program;
  std::vector<ParseError> errors;
  bool ok() const { return program.has_value() && errors.empty(); }
};

/// Parses one `.ifc` file. Statements after a syntax error are resynchronized
/// at the next `;` or `}` so one run reports independent errors.
ParseResult parse_program(std::string_view text, std::string file = {}, uint32_t file_id = 0);

struct RuleParseResult {
  std::optional<FlowRule> rule;
  std::vector<ParseError> errors;
};

/// Parses `src -> dst` or `src ->! dst` (no leading `flow`).
RuleParseResult parse_flow_rule(std::string_view text);

std::string print_program(const Program& program);
std::string print_expr(const Expr& expr, int indent = 0);

/// Line/column of a byte offset (both 1-based).
std::pair<uint32_t, uint32_t> line_col(std::string_view text, uint32_t offset);

}  // namespace flowck

#endif  // FLOWCK_PARSER_HPP
