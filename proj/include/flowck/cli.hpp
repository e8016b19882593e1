#ifndef FLOWCK_CLI_HPP
#define FLOWCK_CLI_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowck/diagnostic.hpp"
#include "flowck/parser.hpp"

namespace flowck {

enum class OutputMode { Human, Json };

struct RunConfig {
  std::vector<std::string> inputs;
  OutputMode mode = OutputMode::Human;
  std::optional<size_t> max_errors;
  bool dump_policy = false;
  bool dump_deps = false;
  std::optional<std::string> io_alias_path;
  /// Overrides FLOWCK_COLOR; tests pin it off.
  std::optional<bool> color;
};

/// Exit codes.
inline constexpr int kExitClean = 0;
inline constexpr int kExitViolations = 1;
inline constexpr int kExitFatal = 2;

/// Checks every input and writes the report. Returns 0 when no diagnostics
/// were produced, 2 on parse, internal, or I/O failures, 1 otherwise.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Newline-separated function names. Blank lines and `//` comments are
/// skipped. Throws std::runtime_error if the file cannot be read.
std::vector<std::string> load_io_alias(const std::string& path, std::ostream& err);

/// Human rendering of one diagnostic against its source text.
std::string render_diagnostic(const Diagnostic& d, const std::string& source_text, bool color);

/// Parse errors as diagnostics.
std::vector<Diagnostic> parse_diagnostics(const std::string& file, const std::vector<ParseError>& errors);

}  // namespace flowck

#endif  // FLOWCK_CLI_HPP
