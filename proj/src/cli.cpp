#include "flowck/cli.hpp"

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "flowck/checker.hpp"
#include "json.hpp"

namespace flowck {

namespace {

struct FileResult {
  std::string text;
  bool readable = true;
  std::vector<Diagnostic> diags;
  std::vector<FunctionDump> dumps;
};

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool use_color(const RunConfig& config) {
  if (config.color) return *config.color;
  const char* env = std::getenv("FLOWCK_COLOR");
  if (env && std::string(env) == "never") return false;
  return isatty(STDOUT_FILENO) != 0;
}

std::string line_text(const std::string& text, uint32_t line) {
  uint32_t current = 1;
  size_t start = 0;
  while (current < line) {
    size_t nl = text.find('\n', start);
    if (nl == std::string::npos) return {};
    start = nl + 1;
    ++current;
  }
  size_t end = text.find('\n', start);
  return text.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

const char* severity_color(Severity s) {
  switch (s) {
    case Severity::Violation:
    case Severity::Error:
      return "\033[1;31m";
    case Severity::Warning:
      return "\033[1;33m";
    case Severity::Internal:
      return "\033[1;35m";
  }
  return "";
}

bool fatal(const Diagnostic& d) { return d.severity == Severity::Internal || d.kind == "parse-error"; }

}  // namespace

std::vector<Diagnostic> parse_diagnostics(const std::string& file, const std::vector<ParseError>& errors) {
  std::vector<Diagnostic> out;
  for (const auto& e : errors) {
    Diagnostic d;
    d.file = file;
    d.severity = Severity::Error;
    d.kind = "parse-error";
    d.span = e.span;
    d.message = e.message;
    if (!e.expected.empty()) d.message += " (expected " + e.expected + ")";
    out.push_back(std::move(d));
  }
  return out;
}

std::string render_diagnostic(const Diagnostic& d, const std::string& source_text, bool color) {
  const std::string bold = color ? "\033[1m" : "";
  const std::string reset = color ? "\033[0m" : "";
  const std::string sev = color ? severity_color(d.severity) : "";
  std::ostringstream out;
  out << sev << to_string(d.severity) << "[" << d.kind << "]" << reset << bold << ": " << d.message
      << reset << "\n";
  out << "  --> " << d.file << ":" << d.span.line << ":" << d.span.column << "\n";
  std::string line = line_text(source_text, d.span.line);
  if (!line.empty()) {
    std::string num = std::to_string(d.span.line);
    std::string gutter(num.size(), ' ');
    // Underline to the end of the span or the end of the line, whichever is first.
    size_t col = d.span.column > 0 ? d.span.column - 1 : 0;
    size_t len = d.span.end > d.span.start ? d.span.end - d.span.start : 1;
    if (col < line.size()) len = std::min(len, line.size() - col);
    out << gutter << " |\n";
    out << num << " | " << line << "\n";
    out << gutter << " | " << std::string(col, ' ') << sev << std::string(std::max<size_t>(len, 1), '^')
        << reset << "\n";
  }
  if (!d.source.empty() || !d.destination.empty()) {
    out << "   = flow: " << d.source << " -> " << d.destination << "\n";
  }
  if (d.rule) {
    out << "   = rule: `" << d.rule->text << "` at " << d.file << ":" << d.rule->span.line << ":"
        << d.rule->span.column << "\n";
  }
  if (d.callee_rule) {
    out << "   = callee rule: `" << d.callee_rule->text << "`\n";
  }
  return out.str();
}

std::vector<std::string> load_io_alias(const std::string& path, std::ostream& err) {
  std::string text;
  if (!read_file(path, text)) throw std::runtime_error("cannot read io alias file `" + path + "`");
  std::vector<std::string> names;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto comment = line.find("//");
    if (comment != std::string::npos) line.erase(comment);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    names.push_back(line.substr(b, e - b + 1));
  }
  if (names.empty()) {
    err << "warning: io alias file `" << path << "` is empty; `fn io!()` expands to no functions\n";
  }
  return names;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (config.inputs.empty()) {
    err << "error: no input files\n";
    return kExitFatal;
  }
  CheckOptions opts;
  opts.record_dumps = config.dump_policy || config.dump_deps;
  if (config.io_alias_path) {
    try {
      opts.io_alias = load_io_alias(*config.io_alias_path, err);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitFatal;
    }
  }

  const auto n = static_cast<std::ptrdiff_t>(config.inputs.size());
  std::vector<FileResult> results(config.inputs.size());
#ifdef FLOWCK_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::string& path = config.inputs[static_cast<size_t>(i)];
    FileResult& r = results[static_cast<size_t>(i)];
    if (!read_file(path, r.text)) {
      r.readable = false;
      continue;
    }
    ParseResult parsed = parse_program(r.text, path, static_cast<uint32_t>(i));
    if (!parsed.ok()) {
      r.diags = parse_diagnostics(path, parsed.errors);
      continue;
    }
    CheckReport report = check_program_report_serial(*parsed.program, opts);
    r.diags = std::move(report.diagnostics);
    r.dumps = std::move(report.dumps);
  }

  bool io_failure = false;
  std::vector<Diagnostic> all;
  std::vector<FunctionDump> dumps;
  std::map<std::string, const std::string*> texts;
  for (size_t i = 0; i < results.size(); ++i) {
    auto& r = results[i];
    if (!r.readable) {
      err << "error: cannot read `" << config.inputs[i] << "`\n";
      io_failure = true;
      continue;
    }
    texts.emplace(config.inputs[i], &r.text);
    all.insert(all.end(), r.diags.begin(), r.diags.end());
    dumps.insert(dumps.end(), r.dumps.begin(), r.dumps.end());
  }
  sort_diagnostics(all);

  int code = kExitClean;
  if (!all.empty()) code = kExitViolations;
  for (const auto& d : all) {
    if (fatal(d)) code = kExitFatal;
  }
  if (io_failure) code = kExitFatal;

  std::vector<Diagnostic> shown = all;
  if (config.max_errors && shown.size() > *config.max_errors) shown.resize(*config.max_errors);

  if (config.mode == OutputMode::Json) {
    if (config.dump_policy || config.dump_deps) {
      nlohmann::json doc;
      doc["schema"] = kSchemaVersion;
      doc["diagnostics"] = nlohmann::json::parse(diagnostics_to_json(shown));
      if (config.dump_policy) doc["policy"] = nlohmann::json::parse(policy_dump_json(dumps));
      if (config.dump_deps) doc["deps"] = nlohmann::json::parse(deps_dump_json(dumps));
      out << doc.dump(2) << "\n";
    } else {
      out << diagnostics_to_json(shown) << "\n";
    }
    return code;
  }

  const bool color = use_color(config);
  for (const auto& d : shown) {
    auto it = texts.find(d.file);
    out << render_diagnostic(d, it == texts.end() ? std::string() : *it->second, color) << "\n";
  }
  if (shown.size() < all.size()) {
    out << "... " << (all.size() - shown.size()) << " more diagnostic(s) not shown\n";
  }
  if (config.dump_policy) out << "policy:\n" << policy_dump_json(dumps) << "\n";
  if (config.dump_deps) out << "deps:\n" << deps_dump_json(dumps) << "\n";
  size_t files = config.inputs.size();
  if (all.empty()) {
    out << "checked " << files << " file(s): no diagnostics\n";
  } else {
    out << "checked " << files << " file(s): " << all.size() << " diagnostic(s)\n";
  }
  return code;
}

}  // namespace flowck
