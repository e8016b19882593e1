#include "flowck/diagnostic.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace flowck {

using nlohmann::json;

std::string to_string(Severity s) {
  switch (s) {
    case Severity::Violation:
      return "violation";
    case Severity::Error:
      return "error";
    case Severity::Warning:
      return "warning";
    case Severity::Internal:
      return "internal";
  }
  return "error";
}

std::optional<Severity> severity_from_string(const std::string& s) {
  if (s == "violation") return Severity::Violation;
  if (s == "error") return Severity::Error;
  if (s == "warning") return Severity::Warning;
  if (s == "internal") return Severity::Internal;
  return std::nullopt;
}

namespace {

auto sort_key(const Diagnostic& d) {
  return std::tie(d.file, d.span.start, d.kind, d.span.end, d.source, d.destination, d.message);
}

json span_json(const SourceSpan& s) {
  return json{{"file_id", s.file_id}, {"start", s.start}, {"end", s.end},
              {"line", s.line},       {"column", s.column}};
}

SourceSpan span_from(const json& j) {
  SourceSpan s;
  s.file_id = j.at("file_id").get<uint32_t>();
  s.start = j.at("start").get<uint32_t>();
  s.end = j.at("end").get<uint32_t>();
  s.line = j.at("line").get<uint32_t>();
  s.column = j.at("column").get<uint32_t>();
  return s;
}

json rule_json(const std::optional<RuleRef>& r) {
  if (!r) return nullptr;
  return json{{"text", r->text}, {"permit", r->permit}, {"span", span_json(r->span)}};
}

std::optional<RuleRef> rule_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return RuleRef{j.at("text").get<std::string>(), j.at("permit").get<bool>(), span_from(j.at("span"))};
}

json rule_decl_json(const FlowRule& r) {
  return json{{"rule", r.str()},
              {"source", r.source.str()},
              {"dest", r.dest.str()},
              {"permit", r.permit},
              {"span", span_json(r.span)}};
}

}  // namespace

bool diagnostic_less(const Diagnostic& a, const Diagnostic& b) { return sort_key(a) < sort_key(b); }

void sort_diagnostics(std::vector<Diagnostic>& diags) {
  std::stable_sort(diags.begin(), diags.end(), diagnostic_less);
}

std::string diagnostics_to_json(const std::vector<Diagnostic>& diags, int indent) {
  json arr = json::array();
  for (const auto& d : diags) {
    arr.push_back(json{{"schema", kSchemaVersion},
                       {"file", d.file},
                       {"severity", to_string(d.severity)},
                       {"kind", d.kind},
                       {"span", span_json(d.span)},
                       {"source", d.source},
                       {"destination", d.destination},
                       {"rule", rule_json(d.rule)},
                       {"callee_rule", rule_json(d.callee_rule)},
                       {"message", d.message}});
  }
  return arr.dump(indent);
}

std::vector<Diagnostic> diagnostics_from_json(const std::string& text) {
  std::vector<Diagnostic> out;
  try {
    json arr = json::parse(text);
    if (!arr.is_array()) throw std::runtime_error("diagnostics JSON must be an array");
    for (const auto& j : arr) {
      if (j.at("schema").get<int>() != kSchemaVersion)
        throw std::runtime_error("unsupported diagnostics schema");
      Diagnostic d;
      d.file = j.at("file").get<std::string>();
      auto sev = severity_from_string(j.at("severity").get<std::string>());
      if (!sev) throw std::runtime_error("unknown severity");
      d.severity = *sev;
      d.kind = j.at("kind").get<std::string>();
      d.span = span_from(j.at("span"));
      d.source = j.at("source").get<std::string>();
      d.destination = j.at("destination").get<std::string>();
      d.rule = rule_from(j.at("rule"));
      d.callee_rule = rule_from(j.at("callee_rule"));
      d.message = j.at("message").get<std::string>();
      out.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed diagnostics JSON: ") + e.what());
  }
  return out;
}

std::string policy_dump_json(const std::vector<FunctionDump>& dumps) {
  json arr = json::array();
  for (const auto& d : dumps) {
    json rules = json::array();
    for (const auto& [depth, rule] : d.policy) {
      json r = rule_decl_json(rule);
      r["scope_depth"] = depth;
      rules.push_back(std::move(r));
    }
    arr.push_back(json{{"file", d.file}, {"function", d.function}, {"rules", std::move(rules)}});
  }
  return arr.dump(2);
}

std::string deps_dump_json(const std::vector<FunctionDump>& dumps) {
  json arr = json::array();
  for (const auto& d : dumps) {
    json deps = json::object();
    for (const auto& [leaf, set] : d.deps.entries()) {
      json list = json::array();
      for (const auto& p : set) list.push_back(p.str());
      // Internal names keep shadowed bindings apart.
      std::string key = leaf.root;
      for (const auto& sel : leaf.path) key += "." + sel;
      deps[key] = std::move(list);
    }
    arr.push_back(json{{"file", d.file}, {"function", d.function}, {"deps", std::move(deps)}});
  }
  return arr.dump(2);
}

}  // namespace flowck
