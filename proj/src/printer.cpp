#include "flowck/parser.hpp"

namespace flowck {

namespace {

std::string pad(int indent) { return std::string(static_cast<size_t>(indent) * 4, ' '); }

std::string params_str(const std::vector<Param>& params) {
  std::string out;
  for (size_t i = 0; i < params.size(); ++i) {
    if (i) out += ", ";
    out += params[i].name + ": " + params[i].type.str();
  }
  return out;
}

bool is_synthetic_unit(const Expr& e) {
  const auto* c = e.as<ConstExpr>();
  return c && c->synthetic;
}

bool block_like(const Expr& e) { return e.as<IfExpr>() || e.as<BlockExpr>(); }

void print_contents(const Expr& e, int indent, std::string& out);

std::string block_str(const Expr& contents, int indent) {
  std::string inner;
  print_contents(contents, indent + 1, inner);
  return "{\n" + inner + pad(indent) + "}";
}

std::string value_str(const Expr& e, int indent) {
  struct V {
    int indent;
    const Expr& self;
    std::string operator()(const ConstExpr& c) const {
      switch (c.kind) {
        case ConstExpr::Kind::Unit:
          return "()";
        case ConstExpr::Kind::Bool:
          return c.value ? "true" : "false";
        case ConstExpr::Kind::Int:
          return std::to_string(c.value);
      }
      return "()";
    }
    std::string operator()(const UseExpr& u) const {
      switch (u.mode) {
        case UseMode::Move:
          return "move " + u.place.str();
        case UseMode::Copy:
          return "copy " + u.place.str();
        case UseMode::Auto:
          return u.place.str();
      }
      return u.place.str();
    }
    std::string operator()(const TupleExpr& t) const {
      std::string out = "(";
      for (size_t i = 0; i < t.elems.size(); ++i) {
        if (i) out += ", ";
        out += value_str(*t.elems[i], indent);
      }
      if (t.elems.size() == 1) out += ",";
      return out + ")";
    }
    std::string operator()(const StructExpr& s) const {
      std::string out = s.name + " { ";
      for (size_t i = 0; i < s.fields.size(); ++i) {
        if (i) out += ", ";
        out += s.fields[i].first + ": " + value_str(*s.fields[i].second, indent);
      }
      return out + " }";
    }
    std::string operator()(const VariantExpr& v) const {
      return v.sum.str() + (v.right ? "::right(" : "::left(") + value_str(*v.payload, indent) + ")";
    }
    std::string operator()(const BorrowExpr& b) const {
      return std::string(b.own == Ownership::Uniq ? "&uniq " : "&shrd ") + b.place.str();
    }
    std::string operator()(const AllowExpr& a) const {
      return "allow " + value_str(*a.inner, indent);
    }
    std::string operator()(const IfExpr& i) const {
      std::string out = "if " + value_str(*i.guard, indent) + " " +
                        block_str(*i.then_branch->as<BlockExpr>()->body, indent);
      if (i.has_else) {
        out += " else ";
        if (i.else_branch->as<IfExpr>()) {
          out += value_str(*i.else_branch, indent);
        } else {
          out += block_str(*i.else_branch->as<BlockExpr>()->body, indent);
        }
      }
      return out;
    }
    std::string operator()(const BlockExpr& b) const { return block_str(*b.body, indent); }
    std::string operator()(const ClosureExpr& c) const {
      std::string head = c.params.empty() ? "||" : "|" + params_str(c.params) + "|";
      return head + " " + block_str(*c.body->as<BlockExpr>()->body, indent);
    }
    // Statement forms in value position are wrapped in a block.
    std::string operator()(const LetExpr&) const { return block_str(self, indent); }
    std::string operator()(const SeqExpr&) const { return block_str(self, indent); }
    std::string operator()(const AssignExpr&) const { return block_str(self, indent); }
    std::string operator()(const FlowDeclExpr&) const { return block_str(self, indent); }
    std::string operator()(const CallExpr&) const { return block_str(self, indent); }
  };
  return std::visit(V{indent, e}, e.node);
}

std::string stmt_str(const Expr& e, int indent) {
  if (const auto* a = e.as<AssignExpr>()) {
    return a->target.str() + " := " + value_str(*a->value, indent) + ";";
  }
  if (const auto* f = e.as<FlowDeclExpr>()) return "flow " + f->rule.str() + ";";
  if (const auto* c = e.as<CallExpr>()) {
    std::string out = c->callee + "(";
    for (size_t i = 0; i < c->args.size(); ++i) {
      if (i) out += ", ";
      out += value_str(*c->args[i], indent);
    }
    return out + ");";
  }
  if (e.as<LetExpr>() || e.as<SeqExpr>()) return block_str(e, indent);
  if (block_like(e)) return value_str(e, indent);
  return value_str(e, indent) + ";";
}

void print_contents(const Expr& e, int indent, std::string& out) {
  if (const auto* let = e.as<LetExpr>()) {
    out += pad(indent) + "let " + let->name;
    if (let->annot) out += ": " + let->annot->str();
    out += " = " + value_str(*let->init, indent);
    if (!let->with_rules.empty()) {
      out += " with flow ";
      for (size_t i = 0; i < let->with_rules.size(); ++i) {
        if (i) out += ", ";
        out += let->with_rules[i].str();
      }
    }
    out += ";\n";
    print_contents(*let->body, indent, out);
    return;
  }
  if (const auto* seq = e.as<SeqExpr>()) {
    out += pad(indent) + stmt_str(*seq->first, indent) + "\n";
    print_contents(*seq->second, indent, out);
    return;
  }
  if (is_synthetic_unit(e)) return;
  if (e.as<AssignExpr>() || e.as<FlowDeclExpr>() || e.as<CallExpr>()) {
    // A trailing statement form: print it followed by an explicit unit tail.
    out += pad(indent) + stmt_str(e, indent) + "\n" + pad(indent) + "()\n";
    return;
  }
  out += pad(indent) + value_str(e, indent) + "\n";
}

}  // namespace

std::string print_expr(const Expr& expr, int indent) { return value_str(expr, indent); }

std::string print_program(const Program& program) {
  std::string out;
  for (const auto& [name, def] : program.structs.all()) {
    out += "struct " + name + " {\n";
    for (const auto& f : def.fields) out += "    " + f.name + ": " + f.type.str() + ",\n";
    out += "}\n\n";
  }
  for (const auto& f : program.functions) {
    if (f.primitive) {
      out += std::string("prim ") + (f.io ? "io " : "") + "fn " + f.name + "(" +
             params_str(f.params) + ")";
      if (f.contract.empty()) {
        out += ";\n\n";
      } else {
        out += " {\n";
        for (const auto& r : f.contract) out += "    flow " + r.str() + ";\n";
        out += "}\n\n";
      }
      continue;
    }
    out += "fn " + f.name + "(" + params_str(f.params) + ") {\n";
    for (const auto& r : f.contract) out += "    flow " + r.str() + ";\n";
    if (f.body) {
      const auto* b = f.body->as<BlockExpr>();
      print_contents(b ? *b->body : *f.body, 1, out);
    }
    out += "}\n\n";
  }
  return out;
}

}  // namespace flowck
