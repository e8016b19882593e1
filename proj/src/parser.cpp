#include "flowck/parser.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

namespace flowck {

std::pair<uint32_t, uint32_t> line_col(std::string_view text, uint32_t offset) {
  uint32_t line = 1, col = 1;
  for (uint32_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

namespace {

enum class TokKind { Ident, Int, Sym, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string text;
  uint32_t start = 0;
  uint32_t end = 0;
  uint32_t line = 1;
  uint32_t col = 1;
};

const std::set<std::string> kKeywords = {
    "fn",    "prim", "struct", "let",  "with", "flow", "if",   "else", "allow", "move", "copy",
    "true",  "false", "shrd",  "uniq", "mut",  "unit", "u32",  "bool", "either"};

struct ParseFailure {
  ParseError error;
};

class Lexer {
 public:
  Lexer(std::string_view text, uint32_t file_id) : text_(text), file_id_(file_id) {}

  std::vector<Token> run(std::vector<ParseError>& errors) {
    std::vector<Token> out;
    while (true) {
      skip_trivia();
      Token t;
      t.start = static_cast<uint32_t>(pos_);
      t.line = line_;
      t.col = col_;
      if (pos_ >= text_.size()) {
        t.kind = TokKind::End;
        t.end = t.start;
        out.push_back(t);
        return out;
      }
      char c = text_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
          advance();
        t.kind = TokKind::Ident;
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
          advance();
        t.kind = TokKind::Int;
      } else {
        static const char* multi[] = {"->!", "->", ":=", "::", "||"};
        bool matched = false;
        for (const char* m : multi) {
          std::string_view mv(m);
          if (text_.substr(pos_, mv.size()) == mv) {
            for (size_t i = 0; i < mv.size(); ++i) advance();
            matched = true;
            break;
          }
        }
        if (!matched) {
          static const std::string singles = "{}()<>,;:.*&|=!";
          if (singles.find(c) == std::string::npos) {
            advance();
            errors.push_back(ParseError{
                SourceSpan{file_id_, t.start, static_cast<uint32_t>(pos_), t.line, t.col},
                "a token", std::string("unexpected character '") + c + "'"});
            continue;
          }
          advance();
        }
        t.kind = TokKind::Sym;
      }
      t.end = static_cast<uint32_t>(pos_);
      t.text = std::string(text_.substr(t.start, t.end - t.start));
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_trivia() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else {
        return;
      }
    }
  }

  std::string_view text_;
  uint32_t file_id_;
  size_t pos_ = 0;
  uint32_t line_ = 1;
  uint32_t col_ = 1;
};

// One parsed statement of a block, before folding into nested lets.
struct Stmt {
  bool is_let = false;
  LetExpr let;
  ExprPtr expr;
  SourceSpan span;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, uint32_t file_id, std::vector<ParseError>& errors)
      : toks_(std::move(toks)), file_id_(file_id), errors_(errors) {}

  Program program(std::string file) {
    Program prog;
    prog.file = std::move(file);
    std::set<std::string> fn_names;
    while (!at_end()) {
      size_t before = pos_;
      try {
        if (is_kw("struct")) {
          StructDef def = struct_def();
          if (prog.structs.find(def.name)) fail_at(def.span, "a new struct name", "duplicate struct `" + def.name + "`");
          prog.structs.add(std::move(def));
        } else if (is_kw("fn") || is_kw("prim")) {
          FuncDef f = is_kw("fn") ? fn_def() : prim_def();
          if (!fn_names.insert(f.name).second)
            fail_at(f.span, "a new function name", "duplicate function `" + f.name + "`");
          prog.functions.push_back(std::move(f));
        } else {
          fail("`fn`, `prim`, or `struct`", "expected an item, found " + describe(peek()));
        }
      } catch (const ParseFailure& pf) {
        errors_.push_back(pf.error);
        if (pos_ == before) next();
        while (!at_end() && !is_kw("fn") && !is_kw("prim") && !is_kw("struct")) next();
      }
    }
    for (const auto& f : prog.functions) {
      if (!f.primitive && f.name == "main") prog.entry = f.name;
    }
    if (prog.entry.empty()) {
      for (const auto& f : prog.functions) {
        if (!f.primitive) {
          prog.entry = f.name;
          break;
        }
      }
    }
    if (prog.entry.empty() && errors_.empty()) {
      errors_.push_back(ParseError{span_of(peek()), "`fn`", "program defines no function with a body"});
    }
    return prog;
  }

  FlowRule standalone_rule() {
    size_t start = pos_;
    FlowRule r = rule_body(start);
    if (is_sym(";")) next();
    if (!at_end()) fail("end of input", "trailing input after flow rule: " + describe(peek()));
    return r;
  }

 private:
  // -- token helpers --------------------------------------------------------

  const Token& peek(size_t k = 0) const {
    size_t i = std::min(pos_ + k, toks_.size() - 1);
    return toks_[i];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == TokKind::End; }
  bool is_sym(const char* s, size_t k = 0) const {
    return peek(k).kind == TokKind::Sym && peek(k).text == s;
  }
  bool is_kw(const char* s, size_t k = 0) const {
    return peek(k).kind == TokKind::Ident && peek(k).text == s;
  }
  bool is_ident(size_t k = 0) const {
    return peek(k).kind == TokKind::Ident && !kKeywords.count(peek(k).text);
  }

  static std::string describe(const Token& t) {
    if (t.kind == TokKind::End) return "end of input";
    return "`" + t.text + "`";
  }

  SourceSpan span_of(const Token& t) const {
    return SourceSpan{file_id_, t.start, t.end, t.line, t.col};
  }
  SourceSpan span_from(size_t start_tok) const {
    const Token& a = toks_[start_tok];
    size_t last = pos_ > start_tok ? pos_ - 1 : start_tok;
    return SourceSpan{file_id_, a.start, std::max(a.start, toks_[last].end), a.line, a.col};
  }

  [[noreturn]] void fail(const std::string& expected, const std::string& message) const {
    throw ParseFailure{ParseError{span_of(peek()), expected, message}};
  }
  [[noreturn]] void fail_at(SourceSpan span, const std::string& expected,
                            const std::string& message) const {
    throw ParseFailure{ParseError{span, expected, message}};
  }

  void expect_sym(const char* s) {
    if (!is_sym(s)) fail(std::string("`") + s + "`", std::string("expected `") + s + "`, found " + describe(peek()));
    next();
  }
  void expect_kw(const char* s) {
    if (!is_kw(s)) fail(std::string("`") + s + "`", std::string("expected `") + s + "`, found " + describe(peek()));
    next();
  }
  std::string ident(const char* what) {
    if (!is_ident()) fail(what, std::string("expected ") + what + ", found " + describe(peek()));
    return next().text;
  }

  // -- items ----------------------------------------------------------------

  StructDef struct_def() {
    size_t start = pos_;
    expect_kw("struct");
    StructDef def;
    def.name = ident("a struct name");
    expect_sym("{");
    std::set<std::string> seen;
    while (!is_sym("}")) {
      FieldDef f;
      f.name = selector_name();
      if (!seen.insert(f.name).second) fail("a new field name", "duplicate field `" + f.name + "`");
      expect_sym(":");
      f.type = type();
      def.fields.push_back(std::move(f));
      if (!is_sym(",")) break;
      next();
    }
    expect_sym("}");
    def.span = span_from(start);
    return def;
  }

  std::vector<Param> params() {
    std::vector<Param> out;
    expect_sym("(");
    while (!is_sym(")")) {
      size_t start = pos_;
      Param p;
      p.name = ident("a parameter name");
      expect_sym(":");
      p.type = type();
      p.span = span_from(start);
      out.push_back(std::move(p));
      if (!is_sym(",")) break;
      next();
    }
    expect_sym(")");
    return out;
  }

  FuncDef fn_def() {
    size_t start = pos_;
    expect_kw("fn");
    FuncDef f;
    f.name = ident("a function name");
    f.params = params();
    f.span = span_from(start);
    size_t body_start = pos_;
    expect_sym("{");
    while (is_kw("flow")) {
      size_t rs = pos_;
      next();
      f.contract.push_back(rule_body(rs));
      expect_sym(";");
    }
    ExprPtr contents = block_contents();
    expect_sym("}");
    f.body = make_expr(BlockExpr{contents}, span_from(body_start));
    return f;
  }

  FuncDef prim_def() {
    size_t start = pos_;
    expect_kw("prim");
    FuncDef f;
    f.primitive = true;
    if (is_kw("io")) {
      next();
      f.io = true;
    }
    expect_kw("fn");
    f.name = ident("a function name");
    f.params = params();
    f.span = span_from(start);
    if (is_sym(";")) {
      next();
      return f;
    }
    expect_sym("{");
    while (is_kw("flow")) {
      size_t rs = pos_;
      next();
      f.contract.push_back(rule_body(rs));
      expect_sym(";");
    }
    if (!is_sym("}")) fail("`flow` or `}`", "primitive functions may only declare flow rules");
    next();
    return f;
  }

  // -- types ----------------------------------------------------------------

  Type type() {
    if (is_kw("unit")) return next(), Type::unit();
    if (is_kw("u32")) return next(), Type::u32();
    if (is_kw("bool")) return next(), Type::boolean();
    if (is_sym("&")) {
      next();
      Ownership own = Ownership::Shrd;
      if (is_kw("uniq") || is_kw("mut")) {
        own = Ownership::Uniq;
        next();
      } else if (is_kw("shrd")) {
        next();
      }
      return Type::ref(own, type());
    }
    if (is_kw("either")) {
      next();
      expect_sym("<");
      Type l = type();
      expect_sym(",");
      Type r = type();
      expect_sym(">");
      return Type::sum(std::move(l), std::move(r));
    }
    if (is_sym("(")) {
      next();
      if (is_sym(")")) return next(), Type::unit();
      std::vector<Type> elems;
      bool trailing_comma = false;
      while (true) {
        elems.push_back(type());
        trailing_comma = false;
        if (!is_sym(",")) break;
        next();
        trailing_comma = true;
        if (is_sym(")")) break;
      }
      expect_sym(")");
      if (elems.size() == 1 && !trailing_comma) return elems[0];
      return Type::tuple(std::move(elems));
    }
    if (is_ident()) return Type::structure(next().text);
    fail("a type", "expected a type, found " + describe(peek()));
  }

  // -- flow rules -----------------------------------------------------------

  AccessExpr access() {
    if (is_sym("*") && !(is_ident(1) || is_sym("(", 1) || is_sym("*", 1))) {
      next();
      return AccessExpr::wildcard();
    }
    if (is_kw("fn")) {
      next();
      std::string name = peek().kind == TokKind::Ident ? next().text : ident("a function name");
      if (is_sym("!")) {
        next();
        expect_sym("(");
        expect_sym(")");
        return AccessExpr::of_alias(std::move(name));
      }
      return AccessExpr::of_fn(std::move(name));
    }
    return AccessExpr::of_place(place_expr());
  }

  FlowRule rule_body(size_t start) {
    FlowRule r;
    r.source = access();
    if (is_sym("->!")) {
      r.permit = false;
    } else if (is_sym("->")) {
      r.permit = true;
    } else {
      fail("`->` or `->!`", "expected a flow arrow, found " + describe(peek()));
    }
    next();
    r.dest = access();
    r.span = span_from(start);
    if (r.source.is_wildcard()) fail_at(r.span, "a place", "`*` cannot be the source of a flow rule");
    if (!r.source.is_place()) fail_at(r.span, "a place", "a function cannot be the source of a flow rule");
    return r;
  }

  // -- places ---------------------------------------------------------------

  std::string selector_name() {
    if (peek().kind == TokKind::Int) return next().text;
    std::string name = ident("a field name");
    if (is_sym("(") && is_sym(")", 1)) {
      next();
      next();
      name += "()";
    }
    return name;
  }

  void selectors(PlaceExpr& pe) {
    while (is_sym(".")) {
      next();
      pe.ops.push_back(PlaceOp{PlaceOp::Kind::Project, selector_name()});
    }
  }

  PlaceExpr place_expr() {
    if (is_sym("*")) {
      next();
      PlaceExpr inner = place_expr();
      inner.ops.push_back(PlaceOp{PlaceOp::Kind::Deref, {}});
      return inner;
    }
    PlaceExpr pe;
    if (is_sym("(")) {
      next();
      pe = place_expr();
      expect_sym(")");
    } else {
      pe.root = ident("a place");
    }
    selectors(pe);
    return pe;
  }

  // -- expressions ----------------------------------------------------------

  ExprPtr expr(bool no_struct = false) {
    size_t start = pos_;
    if (is_kw("allow")) {
      next();
      ExprPtr inner = expr(no_struct);
      return make_expr(AllowExpr{inner}, span_from(start));
    }
    if (is_kw("move") || is_kw("copy")) {
      UseMode mode = next().text == "move" ? UseMode::Move : UseMode::Copy;
      PlaceExpr pe = place_expr();
      return make_expr(UseExpr{mode, std::move(pe)}, span_from(start));
    }
    if (is_sym("&")) {
      next();
      Ownership own = Ownership::Shrd;
      if (is_kw("uniq") || is_kw("mut")) {
        own = Ownership::Uniq;
        next();
      } else if (is_kw("shrd")) {
        next();
      }
      PlaceExpr pe = place_expr();
      return make_expr(BorrowExpr{own, std::move(pe)}, span_from(start));
    }
    if (is_kw("true") || is_kw("false")) {
      bool v = next().text == "true";
      return make_expr(ConstExpr{ConstExpr::Kind::Bool, v ? 1u : 0u, false}, span_from(start));
    }
    if (peek().kind == TokKind::Int) {
      const Token& t = next();
      unsigned long long v = 0;
      try {
        v = std::stoull(t.text);
      } catch (const std::exception&) {
        v = ~0ull;
      }
      if (v > 0xffffffffull) fail_at(span_of(t), "a u32 literal", "integer literal out of range for u32");
      return make_expr(ConstExpr{ConstExpr::Kind::Int, static_cast<uint32_t>(v), false},
                       span_from(start));
    }
    if (is_sym("(")) return paren_expr();
    if (is_kw("if")) return if_expr();
    if (is_sym("{")) return block();
    if (is_sym("|") || is_sym("||")) return closure();
    if (is_kw("either")) return variant();
    if (is_sym("*")) {
      PlaceExpr pe = place_expr();
      return make_expr(UseExpr{UseMode::Auto, std::move(pe)}, span_from(start));
    }
    if (is_ident()) {
      if (is_sym("(", 1)) {
        CallExpr c = call_body();
        fail_at(span_from(start), "a value",
                "call to `" + c.callee +
                    "` used in value position; functions return no value, pass a `&uniq` "
                    "out-parameter instead");
      }
      if (is_sym("{", 1) && !no_struct) return struct_lit();
      PlaceExpr pe = place_expr();
      return make_expr(UseExpr{UseMode::Auto, std::move(pe)}, span_from(start));
    }
    fail("an expression", "expected an expression, found " + describe(peek()));
  }

  ExprPtr paren_expr() {
    size_t start = pos_;
    expect_sym("(");
    if (is_sym(")")) {
      next();
      return make_expr(ConstExpr{ConstExpr::Kind::Unit, 0, false}, span_from(start));
    }
    std::vector<ExprPtr> elems;
    bool trailing_comma = false;
    while (true) {
      elems.push_back(expr());
      trailing_comma = false;
      if (!is_sym(",")) break;
      next();
      trailing_comma = true;
      if (is_sym(")")) break;
    }
    expect_sym(")");
    if (elems.size() == 1 && !trailing_comma) {
      ExprPtr inner = elems[0];
      // `(*r).f` in value position.
      if (is_sym(".")) {
        const UseExpr* use = inner->as<UseExpr>();
        if (!use) fail(".", "field selection is only allowed on places");
        PlaceExpr pe = use->place;
        selectors(pe);
        return make_expr(UseExpr{use->mode, std::move(pe)}, span_from(start));
      }
      return inner;
    }
    return make_expr(TupleExpr{std::move(elems)}, span_from(start));
  }

  ExprPtr struct_lit() {
    size_t start = pos_;
    StructExpr s;
    s.name = next().text;
    expect_sym("{");
    while (!is_sym("}")) {
      std::string field = selector_name();
      expect_sym(":");
      s.fields.emplace_back(std::move(field), expr());
      if (!is_sym(",")) break;
      next();
    }
    expect_sym("}");
    return make_expr(std::move(s), span_from(start));
  }

  ExprPtr variant() {
    size_t start = pos_;
    expect_kw("either");
    expect_sym("<");
    Type l = type();
    expect_sym(",");
    Type r = type();
    expect_sym(">");
    expect_sym("::");
    std::string side = ident("`left` or `right`");
    if (side != "left" && side != "right") fail("`left` or `right`", "unknown either constructor `" + side + "`");
    expect_sym("(");
    ExprPtr payload = expr();
    expect_sym(")");
    return make_expr(VariantExpr{Type::sum(std::move(l), std::move(r)), side == "right", payload},
                     span_from(start));
  }

  ExprPtr closure() {
    size_t start = pos_;
    ClosureExpr c;
    if (is_sym("||")) {
      next();
    } else {
      expect_sym("|");
      while (!is_sym("|")) {
        size_t ps = pos_;
        Param p;
        p.name = ident("a parameter name");
        expect_sym(":");
        p.type = type();
        p.span = span_from(ps);
        c.params.push_back(std::move(p));
        if (!is_sym(",")) break;
        next();
      }
      expect_sym("|");
    }
    c.body = block();
    return make_expr(std::move(c), span_from(start));
  }

  ExprPtr if_expr() {
    size_t start = pos_;
    expect_kw("if");
    IfExpr e;
    e.guard = expr(/*no_struct=*/true);
    e.then_branch = block();
    if (is_kw("else")) {
      next();
      e.else_branch = is_kw("if") ? if_expr() : block();
    } else {
      e.has_else = false;
      SourceSpan s = span_from(start);
      s.start = s.end;
      e.else_branch = make_expr(
          BlockExpr{make_expr(ConstExpr{ConstExpr::Kind::Unit, 0, true}, s)}, s);
    }
    return make_expr(std::move(e), span_from(start));
  }

  CallExpr call_body() {
    CallExpr c;
    c.callee = next().text;
    expect_sym("(");
    while (!is_sym(")")) {
      c.args.push_back(expr());
      if (!is_sym(",")) break;
      next();
    }
    expect_sym(")");
    return c;
  }

  ExprPtr block() {
    size_t start = pos_;
    expect_sym("{");
    ExprPtr contents = block_contents();
    expect_sym("}");
    return make_expr(BlockExpr{contents}, span_from(start));
  }

  static bool block_like(const Expr& e) {
    return e.as<IfExpr>() || e.as<BlockExpr>();
  }

  // Parses statements up to (not including) the closing `}`.
  ExprPtr block_contents() {
    std::vector<Stmt> stmts;
    ExprPtr tail;
    while (!is_sym("}") && !at_end()) {
      size_t before = pos_;
      try {
        if (is_kw("let")) {
          stmts.push_back(let_stmt());
          continue;
        }
        size_t start = pos_;
        if (is_kw("flow")) {
          next();
          FlowRule r = rule_body(start);
          expect_sym(";");
          stmts.push_back(Stmt{false, {}, make_expr(FlowDeclExpr{r}, r.span), r.span});
          continue;
        }
        if (is_ident() && is_sym("(", 1)) {
          CallExpr c = call_body();
          SourceSpan sp = span_from(start);
          expect_sym(";");
          stmts.push_back(Stmt{false, {}, make_expr(std::move(c), sp), sp});
          continue;
        }
        ExprPtr e = expr();
        if (is_sym(":=") || is_sym("=")) {
          const UseExpr* use = e->as<UseExpr>();
          if (!use || use->mode != UseMode::Auto)
            fail_at(e->span, "a place", "left-hand side of an assignment must be a place");
          next();
          ExprPtr value = expr();
          SourceSpan sp = span_from(start);
          expect_sym(";");
          stmts.push_back(Stmt{false, {}, make_expr(AssignExpr{use->place, value}, sp), sp});
          continue;
        }
        if (is_sym(";")) {
          next();
          stmts.push_back(Stmt{false, {}, e, e->span});
          continue;
        }
        if (is_sym("}")) {
          tail = e;
          break;
        }
        if (block_like(*e)) {
          stmts.push_back(Stmt{false, {}, e, e->span});
          continue;
        }
        fail("`;`", "expected `;`, found " + describe(peek()));
      } catch (const ParseFailure& pf) {
        errors_.push_back(pf.error);
        if (pos_ == before) next();
        resync();
      }
    }
    if (!tail) {
      const Token& t = peek();
      SourceSpan s{file_id_, t.start, t.start, t.line, t.col};
      tail = make_expr(ConstExpr{ConstExpr::Kind::Unit, 0, true}, s);
    }
    for (auto it = stmts.rbegin(); it != stmts.rend(); ++it) {
      if (it->is_let) {
        LetExpr let = std::move(it->let);
        let.body = tail;
        tail = make_expr(std::move(let), it->span);
      } else {
        tail = make_expr(SeqExpr{it->expr, tail}, it->span);
      }
    }
    return tail;
  }

  Stmt let_stmt() {
    size_t start = pos_;
    expect_kw("let");
    if (is_kw("mut")) next();
    Stmt s;
    s.is_let = true;
    s.let.name = ident("a variable name");
    if (is_sym(":")) {
      next();
      s.let.annot = type();
    }
    expect_sym("=");
    s.let.init = expr();
    if (is_kw("with")) {
      next();
      expect_kw("flow");
      while (true) {
        size_t rs = pos_;
        s.let.with_rules.push_back(rule_body(rs));
        if (!is_sym(",")) break;
        next();
      }
    }
    expect_sym(";");
    s.span = span_from(start);
    return s;
  }

  void resync() {
    int depth = 0;
    while (!at_end()) {
      if (is_sym("{")) {
        ++depth;
      } else if (is_sym("}")) {
        if (depth == 0) return;
        --depth;
        if (depth == 0) {
          next();
          return;
        }
      } else if (is_sym(";") && depth == 0) {
        next();
        return;
      }
      next();
    }
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  uint32_t file_id_;
  std::vector<ParseError>& errors_;
};

}  // namespace

ParseResult parse_program(std::string_view text, std::string file, uint32_t file_id) {
  ParseResult result;
  std::vector<Token> toks = Lexer(text, file_id).run(result.errors);
  Parser parser(std::move(toks), file_id, result.errors);
  Program prog = parser.program(std::move(file));
  std::stable_sort(result.errors.begin(), result.errors.end(),
                   [](const ParseError& a, const ParseError& b) { return a.span.start < b.span.start; });
  if (result.errors.empty()) result.program = std::move(prog);
  return result;
}

RuleParseResult parse_flow_rule(std::string_view text) {
  RuleParseResult result;
  std::vector<Token> toks = Lexer(text, 0).run(result.errors);
  if (!result.errors.empty()) return result;
  Parser parser(std::move(toks), 0, result.errors);
  try {
    result.rule = parser.standalone_rule();
  } catch (const ParseFailure& pf) {
    result.errors.push_back(pf.error);
  }
  return result;
}

}  // namespace flowck
