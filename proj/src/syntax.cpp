#include "apka/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace apka {

// ---------------------------------------------------------------------------
// SimpleType
// ---------------------------------------------------------------------------

SimpleType SimpleType::arrow(SimpleType operand, SimpleType result) {
  SimpleType t;
  int ord = std::max(operand.order() + 1, result.order());
  t.node_ = std::make_shared<const Node>(Node{std::move(operand), std::move(result), ord});
  return t;
}

SimpleType SimpleType::function(const std::vector<SimpleType>& operands, SimpleType res) {
  SimpleType t = std::move(res);
  for (auto it = operands.rbegin(); it != operands.rend(); ++it) t = arrow(*it, t);
  return t;
}

int SimpleType::arity() const {
  int n = 0;
  const Node* cur = node_.get();
  while (cur) {
    ++n;
    cur = cur->result.node_.get();
  }
  return n;
}

SimpleType SimpleType::arg(int i) const {
  SimpleType cur = *this;
  for (int k = 0; k < i; ++k) cur = cur.result();
  return cur.operand();
}

SimpleType SimpleType::operand() const { return node_->operand; }

SimpleType SimpleType::result() const { return node_->result; }

bool SimpleType::operator==(const SimpleType& other) const {
  if (node_ == other.node_) return true;
  if (!node_ || !other.node_) return false;
  return node_->operand == other.node_->operand && node_->result == other.node_->result;
}

std::string SimpleType::str() const { return print_type(*this); }

std::string print_type(const SimpleType& type) {
  if (type.is_ground()) return "Pr";
  SimpleType op = type.operand();
  std::string lhs = print_type(op);
  if (!op.is_ground()) lhs = "(" + lhs + ")";
  return lhs + " -> " + print_type(type.result());
}

// ---------------------------------------------------------------------------
// Formula factories
// ---------------------------------------------------------------------------

namespace {
FormulaPtr mk(FKind kind, std::string name, SimpleType ann, FormulaPtr a, FormulaPtr b) {
  return std::make_shared<const Formula>(
      Formula{kind, std::move(name), std::move(ann), std::move(a), std::move(b)});
}
}  // namespace

FormulaPtr Formula::top() { return mk(FKind::Top, "", {}, nullptr, nullptr); }
FormulaPtr Formula::bot() { return mk(FKind::Bot, "", {}, nullptr, nullptr); }
FormulaPtr Formula::prop(std::string name) {
  return mk(FKind::Prop, std::move(name), {}, nullptr, nullptr);
}
FormulaPtr Formula::neg_prop(std::string name) {
  return mk(FKind::NegProp, std::move(name), {}, nullptr, nullptr);
}
FormulaPtr Formula::diamond(FormulaPtr body) {
  return mk(FKind::Diamond, "", {}, std::move(body), nullptr);
}
FormulaPtr Formula::box(FormulaPtr body) {
  return mk(FKind::Box, "", {}, std::move(body), nullptr);
}
FormulaPtr Formula::or_(FormulaPtr lhs, FormulaPtr rhs) {
  return mk(FKind::Or, "", {}, std::move(lhs), std::move(rhs));
}
FormulaPtr Formula::and_(FormulaPtr lhs, FormulaPtr rhs) {
  return mk(FKind::And, "", {}, std::move(lhs), std::move(rhs));
}
FormulaPtr Formula::var(std::string name) {
  return mk(FKind::Var, std::move(name), {}, nullptr, nullptr);
}
FormulaPtr Formula::state_var(std::string name) {
  return mk(FKind::StateVar, std::move(name), {}, nullptr, nullptr);
}
FormulaPtr Formula::app(FormulaPtr fn, FormulaPtr arg) {
  return mk(FKind::App, "", {}, std::move(fn), std::move(arg));
}
FormulaPtr Formula::lambda(std::string name, SimpleType ann, FormulaPtr body) {
  return mk(FKind::Lambda, std::move(name), std::move(ann), std::move(body), nullptr);
}
FormulaPtr Formula::mu(std::string name, SimpleType ann, FormulaPtr body) {
  return mk(FKind::Mu, std::move(name), std::move(ann), std::move(body), nullptr);
}
FormulaPtr Formula::nu(std::string name, SimpleType ann, FormulaPtr body) {
  return mk(FKind::Nu, std::move(name), std::move(ann), std::move(body), nullptr);
}

bool is_binder(FKind k) { return k == FKind::Lambda || k == FKind::Mu || k == FKind::Nu; }

bool is_literal(FKind k) {
  return k == FKind::Top || k == FKind::Bot || k == FKind::Prop || k == FKind::NegProp;
}

bool struct_equal(const FormulaPtr& lhs, const FormulaPtr& rhs) {
  if (lhs == rhs) return true;
  if (!lhs || !rhs) return false;
  if (lhs->kind != rhs->kind || lhs->name != rhs->name) return false;
  if (is_binder(lhs->kind) && lhs->ann != rhs->ann) return false;
  return struct_equal(lhs->a, rhs->a) && struct_equal(lhs->b, rhs->b);
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace {

enum class Tok {
  LParen,
  RParen,
  Colon,
  Dot,
  Bang,
  Backslash,
  Diamond,
  Box,
  OrOp,
  AndOp,
  Arrow,
  Ident,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  int line;
  int col;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return cur_; }

  Token take() {
    Token t = cur_;
    advance();
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, line_, col_); }

  int get() {
    if (pos_ >= src_.size()) return -1;
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return static_cast<unsigned char>(c);
  }

  int look(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? static_cast<unsigned char>(src_[pos_ + ahead]) : -1;
  }

  void advance() {
    for (;;) {
      int c = look();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        get();
        continue;
      }
      if (c == '/' && look(1) == '/') {
        while (look() != -1 && look() != '\n') get();
        continue;
      }
      break;
    }
    cur_.line = line_;
    cur_.col = col_;
    cur_.text.clear();
    int c = look();
    if (c == -1) {
      cur_.kind = Tok::End;
      return;
    }
    if (std::isalpha(c) || c == '_') {
      while (std::isalnum(look()) || look() == '_') cur_.text.push_back(static_cast<char>(get()));
      cur_.kind = Tok::Ident;
      return;
    }
    get();
    switch (c) {
      case '(':
        cur_.kind = Tok::LParen;
        return;
      case ')':
        cur_.kind = Tok::RParen;
        return;
      case ':':
        cur_.kind = Tok::Colon;
        return;
      case '.':
        cur_.kind = Tok::Dot;
        return;
      case '!':
        cur_.kind = Tok::Bang;
        return;
      case '\\':
        if (look() == '/') {
          get();
          cur_.kind = Tok::OrOp;
        } else {
          cur_.kind = Tok::Backslash;
        }
        return;
      case '/':
        if (look() == '\\') {
          get();
          cur_.kind = Tok::AndOp;
          return;
        }
        fail("stray '/'");
      case '<':
        if (look() == '>') {
          get();
          cur_.kind = Tok::Diamond;
          return;
        }
        fail("expected '<>'");
      case '[':
        if (look() == ']') {
          get();
          cur_.kind = Tok::Box;
          return;
        }
        fail("expected '[]'");
      case '-':
        if (look() == '>') {
          get();
          cur_.kind = Tok::Arrow;
          return;
        }
        fail("expected '->'");
      default:
        fail(std::string("unexpected character '") + static_cast<char>(c) + "'");
    }
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Token cur_;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
 public:
  Parser(const std::string& src, const ParseContext& ctx, Dialect dialect)
      : lex_(src), ctx_(ctx), dialect_(dialect) {}

  FormulaPtr parse() {
    FormulaPtr f = form();
    expect(Tok::End, "trailing input after formula");
    return f;
  }

  SimpleType parse_type_only() {
    SimpleType t = type();
    expect(Tok::End, "trailing input after type");
    return t;
  }

  std::vector<std::pair<std::string, SimpleType>> parse_typed_name_list() {
    std::vector<std::pair<std::string, SimpleType>> out;
    while (lex_.peek().kind != Tok::End) {
      Token name = expect(Tok::Ident, "a name");
      expect(Tok::Colon, "':'");
      out.emplace_back(name.text, type());
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg, lex_.peek().line, lex_.peek().col);
  }

  Token expect(Tok kind, const std::string& what) {
    if (lex_.peek().kind != kind) fail("expected " + what);
    return lex_.take();
  }

  SimpleType type() {
    SimpleType lhs = type_atom();
    if (lex_.peek().kind == Tok::Arrow) {
      lex_.take();
      return SimpleType::arrow(lhs, type());
    }
    return lhs;
  }

  SimpleType type_atom() {
    if (lex_.peek().kind == Tok::LParen) {
      lex_.take();
      SimpleType t = type();
      expect(Tok::RParen, "')'");
      return t;
    }
    Token t = expect(Tok::Ident, "a type");
    if (t.text != "Pr") throw ParseError("unknown type '" + t.text + "'", t.line, t.col);
    return SimpleType::ground();
  }

  FormulaPtr form() { return or_chain(); }

  FormulaPtr or_chain() {
    FormulaPtr lhs = and_chain();
    while (lex_.peek().kind == Tok::OrOp) {
      lex_.take();
      lhs = Formula::or_(lhs, and_chain());
    }
    return lhs;
  }

  FormulaPtr and_chain() {
    FormulaPtr lhs = prim();
    while (lex_.peek().kind == Tok::AndOp) {
      lex_.take();
      lhs = Formula::and_(lhs, prim());
    }
    return lhs;
  }

  FormulaPtr binder(FKind kind) {
    if (dialect_ == Dialect::ApkaBody) fail("binders are not allowed in transition expressions");
    Token name = expect(Tok::Ident, "a bound name");
    expect(Tok::Colon, "':'");
    SimpleType ann = type();
    expect(Tok::Dot, "'.'");
    bound_.emplace_back(name.text, kind == FKind::Lambda ? FKind::Var : FKind::StateVar);
    FormulaPtr body = form();
    bound_.pop_back();
    switch (kind) {
      case FKind::Lambda:
        return Formula::lambda(name.text, ann, body);
      case FKind::Mu:
        return Formula::mu(name.text, ann, body);
      default:
        return Formula::nu(name.text, ann, body);
    }
  }

  FKind classify(const std::string& name) const {
    for (auto it = bound_.rbegin(); it != bound_.rend(); ++it)
      if (it->first == name) return it->second;
    if (ctx_.props.count(name)) return FKind::Prop;
    if (ctx_.state_names.count(name)) return FKind::StateVar;
    if (ctx_.var_names.count(name)) return FKind::Var;
    return std::isupper(static_cast<unsigned char>(name[0])) ? FKind::StateVar : FKind::Var;
  }

  FormulaPtr prim() {
    const Token& t = lex_.peek();
    switch (t.kind) {
      case Tok::Diamond:
        lex_.take();
        return Formula::diamond(form());
      case Tok::Box:
        lex_.take();
        return Formula::box(form());
      case Tok::Backslash:
        lex_.take();
        return binder(FKind::Lambda);
      case Tok::Bang: {
        lex_.take();
        Token name = expect(Tok::Ident, "a proposition after '!'");
        return Formula::neg_prop(name.text);
      }
      case Tok::LParen: {
        lex_.take();
        FormulaPtr f = form();
        while (lex_.peek().kind != Tok::RParen) f = Formula::app(f, form());
        lex_.take();
        return f;
      }
      case Tok::Ident: {
        Token name = lex_.take();
        if (name.text == "tt") return Formula::top();
        if (name.text == "ff") return Formula::bot();
        if (name.text == "mu") return binder(FKind::Mu);
        if (name.text == "nu") return binder(FKind::Nu);
        switch (classify(name.text)) {
          case FKind::Prop:
            return Formula::prop(name.text);
          case FKind::StateVar:
            return Formula::state_var(name.text);
          default:
            return Formula::var(name.text);
        }
      }
      default:
        fail("expected a formula");
    }
  }

  Lexer lex_;
  const ParseContext& ctx_;
  Dialect dialect_;
  std::vector<std::pair<std::string, FKind>> bound_;
};

}  // namespace

SimpleType parse_type(const std::string& text) {
  static const ParseContext empty;
  return Parser(text, empty, Dialect::Hfl).parse_type_only();
}

FormulaPtr parse_formula(const std::string& text, const ParseContext& ctx, Dialect dialect) {
  return Parser(text, ctx, dialect).parse();
}

std::vector<std::pair<std::string, SimpleType>> parse_typed_names(const std::string& text) {
  static const ParseContext empty;
  return Parser(text, empty, Dialect::Hfl).parse_typed_name_list();
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

namespace {

bool atom(const FormulaPtr& f) {
  switch (f->kind) {
    case FKind::Top:
    case FKind::Bot:
    case FKind::Prop:
    case FKind::Var:
    case FKind::StateVar:
      return true;
    default:
      return false;
  }
}

bool prefix_form(const FormulaPtr& f) {
  switch (f->kind) {
    case FKind::Diamond:
    case FKind::Box:
    case FKind::Lambda:
    case FKind::Mu:
    case FKind::Nu:
      return true;
    default:
      return false;
  }
}

std::string show(const FormulaPtr& f);

std::string paren(const FormulaPtr& f) { return "(" + show(f) + ")"; }

// Operand of \/ or /\: prefix forms and right-nested chains need parentheses.
std::string chain_side(const FormulaPtr& f, FKind parent, bool lhs) {
  if (prefix_form(f)) return paren(f);
  if (f->kind == FKind::Or && (parent == FKind::And || !lhs)) return paren(f);
  if (f->kind == FKind::And && parent == FKind::And && !lhs) return paren(f);
  return show(f);
}

std::string show(const FormulaPtr& f) {
  switch (f->kind) {
    case FKind::Top:
      return "tt";
    case FKind::Bot:
      return "ff";
    case FKind::Prop:
    case FKind::Var:
    case FKind::StateVar:
      return f->name;
    case FKind::NegProp:
      return "! " + f->name;
    case FKind::Diamond:
      return "<> " + show(f->a);
    case FKind::Box:
      return "[] " + show(f->a);
    case FKind::Or:
      return chain_side(f->a, FKind::Or, true) + " \\/ " + chain_side(f->b, FKind::Or, false);
    case FKind::And:
      return chain_side(f->a, FKind::And, true) + " /\\ " + chain_side(f->b, FKind::And, false);
    case FKind::App: {
      std::string op = (atom(f->a) || f->a->kind == FKind::App) ? show(f->a) : paren(f->a);
      std::string arg = (atom(f->b) || f->b->kind == FKind::App) ? show(f->b) : paren(f->b);
      return "(" + op + " " + arg + ")";
    }
    case FKind::Lambda:
      return "\\" + f->name + ":" + print_type(f->ann) + ". " + show(f->a);
    case FKind::Mu:
      return "mu " + f->name + ":" + print_type(f->ann) + ". " + show(f->a);
    case FKind::Nu:
      return "nu " + f->name + ":" + print_type(f->ann) + ". " + show(f->a);
  }
  return "";
}

}  // namespace

std::string print_formula(const FormulaPtr& f) { return show(f); }

// ---------------------------------------------------------------------------
// Typing
// ---------------------------------------------------------------------------

namespace {

SimpleType type_of(TypingContext& ctx, const FormulaPtr& f, Dialect dialect,
                   std::map<const Formula*, SimpleType>* types) {
  SimpleType result;
  switch (f->kind) {
    case FKind::Top:
    case FKind::Bot:
    case FKind::Prop:
    case FKind::NegProp:
      result = SimpleType::ground();
      break;
    case FKind::Diamond:
    case FKind::Box: {
      SimpleType body = type_of(ctx, f->a, dialect, types);
      if (!body.is_ground())
        throw TypeError(TypeErrorKind::Mismatch,
                        "modality applied to " + body.str() + ", expected Pr");
      result = SimpleType::ground();
      break;
    }
    case FKind::Or:
    case FKind::And: {
      SimpleType lhs = type_of(ctx, f->a, dialect, types);
      SimpleType rhs = type_of(ctx, f->b, dialect, types);
      if (!lhs.is_ground() || !rhs.is_ground())
        throw TypeError(TypeErrorKind::Mismatch, "junction of non-ground operands");
      result = SimpleType::ground();
      break;
    }
    case FKind::Var: {
      auto it = ctx.vars.find(f->name);
      if (it == ctx.vars.end())
        throw TypeError(TypeErrorKind::Unbound, "unbound variable '" + f->name + "'");
      result = it->second;
      break;
    }
    case FKind::StateVar: {
      auto it = ctx.fixes.find(f->name);
      if (it == ctx.fixes.end())
        throw TypeError(TypeErrorKind::Unbound, "unbound fixpoint variable '" + f->name + "'");
      result = it->second;
      break;
    }
    case FKind::App: {
      SimpleType fn = type_of(ctx, f->a, dialect, types);
      SimpleType arg = type_of(ctx, f->b, dialect, types);
      if (fn.is_ground())
        throw TypeError(TypeErrorKind::Mismatch, "application of a ground expression");
      if (!(fn.operand() == arg))
        throw TypeError(TypeErrorKind::Mismatch, "operand has type " + arg.str() +
                                                     ", expected " + fn.operand().str());
      result = fn.result();
      break;
    }
    case FKind::Lambda: {
      if (dialect == Dialect::ApkaBody)
        throw TypeError(TypeErrorKind::Dialect, "lambda in a transition expression");
      auto saved = ctx.vars;
      ctx.vars[f->name] = f->ann;
      SimpleType body = type_of(ctx, f->a, dialect, types);
      ctx.vars = saved;
      result = SimpleType::arrow(f->ann, body);
      break;
    }
    case FKind::Mu:
    case FKind::Nu: {
      if (dialect == Dialect::ApkaBody)
        throw TypeError(TypeErrorKind::Dialect, "fixpoint binder in a transition expression");
      auto saved = ctx.fixes;
      ctx.fixes[f->name] = f->ann;
      SimpleType body = type_of(ctx, f->a, dialect, types);
      ctx.fixes = saved;
      if (!(body == f->ann))
        throw TypeError(TypeErrorKind::Mismatch, "fixpoint body has type " + body.str() +
                                                     ", expected " + f->ann.str());
      result = f->ann;
      break;
    }
  }
  if (types) (*types)[f.get()] = result;
  return result;
}

}  // namespace

SimpleType typecheck(const TypingContext& ctx, const FormulaPtr& f, Dialect dialect,
                     std::map<const Formula*, SimpleType>* types) {
  TypingContext local = ctx;
  return type_of(local, f, dialect, types);
}

// ---------------------------------------------------------------------------
// Binder structure
// ---------------------------------------------------------------------------

namespace {

void walk_binding(const FormulaPtr& f, std::vector<std::string>& enclosing,
                  std::set<std::string>& binder_names, BindingReport& report) {
  if (!f) return;
  if (is_binder(f->kind)) {
    if (!binder_names.insert(f->name).second) report.well_named = false;
    if (f->kind != FKind::Lambda) report.fixpoint_defs[f->name] = f.get();
    for (const auto& outer : enclosing) report.outermore_pairs.insert({outer, f->name});
    enclosing.push_back(f->name);
    walk_binding(f->a, enclosing, binder_names, report);
    enclosing.pop_back();
    return;
  }
  if (f->kind == FKind::Var || f->kind == FKind::StateVar) {
    if (std::find(enclosing.begin(), enclosing.end(), f->name) == enclosing.end()) {
      if (f->kind == FKind::Var)
        report.free_vars.insert(f->name);
      else
        report.free_fixpoints.insert(f->name);
    }
    return;
  }
  walk_binding(f->a, enclosing, binder_names, report);
  walk_binding(f->b, enclosing, binder_names, report);
}

}  // namespace

std::optional<std::string> BindingReport::outermost(const std::set<std::string>& names) const {
  for (const auto& candidate : names) {
    bool encloses_all = true;
    for (const auto& other : names)
      if (other != candidate && !outermore(candidate, other)) {
        encloses_all = false;
        break;
      }
    if (encloses_all) return candidate;
  }
  return std::nullopt;
}

BindingReport binding_report(const FormulaPtr& f) {
  BindingReport report;
  std::vector<std::string> enclosing;
  std::set<std::string> binder_names;
  walk_binding(f, enclosing, binder_names, report);
  for (const auto& name : binder_names)
    if (report.free_vars.count(name) || report.free_fixpoints.count(name))
      report.well_named = false;
  return report;
}

void collect_free(const FormulaPtr& f, std::set<std::string>& vars, std::set<std::string>& fixes) {
  BindingReport report = binding_report(f);
  vars.insert(report.free_vars.begin(), report.free_vars.end());
  fixes.insert(report.free_fixpoints.begin(), report.free_fixpoints.end());
}

}  // namespace apka
