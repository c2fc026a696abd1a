#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "apka/errors.hpp"

namespace apka {

// ---------------------------------------------------------------------------
// Simple types: Pr, or an arrow whose result is again a simple type.  Every
// type has the shape t1 -> t2 -> ... -> tk -> Pr.  A default-constructed
// SimpleType is Pr; arrows share operand/result nodes.
// ---------------------------------------------------------------------------

class SimpleType {
 public:
  SimpleType() = default;  // Pr

  static SimpleType ground() { return SimpleType(); }
  static SimpleType arrow(SimpleType operand, SimpleType result);
  // t1 -> (t2 -> ... -> (tk -> res))
  static SimpleType function(const std::vector<SimpleType>& operands, SimpleType res);

  bool is_ground() const { return node_ == nullptr; }
  // Number of operands until the final Pr.
  int arity() const;
  // i-th operand (0-based) of the curried spine.
  SimpleType arg(int i) const;
  SimpleType operand() const;
  SimpleType result() const;
  // Order of Pr is 0; order of an arrow is max(order(operand)+1, order(result)).
  int order() const;

  bool operator==(const SimpleType& other) const;
  bool operator!=(const SimpleType& other) const { return !(*this == other); }

  std::string str() const;

 private:
  struct Node;
  std::shared_ptr<const Node> node_;
};

struct SimpleType::Node {
  SimpleType operand;
  SimpleType result;
  int order;
};

inline int SimpleType::order() const { return node_ ? node_->order : 0; }

// ---------------------------------------------------------------------------
// Formulas.  One immutable node type covers both dialects: full formulas with
// binders, and automaton transition expressions (binder-free).  Every factory
// allocates, so distinct occurrences of the same subterm are distinct nodes.
// ---------------------------------------------------------------------------

enum class FKind {
  Top,
  Bot,
  Prop,
  NegProp,
  Diamond,
  Box,
  Or,
  And,
  Var,       // lambda-bound (or free first-order) variable
  StateVar,  // fixpoint-bound variable / automaton state
  App,
  Lambda,
  Mu,
  Nu,
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  FKind kind;
  std::string name;  // Prop/NegProp/Var/StateVar: the name; binders: bound name
  SimpleType ann;    // Lambda/Mu/Nu: the annotation on the bound name
  FormulaPtr a;      // unary child / App operator / binder body / Or,And left
  FormulaPtr b;      // App operand / Or,And right

  static FormulaPtr top();
  static FormulaPtr bot();
  static FormulaPtr prop(std::string name);
  static FormulaPtr neg_prop(std::string name);
  static FormulaPtr diamond(FormulaPtr body);
  static FormulaPtr box(FormulaPtr body);
  static FormulaPtr or_(FormulaPtr lhs, FormulaPtr rhs);
  static FormulaPtr and_(FormulaPtr lhs, FormulaPtr rhs);
  static FormulaPtr var(std::string name);
  static FormulaPtr state_var(std::string name);
  static FormulaPtr app(FormulaPtr fn, FormulaPtr arg);
  static FormulaPtr lambda(std::string name, SimpleType ann, FormulaPtr body);
  static FormulaPtr mu(std::string name, SimpleType ann, FormulaPtr body);
  static FormulaPtr nu(std::string name, SimpleType ann, FormulaPtr body);
};

bool is_binder(FKind k);
bool is_literal(FKind k);  // Top/Bot/Prop/NegProp

// Structural equality up to node identity (names, kinds, annotations).
bool struct_equal(const FormulaPtr& lhs, const FormulaPtr& rhs);

// ---------------------------------------------------------------------------
// Parsing and printing
// ---------------------------------------------------------------------------

enum class Dialect { Hfl, ApkaBody };

// Name classification hints for the parser.  A name bound by an enclosing
// binder is classified by the binder; otherwise membership here decides, and
// unknown free names default to StateVar when they start with an upper-case
// letter and Var otherwise.
struct ParseContext {
  std::set<std::string> props;
  std::set<std::string> state_names;
  std::set<std::string> var_names;
};

SimpleType parse_type(const std::string& text);
FormulaPtr parse_formula(const std::string& text, const ParseContext& ctx,
                         Dialect dialect);
// Parses `name : type name : type ...` (the `:` may hug the name).
std::vector<std::pair<std::string, SimpleType>> parse_typed_names(const std::string& text);

std::string print_type(const SimpleType& type);
std::string print_formula(const FormulaPtr& f);

// ---------------------------------------------------------------------------
// Typing
// ---------------------------------------------------------------------------

struct TypingContext {
  std::map<std::string, SimpleType> vars;   // lambda-bound / free first-order
  std::map<std::string, SimpleType> fixes;  // fixpoint-bound / automaton states
};

// Returns the type of `f`; throws TypeError. When `types` is given it receives
// the type of every node, keyed by node address.
SimpleType typecheck(const TypingContext& ctx, const FormulaPtr& f, Dialect dialect,
                     std::map<const Formula*, SimpleType>* types = nullptr);

// ---------------------------------------------------------------------------
// Binder structure
// ---------------------------------------------------------------------------

struct BindingReport {
  bool well_named = true;  // no shadowing, no rebinding across the term
  std::set<std::string> free_vars;
  std::set<std::string> free_fixpoints;
  std::map<std::string, const Formula*> fixpoint_defs;
  // (outer, inner): the binder for `outer` encloses the binder for `inner`.
  // Transitively closed.
  std::set<std::pair<std::string, std::string>> outermore_pairs;

  bool outermore(const std::string& outer, const std::string& inner) const {
    return outermore_pairs.count({outer, inner}) > 0;
  }
  // Among the given fixpoint names, the one enclosing all others (if any).
  std::optional<std::string> outermost(const std::set<std::string>& names) const;
};

BindingReport binding_report(const FormulaPtr& f);

// Free variables of either classification.
void collect_free(const FormulaPtr& f, std::set<std::string>& vars,
                  std::set<std::string>& fixes);

}  // namespace apka
