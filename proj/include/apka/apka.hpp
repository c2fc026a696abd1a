#pragma once

#include <string>
#include <vector>

#include "apka/syntax.hpp"

namespace apka {

struct ArgDecl {
  std::string name;
  SimpleType type;
};

struct StateDecl {
  std::string name;
  std::vector<ArgDecl> args;
  int priority;
  FormulaPtr body;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

enum class Parity { Even, Odd };

struct ClassDescriptor {
  std::size_t index;  // distinct priorities in use
  Parity max_parity;  // parity of the highest priority in use
  int order;          // highest state-type order
};

// One row per subformula occurrence: the first states().size() rows are the
// states themselves (the closures a run starts from and returns to), the rest
// are the transition bodies in declaration order, each pre-order.
struct TableEntry {
  FKind kind;
  std::string name;   // Var/StateVar/Prop/NegProp
  int owner_state;    // whose transition body this occurrence lives in
  int parent;         // table index, -1 at a root
  int child[2];       // table indices, -1 if absent
  SimpleType type;
  int var_index;      // Var: position among the owner state's arguments
  int state_index;    // StateVar: the named state
  int prop_index;     // Prop/NegProp: the named proposition
  std::string text;
};

class Apka {
 public:
  Apka(std::vector<std::string> props, std::vector<StateDecl> states, std::string init);

  static Apka load(const std::string& text);
  static Apka load_file(const std::string& path);
  std::string save() const;

  const std::vector<std::string>& props() const { return props_; }
  const std::vector<StateDecl>& states() const { return states_; }
  int init_index() const { return init_; }

  int state_index(const std::string& name) const;
  int prop_index(const std::string& name) const;
  SimpleType state_type(int s) const { return state_types_[s]; }
  int priority(int s) const { return states_[s].priority; }
  std::size_t arity(int s) const { return states_[s].args.size(); }

  const ValidationReport& report() const { return report_; }

  // Only when report().ok().
  const std::vector<TableEntry>& table() const { return table_; }
  const TableEntry& entry(int q) const { return table_[q]; }
  int head(int s) const { return s; }
  int body_root(int s) const { return body_roots_[s]; }

 private:
  std::vector<std::string> props_;
  std::vector<StateDecl> states_;
  int init_;
  std::vector<SimpleType> state_types_;
  ValidationReport report_;
  std::vector<TableEntry> table_;
  std::vector<int> body_roots_;
};

Apka complement(const Apka& a);
ClassDescriptor descriptor(const Apka& a);

}  // namespace apka
