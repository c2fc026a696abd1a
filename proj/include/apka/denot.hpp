#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "apka/apka.hpp"
#include "apka/caps.hpp"
#include "apka/syntax.hpp"
#include "apka/trees.hpp"

namespace apka {

class EvalContext;

// A point of the semantic lattice: at ground type a set of tree-states (bit
// per state), at arrow type a lazily memoized monotone function.  Values are
// immutable; the memo table fills in behind a lock.
class SemValue {
 public:
  SemValue() = default;  // ground, empty set

  static SemValue ground(std::uint32_t mask);
  static SemValue function(SimpleType type,
                           std::function<SemValue(EvalContext&, const SemValue&)> f);

  bool is_ground() const { return fun_ == nullptr; }
  const SimpleType& type() const { return type_; }
  std::uint32_t mask() const { return mask_; }

  SemValue apply(EvalContext& cx, const SemValue& arg) const;

 private:
  struct Fun {
    std::function<SemValue(EvalContext&, const SemValue&)> f;
    std::map<std::size_t, SemValue> memo;  // keyed by the argument's lattice index
    std::mutex mu;
  };
  SimpleType type_;
  std::uint32_t mask_ = 0;
  std::shared_ptr<Fun> fun_;
};

// Shared evaluation state: the structure, resource caps, and cached lattice
// enumerations (each in an order compatible with ⊑).
class EvalContext {
 public:
  explicit EvalContext(const RegularTree& st, Caps caps = Caps::from_env());

  const RegularTree& structure() const { return *st_; }
  std::size_t states() const { return st_->size(); }
  std::uint32_t full_mask() const {
    return st_->size() >= 32 ? ~0u : (1u << st_->size()) - 1u;
  }
  const Caps& caps() const { return caps_; }

  // All lattice points of a type, smallest first along some linear extension.
  const std::vector<SemValue>& lattice(const SimpleType& t);
  std::size_t lattice_size(const SimpleType& t) { return lattice(t).size(); }
  // Longest strictly ascending chain; fixpoint iteration converges within it.
  std::size_t height_bound(const SimpleType& t);
  // Position of a value in lattice(its type).
  std::size_t canon_index(const SemValue& v);

 private:
  const RegularTree* st_;
  Caps caps_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<std::vector<SemValue>>> cache_;
};

SemValue sem_bottom(EvalContext& cx, const SimpleType& t);
SemValue sem_top(EvalContext& cx, const SimpleType& t);
SemValue sem_join(EvalContext& cx, const SemValue& lhs, const SemValue& rhs);
bool sem_leq(EvalContext& cx, const SemValue& lhs, const SemValue& rhs);
bool sem_equal(EvalContext& cx, const SemValue& lhs, const SemValue& rhs);

struct Interpretation {
  std::map<std::string, SemValue> vars;
  std::map<std::string, SemValue> fixes;
};

// Denotation of a formula under an interpretation covering its free names.
SemValue eval_formula(EvalContext& cx, const Interpretation& eta, const FormulaPtr& f);

SemValue eval_hfl(const RegularTree& st, const Interpretation& eta, const FormulaPtr& f,
                  Caps caps = Caps::from_env());
// node ∈ ⟦f⟧ for closed ground f.
bool check_hfl(const RegularTree& st, int node, const FormulaPtr& f, Caps caps = Caps::from_env());

// Solution of the automaton's equation system, one value per state: nested
// fixpoint iteration, outermost = highest priority, least for odd priorities
// and greatest for even ones; equal priorities iterate jointly.
std::vector<SemValue> solve_apka(const RegularTree& st, const Apka& a,
                                 Caps caps = Caps::from_env());
// node ∈ solution of the initial state.
bool check_apka(const RegularTree& st, int node, const Apka& a, Caps caps = Caps::from_env());

}  // namespace apka
