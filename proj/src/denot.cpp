#include "apka/denot.hpp"

#include <algorithm>
#include <bit>

#include "apka/errors.hpp"

namespace apka {

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

SemValue SemValue::ground(std::uint32_t mask) {
  SemValue v;
  v.mask_ = mask;
  return v;
}

SemValue SemValue::function(SimpleType type,
                            std::function<SemValue(EvalContext&, const SemValue&)> f) {
  SemValue v;
  v.type_ = std::move(type);
  v.fun_ = std::make_shared<Fun>();
  v.fun_->f = std::move(f);
  return v;
}

SemValue SemValue::apply(EvalContext& cx, const SemValue& arg) const {
  if (!fun_) throw TypeError(TypeErrorKind::Mismatch, "ground value applied to an argument");
  std::size_t key = cx.canon_index(arg);
  {
    std::lock_guard<std::mutex> lk(fun_->mu);
    auto it = fun_->memo.find(key);
    if (it != fun_->memo.end()) return it->second;
  }
  SemValue out = fun_->f(cx, arg);
  std::lock_guard<std::mutex> lk(fun_->mu);
  return fun_->memo.emplace(key, std::move(out)).first->second;
}

// ---------------------------------------------------------------------------
// Order, bounds, joins
// ---------------------------------------------------------------------------

bool sem_leq(EvalContext& cx, const SemValue& lhs, const SemValue& rhs) {
  if (lhs.is_ground()) return (lhs.mask() & ~rhs.mask()) == 0;
  for (const SemValue& x : cx.lattice(lhs.type().operand()))
    if (!sem_leq(cx, lhs.apply(cx, x), rhs.apply(cx, x))) return false;
  return true;
}

bool sem_equal(EvalContext& cx, const SemValue& lhs, const SemValue& rhs) {
  if (lhs.is_ground()) return lhs.mask() == rhs.mask();
  for (const SemValue& x : cx.lattice(lhs.type().operand()))
    if (!sem_equal(cx, lhs.apply(cx, x), rhs.apply(cx, x))) return false;
  return true;
}

SemValue sem_bottom(EvalContext& cx, const SimpleType& t) {
  if (t.is_ground()) return SemValue::ground(0);
  SimpleType res = t.result();
  return SemValue::function(
      t, [res](EvalContext& c, const SemValue&) { return sem_bottom(c, res); });
}

SemValue sem_top(EvalContext& cx, const SimpleType& t) {
  if (t.is_ground()) return SemValue::ground(cx.full_mask());
  SimpleType res = t.result();
  return SemValue::function(t,
                            [res](EvalContext& c, const SemValue&) { return sem_top(c, res); });
}

SemValue sem_join(EvalContext& cx, const SemValue& lhs, const SemValue& rhs) {
  if (lhs.is_ground()) return SemValue::ground(lhs.mask() | rhs.mask());
  return SemValue::function(lhs.type(), [lhs, rhs](EvalContext& c, const SemValue& x) {
    return sem_join(c, lhs.apply(c, x), rhs.apply(c, x));
  });
}

// ---------------------------------------------------------------------------
// Lattice enumeration
// ---------------------------------------------------------------------------

EvalContext::EvalContext(const RegularTree& st, Caps caps) : st_(&st), caps_(caps) {
  if (st.size() > caps.denot_states)
    throw CapError("structure has " + std::to_string(st.size()) +
                   " tree-states, cap is " + std::to_string(caps.denot_states));
}

const std::vector<SemValue>& EvalContext::lattice(const SimpleType& t) {
  std::string key = t.str();
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
  }
  auto out = std::make_shared<std::vector<SemValue>>();
  if (t.is_ground()) {
    std::uint32_t full = full_mask();
    for (std::uint32_t m = 0; m <= full; ++m) out->push_back(SemValue::ground(m));
    std::stable_sort(out->begin(), out->end(), [](const SemValue& a, const SemValue& b) {
      return std::popcount(a.mask()) < std::popcount(b.mask());
    });
  } else {
    // All monotone maps from the operand lattice: walk it in extension order,
    // each image at least the join of the images of the points below.
    const std::vector<SemValue> dom = lattice(t.operand());
    const std::vector<SemValue> cod = lattice(t.result());
    std::vector<char> below(dom.size() * dom.size(), 0);
    for (std::size_t i = 0; i < dom.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        below[i * dom.size() + j] = sem_leq(*this, dom[j], dom[i]) ? 1 : 0;
    std::vector<SemValue> img(dom.size());
    SimpleType ty = t;
    std::function<void(std::size_t)> walk = [&](std::size_t i) {
      if (i == dom.size()) {
        std::vector<SemValue> table = img;
        out->push_back(SemValue::function(
            ty, [table](EvalContext& c, const SemValue& x) {
              return table[c.canon_index(x)];
            }));
        if (out->size() > caps_.max_lattice)
          throw CapError("lattice of " + ty.str() + " exceeds the enumeration cap");
        return;
      }
      SemValue lb = sem_bottom(*this, t.result());
      for (std::size_t j = 0; j < i; ++j)
        if (below[i * dom.size() + j]) lb = sem_join(*this, lb, img[j]);
      for (const SemValue& b : cod)
        if (sem_leq(*this, lb, b)) {
          img[i] = b;
          walk(i + 1);
        }
    };
    walk(0);
    // Re-sort into a linear extension so this lattice can itself be a domain.
    std::stable_sort(out->begin(), out->end(), [this](const SemValue& a, const SemValue& b) {
      return sem_leq(*this, a, b) && !sem_leq(*this, b, a);
    });
  }
  std::lock_guard<std::mutex> lk(mu_);
  auto [it, fresh] = cache_.emplace(key, std::move(out));
  (void)fresh;
  return *it->second;
}

std::size_t EvalContext::height_bound(const SimpleType& t) {
  if (t.is_ground()) return states() + 1;
  return lattice_size(t.operand()) * (height_bound(t.result()) - 1) + 1;
}

std::size_t EvalContext::canon_index(const SemValue& v) {
  const std::vector<SemValue>& lat = lattice(v.type());
  if (v.is_ground()) {
    for (std::size_t i = 0; i < lat.size(); ++i)
      if (lat[i].mask() == v.mask()) return i;
  } else {
    for (std::size_t i = 0; i < lat.size(); ++i)
      if (sem_equal(*this, lat[i], v)) return i;
  }
  throw InputError("value escapes its type's lattice");
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

void check_type_caps(const SimpleType& t, const Caps& caps) {
  if (t.order() > static_cast<int>(caps.max_order))
    throw CapError("type " + t.str() + " has order " + std::to_string(t.order()) +
                   ", cap is " + std::to_string(caps.max_order));
  if (t.arity() > static_cast<int>(caps.max_args))
    throw CapError("type " + t.str() + " takes " + std::to_string(t.arity()) +
                   " arguments, cap is " + std::to_string(caps.max_args));
}

void check_formula_caps(const FormulaPtr& f, const Caps& caps) {
  if (!f) return;
  if (is_binder(f->kind)) check_type_caps(f->ann, caps);
  check_formula_caps(f->a, caps);
  check_formula_caps(f->b, caps);
}

struct Evaluator {
  EvalContext& cx;
  std::map<const Formula*, SimpleType> types;

  SemValue eval(const Interpretation& eta, const FormulaPtr& f) {
    const RegularTree& st = cx.structure();
    switch (f->kind) {
      case FKind::Top:
        return SemValue::ground(cx.full_mask());
      case FKind::Bot:
        return SemValue::ground(0);
      case FKind::Prop:
      case FKind::NegProp: {
        int p = st.prop_index(f->name);
        if (p < 0) throw InputError("structure lacks proposition " + f->name);
        std::uint32_t m = 0;
        for (std::size_t i = 0; i < st.size(); ++i)
          if ((st.nodes()[i].labels >> p) & 1u) m |= 1u << i;
        return SemValue::ground(f->kind == FKind::Prop ? m : (~m & cx.full_mask()));
      }
      case FKind::Or:
        return SemValue::ground(eval(eta, f->a).mask() | eval(eta, f->b).mask());
      case FKind::And:
        return SemValue::ground(eval(eta, f->a).mask() & eval(eta, f->b).mask());
      case FKind::Diamond:
      case FKind::Box: {
        std::uint32_t sub = eval(eta, f->a).mask();
        std::uint32_t m = 0;
        for (std::size_t i = 0; i < st.size(); ++i) {
          bool l = (sub >> st.nodes()[i].left) & 1u;
          bool r = (sub >> st.nodes()[i].right) & 1u;
          if (f->kind == FKind::Diamond ? (l || r) : (l && r)) m |= 1u << i;
        }
        return SemValue::ground(m);
      }
      case FKind::Var: {
        auto it = eta.vars.find(f->name);
        if (it == eta.vars.end())
          throw TypeError(TypeErrorKind::Unbound, "unbound variable " + f->name);
        return it->second;
      }
      case FKind::StateVar: {
        auto it = eta.fixes.find(f->name);
        if (it == eta.fixes.end())
          throw TypeError(TypeErrorKind::Unbound, "unbound fixpoint variable " + f->name);
        return it->second;
      }
      case FKind::App: {
        SemValue fn = eval(eta, f->a);
        SemValue arg = eval(eta, f->b);
        return fn.apply(cx, arg);
      }
      case FKind::Lambda: {
        SimpleType ty = types.at(f.get());
        Interpretation closed = eta;
        FormulaPtr body = f->a;
        std::string name = f->name;
        Evaluator* self = this;
        return SemValue::function(ty, [self, closed, body, name](EvalContext&,
                                                                 const SemValue& v) {
          Interpretation inner = closed;
          inner.vars[name] = v;
          return self->eval(inner, body);
        });
      }
      case FKind::Mu:
      case FKind::Nu: {
        SimpleType ty = f->ann;
        SemValue v = f->kind == FKind::Mu ? sem_bottom(cx, ty) : sem_top(cx, ty);
        std::size_t guard = cx.height_bound(ty) + 2;
        for (std::size_t i = 0; i < guard; ++i) {
          Interpretation inner = eta;
          inner.fixes[f->name] = v;
          SemValue next = eval(inner, f->a);
          if (sem_equal(cx, v, next)) return v;
          v = next;
        }
        throw CapError("fixpoint iteration exceeded the lattice height at " + ty.str());
      }
    }
    throw InputError("unreachable formula kind");
  }
};

TypingContext context_of(const Interpretation& eta) {
  TypingContext ctx;
  for (const auto& [n, v] : eta.vars) ctx.vars[n] = v.type();
  for (const auto& [n, v] : eta.fixes) ctx.fixes[n] = v.type();
  return ctx;
}

using BodyTypes = std::vector<std::map<const Formula*, SimpleType>>;

// Value of one state under a frozen assignment of every state: the curried
// function that, once all arguments are in, evaluates the transition body.
SemValue state_value(EvalContext& cx, std::shared_ptr<const std::vector<std::string>> names,
                     const StateDecl& sd, std::size_t s,
                     std::shared_ptr<const std::vector<SemValue>> frozen,
                     std::shared_ptr<const BodyTypes> btypes, std::vector<SemValue> got) {
  if (got.size() == sd.args.size()) {
    Interpretation eta;
    for (std::size_t k = 0; k < names->size(); ++k) eta.fixes[(*names)[k]] = (*frozen)[k];
    for (std::size_t k = 0; k < got.size(); ++k) eta.vars[sd.args[k].name] = got[k];
    Evaluator ev{cx, (*btypes)[s]};
    return ev.eval(eta, sd.body);
  }
  std::vector<SimpleType> rest;
  for (std::size_t k = got.size(); k < sd.args.size(); ++k) rest.push_back(sd.args[k].type);
  SimpleType ty = SimpleType::function(rest, SimpleType::ground());
  StateDecl sdc = sd;
  return SemValue::function(
      ty, [names, sdc, s, frozen, btypes, got](EvalContext& c, const SemValue& v) {
        std::vector<SemValue> more = got;
        more.push_back(v);
        return state_value(c, names, sdc, s, frozen, btypes, std::move(more));
      });
}

}  // namespace

SemValue eval_formula(EvalContext& cx, const Interpretation& eta, const FormulaPtr& f) {
  check_formula_caps(f, cx.caps());
  Evaluator ev{cx, {}};
  typecheck(context_of(eta), f, Dialect::Hfl, &ev.types);
  for (const auto& [node, ty] : ev.types) {
    (void)node;
    check_type_caps(ty, cx.caps());
  }
  return ev.eval(eta, f);
}

SemValue eval_hfl(const RegularTree& st, const Interpretation& eta, const FormulaPtr& f,
                  Caps caps) {
  EvalContext cx(st, caps);
  return eval_formula(cx, eta, f);
}

bool check_hfl(const RegularTree& st, int node, const FormulaPtr& f, Caps caps) {
  if (node < 0 || static_cast<std::size_t>(node) >= st.size())
    throw InputError("unknown tree node");
  SemValue v = eval_hfl(st, Interpretation{}, f, caps);
  if (!v.is_ground())
    throw TypeError(TypeErrorKind::Mismatch, "formula is not of ground type");
  return (v.mask() >> node) & 1u;
}

// ---------------------------------------------------------------------------
// Automaton solving
// ---------------------------------------------------------------------------

std::vector<SemValue> solve_apka(const RegularTree& st, const Apka& a, Caps caps) {
  if (!a.report().ok()) throw InputError("automaton has validation violations");
  EvalContext cx(st, caps);
  const std::size_t S = a.states().size();
  for (std::size_t s = 0; s < S; ++s) check_type_caps(a.state_type(static_cast<int>(s)), caps);

  auto names = std::make_shared<std::vector<std::string>>();
  for (const StateDecl& sd : a.states()) names->push_back(sd.name);

  // Types of every body node, once.
  auto btypes = std::make_shared<BodyTypes>(S);
  for (std::size_t s = 0; s < S; ++s) {
    TypingContext ctx;
    for (std::size_t k = 0; k < S; ++k)
      ctx.fixes[(*names)[k]] = a.state_type(static_cast<int>(k));
    for (const ArgDecl& d : a.states()[s].args) ctx.vars[d.name] = d.type;
    typecheck(ctx, a.states()[s].body, Dialect::ApkaBody, &(*btypes)[s]);
  }

  // Highest priority outermost; declaration order within a priority.
  std::vector<std::vector<int>> groups;
  {
    std::map<int, std::vector<int>, std::greater<int>> by_prio;
    for (std::size_t s = 0; s < S; ++s)
      by_prio[a.priority(static_cast<int>(s))].push_back(static_cast<int>(s));
    for (auto& [p, g] : by_prio) {
      (void)p;
      groups.push_back(std::move(g));
    }
  }

  std::vector<SemValue> val(S);
  std::function<void(std::size_t)> solve = [&](std::size_t level) {
    for (int s : groups[level])
      val[static_cast<std::size_t>(s)] = a.priority(s) % 2 != 0
                                             ? sem_bottom(cx, a.state_type(s))
                                             : sem_top(cx, a.state_type(s));
    std::size_t guard = 2;
    for (int s : groups[level]) guard += cx.height_bound(a.state_type(s));
    for (std::size_t iter = 0;; ++iter) {
      if (iter > guard) throw CapError("nested fixpoint iteration exceeded its bound");
      if (level + 1 < groups.size()) solve(level + 1);
      auto frozen = std::make_shared<const std::vector<SemValue>>(val);
      bool changed = false;
      std::vector<SemValue> next;
      for (int s : groups[level])
        next.push_back(state_value(cx, names, a.states()[static_cast<std::size_t>(s)],
                                   static_cast<std::size_t>(s), frozen, btypes, {}));
      for (std::size_t i = 0; i < next.size(); ++i) {
        int s = groups[level][i];
        if (!sem_equal(cx, val[static_cast<std::size_t>(s)], next[i])) changed = true;
        val[static_cast<std::size_t>(s)] = next[i];
      }
      if (!changed) break;
    }
  };
  if (!groups.empty()) solve(0);
  return val;
}

bool check_apka(const RegularTree& st, int node, const Apka& a, Caps caps) {
  if (node < 0 || static_cast<std::size_t>(node) >= st.size())
    throw InputError("unknown tree node");
  std::vector<SemValue> sol = solve_apka(st, a, caps);
  const SemValue& v = sol[static_cast<std::size_t>(a.init_index())];
  return (v.mask() >> node) & 1u;
}

}  // namespace apka
