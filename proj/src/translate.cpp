#include "apka/translate.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "apka/errors.hpp"

namespace apka {

namespace {

FormulaPtr with_children(const FormulaPtr& f, FormulaPtr na, FormulaPtr nb) {
  if (na == f->a && nb == f->b) return f;
  switch (f->kind) {
    case FKind::Diamond: return Formula::diamond(std::move(na));
    case FKind::Box: return Formula::box(std::move(na));
    case FKind::Or: return Formula::or_(std::move(na), std::move(nb));
    case FKind::And: return Formula::and_(std::move(na), std::move(nb));
    case FKind::App: return Formula::app(std::move(na), std::move(nb));
    case FKind::Lambda: return Formula::lambda(f->name, f->ann, std::move(na));
    case FKind::Mu: return Formula::mu(f->name, f->ann, std::move(na));
    case FKind::Nu: return Formula::nu(f->name, f->ann, std::move(na));
    default: return f;
  }
}

FormulaPtr make_binder(FKind k, const std::string& name, const SimpleType& ann,
                       FormulaPtr body) {
  return k == FKind::Mu ? Formula::mu(name, ann, std::move(body))
                        : Formula::nu(name, ann, std::move(body));
}

// Replaces free occurrences of `name` (of the given classification) by `rep`.
FormulaPtr subst_name(const FormulaPtr& f, FKind kind, const std::string& name,
                      const FormulaPtr& rep) {
  if (f->kind == kind && f->name == name) return rep;
  bool shadows = (f->kind == FKind::Lambda && kind == FKind::Var) ||
                 ((f->kind == FKind::Mu || f->kind == FKind::Nu) && kind == FKind::StateVar);
  if (shadows && f->name == name) return f;
  FormulaPtr na = f->a ? subst_name(f->a, kind, name, rep) : nullptr;
  FormulaPtr nb = f->b ? subst_name(f->b, kind, name, rep) : nullptr;
  return with_children(f, std::move(na), std::move(nb));
}

// ---------------------------------------------------------------------------
// Formula -> automaton
// ---------------------------------------------------------------------------

struct ToApka {
  int pads = 0;
  int cls = 0;

  std::string fresh_pad() { return "_pad" + std::to_string(pads++); }
  std::string fresh_cl() { return "_cl" + std::to_string(cls++); }

  // Wraps every lambda that does not continue a fixpoint's lambda prefix in a
  // vacuous greatest fixpoint, so that afterwards lambdas only occur directly
  // under fixpoints.
  FormulaPtr pad(const FormulaPtr& f, bool prefix_ok, TypingContext& ctx) {
    switch (f->kind) {
      case FKind::Mu:
      case FKind::Nu: {
        ctx.fixes.emplace(f->name, f->ann);
        FormulaPtr body = pad(f->a, true, ctx);
        ctx.fixes.erase(f->name);
        return make_binder(f->kind, f->name, f->ann, std::move(body));
      }
      case FKind::Lambda: {
        SimpleType ty;
        if (!prefix_ok) ty = typecheck(ctx, f, Dialect::Hfl);
        ctx.vars.emplace(f->name, f->ann);
        FormulaPtr body = pad(f->a, true, ctx);
        ctx.vars.erase(f->name);
        FormulaPtr lam = Formula::lambda(f->name, f->ann, std::move(body));
        if (prefix_ok) return lam;
        return Formula::nu(fresh_pad(), ty, std::move(lam));
      }
      default: {
        FormulaPtr na = f->a ? pad(f->a, false, ctx) : nullptr;
        FormulaPtr nb = f->b ? pad(f->b, false, ctx) : nullptr;
        return with_children(f, std::move(na), std::move(nb));
      }
    }
  }

  // Closes fixpoint bodies against enclosing lambda variables: a fixpoint with
  // a free lambda variable v becomes an application of a widened fixpoint that
  // abstracts v, and recursive occurrences pick up the new argument.
  FormulaPtr lift(const FormulaPtr& f, TypingContext& ctx) {
    switch (f->kind) {
      case FKind::Mu:
      case FKind::Nu: {
        std::set<std::string> vars, fixes;
        collect_free(f, vars, fixes);
        if (!vars.empty()) {
          const std::string v = *vars.begin();
          SimpleType vt = ctx.vars.at(v);
          std::string nv = fresh_cl();
          SimpleType nt = SimpleType::arrow(vt, f->ann);
          FormulaPtr body = subst_name(f->a, FKind::Var, v, Formula::var(nv));
          body = subst_name(body, FKind::StateVar, f->name,
                            Formula::app(Formula::state_var(f->name), Formula::var(nv)));
          FormulaPtr inner =
              make_binder(f->kind, f->name, nt, Formula::lambda(nv, vt, std::move(body)));
          return lift(Formula::app(std::move(inner), Formula::var(v)), ctx);
        }
        ctx.fixes.emplace(f->name, f->ann);
        FormulaPtr body = lift(f->a, ctx);
        ctx.fixes.erase(f->name);
        return make_binder(f->kind, f->name, f->ann, std::move(body));
      }
      case FKind::Lambda: {
        ctx.vars.emplace(f->name, f->ann);
        FormulaPtr body = lift(f->a, ctx);
        ctx.vars.erase(f->name);
        return Formula::lambda(f->name, f->ann, std::move(body));
      }
      default: {
        FormulaPtr na = f->a ? lift(f->a, ctx) : nullptr;
        FormulaPtr nb = f->b ? lift(f->b, ctx) : nullptr;
        return with_children(f, std::move(na), std::move(nb));
      }
    }
  }

  // Brings every fixpoint to its full lambda prefix, applying the remainder of
  // the body to fresh variables as needed.
  FormulaPtr eta(const FormulaPtr& f) {
    switch (f->kind) {
      case FKind::Mu:
      case FKind::Nu: {
        int n = f->ann.arity();
        std::vector<std::pair<std::string, SimpleType>> prefix;
        FormulaPtr core = f->a;
        while (core->kind == FKind::Lambda) {
          prefix.emplace_back(core->name, core->ann);
          core = core->a;
        }
        core = eta(core);
        for (int i = (int)prefix.size(); i < n; ++i) {
          std::string y = fresh_cl();
          core = Formula::app(std::move(core), Formula::var(y));
          prefix.emplace_back(std::move(y), f->ann.arg(i));
        }
        for (int i = (int)prefix.size() - 1; i >= 0; --i)
          core = Formula::lambda(prefix[i].first, prefix[i].second, std::move(core));
        return make_binder(f->kind, f->name, f->ann, std::move(core));
      }
      default: {
        FormulaPtr na = f->a ? eta(f->a) : nullptr;
        FormulaPtr nb = f->b ? eta(f->b) : nullptr;
        return with_children(f, std::move(na), std::move(nb));
      }
    }
  }

  struct Collected {
    std::vector<StateDecl> states;  // declaration order: discovery order
    std::map<std::string, bool> is_mu;
    std::map<std::string, std::vector<std::string>> kids;
  };

  // `f` is a fixpoint with a full lambda prefix; records it as a state and
  // replaces nested fixpoints in its body by state references.
  void collect(const FormulaPtr& f, Collected& out, const std::string& parent) {
    out.is_mu[f->name] = f->kind == FKind::Mu;
    if (!parent.empty()) out.kids[parent].push_back(f->name);
    StateDecl sd;
    sd.name = f->name;
    sd.priority = 0;
    FormulaPtr core = f->a;
    while (core->kind == FKind::Lambda) {
      sd.args.push_back({core->name, core->ann});
      core = core->a;
    }
    std::size_t slot = out.states.size();
    out.states.push_back(std::move(sd));
    FormulaPtr body = strip(core, out, f->name);
    out.states[slot].body = std::move(body);
  }

  FormulaPtr strip(const FormulaPtr& f, Collected& out, const std::string& parent) {
    if (f->kind == FKind::Mu || f->kind == FKind::Nu) {
      collect(f, out, parent);
      return Formula::state_var(f->name);
    }
    FormulaPtr na = f->a ? strip(f->a, out, parent) : nullptr;
    FormulaPtr nb = f->b ? strip(f->b, out, parent) : nullptr;
    return with_children(f, std::move(na), std::move(nb));
  }

  int assign(const std::string& x, const Collected& c, std::map<std::string, int>& lam) {
    auto done = lam.find(x);
    if (done != lam.end()) return done->second;
    int m = -1;
    auto k = c.kids.find(x);
    if (k != c.kids.end())
      for (const auto& kid : k->second) m = std::max(m, assign(kid, c, lam));
    int want = c.is_mu.at(x) ? 1 : 0;
    int p = m < 0 ? want : (m % 2 == want ? m : m + 1);
    lam[x] = p;
    return p;
  }
};

void props_of(const FormulaPtr& f, std::vector<std::string>& out,
              std::set<std::string>& seen) {
  if (f->kind == FKind::Prop || f->kind == FKind::NegProp) {
    if (seen.insert(f->name).second) out.push_back(f->name);
    return;
  }
  if (f->a) props_of(f->a, out, seen);
  if (f->b) props_of(f->b, out, seen);
}

}  // namespace

Apka hfl_to_apka(const FormulaPtr& f) {
  if (!f) throw InputError("empty formula");
  BindingReport br = binding_report(f);
  if (!br.well_named) throw InputError("formula is not well-named");
  if (!br.free_vars.empty() || !br.free_fixpoints.empty())
    throw InputError("formula is not closed");
  if (!typecheck({}, f, Dialect::Hfl).is_ground())
    throw InputError("formula is not of ground type");

  ToApka t;
  TypingContext ctx;
  FormulaPtr g = t.pad(f, false, ctx);
  g = Formula::nu(t.fresh_pad(), SimpleType::ground(), std::move(g));
  g = t.lift(g, ctx);
  g = t.eta(g);

  ToApka::Collected c;
  t.collect(g, c, "");
  std::map<std::string, int> lam;
  t.assign(c.states[0].name, c, lam);
  for (auto& sd : c.states) sd.priority = lam.at(sd.name);

  std::vector<std::string> props;
  std::set<std::string> seen;
  for (const auto& sd : c.states) props_of(sd.body, props, seen);

  Apka a(std::move(props), std::move(c.states), g->name);
  if (!a.report().ok())
    throw InputError("translation produced an invalid automaton: " +
                     a.report().violations.front());
  return a;
}

// ---------------------------------------------------------------------------
// Automaton -> formula
// ---------------------------------------------------------------------------

namespace {

struct FromApka {
  const Apka& a;
  int cls = 0;
  std::map<std::string, int> binder_prio;  // placed fixpoint binders

  std::string stamp(const std::string& base) {
    return base + "_cl" + std::to_string(cls++);
  }

  // Copy of a closed-form instance with all binder names refreshed, so that
  // repeated placements keep the result well-named.
  FormulaPtr freshen(const FormulaPtr& f, std::map<std::string, std::string>& ren) {
    switch (f->kind) {
      case FKind::Var: {
        auto it = ren.find(f->name);
        return it == ren.end() ? f : Formula::var(it->second);
      }
      case FKind::StateVar: {
        auto it = ren.find(f->name);
        return it == ren.end() ? f : Formula::state_var(it->second);
      }
      case FKind::Lambda:
      case FKind::Mu:
      case FKind::Nu: {
        std::string nn = stamp(f->name);
        if (f->kind != FKind::Lambda) binder_prio[nn] = binder_prio.at(f->name);
        ren[f->name] = nn;
        FormulaPtr body = freshen(f->a, ren);
        ren.erase(f->name);
        if (f->kind == FKind::Lambda) return Formula::lambda(nn, f->ann, std::move(body));
        return make_binder(f->kind, nn, f->ann, std::move(body));
      }
      default: {
        FormulaPtr na = f->a ? freshen(f->a, ren) : nullptr;
        FormulaPtr nb = f->b ? freshen(f->b, ren) : nullptr;
        return with_children(f, std::move(na), std::move(nb));
      }
    }
  }

  // Substitutes `phi` for occurrences of state `x`, refusing to put its
  // fixpoint strictly inside an already-placed lower-priority binder when the
  // occurrence is in operator position.
  FormulaPtr place(const FormulaPtr& f, const std::string& x, const FormulaPtr& phi,
                   int xprio, int minprio, const std::string& owner, bool op_pos) {
    switch (f->kind) {
      case FKind::StateVar: {
        if (f->name != x) return f;
        if (op_pos && minprio < xprio)
          throw UnsupportedPrecedence(
              x, owner,
              "cannot express state " + x + " (priority " + std::to_string(xprio) +
                  ") applied under fixpoint " + owner + " (priority " +
                  std::to_string(minprio) + ")");
        std::map<std::string, std::string> ren;
        return freshen(phi, ren);
      }
      case FKind::Mu:
      case FKind::Nu: {
        int p = binder_prio.at(f->name);
        FormulaPtr body = p < minprio ? place(f->a, x, phi, xprio, p, f->name, false)
                                      : place(f->a, x, phi, xprio, minprio, owner, false);
        return with_children(f, std::move(body), nullptr);
      }
      case FKind::App: {
        FormulaPtr na = place(f->a, x, phi, xprio, minprio, owner, true);
        FormulaPtr nb = place(f->b, x, phi, xprio, minprio, owner, false);
        return with_children(f, std::move(na), std::move(nb));
      }
      default: {
        FormulaPtr na = f->a ? place(f->a, x, phi, xprio, minprio, owner, false) : nullptr;
        FormulaPtr nb = f->b ? place(f->b, x, phi, xprio, minprio, owner, false) : nullptr;
        return with_children(f, std::move(na), std::move(nb));
      }
    }
  }
};

}  // namespace

FormulaPtr apka_to_hfl(const Apka& a) {
  if (!a.report().ok())
    throw InputError("automaton does not validate: " + a.report().violations.front());
  const auto& sts = a.states();
  int n = (int)sts.size();

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int l, int r) { return a.priority(l) < a.priority(r); });

  std::vector<FormulaPtr> slots;
  slots.reserve(n);
  for (const auto& sd : sts) slots.push_back(sd.body);
  std::vector<char> eliminated(n, 0);

  FromApka t{a};
  for (int x : order) {
    FormulaPtr core = slots[x];
    for (int i = (int)sts[x].args.size() - 1; i >= 0; --i)
      core = Formula::lambda(sts[x].args[i].name, sts[x].args[i].type, std::move(core));
    std::set<std::string> vars, fixes;
    collect_free(core, vars, fixes);
    FormulaPtr phi;
    if (fixes.count(sts[x].name)) {
      FKind k = a.priority(x) % 2 == 1 ? FKind::Mu : FKind::Nu;
      t.binder_prio[sts[x].name] = a.priority(x);
      phi = make_binder(k, sts[x].name, a.state_type(x), std::move(core));
    } else {
      phi = std::move(core);  // vacuous fixpoint: keep unwrapped
    }
    slots[x] = phi;
    eliminated[x] = 1;
    for (int y = 0; y < n; ++y) {
      if (y == x) continue;
      if (eliminated[y] && y != a.init_index()) continue;
      slots[y] = t.place(slots[y], sts[x].name, phi, a.priority(x),
                         std::numeric_limits<int>::max(), "", false);
    }
  }

  FormulaPtr out = slots[a.init_index()];
  std::set<std::string> vars, fixes;
  collect_free(out, vars, fixes);
  if (!vars.empty() || !fixes.empty())
    throw InputError("state elimination left unresolved names");
  typecheck({}, out, Dialect::Hfl);
  return out;
}

}  // namespace apka
