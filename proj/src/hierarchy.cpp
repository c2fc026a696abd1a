#include "apka/hierarchy.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <utility>

#include "apka/errors.hpp"

namespace apka {

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

HierarchyVocab HierarchyVocab::make(int n, HardClass flavor) {
  if (n < 1) throw InputError("vocabulary index must be at least 1");
  HierarchyVocab v;
  v.n = n;
  v.flavor = flavor;
  v.props = {"D", "C", "V", "T", "F"};
  int lo = flavor == HardClass::Sigma ? 0 : 1;
  for (int i = lo; i < lo + n; ++i) v.props.push_back("F_" + std::to_string(i));
  return v;
}

// ---------------------------------------------------------------------------
// Hard automata
// ---------------------------------------------------------------------------

Apka gen_hard(int n, HardClass flavor) {
  if (n < 1) throw InputError("staircase automata start at n = 1");
  HierarchyVocab v = HierarchyVocab::make(n, flavor);
  int shift = flavor == HardClass::Pi ? 1 : 0;
  SimpleType pr = SimpleType::ground();

  auto O = [] { return Formula::state_var("O"); };
  auto x0 = [] { return Formula::var("x_0"); };
  auto xname = [](int i) { return "X_" + std::to_string(i); };
  auto imp = [](const std::string& label, FormulaPtr then) {
    return Formula::or_(Formula::neg_prop(label), std::move(then));
  };

  // (D) -> <>(O x_0), (C) -> [](O x_0), (V) -> <>x_0, then one conjunct per
  // priority label, highest first.
  std::vector<FormulaPtr> conjuncts;
  conjuncts.push_back(imp("D", Formula::diamond(Formula::app(O(), x0()))));
  conjuncts.push_back(imp("C", Formula::box(Formula::app(O(), x0()))));
  conjuncts.push_back(imp("V", Formula::diamond(x0())));
  for (int i = n - 1; i >= 0; --i)
    conjuncts.push_back(imp("F_" + std::to_string(i + shift),
                            Formula::diamond(Formula::app(
                                Formula::state_var(xname(i)),
                                Formula::app(O(), x0())))));
  FormulaPtr big = conjuncts.back();
  for (int i = (int)conjuncts.size() - 2; i >= 0; --i)
    big = Formula::and_(conjuncts[i], std::move(big));

  std::vector<StateDecl> states;
  states.push_back({"I", {}, shift, Formula::app(O(), Formula::top())});
  states.push_back({"O",
                    {{"x_0", pr}},
                    shift,
                    Formula::and_(Formula::neg_prop("F"),
                                  Formula::or_(Formula::prop("T"), std::move(big)))});
  for (int i = n - 1; i >= 0; --i) {
    FormulaPtr body = i > 0 ? Formula::app(Formula::state_var(xname(i - 1)), x0())
                            : Formula::app(O(), x0());
    states.push_back({xname(i), {{"x_0", pr}}, i + shift, std::move(body)});
  }

  Apka a(v.props, std::move(states), "I");
  if (!a.report().ok())
    throw InputError("staircase automaton failed validation: " +
                     a.report().violations.front());
  return a;
}

// ---------------------------------------------------------------------------
// Game-tree encoder
// ---------------------------------------------------------------------------

GameTree::GameTree(std::shared_ptr<InfiniteTree> base, const Apka& a,
                   std::vector<std::string> props)
    : base_(std::move(base)), a_(a), props_(std::move(props)) {
  if (!base_) throw InputError("missing base tree");
  if (!a_.report().ok()) throw InputError("automaton has validation violations");
  for (const auto& p : a_.props())
    if (base_->prop_index(p) < 0) throw InputError("tree lacks proposition " + p);
  for (const char* p : {"D", "C", "V", "T", "F"})
    if (prop_of(p) < 0) throw InputError(std::string("vocabulary lacks ") + p);
  for (const auto& sd : a_.states())
    if (prop_of("F_" + std::to_string(sd.priority)) < 0)
      throw InputError("vocabulary lacks label F_" + std::to_string(sd.priority));
  make_rec({base_->root(), 0, {a_.head(a_.init_index()), 0}, 0, {}});
}

int GameTree::prop_of(const std::string& name) const {
  for (std::size_t i = 0; i < props_.size(); ++i)
    if (props_[i] == name) return (int)i;
  return -1;
}

int GameTree::label_of(const Config& cfg) {
  const TableEntry& en = a_.entry(cfg.cur.formula);
  switch (en.kind) {
    case FKind::StateVar:
      return prop_of("F_" + std::to_string(a_.priority(en.state_index)));
    case FKind::Var: {
      const Closure& b = envs_.bindings(cfg.cur.env)[en.var_index];
      bool pops = en.type.is_ground() && b.env != cfg.comp;
      return prop_of(pops ? "V" : "D");
    }
    case FKind::App:
    case FKind::Or:
    case FKind::Diamond:
      return prop_of("D");
    case FKind::And:
    case FKind::Box:
      return prop_of("C");
    case FKind::Top:
      return prop_of("T");
    case FKind::Bot:
      return prop_of("F");
    default: {  // Prop / NegProp
      bool h = base_->holds(cfg.node, (std::size_t)base_->prop_index(en.name));
      if (en.kind == FKind::NegProp) h = !h;
      return prop_of(h ? "T" : "F");
    }
  }
}

int GameTree::make_rec(Config cfg) {
  Rec r;
  r.label = label_of(cfg);
  r.cfg = std::move(cfg);
  recs_.push_back(std::move(r));
  return (int)recs_.size() - 1;
}

int GameTree::child(int node, int dir) {
  std::lock_guard<std::mutex> lk(mu_);
  if (recs_[node].kid[dir] >= 0) return recs_[node].kid[dir];
  Need nd = classify(a_, *base_, recs_[node].cfg);
  switch (nd.kind) {
    case NeedKind::ExistsWins:
    case NeedKind::ForallWins:
      recs_[node].kid[0] = recs_[node].kid[1] = node;
      break;
    case NeedKind::Deterministic: {
      Config cfg = recs_[node].cfg;
      core_step(a_, *base_, envs_, cfg, std::nullopt, recs_.size());
      int s = make_rec(std::move(cfg));
      recs_[node].kid[0] = recs_[node].kid[1] = s;
      break;
    }
    default:
      for (int d = 0; d < 2; ++d) {
        Config cfg = recs_[node].cfg;
        core_step(a_, *base_, envs_, cfg, d == 0 ? Choice::Left : Choice::Right,
                  recs_.size());
        recs_[node].kid[d] = make_rec(std::move(cfg));
      }
  }
  return recs_[node].kid[dir];
}

std::uint32_t GameTree::labels(int node) {
  std::lock_guard<std::mutex> lk(mu_);
  return 1u << recs_[node].label;
}

std::string GameTree::node_name(int node) const { return "g" + std::to_string(node); }

bool GameTree::valid_node(int node) const {
  std::lock_guard<std::mutex> lk(mu_);
  return node >= 0 && node < (int)recs_.size();
}

Config GameTree::config(int node) const {
  std::lock_guard<std::mutex> lk(mu_);
  return recs_[node].cfg;
}

std::vector<int> GameTree::inner_priority_stack(int node) const {
  std::lock_guard<std::mutex> lk(mu_);
  std::vector<int> out;
  for (int e = recs_[node].cfg.comp; e != 0; e = envs_.parent(e))
    out.push_back(a_.priority(envs_.creator(e)));
  std::reverse(out.begin(), out.end());
  return out;
}

GameTreeHandle encode_game_tree(std::shared_ptr<InfiniteTree> t, const Apka& a,
                                const HierarchyVocab& vocab) {
  return std::make_shared<GameTree>(std::move(t), a, vocab.props);
}

GameTreeHandle encode_game_tree(std::shared_ptr<InfiniteTree> t, const Apka& a) {
  int hi = 0;
  int lo = std::numeric_limits<int>::max();
  for (const auto& sd : a.states()) {
    hi = std::max(hi, sd.priority);
    lo = std::min(lo, sd.priority);
  }
  HierarchyVocab v = lo == 0 ? HierarchyVocab::make(std::max(1, hi + 1), HardClass::Sigma)
                             : HierarchyVocab::make(std::max(1, hi), HardClass::Pi);
  return encode_game_tree(std::move(t), a, v);
}

// ---------------------------------------------------------------------------
// Contraction iteration
// ---------------------------------------------------------------------------

namespace {

HierarchyVocab vocab_of(const Apka& a) {
  if (a.props().size() >= 6) {
    int n = (int)a.props().size() - 5;
    for (HardClass f : {HardClass::Sigma, HardClass::Pi}) {
      HierarchyVocab v = HierarchyVocab::make(n, f);
      if (v.props == a.props()) return v;
    }
  }
  throw InputError("automaton is not over a hierarchy vocabulary");
}

}  // namespace

std::string ConvergenceReport::str() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < step_distances.size(); ++i)
    out << "iterate " << i + 1 << ": distance " << step_distances[i].str() << "\n";
  out << "stabilized: " << (stabilized ? "yes" : "no") << "\n";
  out << "residual: " << residual.str() << "\n";
  return out.str();
}

ConvergenceReport banach_iterate(const Apka& a, const RegularTree& seed, int iters,
                                 int depth, const Caps& caps) {
  if (iters < 1) throw InputError("need at least one iteration");
  if (depth < 1) throw InputError("need a positive prefix depth");
  if ((std::size_t)depth > caps.max_depth)
    throw CapError("prefix depth " + std::to_string(depth) + " exceeds cap " +
                   std::to_string(caps.max_depth));
  HierarchyVocab v = vocab_of(a);

  std::shared_ptr<InfiniteTree> cur = std::make_shared<RegularTree>(seed);
  ConvergenceReport rep;
  PrefixTree prev = prefix(*cur, depth, caps);
  for (int k = 0; k < iters; ++k) {
    cur = encode_game_tree(cur, a, v);
    PrefixTree now = prefix(*cur, depth, caps);
    rep.step_distances.push_back(distance(prev, now, (std::size_t)depth));
    prev = std::move(now);
  }
  rep.stabilized = !rep.step_distances.back().exact;
  rep.prefix = prev;

  GameTreeHandle once_more = encode_game_tree(cur, a, v);
  PrefixTree lhs = prefix(*cur, depth - 1, caps);
  PrefixTree rhs = prefix(*once_more, depth - 1, caps);
  rep.residual = distance(lhs, rhs, (std::size_t)(depth - 1));
  return rep;
}

}  // namespace apka
