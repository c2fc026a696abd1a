#include "apka/machine.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "apka/errors.hpp"

namespace apka {

namespace {

std::string qname(int q) { return "q" + std::to_string(q); }
std::string ename(int e) { return "e" + std::to_string(e); }

bool wins_exists(const Apka& a, InfiniteTree& t, const TableEntry& en, int node,
                 std::string& reason) {
  switch (en.kind) {
    case FKind::Top:
      reason = "tt is true";
      return true;
    case FKind::Bot:
      reason = "ff is false";
      return false;
    case FKind::Prop:
    case FKind::NegProp: {
      int p = t.prop_index(en.name);
      if (p < 0) throw InputError("tree lacks proposition " + en.name);
      bool holds = t.holds(node, static_cast<std::size_t>(p));
      bool good = (en.kind == FKind::Prop) == holds;
      reason = (en.kind == FKind::Prop ? "" : "!") + en.name +
               (good ? " holds at " : " fails at ") + t.node_name(node);
      return good;
    }
    default:
      (void)a;
      return false;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// One-step semantics
// ---------------------------------------------------------------------------

Need classify(const Apka& a, InfiniteTree& t, const Config& c) {
  const TableEntry& en = a.entry(c.cur.formula);
  switch (en.kind) {
    case FKind::Top:
    case FKind::Bot:
    case FKind::Prop:
    case FKind::NegProp: {
      std::string reason;
      bool ex = wins_exists(a, t, en, c.node, reason);
      return {ex ? NeedKind::ExistsWins : NeedKind::ForallWins, reason, "", ""};
    }
    case FKind::Or:
    case FKind::And:
      return {en.kind == FKind::Or ? NeedKind::ExistsChoice : NeedKind::ForallChoice,
              "", a.entry(en.child[0]).text, a.entry(en.child[1]).text};
    case FKind::Diamond:
    case FKind::Box:
      return {en.kind == FKind::Diamond ? NeedKind::ExistsChoice : NeedKind::ForallChoice,
              "", t.node_name(t.child(c.node, 0)), t.node_name(t.child(c.node, 1))};
    default:
      return {NeedKind::Deterministic, "", "", ""};
  }
}

CoreEvent core_step(const Apka& a, InfiniteTree& t, EnvStore& envs, Config& cfg,
                    std::optional<Choice> choice, std::size_t step) {
  const TableEntry& en = a.entry(cfg.cur.formula);
  CoreEvent ev;
  auto need_choice = [&]() {
    if (!choice) throw InputError("choice required at " + qname(cfg.cur.formula));
    return *choice == Choice::Left ? 0 : 1;
  };
  switch (en.kind) {
    case FKind::StateVar: {
      int s = en.state_index;
      std::size_t n = a.arity(s);
      if (cfg.stack.size() != n)
        throw InputError("stack holds " + std::to_string(cfg.stack.size()) +
                         " closures for an arity-" + std::to_string(n) + " state");
      std::vector<Closure> bindings(n);
      for (std::size_t j = 0; j < n; ++j) bindings[j] = cfg.stack[n - 1 - j];
      cfg.stack.clear();
      int e = envs.create(cfg.comp, s, step, std::move(bindings));
      cfg.cur = {a.body_root(s), e};
      cfg.comp = e;
      ev.kind = StepEvent::Expand;
      ev.created_env = e;
      ev.expanded_state = s;
      ev.pushed_priority = a.priority(s);
      return ev;
    }
    case FKind::App:
      cfg.stack.push_back({en.child[1], cfg.cur.env});
      cfg.cur.formula = en.child[0];
      ev.kind = StepEvent::PushArg;
      return ev;
    case FKind::Var: {
      Closure target = envs.bindings(cfg.cur.env)[en.var_index];
      if (!en.type.is_ground()) {
        cfg.cur = target;
        ev.kind = StepEvent::DerefFun;
        return ev;
      }
      if (target.env == cfg.comp) {
        cfg.cur = target;
        ev.kind = StepEvent::DerefGround;
        ev.deref_target = target.formula;
        return ev;
      }
      ev.kind = StepEvent::Pop;
      ev.closed_env = cfg.comp;
      cfg.comp = envs.parent(cfg.comp);
      return ev;
    }
    case FKind::Or:
    case FKind::And: {
      int d = need_choice();
      cfg.cur.formula = en.child[d];
      ev.kind = d == 0 ? StepEvent::PickLeft : StepEvent::PickRight;
      return ev;
    }
    case FKind::Diamond:
    case FKind::Box: {
      int d = need_choice();
      cfg.node = t.child(cfg.node, d);
      cfg.depth += 1;
      cfg.cur.formula = en.child[0];
      ev.kind = d == 0 ? StepEvent::MoveLeft : StepEvent::MoveRight;
      return ev;
    }
    default:
      throw InputError("configuration at " + qname(cfg.cur.formula) + " is terminal");
  }
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

GameState::GameState(const Apka& a, InfiniteTree& t, int start_node) : a_(&a), t_(&t) {
  if (!a.report().ok()) throw InputError("automaton has validation violations");
  if (!t.valid_node(start_node)) throw InputError("unknown tree node");
  for (const auto& p : a.props())
    if (t.prop_index(p) < 0) throw InputError("tree lacks proposition " + p);
  cfg_ = {start_node, 0, {a.head(a.init_index()), 0}, 0, {}};
  steps_.push_back({cfg_, -1, 0, CoreEvent{}});
}

Need GameState::need() const { return classify(*a_, *t_, cfg_); }

void GameState::step(std::optional<Choice> choice) {
  Need nd = need();
  if (nd.kind == NeedKind::ExistsWins || nd.kind == NeedKind::ForallWins)
    throw InputError("game already decided: " + nd.reason);
  bool want = nd.kind == NeedKind::ExistsChoice || nd.kind == NeedKind::ForallChoice;
  if (want && !choice) throw InputError("choice required");
  if (!want && choice) throw InputError("no choice expected here");
  CoreEvent ev = core_step(*a_, *t_, envs_, cfg_, choice, steps_.size());
  if (ev.kind == StepEvent::Expand) {
    closed_at_.push_back(-1);
    pnodes_.push_back({ev.pushed_priority, ev.created_env, phead_});
    phead_ = static_cast<int>(pnodes_.size()) - 1;
    ++psize_;
  } else if (ev.kind == StepEvent::Pop) {
    closed_at_[ev.closed_env] = static_cast<std::ptrdiff_t>(steps_.size());
    phead_ = pnodes_[phead_].parent;
    --psize_;
  }
  steps_.push_back({cfg_, phead_, psize_, ev});
}

std::vector<PrioEntry> GameState::pstack() const {
  std::vector<PrioEntry> out;
  for (int h = phead_; h != -1; h = pnodes_[h].parent)
    out.push_back({pnodes_[h].priority, pnodes_[h].owner});
  std::reverse(out.begin(), out.end());
  return out;
}

Trace GameState::trace() const {
  Trace tr;
  tr.automaton = a_;
  tr.tree = t_;
  tr.steps = steps_;
  tr.pnodes = pnodes_;
  tr.envs = envs_;
  tr.closed_at = closed_at_;
  Need nd = need();
  if (nd.kind == NeedKind::ExistsWins) {
    tr.status = RunStatus::ExistsWon;
    tr.verdict = nd.reason;
  } else if (nd.kind == NeedKind::ForallWins) {
    tr.status = RunStatus::ForallWon;
    tr.verdict = nd.reason;
  }
  return tr;
}

GameState init_run(const Apka& a, InfiniteTree& t, int start_node) {
  return GameState(a, t, start_node);
}

std::vector<Choice> parse_script(const std::string& text) {
  std::vector<Choice> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto cut = line.find("//");
    if (cut != std::string::npos) line.resize(cut);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      if (tok == "L")
        out.push_back(Choice::Left);
      else if (tok == "R")
        out.push_back(Choice::Right);
      else
        throw ParseError("bad script token '" + tok + "'", lineno, -1);
    }
  }
  return out;
}

Trace run_script(GameState& gs, const std::vector<Choice>& script, std::size_t max_configs) {
  std::size_t si = 0;
  RunStatus status = RunStatus::Running;
  std::string verdict;
  for (;;) {
    Need nd = gs.need();
    if (nd.kind == NeedKind::ExistsWins) {
      status = RunStatus::ExistsWon;
      verdict = nd.reason;
      break;
    }
    if (nd.kind == NeedKind::ForallWins) {
      status = RunStatus::ForallWon;
      verdict = nd.reason;
      break;
    }
    if (gs.configs() >= max_configs) {
      status = RunStatus::StepLimit;
      verdict = "configuration limit reached";
      break;
    }
    std::optional<Choice> ch;
    if (nd.kind != NeedKind::Deterministic) {
      if (si >= script.size()) {
        status = RunStatus::NeedsChoice;
        verdict = "script exhausted at a choice point";
        break;
      }
      ch = script[si++];
    }
    gs.step(ch);
  }
  Trace tr = gs.trace();
  tr.status = status;
  tr.verdict = verdict;
  return tr;
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

std::vector<PrioEntry> Trace::pstack_at(std::size_t step) const {
  std::vector<PrioEntry> out;
  for (int h = steps[step].phead; h != -1; h = pnodes[h].parent)
    out.push_back({pnodes[h].priority, pnodes[h].owner});
  std::reverse(out.begin(), out.end());
  return out;
}

std::string Trace::pstack_digits(std::size_t step) const {
  std::string out;
  for (const auto& pe : pstack_at(step)) out += std::to_string(pe.priority);
  return out;
}

std::string Trace::dump(bool legend) const {
  std::ostringstream out;
  if (legend && automaton) {
    const auto& tab = automaton->table();
    for (std::size_t q = 0; q < tab.size(); ++q)
      out << qname(static_cast<int>(q)) << " = " << tab[q].text << "\n";
    out << "\n";
  }
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const Config& c = steps[k].cfg;
    out << "step" << k << " | node=" << (tree ? tree->node_name(c.node) : std::to_string(c.node))
        << " depth=" << c.depth << " | Q=" << qname(c.cur.formula) << " | env="
        << ename(c.cur.env) << " comp=" << ename(c.comp) << " | |G|=" << c.stack.size()
        << " | D=" << pstack_digits(k) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Monitors
// ---------------------------------------------------------------------------

MonitorReport check_run_invariants(const Trace& tr) {
  MonitorReport rep;
  auto fail = [&](std::size_t k, const std::string& msg) {
    if (rep.violations.size() < 64)
      rep.violations.push_back("step " + std::to_string(k) + ": " + msg);
  };
  if (!tr.automaton || tr.steps.empty()) {
    rep.violations.push_back("empty trace");
    return rep;
  }
  const Apka& a = *tr.automaton;
  const EnvStore& envs = tr.envs;
  const std::size_t N = tr.steps.size();

  // Longest root-to-leaf occurrence count per transition body: a cap on how
  // many separate computation intervals one environment can see.
  std::vector<int> path_bound(a.states().size(), 1);
  std::function<int(int)> pathlen = [&](int q) -> int {
    if (q < 0) return 0;
    const TableEntry& en = a.entry(q);
    return 1 + std::max(pathlen(en.child[0]), pathlen(en.child[1]));
  };
  for (std::size_t s = 0; s < a.states().size(); ++s)
    path_bound[s] = pathlen(a.body_root(static_cast<int>(s)));

  // Replay the run, maintaining the chain of open environments from the
  // computing one up (the priority stack's owners, top of chain = computing).
  std::vector<int> chain;
  std::vector<char> on_chain(envs.size(), 0);
  on_chain[0] = 1;  // the empty environment backs everything
  std::map<int, int> last_ground;  // env -> most recent ground occurrence there
  std::vector<int> intervals(envs.size(), 0);

  const Config& c0 = tr.steps[0].cfg;
  if (c0.comp != 0 || c0.cur.env != 0 || !c0.stack.empty() ||
      c0.cur.formula != a.head(a.init_index()))
    fail(0, "initial configuration malformed");

  auto subformula_of = [&](int q, int root) {
    for (int p = a.entry(q).parent; p != -1; p = a.entry(p).parent)
      if (p == root) return true;
    return false;
  };

  for (std::size_t k = 0; k < N; ++k) {
    const Config& c = tr.steps[k].cfg;
    const CoreEvent& ev = tr.steps[k].event;

    if (k > 0) {
      const Config& p = tr.steps[k - 1].cfg;
      const TableEntry& pe = a.entry(p.cur.formula);
      // The recorded event must reproduce this configuration from the last.
      switch (ev.kind) {
        case StepEvent::Expand: {
          if (pe.kind != FKind::StateVar || ev.expanded_state != pe.state_index)
            fail(k, "expansion event at a non-state occurrence");
          int e = ev.created_env;
          if (e < 0 || static_cast<std::size_t>(e) >= envs.size() ||
              envs.parent(e) != p.comp || envs.creation_step(e) != k)
            fail(k, "created environment does not match the event");
          else {
            const auto& bs = envs.bindings(e);
            if (bs.size() != p.stack.size() || bs.size() != a.arity(pe.state_index))
              fail(k, "binding count differs from the argument stack");
            else
              for (std::size_t j = 0; j < bs.size(); ++j) {
                if (!(bs[j] == p.stack[bs.size() - 1 - j]))
                  fail(k, "bindings are not the stacked arguments in order");
                if (!on_chain[bs[j].env])
                  fail(k, "fresh binding does not target an open ancestor");
              }
            if (c.comp != e || c.cur.env != e || c.cur.formula != a.body_root(pe.state_index) ||
                !c.stack.empty())
              fail(k, "expansion did not move to the transition body");
            if (ev.pushed_priority != a.priority(pe.state_index))
              fail(k, "pushed priority differs from the state's");
            chain.push_back(e);
            if (static_cast<std::size_t>(e) < on_chain.size()) on_chain[e] = 1;
          }
          break;
        }
        case StepEvent::Pop: {
          Closure b{-1, -1};
          if (pe.kind != FKind::Var || !pe.type.is_ground())
            fail(k, "pop event without a ground variable read");
          else
            b = envs.bindings(p.cur.env)[pe.var_index];
          if (b.env == p.comp) fail(k, "pop despite a binding into the computing environment");
          if (chain.empty() || chain.back() != p.comp || ev.closed_env != p.comp)
            fail(k, "pop closed something other than the computing environment");
          else {
            on_chain[chain.back()] = 0;
            chain.pop_back();
          }
          if (c.comp != envs.parent(p.comp) || !(c.cur == p.cur) || !c.stack.empty())
            fail(k, "pop changed more than the computing environment");
          if (tr.closed_at[ev.closed_env] != static_cast<std::ptrdiff_t>(k))
            fail(k, "closure time not recorded at the pop");
          break;
        }
        case StepEvent::DerefGround:
        case StepEvent::DerefFun: {
          if (pe.kind != FKind::Var)
            fail(k, "dereference event at a non-variable");
          else {
            Closure b = envs.bindings(p.cur.env)[pe.var_index];
            if (!(c.cur == b)) fail(k, "dereference did not follow the binding");
            if (ev.kind == StepEvent::DerefGround &&
                (!pe.type.is_ground() || b.env != p.comp))
              fail(k, "ground dereference outside the computing environment");
            if (ev.kind == StepEvent::DerefFun && pe.type.is_ground())
              fail(k, "function dereference at ground type");
          }
          if (c.comp != p.comp || c.stack != p.stack) fail(k, "dereference moved the context");
          break;
        }
        case StepEvent::PushArg:
          if (pe.kind != FKind::App)
            fail(k, "operand push at a non-application");
          else if (c.cur.formula != pe.child[0] || c.cur.env != p.cur.env ||
                   c.stack.size() != p.stack.size() + 1 ||
                   !(c.stack.back() == Closure{pe.child[1], p.cur.env}))
            fail(k, "operand push malformed");
          if (c.comp != p.comp) fail(k, "operand push moved the computing environment");
          break;
        case StepEvent::PickLeft:
        case StepEvent::PickRight: {
          if (pe.kind != FKind::Or && pe.kind != FKind::And)
            fail(k, "operand pick at a non-junction");
          else if (c.cur.formula != pe.child[ev.kind == StepEvent::PickLeft ? 0 : 1] ||
                   c.cur.env != p.cur.env)
            fail(k, "pick did not land on the chosen operand");
          if (c.comp != p.comp || c.node != p.node || c.stack != p.stack)
            fail(k, "pick moved the context");
          break;
        }
        case StepEvent::MoveLeft:
        case StepEvent::MoveRight: {
          if (pe.kind != FKind::Diamond && pe.kind != FKind::Box)
            fail(k, "tree move at a non-modality");
          else if (tr.tree &&
                   c.node != tr.tree->child(p.node, ev.kind == StepEvent::MoveLeft ? 0 : 1))
            fail(k, "tree move went to the wrong successor");
          if (c.depth != p.depth + 1 || c.cur.formula != pe.child[0] || c.cur.env != p.cur.env ||
              c.comp != p.comp || c.stack != p.stack)
            fail(k, "tree move malformed");
          break;
        }
        case StepEvent::Init:
          fail(k, "init event after the first configuration");
          break;
      }
    }

    const TableEntry& en = a.entry(c.cur.formula);

    // Argument stack matches the current closure's type, first argument on top.
    int n = en.type.arity();
    if (static_cast<std::size_t>(n) != c.stack.size())
      fail(k, "argument stack holds " + std::to_string(c.stack.size()) +
                  " closures against type " + en.type.str());
    else
      for (int j = 0; j < n; ++j)
        if (a.entry(c.stack[n - 1 - j].formula).type != en.type.arg(j)) {
          fail(k, "argument stack typing broken at position " + std::to_string(j));
          break;
        }

    // Current closure sits on the open chain, except mid-cascade ground reads
    // whose binding still targets the chain.
    if (!on_chain[c.cur.env]) {
      bool cascade = en.kind == FKind::Var && en.type.is_ground() &&
                     tr.closed_at[c.cur.env] != -1 &&
                     tr.closed_at[c.cur.env] <= static_cast<std::ptrdiff_t>(k) &&
                     on_chain[envs.bindings(c.cur.env)[en.var_index].env];
      if (!cascade) fail(k, "current closure's environment escaped the open chain");
    }

    // Stacked closures come from the open chain.
    for (const Closure& g : c.stack)
      if (!on_chain[g.env]) fail(k, "stacked closure's environment escaped the open chain");

    // Priorities on the stack are exactly the open chain's.
    if (tr.steps[k].psize != chain.size() || envs.depth(c.comp) != static_cast<int>(chain.size()))
      fail(k, "priority stack height differs from the open chain");
    if ((chain.empty() && c.comp != 0) || (!chain.empty() && chain.back() != c.comp))
      fail(k, "computing environment is not the newest open one");
    if (k + 1 == N || k % 256 == 0) {
      auto ps = tr.pstack_at(k);
      bool ok = ps.size() == chain.size();
      for (std::size_t i = 0; ok && i < ps.size(); ++i)
        ok = ps[i].owner == chain[i] &&
             ps[i].priority == a.priority(envs.creator(chain[i]));
      if (!ok) fail(k, "priority stack does not mirror the open chain");
    }

    // Type order never drops while the computing environment stays put.
    if (k > 0 && ev.kind != StepEvent::Expand && ev.kind != StepEvent::Pop) {
      const TableEntry& pe = a.entry(tr.steps[k - 1].cfg.cur.formula);
      if (en.type.order() < pe.type.order())
        fail(k, "type order decreased within one environment");
    }

    // A ground read back into the computing environment lands strictly inside
    // the last ground occurrence computed there.
    if (ev.kind == StepEvent::DerefGround) {
      auto it = last_ground.find(c.comp);
      if (it == last_ground.end())
        fail(k, "ground read into an environment with no ground history");
      else if (!en.type.is_ground() || ev.deref_target != c.cur.formula ||
               !subformula_of(ev.deref_target, it->second))
        fail(k, "ground read outside the last ground occurrence");
    }
    if (en.type.is_ground() && c.cur.env == c.comp) last_ground[c.comp] = c.cur.formula;

    // Closed environments never compute again.
    if (tr.closed_at[c.comp] != -1 && tr.closed_at[c.comp] <= static_cast<std::ptrdiff_t>(k))
      fail(k, "closed environment recomputed");
    if (k == 0 || c.comp != tr.steps[k - 1].cfg.comp) intervals[c.comp] += 1;
  }

  for (std::size_t e = 1; e < envs.size(); ++e)
    if (intervals[e] > path_bound[envs.creator(static_cast<int>(e))])
      rep.violations.push_back(ename(static_cast<int>(e)) + " computed in " +
                               std::to_string(intervals[e]) + " intervals, above its body bound " +
                               std::to_string(path_bound[envs.creator(static_cast<int>(e))]));
  return rep;
}

// ---------------------------------------------------------------------------
// Stair summary
// ---------------------------------------------------------------------------

std::string StairSummary::str() const {
  std::ostringstream out;
  auto seq = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s.empty() ? "(empty)" : s;
  };
  auto hist = [](const std::map<int, std::size_t>& m) {
    std::string s;
    for (const auto& [p, n] : m) s += (s.empty() ? "" : " ") + std::to_string(p) + ":" +
                                      std::to_string(n);
    return s.empty() ? "(none)" : s;
  };
  out << "window start : " << window_start << "\n";
  out << "min height   : " << min_height << "\n";
  out << "locked prefix: " << seq(locked_prefix) << "\n";
  out << "final stack  : " << seq(final_stack) << "\n";
  out << "pushes       : " << hist(pushes) << "\n";
  out << "pops         : " << hist(pops) << "\n";
  out << "candidate    : " << (candidate ? std::to_string(*candidate) : "none") << "\n";
  if (decided) out << "decided      : the run reached a terminal configuration\n";
  out << "note: " << note << "\n";
  return out.str();
}

StairSummary stair_summary(const Trace& tr, std::size_t suffix_start) {
  StairSummary s;
  s.note = "heuristic over a finite window; the infinite-play winner is not decided here";
  s.decided = tr.status == RunStatus::ExistsWon || tr.status == RunStatus::ForallWon;
  if (tr.steps.empty()) return s;
  const std::size_t N = tr.steps.size();
  s.window_start = std::min(suffix_start, N - 1);

  s.min_height = tr.steps[s.window_start].psize;
  for (std::size_t k = s.window_start; k < N; ++k)
    s.min_height = std::min(s.min_height, tr.steps[k].psize);

  auto fin = tr.pstack_at(N - 1);
  for (const auto& pe : fin) s.final_stack.push_back(pe.priority);
  s.locked_prefix.assign(s.final_stack.begin(),
                         s.final_stack.begin() + static_cast<std::ptrdiff_t>(s.min_height));

  for (std::size_t k = std::max<std::size_t>(s.window_start, 1); k < N; ++k) {
    const CoreEvent& ev = tr.steps[k].event;
    if (ev.kind == StepEvent::Expand) {
      s.pushes[ev.pushed_priority] += 1;
      if (tr.closed_at[ev.created_env] == -1)
        s.candidate = std::max(s.candidate.value_or(ev.pushed_priority), ev.pushed_priority);
    } else if (ev.kind == StepEvent::Pop) {
      s.pops[tr.pnodes[tr.steps[k - 1].phead].priority] += 1;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Round analysis
// ---------------------------------------------------------------------------

std::pair<std::vector<RoundRecord>, ConformanceReport> round_analysis(const Trace& tr, int n,
                                                                      HardClass cls) {
  if (!tr.automaton || tr.steps.empty()) throw InputError("empty trace");
  const Apka& a = *tr.automaton;
  const EnvStore& envs = tr.envs;

  int idxI = a.state_index("I");
  int idxO = a.state_index("O");
  std::vector<int> idxX(static_cast<std::size_t>(n), -1);
  bool shaped = idxI >= 0 && idxO >= 0 && n >= 1;
  for (int i = 0; i < n && shaped; ++i) {
    idxX[static_cast<std::size_t>(i)] = a.state_index("X_" + std::to_string(i));
    shaped = idxX[static_cast<std::size_t>(i)] >= 0;
  }
  int base = cls == HardClass::Sigma ? 0 : 1;
  if (shaped)
    shaped = a.priority(idxI) == base && a.priority(idxO) == base;
  for (int i = 0; i < n && shaped; ++i)
    shaped = a.priority(idxX[static_cast<std::size_t>(i)]) == i + base;
  if (!shaped) throw InputError("trace does not come from a staircase automaton");
  std::vector<int> xlevel(a.states().size(), -1);
  for (int i = 0; i < n; ++i) xlevel[static_cast<std::size_t>(idxX[static_cast<std::size_t>(i)])] = i;

  ConformanceReport rep;
  auto fail = [&](const std::string& msg) {
    if (rep.violations.size() < 64) rep.violations.push_back(msg);
  };

  // Round boundaries: configurations whose current closure is an occurrence
  // of the O state (about to expand with its argument stacked).
  std::vector<std::size_t> bounds;
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    const TableEntry& en = a.entry(tr.steps[k].cfg.cur.formula);
    if (en.kind == FKind::StateVar && en.state_index == idxO) bounds.push_back(k);
  }
  std::vector<RoundRecord> rounds;
  if (bounds.empty()) {
    fail("no round boundary observed");
    return {rounds, rep};
  }

  auto open_at = [&](int e, std::size_t k) {
    return tr.closed_at[e] == -1 || tr.closed_at[e] > static_cast<std::ptrdiff_t>(k);
  };

  // Dummy round: initial expansion only.
  {
    RoundRecord r;
    r.kind = RoundRecord::Kind::Dummy;
    r.start = 0;
    r.end = bounds[0];
    for (std::size_t k = 1; k <= bounds[0]; ++k)
      if (tr.steps[k].event.kind == StepEvent::Expand) {
        r.envs.push_back(tr.steps[k].event.created_env);
        r.pseq.push_back(tr.steps[k].event.pushed_priority);
      }
    if (r.envs.size() != 1 || tr.steps[1].event.expanded_state != idxI ||
        envs.parent(r.envs[0]) != 0)
      fail("run does not open with a single initial expansion");
    rounds.push_back(std::move(r));
  }

  std::vector<int> env_round(envs.size(), -1);
  if (!rounds[0].envs.empty()) env_round[rounds[0].envs[0]] = 0;

  for (std::size_t j = 0; j + 1 < bounds.size(); ++j) {
    RoundRecord r;
    r.start = bounds[j];
    r.end = bounds[j + 1];
    std::vector<int> expanded;
    std::vector<int> victims;
    for (std::size_t k = r.start + 1; k <= r.end; ++k) {
      const CoreEvent& ev = tr.steps[k].event;
      if (ev.kind == StepEvent::Expand) {
        r.envs.push_back(ev.created_env);
        r.pseq.push_back(ev.pushed_priority);
        expanded.push_back(ev.expanded_state);
      } else if (ev.kind == StepEvent::Pop) {
        victims.push_back(ev.closed_env);
      }
    }
    std::size_t ridx = rounds.size();
    for (int e : r.envs) env_round[e] = static_cast<int>(ridx);

    std::string tag = "round " + std::to_string(ridx) + " [" + std::to_string(r.start) + "," +
                      std::to_string(r.end) + "): ";
    if (expanded.empty() || expanded[0] != idxO || envs.creator(r.envs[0]) != idxO) {
      fail(tag + "does not open by expanding O");
      rounds.push_back(std::move(r));
      continue;
    }

    // Classify.
    if (!victims.empty()) {
      r.kind = RoundRecord::Kind::V;
      if (expanded.size() != 1) fail(tag + "expands more than O while unwinding");
    } else if (expanded.size() > 1) {
      r.kind = RoundRecord::Kind::F;
      r.k = xlevel[static_cast<std::size_t>(expanded[1])];
      if (r.k < 0) fail(tag + "expands a non-staircase state");
    } else {
      r.kind = RoundRecord::Kind::Plain;
    }

    // Expected expansions and priorities per kind.
    if (r.kind == RoundRecord::Kind::F && r.k >= 0) {
      std::vector<int> want{idxO};
      std::vector<int> wantp{base};
      for (int i = r.k; i >= 0; --i) {
        want.push_back(idxX[static_cast<std::size_t>(i)]);
        wantp.push_back(i + base);
      }
      if (expanded != want) fail(tag + "staircase does not descend one level at a time");
      if (r.pseq != wantp) fail(tag + "priorities off the staircase pattern");
      // Chain bindings: the top level captures the recursion seed, the rest
      // relay the argument downward.
      for (std::size_t m = 1; m < r.envs.size() && expanded == want; ++m) {
        const auto& bs = envs.bindings(r.envs[m]);
        if (bs.size() != 1) {
          fail(tag + "staircase environment without exactly one binding");
          break;
        }
        const TableEntry& te = a.entry(bs[0].formula);
        if (m == 1 && (bs[0].env != r.envs[0] || te.kind != FKind::App))
          fail(tag + "top staircase binding is not the recursion seed");
        if (m > 1 && (bs[0].env != r.envs[m - 1] || te.kind != FKind::Var))
          fail(tag + "staircase relay binding skips a level");
      }
    } else if (r.pseq != std::vector<int>{base}) {
      fail(tag + "priorities off the single-push pattern");
    }

    // The head environment hangs off the newest open environment of the
    // latest round that still had one when this round began.
    {
      std::size_t born = envs.creation_step(r.envs[0]);
      int want_parent = -1;
      for (std::size_t i = ridx; i-- > 0 && want_parent < 0;)
        for (auto it = rounds[i].envs.rbegin(); it != rounds[i].envs.rend(); ++it)
          if (tr.closed_at[*it] == -1 ||
              tr.closed_at[*it] >= static_cast<std::ptrdiff_t>(born)) {
            want_parent = *it;
            break;
          }
      if (want_parent >= 0 && envs.parent(r.envs[0]) != want_parent)
        fail(tag + "head environment chained to the wrong round");
    }

    // Unwinding rounds close their own head first, then whole newer rounds,
    // and stop exactly at the first staircase with an open chain.
    if (r.kind == RoundRecord::Kind::V) {
      if (victims[0] != r.envs[0]) fail(tag + "unwinding spares its own head");
      if (open_at(r.envs[0], r.end)) fail(tag + "own head survived its unwinding");
      std::vector<int> touched;
      bool known = true;
      for (std::size_t m = 1; m < victims.size(); ++m) {
        int vr = env_round[victims[m]];
        if (vr < 0) known = false;
        if (touched.empty() || touched.back() != vr) touched.push_back(vr);
      }
      if (!known) {
        fail(tag + "unwinding reached an environment outside any round");
      } else if (victims.size() > 1) {
        for (std::size_t m = 0; m + 1 < touched.size(); ++m)
          if (touched[m] <= touched[m + 1]) fail(tag + "unwinding not newest-to-oldest");
        // All open rounds strictly between this one and the stop must be
        // consumed whole.
        int stop = touched.back();
        for (std::size_t i = static_cast<std::size_t>(stop) + 1; i < ridx; ++i) {
          for (int e : rounds[i].envs)
            if (open_at(e, r.start) && open_at(e, r.end))
              fail(tag + "skipped an open environment of round " + std::to_string(i));
        }
        const RoundRecord& sr = rounds[static_cast<std::size_t>(stop)];
        if (sr.kind != RoundRecord::Kind::F)
          fail(tag + "unwinding stopped at a non-staircase round");
        else {
          if (!open_at(sr.envs[0], r.end))
            fail(tag + "unwinding consumed the staircase head it should revive");
          for (std::size_t m = 1; m < sr.envs.size(); ++m)
            if (open_at(sr.envs[m], r.end))
              fail(tag + "unwinding left part of a staircase chain open");
        }
      } else {
        // Single pop: the head must have been chained directly to a
        // staircase head.
        int pr = env_round[envs.parent(r.envs[0])];
        if (pr < 0 || rounds[static_cast<std::size_t>(pr)].kind != RoundRecord::Kind::F)
          fail(tag + "short unwinding did not land on a staircase head");
      }
    }

    rounds.push_back(std::move(r));
  }

  // At every boundary the priority stack is the open environments of the
  // rounds so far, in creation order; each round contributes everything, just
  // its head, or nothing.
  for (std::size_t b = 0; b < bounds.size(); ++b) {
    std::size_t at = bounds[b];
    std::vector<PrioEntry> want;
    for (const RoundRecord& r : rounds) {
      if (r.end > at) break;
      std::size_t open = 0;
      bool head_open = false;
      for (std::size_t m = 0; m < r.envs.size(); ++m)
        if (open_at(r.envs[m], at)) {
          ++open;
          if (m == 0) head_open = true;
          want.push_back({a.priority(envs.creator(r.envs[m])), r.envs[m]});
        }
      if (!(open == r.envs.size() || open == 0 || (open == 1 && head_open)))
        fail("boundary " + std::to_string(at) + ": round [" + std::to_string(r.start) + "," +
             std::to_string(r.end) + ") left partially open");
    }
    if (want != tr.pstack_at(at))
      fail("boundary " + std::to_string(at) +
           ": priority stack differs from the open environments of past rounds");
  }

  for (std::size_t i = 1; i < rounds.size(); ++i) {
    rep.rounds += 1;
    switch (rounds[i].kind) {
      case RoundRecord::Kind::Plain: rep.plain += 1; break;
      case RoundRecord::Kind::V: rep.v += 1; break;
      case RoundRecord::Kind::F: rep.f += 1; break;
      case RoundRecord::Kind::Dummy: break;
    }
  }
  return {rounds, rep};
}

}  // namespace apka
