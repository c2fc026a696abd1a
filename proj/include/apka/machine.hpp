#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "apka/apka.hpp"
#include "apka/trees.hpp"

namespace apka {

// ---------------------------------------------------------------------------
// Environments and configurations
// ---------------------------------------------------------------------------

struct Closure {
  int formula;  // subformula table index
  int env;
  bool operator==(const Closure& other) const = default;
};

// Append-only environment arena.  Entry 0 is the distinguished empty
// environment; every other entry records its parent, the state whose
// occurrence created it, and one binding per state argument.
class EnvStore {
 public:
  EnvStore() { recs_.push_back({-1, -1, 0, 0, {}}); }

  int create(int parent, int creator_state, std::size_t step, std::vector<Closure> bindings) {
    recs_.push_back({parent, creator_state, step, recs_[parent].depth + 1, std::move(bindings)});
    return static_cast<int>(recs_.size()) - 1;
  }

  int parent(int e) const { return recs_[e].parent; }
  int creator(int e) const { return recs_[e].creator; }
  std::size_t creation_step(int e) const { return recs_[e].step; }
  int depth(int e) const { return recs_[e].depth; }
  const std::vector<Closure>& bindings(int e) const { return recs_[e].bindings; }
  std::size_t size() const { return recs_.size(); }

  bool is_strict_ancestor(int anc, int e) const {
    if (anc == e) return false;
    while (recs_[e].depth > recs_[anc].depth) e = recs_[e].parent;
    return e == anc;
  }

 private:
  struct Rec {
    int parent;
    int creator;
    std::size_t step;
    int depth;
    std::vector<Closure> bindings;
  };
  std::vector<Rec> recs_;
};

struct Config {
  int node;   // position in the tree
  int depth;  // tree level of that position
  Closure cur;
  int comp;  // environment currently being computed
  std::vector<Closure> stack;  // top = back(); top binds the first argument
};

// ---------------------------------------------------------------------------
// One-step semantics (shared by the game driver and the game-tree encoder)
// ---------------------------------------------------------------------------

enum class Choice { Left, Right };

enum class NeedKind { Deterministic, ExistsChoice, ForallChoice, ExistsWins, ForallWins };

struct Need {
  NeedKind kind;
  std::string reason;       // terminal explanations
  std::string left, right;  // option labels at choice points
};

enum class StepEvent {
  Init,
  Expand,       // state occurrence: fresh environment, priority push
  PushArg,      // application: operand goes to the stack
  DerefFun,     // non-ground variable: replaced by its binding
  Pop,          // ground variable bound elsewhere: computing env closes
  DerefGround,  // ground variable bound here: replaced by its binding
  PickLeft,
  PickRight,
  MoveLeft,
  MoveRight,
};

struct CoreEvent {
  StepEvent kind = StepEvent::Init;
  int created_env = -1;      // Expand
  int expanded_state = -1;   // Expand
  int pushed_priority = -1;  // Expand
  int closed_env = -1;       // Pop
  int deref_target = -1;     // DerefGround: formula the binding pointed to
};

Need classify(const Apka& a, InfiniteTree& t, const Config& c);

// Applies one transition to cfg.  classify(c) must not be a win; choice must
// be present exactly at ExistsChoice/ForallChoice configurations.
CoreEvent core_step(const Apka& a, InfiniteTree& t, EnvStore& envs, Config& cfg,
                    std::optional<Choice> choice, std::size_t step);

// ---------------------------------------------------------------------------
// Runs and traces
// ---------------------------------------------------------------------------

struct PrioEntry {
  int priority;
  int owner;  // environment whose creation pushed this entry
  bool operator==(const PrioEntry& other) const = default;
};

// Persistent-stack node; traces reference priority stacks by head index.
struct PrioNode {
  int priority;
  int owner;
  int parent;
};

enum class RunStatus { Running, ExistsWon, ForallWon, NeedsChoice, StepLimit };

struct TraceStep {
  Config cfg;
  int phead;  // priority stack of this configuration (persistent head)
  std::size_t psize;
  CoreEvent event;  // transition that produced this configuration
};

struct Trace {
  const Apka* automaton = nullptr;
  InfiniteTree* tree = nullptr;
  std::vector<TraceStep> steps;
  std::vector<PrioNode> pnodes;
  EnvStore envs;
  std::vector<std::ptrdiff_t> closed_at;  // per environment; -1 = open
  RunStatus status = RunStatus::Running;
  std::string verdict;

  std::vector<PrioEntry> pstack_at(std::size_t step) const;
  std::string pstack_digits(std::size_t step) const;  // bottom to top
  std::string dump(bool legend = false) const;
};

class GameState {
 public:
  GameState(const Apka& a, InfiniteTree& t, int start_node);

  const Apka& automaton() const { return *a_; }
  InfiniteTree& tree() const { return *t_; }
  const Config& config() const { return cfg_; }
  const EnvStore& envs() const { return envs_; }
  std::size_t step_count() const { return steps_.size() - 1; }
  std::size_t configs() const { return steps_.size(); }

  Need need() const;
  void step(std::optional<Choice> choice);

  std::vector<PrioEntry> pstack() const;
  Trace trace() const;

 private:
  const Apka* a_;
  InfiniteTree* t_;
  Config cfg_;
  EnvStore envs_;
  std::vector<std::ptrdiff_t> closed_at_{-1};
  std::vector<PrioNode> pnodes_;
  int phead_ = -1;
  std::size_t psize_ = 0;
  std::vector<TraceStep> steps_;
};

GameState init_run(const Apka& a, InfiniteTree& t, int start_node);

// Whitespace-separated L/R tokens; // comments.
std::vector<Choice> parse_script(const std::string& text);

// Advances until a win, an unfed choice, or max_configs configurations are on
// record (the initial one included).
Trace run_script(GameState& gs, const std::vector<Choice>& script, std::size_t max_configs);

// ---------------------------------------------------------------------------
// Monitors
// ---------------------------------------------------------------------------

struct MonitorReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

MonitorReport check_run_invariants(const Trace& tr);

// ---------------------------------------------------------------------------
// Stair summary (finite-window heuristic)
// ---------------------------------------------------------------------------

struct StairSummary {
  std::size_t window_start = 0;
  std::size_t min_height = 0;
  std::vector<int> locked_prefix;  // bottom min_height priorities, fixed over the window
  std::vector<int> final_stack;
  std::map<int, std::size_t> pushes, pops;  // per priority, within the window
  std::optional<int> candidate;  // max priority pushed in-window and never popped
  bool decided = false;          // a terminal verdict was reached instead
  std::string note;

  std::string str() const;
};

StairSummary stair_summary(const Trace& tr, std::size_t suffix_start);

// ---------------------------------------------------------------------------
// Round analysis for the hard automata
// ---------------------------------------------------------------------------

enum class HardClass { Sigma, Pi };

struct RoundRecord {
  enum class Kind { Dummy, Plain, V, F };
  Kind kind = Kind::Plain;
  int k = -1;                      // F_k rounds
  std::size_t start = 0, end = 0;  // configuration range [start, end)
  std::vector<int> envs;           // tied environments, creation order; [0] is the head
  std::vector<int> pseq;           // priorities those pushes contributed
};

struct ConformanceReport {
  std::size_t rounds = 0, plain = 0, v = 0, f = 0;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

std::pair<std::vector<RoundRecord>, ConformanceReport> round_analysis(const Trace& tr, int n,
                                                                      HardClass cls);

}  // namespace apka
