#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "apka/apka.hpp"
#include "apka/caps.hpp"
#include "apka/machine.hpp"
#include "apka/trees.hpp"

namespace apka {

// Proposition vocabulary for game-encoded trees: D, C, V, T, F plus one
// F-label per priority (F_0..F_{n-1} for Sigma, F_1..F_n for Pi).
struct HierarchyVocab {
  int n = 1;
  HardClass flavor = HardClass::Sigma;
  std::vector<std::string> props;

  static HierarchyVocab make(int n, HardClass flavor);
};

// The n-th staircase automaton of the given class: states I, O, X_{n-1}..X_0
// over the matching vocabulary.
Apka gen_hard(int n, HardClass flavor);

// Lazy infinite tree whose nodes are the positions of the acceptance game of
// `a` on `base`, labeled by the position kind.  Deterministic positions have
// both children backed by the same record; literal positions repeat forever.
class GameTree final : public InfiniteTree {
 public:
  GameTree(std::shared_ptr<InfiniteTree> base, const Apka& a,
           std::vector<std::string> props);

  const std::vector<std::string>& props() const override { return props_; }
  int root() const override { return 0; }
  int child(int node, int dir) override;
  std::uint32_t labels(int node) override;
  std::string node_name(int node) const override;
  bool valid_node(int node) const override;

  // The game configuration behind a node.
  Config config(int node) const;
  // Priorities currently stacked in the inner game at that node, bottom first.
  std::vector<int> inner_priority_stack(int node) const;

 private:
  struct Rec {
    Config cfg;
    int label;  // index into props_
    int kid[2] = {-1, -1};
  };

  int prop_of(const std::string& name) const;
  int label_of(const Config& cfg);
  int make_rec(Config cfg);

  std::shared_ptr<InfiniteTree> base_;
  Apka a_;
  std::vector<std::string> props_;
  mutable std::mutex mu_;
  EnvStore envs_;
  std::vector<Rec> recs_;
};

using GameTreeHandle = std::shared_ptr<GameTree>;

// Vocabulary variant: derived from a's priorities, or given explicitly.  The
// base tree must carry a's propositions; the vocabulary must carry a label for
// every state priority.
GameTreeHandle encode_game_tree(std::shared_ptr<InfiniteTree> t, const Apka& a);
GameTreeHandle encode_game_tree(std::shared_ptr<InfiniteTree> t, const Apka& a,
                                const HierarchyVocab& vocab);

struct ConvergenceReport {
  std::vector<DyadicDistance> step_distances;  // between consecutive iterates
  bool stabilized = false;                     // last step showed no difference
  PrefixTree prefix;                           // depth-prefix of the last iterate
  DyadicDistance residual{false, 0};           // one more application, depth-1
  std::string str() const;
};

// Iterates T -> game tree of `a` over T from the seed, as a lazy composition
// of encoders, and reports how the depth-prefixes converge.  `a` must be over
// a hierarchy vocabulary and the seed over the same propositions.
ConvergenceReport banach_iterate(const Apka& a, const RegularTree& seed,
                                 int iters = 10, int depth = 8,
                                 const Caps& caps = Caps::from_env());

}  // namespace apka
