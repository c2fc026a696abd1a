#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "apka/caps.hpp"
#include "apka/errors.hpp"

namespace apka {

// A labeled fully infinite binary tree, presented one node at a time.  Nodes
// are dense integer ids; labels are bitmasks over props() in declaration
// order.  child/labels are non-const so lazy implementations can memoize.
class InfiniteTree {
 public:
  virtual ~InfiniteTree() = default;

  virtual const std::vector<std::string>& props() const = 0;
  virtual int root() const = 0;
  virtual int child(int node, int dir) = 0;  // dir: 0 = left, 1 = right
  virtual std::uint32_t labels(int node) = 0;
  virtual std::string node_name(int node) const = 0;
  virtual bool valid_node(int node) const { return node >= 0; }

  bool holds(int node, std::size_t prop) { return (labels(node) >> prop) & 1u; }
  // Index of a proposition name, or -1.
  int prop_index(const std::string& name) const;
};

// Finite-state deterministic generator of an infinite tree.
class RegularTree final : public InfiniteTree {
 public:
  struct Node {
    std::string name;
    std::uint32_t labels;
    int left;
    int right;
  };

  RegularTree(std::vector<std::string> props, std::vector<Node> nodes, int root);

  static RegularTree load(const std::string& text);
  static RegularTree load_file(const std::string& path);
  std::string save() const;

  const std::vector<std::string>& props() const override { return props_; }
  int root() const override { return root_; }
  int child(int node, int dir) override {
    return dir == 0 ? nodes_[node].left : nodes_[node].right;
  }
  std::uint32_t labels(int node) override { return nodes_[node].labels; }
  std::string node_name(int node) const override { return nodes_[node].name; }
  bool valid_node(int node) const override {
    return node >= 0 && node < static_cast<int>(nodes_.size());
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  int node_index(const std::string& name) const;

 private:
  std::vector<std::string> props_;
  std::vector<Node> nodes_;
  int root_;
};

// Depth-d unfolding: labels for every node of depth <= d in heap layout
// (node i has children 2i+1, 2i+2), frontier below depth d cut off.
class PrefixTree {
 public:
  PrefixTree() : depth_(-1) {}  // empty
  PrefixTree(std::vector<std::string> props, int depth, std::vector<std::uint32_t> masks);

  int depth() const { return depth_; }
  const std::vector<std::string>& props() const { return props_; }
  const std::vector<std::uint32_t>& masks() const { return masks_; }
  std::uint32_t label_at(std::size_t i) const { return masks_[i]; }

  PrefixTree truncated(int depth) const;

  std::string save() const;
  static PrefixTree parse(const std::string& text);
  static PrefixTree load_file(const std::string& path);

  bool operator==(const PrefixTree& other) const;
  bool operator!=(const PrefixTree& other) const { return !(*this == other); }

 private:
  std::vector<std::string> props_;
  int depth_;
  std::vector<std::uint32_t> masks_;  // size 2^(depth+1) - 1
};

PrefixTree prefix(InfiniteTree& tree, int depth, const Caps& caps = Caps());

// Distance 2^-i between trees: Exact(i) means agreement on all nodes of
// depth < i and a difference at depth i; AtMost(i) means agreement on all
// nodes of depth < i with nothing examined beyond.
struct DyadicDistance {
  bool exact;
  std::size_t level;

  bool operator==(const DyadicDistance& other) const {
    return exact == other.exact && level == other.level;
  }
  std::string str() const;
};

DyadicDistance distance(RegularTree& lhs, RegularTree& rhs, std::size_t cap);
DyadicDistance distance(const PrefixTree& lhs, const PrefixTree& rhs, std::size_t cap);

}  // namespace apka
