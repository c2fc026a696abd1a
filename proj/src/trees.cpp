#include "apka/trees.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace apka {

int InfiniteTree::prop_index(const std::string& name) const {
  const auto& ps = props();
  auto it = std::find(ps.begin(), ps.end(), name);
  return it == ps.end() ? -1 : static_cast<int>(it - ps.begin());
}

// ---------------------------------------------------------------------------
// RegularTree
// ---------------------------------------------------------------------------

RegularTree::RegularTree(std::vector<std::string> props, std::vector<Node> nodes, int root)
    : props_(std::move(props)), nodes_(std::move(nodes)), root_(root) {
  if (nodes_.empty()) throw InputError("tree has no nodes");
  if (root_ < 0 || root_ >= static_cast<int>(nodes_.size()))
    throw InputError("tree root out of range");
  std::uint32_t universe =
      props_.size() >= 32 ? ~0u : ((1u << props_.size()) - 1u);
  if (props_.size() > 32) throw InputError("too many propositions (max 32)");
  for (const auto& n : nodes_) {
    if (n.left < 0 || n.left >= static_cast<int>(nodes_.size()) || n.right < 0 ||
        n.right >= static_cast<int>(nodes_.size()))
      throw InputError("tree node '" + n.name + "' references an undeclared successor");
    if (n.labels & ~universe)
      throw InputError("tree node '" + n.name + "' uses an undeclared proposition");
  }
}

int RegularTree::node_index(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].name == name) return static_cast<int>(i);
  return -1;
}

namespace {

std::vector<std::string> tokenize_line(const std::string& raw) {
  std::string line = raw;
  auto comment = line.find("//");
  if (comment != std::string::npos) line.erase(comment);
  for (char bracket : {'{', '}', ';'}) {
    std::string spaced;
    for (char c : line) {
      if (c == bracket) {
        spaced += ' ';
        spaced += c;
        spaced += ' ';
      } else {
        spaced += c;
      }
    }
    line = spaced;
  }
  std::istringstream in(line);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

// Reads `<key> a b c ;` from tokens[i..], returns the names.
std::vector<std::string> read_section(const std::vector<std::string>& tokens, std::size_t& i,
                                      const std::string& key, int line_no) {
  if (i >= tokens.size() || tokens[i] != key)
    throw ParseError("expected '" + key + "'", line_no, 1);
  ++i;
  std::vector<std::string> names;
  while (i < tokens.size() && tokens[i] != ";" && tokens[i] != "}") names.push_back(tokens[i++]);
  if (i < tokens.size() && tokens[i] == ";") ++i;
  return names;
}

}  // namespace

RegularTree RegularTree::load(const std::string& text) {
  std::vector<std::string> props;
  std::string root_name;
  struct RawNode {
    std::string name, left, right;
    std::vector<std::string> labels;
  };
  std::vector<RawNode> raw;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = tokenize_line(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "props") {
      props.assign(tokens.begin() + 1, tokens.end());
    } else if (tokens[0] == "root") {
      if (tokens.size() != 2) throw ParseError("root expects one node name", line_no, 1);
      root_name = tokens[1];
    } else if (tokens[0] == "node") {
      if (tokens.size() < 3 || tokens[2] != "{")
        throw ParseError("expected: node <name> { ... }", line_no, 1);
      RawNode n;
      n.name = tokens[1];
      std::size_t i = 3;
      n.labels = read_section(tokens, i, "labels", line_no);
      auto left = read_section(tokens, i, "left", line_no);
      auto right = read_section(tokens, i, "right", line_no);
      if (left.size() != 1 || right.size() != 1)
        throw ParseError("left/right expect one node name", line_no, 1);
      if (i >= tokens.size() || tokens[i] != "}") throw ParseError("expected '}'", line_no, 1);
      n.left = left[0];
      n.right = right[0];
      raw.push_back(std::move(n));
    } else {
      throw ParseError("unknown directive '" + tokens[0] + "'", line_no, 1);
    }
  }

  std::map<std::string, int> index;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!index.emplace(raw[i].name, static_cast<int>(i)).second)
      throw InputError("duplicate tree node '" + raw[i].name + "'");
  }
  auto resolve = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw InputError("undeclared tree node '" + name + "'");
    return it->second;
  };
  std::vector<Node> nodes;
  for (const auto& n : raw) {
    std::uint32_t mask = 0;
    for (const auto& label : n.labels) {
      auto it = std::find(props.begin(), props.end(), label);
      if (it == props.end())
        throw InputError("node '" + n.name + "' labeled with undeclared proposition '" + label +
                         "'");
      mask |= 1u << (it - props.begin());
    }
    nodes.push_back({n.name, mask, resolve(n.left), resolve(n.right)});
  }
  if (root_name.empty()) throw InputError("tree file has no root");
  return RegularTree(std::move(props), std::move(nodes), resolve(root_name));
}

RegularTree RegularTree::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open tree file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load(buf.str());
}

std::string RegularTree::save() const {
  std::ostringstream out;
  out << "props";
  for (const auto& p : props_) out << " " << p;
  out << "\n";
  out << "root " << nodes_[root_].name << "\n";
  for (const auto& n : nodes_) {
    out << "node " << n.name << " { labels";
    for (std::size_t i = 0; i < props_.size(); ++i)
      if ((n.labels >> i) & 1u) out << " " << props_[i];
    out << " ; left " << nodes_[n.left].name << " ; right " << nodes_[n.right].name << " }\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// PrefixTree
// ---------------------------------------------------------------------------

namespace {
std::size_t heap_size(int depth) { return (std::size_t{2} << depth) - 1; }
}  // namespace

PrefixTree::PrefixTree(std::vector<std::string> props, int depth,
                       std::vector<std::uint32_t> masks)
    : props_(std::move(props)), depth_(depth), masks_(std::move(masks)) {
  if (depth_ < 0 || masks_.size() != heap_size(depth_))
    throw InputError("prefix layout does not match its depth");
}

PrefixTree PrefixTree::truncated(int depth) const {
  if (depth > depth_) throw InputError("cannot deepen a prefix");
  std::vector<std::uint32_t> masks(masks_.begin(), masks_.begin() + heap_size(depth));
  return PrefixTree(props_, depth, std::move(masks));
}

bool PrefixTree::operator==(const PrefixTree& other) const {
  return props_ == other.props_ && depth_ == other.depth_ && masks_ == other.masks_;
}

std::string PrefixTree::save() const {
  std::ostringstream out;
  auto emit = [&](auto&& self, std::size_t i, int d) -> void {
    if (d > depth_) {
      out << "#";
      return;
    }
    out << "((";
    bool first = true;
    for (std::size_t p = 0; p < props_.size(); ++p)
      if ((masks_[i] >> p) & 1u) {
        if (!first) out << " ";
        out << props_[p];
        first = false;
      }
    out << ") ";
    self(self, 2 * i + 1, d + 1);
    out << " ";
    self(self, 2 * i + 2, d + 1);
    out << ")";
  };
  emit(emit, 0, 0);
  return out.str();
}

namespace {

struct PNode {
  std::vector<std::string> labels;
  std::unique_ptr<PNode> left, right;  // both null at the frontier
};

struct SexprParser {
  const std::string& text;
  std::size_t pos = 0;

  void skip() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg + " at offset " + std::to_string(pos));
  }

  void expect(char c) {
    skip();
    if (pos >= text.size() || text[pos] != c) fail(std::string("expected '") + c + "'");
    ++pos;
  }

  std::string name() {
    skip();
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    if (pos == start) fail("expected a name");
    return text.substr(start, pos - start);
  }

  std::unique_ptr<PNode> node() {
    skip();
    if (pos < text.size() && text[pos] == '#') {
      ++pos;
      return nullptr;
    }
    expect('(');
    auto n = std::make_unique<PNode>();
    expect('(');
    skip();
    while (pos < text.size() && text[pos] != ')') {
      n->labels.push_back(name());
      skip();
    }
    expect(')');
    n->left = node();
    n->right = node();
    expect(')');
    if (!n->left != !n->right) fail("ragged prefix");
    return n;
  }
};

int prefix_depth(const PNode* n) { return n->left ? 1 + prefix_depth(n->left.get()) : 0; }

void check_complete(const PNode* n, int remaining) {
  if (!n->left) {
    if (remaining != 0) throw ParseError("prefix frontier at inconsistent depths");
    return;
  }
  if (remaining == 0) throw ParseError("prefix frontier at inconsistent depths");
  check_complete(n->left.get(), remaining - 1);
  check_complete(n->right.get(), remaining - 1);
}

}  // namespace

PrefixTree PrefixTree::parse(const std::string& text) {
  SexprParser parser{text};
  auto root = parser.node();
  parser.skip();
  if (parser.pos != text.size()) parser.fail("trailing input");
  if (!root) throw ParseError("empty prefix");
  int depth = prefix_depth(root.get());
  check_complete(root.get(), depth);

  std::vector<std::string> props;  // order of first appearance
  auto prop_bit = [&](const std::string& p) {
    auto it = std::find(props.begin(), props.end(), p);
    if (it == props.end()) {
      props.push_back(p);
      it = props.end() - 1;
    }
    return static_cast<std::size_t>(it - props.begin());
  };
  std::vector<std::uint32_t> masks(heap_size(depth), 0);
  auto fill = [&](auto&& self, const PNode* n, std::size_t i) -> void {
    std::uint32_t mask = 0;
    for (const auto& p : n->labels) mask |= 1u << prop_bit(p);
    masks[i] = mask;
    if (n->left) {
      self(self, n->left.get(), 2 * i + 1);
      self(self, n->right.get(), 2 * i + 2);
    }
  };
  fill(fill, root.get(), 0);
  if (props.size() > 32) throw InputError("too many propositions (max 32)");
  return PrefixTree(std::move(props), depth, std::move(masks));
}

PrefixTree PrefixTree::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open prefix file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

PrefixTree prefix(InfiniteTree& tree, int depth, const Caps& caps) {
  if (depth < 0) throw InputError("negative prefix depth");
  if (static_cast<std::size_t>(depth) > caps.max_depth)
    throw CapError("prefix depth " + std::to_string(depth) + " exceeds cap " +
                   std::to_string(caps.max_depth));
  std::vector<int> ids(heap_size(depth));
  std::vector<std::uint32_t> masks(heap_size(depth));
  ids[0] = tree.root();
  std::size_t level_start = 0;
  for (int d = 0; d <= depth; ++d) {
    std::size_t level_size = std::size_t{1} << d;
    for (std::size_t k = 0; k < level_size; ++k) {
      std::size_t i = level_start + k;
      masks[i] = tree.labels(ids[i]);
      if (d < depth) {
        ids[2 * i + 1] = tree.child(ids[i], 0);
        ids[2 * i + 2] = tree.child(ids[i], 1);
      }
    }
    level_start += level_size;
  }
  return PrefixTree(tree.props(), depth, std::move(masks));
}

// ---------------------------------------------------------------------------
// Distance
// ---------------------------------------------------------------------------

std::string DyadicDistance::str() const {
  return (exact ? "Exact(" : "AtMost(") + std::to_string(level) + ")";
}

DyadicDistance distance(RegularTree& lhs, RegularTree& rhs, std::size_t cap) {
  if (lhs.props() != rhs.props())
    throw InputError("distance requires identical proposition declarations");
  std::set<std::pair<int, int>> level_pairs{{lhs.root(), rhs.root()}};
  std::set<std::set<std::pair<int, int>>> seen;
  for (std::size_t level = 0; level < cap; ++level) {
    for (auto [a, b] : level_pairs)
      if (lhs.labels(a) != rhs.labels(b)) return {true, level};
    if (!seen.insert(level_pairs).second) break;  // labelings now repeat forever
    std::set<std::pair<int, int>> next;
    for (auto [a, b] : level_pairs) {
      next.insert({lhs.child(a, 0), rhs.child(b, 0)});
      next.insert({lhs.child(a, 1), rhs.child(b, 1)});
    }
    level_pairs = std::move(next);
  }
  return {false, cap};
}

DyadicDistance distance(const PrefixTree& lhs, const PrefixTree& rhs, std::size_t cap) {
  int min_depth = std::min(lhs.depth(), rhs.depth());
  std::size_t limit = std::min(cap, static_cast<std::size_t>(min_depth) + 1);
  // Compare by label-name sets so the two prefixes may declare their
  // vocabularies in different orders.
  auto names_at = [](const PrefixTree& t, std::size_t i) {
    std::set<std::string> out;
    for (std::size_t p = 0; p < t.props().size(); ++p)
      if ((t.label_at(i) >> p) & 1u) out.insert(t.props()[p]);
    return out;
  };
  std::size_t level_start = 0;
  for (std::size_t level = 0; level < limit; ++level) {
    std::size_t level_size = std::size_t{1} << level;
    for (std::size_t k = 0; k < level_size; ++k)
      if (names_at(lhs, level_start + k) != names_at(rhs, level_start + k))
        return {true, level};
    level_start += level_size;
  }
  return {false, limit};
}

}  // namespace apka
