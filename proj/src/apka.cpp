#include "apka/apka.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace apka {

namespace {

void collect_props(const FormulaPtr& f, std::set<std::string>& out) {
  if (!f) return;
  if (f->kind == FKind::Prop || f->kind == FKind::NegProp) out.insert(f->name);
  collect_props(f->a, out);
  collect_props(f->b, out);
}

}  // namespace

Apka::Apka(std::vector<std::string> props, std::vector<StateDecl> states, std::string init)
    : props_(std::move(props)), states_(std::move(states)), init_(-1) {
  auto& bad = report_.violations;

  std::set<std::string> prop_set;
  for (const auto& p : props_)
    if (!prop_set.insert(p).second) bad.push_back("duplicate proposition '" + p + "'");
  if (props_.size() > 32) bad.push_back("too many propositions (max 32)");

  std::set<std::string> state_set;
  for (const auto& s : states_) {
    if (!state_set.insert(s.name).second) bad.push_back("duplicate state '" + s.name + "'");
    if (prop_set.count(s.name))
      bad.push_back("state '" + s.name + "' collides with a proposition");
  }
  if (states_.empty()) bad.push_back("automaton has no states");

  for (const auto& s : states_) {
    std::set<std::string> arg_set;
    for (const auto& a : s.args) {
      if (!arg_set.insert(a.name).second)
        bad.push_back("state '" + s.name + "' repeats argument '" + a.name + "'");
      if (state_set.count(a.name) || prop_set.count(a.name))
        bad.push_back("argument '" + a.name + "' of state '" + s.name +
                      "' collides with a state or proposition");
    }
  }

  state_types_.reserve(states_.size());
  for (const auto& s : states_) {
    std::vector<SimpleType> operands;
    for (const auto& a : s.args) operands.push_back(a.type);
    state_types_.push_back(SimpleType::function(operands, SimpleType::ground()));
  }

  for (std::size_t i = 0; i < states_.size(); ++i)
    if (states_[i].name == init) init_ = static_cast<int>(i);
  if (init_ < 0)
    bad.push_back("initial state '" + init + "' is not declared");
  else if (!state_types_[init_].is_ground())
    bad.push_back("init not ground: initial state '" + init + "' has type " +
                  state_types_[init_].str());

  std::set<int> used;
  for (const auto& s : states_) {
    if (s.priority < 0) bad.push_back("state '" + s.name + "' has a negative priority");
    used.insert(s.priority);
  }
  if (!used.empty() && *used.begin() >= 0) {
    int lo = *used.begin();
    int hi = *used.rbegin();
    if (lo > 1)
      bad.push_back("priority range must start at 0 or 1, found minimum " + std::to_string(lo));
    for (int p = lo; p <= hi; ++p)
      if (!used.count(p)) bad.push_back("priority range skips " + std::to_string(p));
  }

  TypingContext ctx;
  for (std::size_t i = 0; i < states_.size(); ++i) ctx.fixes[states_[i].name] = state_types_[i];
  std::map<const Formula*, SimpleType> node_types;
  for (const auto& s : states_) {
    if (!s.body) {
      bad.push_back("state '" + s.name + "' has no transition body");
      continue;
    }
    TypingContext local = ctx;
    for (const auto& a : s.args) local.vars[a.name] = a.type;
    try {
      SimpleType t = typecheck(local, s.body, Dialect::ApkaBody, &node_types);
      if (!t.is_ground())
        bad.push_back("transition body of '" + s.name + "' has type " + t.str() +
                      ", expected Pr");
    } catch (const TypeError& e) {
      bad.push_back("state '" + s.name + "': " + e.what());
    }
    std::set<std::string> body_props;
    collect_props(s.body, body_props);
    for (const auto& p : body_props)
      if (!prop_set.count(p))
        bad.push_back("state '" + s.name + "' uses undeclared proposition '" + p + "'");
  }

  if (!report_.ok()) return;

  // Subformula table: one head row per state, then each body pre-order.
  for (std::size_t s = 0; s < states_.size(); ++s) {
    TableEntry head{};
    head.kind = FKind::StateVar;
    head.name = states_[s].name;
    head.owner_state = static_cast<int>(s);
    head.parent = -1;
    head.child[0] = head.child[1] = -1;
    head.type = state_types_[s];
    head.var_index = -1;
    head.state_index = static_cast<int>(s);
    head.prop_index = -1;
    head.text = states_[s].name;
    table_.push_back(std::move(head));
  }
  body_roots_.assign(states_.size(), -1);
  for (std::size_t s = 0; s < states_.size(); ++s) {
    const StateDecl& decl = states_[s];
    auto add = [&](auto&& self, const FormulaPtr& f, int parent) -> int {
      int idx = static_cast<int>(table_.size());
      TableEntry e{};
      e.kind = f->kind;
      e.name = f->name;
      e.owner_state = static_cast<int>(s);
      e.parent = parent;
      e.child[0] = e.child[1] = -1;
      e.type = node_types.at(f.get());
      e.var_index = -1;
      e.state_index = -1;
      e.prop_index = -1;
      e.text = print_formula(f);
      if (f->kind == FKind::Var)
        for (std::size_t j = 0; j < decl.args.size(); ++j)
          if (decl.args[j].name == f->name) e.var_index = static_cast<int>(j);
      if (f->kind == FKind::StateVar) e.state_index = state_index(f->name);
      if (f->kind == FKind::Prop || f->kind == FKind::NegProp) e.prop_index = prop_index(f->name);
      table_.push_back(std::move(e));
      if (f->a) table_[idx].child[0] = self(self, f->a, idx);
      if (f->b) table_[idx].child[1] = self(self, f->b, idx);
      return idx;
    };
    body_roots_[s] = add(add, decl.body, -1);
  }
}

int Apka::state_index(const std::string& name) const {
  for (std::size_t i = 0; i < states_.size(); ++i)
    if (states_[i].name == name) return static_cast<int>(i);
  return -1;
}

int Apka::prop_index(const std::string& name) const {
  auto it = std::find(props_.begin(), props_.end(), name);
  return it == props_.end() ? -1 : static_cast<int>(it - props_.begin());
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> strip_and_split(const std::string& raw) {
  std::string line = raw;
  auto comment = line.find("//");
  if (comment != std::string::npos) line.erase(comment);
  std::string spaced;
  for (char c : line) {
    if (c == '{' || c == '}' || c == ';') {
      spaced += ' ';
      spaced += c;
      spaced += ' ';
    } else {
      spaced += c;
    }
  }
  std::istringstream in(spaced);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

std::string join(const std::vector<std::string>& tokens, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out;
}

struct RawState {
  std::string name;
  std::string declared_type;
  std::string args_text;
  std::string body_text;
  int priority = -1;
  bool has_prio = false;
  int line_no = 0;
};

}  // namespace

Apka Apka::load(const std::string& text) {
  std::vector<std::string> props;
  std::string init;
  bool saw_init = false;
  std::vector<RawState> raw;

  std::vector<std::string> pending;
  int pending_line = 0;
  int depth = 0;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;

  auto flush_state = [&]() {
    // pending = state NAME : TYPE { section ; section ; ... }
    const auto& t = pending;
    if (t.size() < 3 || t[0] != "state")
      throw ParseError("malformed state declaration", pending_line, 1);
    RawState rs;
    rs.line_no = pending_line;
    rs.name = t[1];
    std::size_t i = 2;
    if (i >= t.size() || t[i] != ":") throw ParseError("expected ':'", pending_line, 1);
    ++i;
    std::size_t type_start = i;
    while (i < t.size() && t[i] != "{") ++i;
    if (i >= t.size()) throw ParseError("expected '{'", pending_line, 1);
    rs.declared_type = join(t, type_start, i);
    ++i;
    while (i < t.size() && t[i] != "}") {
      std::string key = t[i++];
      std::size_t start = i;
      while (i < t.size() && t[i] != ";" && t[i] != "}") ++i;
      std::string value = join(t, start, i);
      if (i < t.size() && t[i] == ";") ++i;
      if (key == "prio") {
        try {
          rs.priority = std::stoi(value);
        } catch (const std::exception&) {
          throw ParseError("bad priority '" + value + "'", pending_line, 1);
        }
        rs.has_prio = true;
      } else if (key == "args") {
        rs.args_text = value;
      } else if (key == "body") {
        rs.body_text = value;
      } else {
        throw ParseError("unknown state section '" + key + "'", pending_line, 1);
      }
    }
    if (i >= t.size() || t[i] != "}") throw ParseError("expected '}'", pending_line, 1);
    if (!rs.has_prio) throw ParseError("state '" + rs.name + "' lacks a priority", pending_line, 1);
    if (rs.body_text.empty())
      throw ParseError("state '" + rs.name + "' lacks a body", pending_line, 1);
    raw.push_back(std::move(rs));
    pending.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = strip_and_split(line);
    if (tokens.empty()) continue;
    if (depth == 0 && tokens[0] == "props") {
      props.insert(props.end(), tokens.begin() + 1, tokens.end());
      continue;
    }
    if (depth == 0 && tokens[0] == "init") {
      if (tokens.size() != 2) throw ParseError("init expects one state name", line_no, 1);
      init = tokens[1];
      saw_init = true;
      continue;
    }
    if (depth == 0 && tokens[0] != "state")
      throw ParseError("unknown directive '" + tokens[0] + "'", line_no, 1);
    if (depth == 0) pending_line = line_no;
    for (const auto& tok : tokens) {
      pending.push_back(tok);
      if (tok == "{") ++depth;
      if (tok == "}") {
        if (--depth < 0) throw ParseError("unbalanced '}'", line_no, 1);
        if (depth == 0) flush_state();
      }
    }
  }
  if (depth != 0) throw ParseError("unterminated state block", line_no, 1);
  if (!saw_init) throw ParseError("missing init directive", line_no, 1);

  ParseContext ctx;
  ctx.props.insert(props.begin(), props.end());
  for (const auto& rs : raw) ctx.state_names.insert(rs.name);

  std::vector<StateDecl> states;
  for (const auto& rs : raw) {
    StateDecl decl;
    decl.name = rs.name;
    decl.priority = rs.priority;
    for (auto& [name, type] : parse_typed_names(rs.args_text))
      decl.args.push_back({name, type});

    SimpleType declared = parse_type(rs.declared_type);
    std::vector<SimpleType> operands;
    for (const auto& a : decl.args) operands.push_back(a.type);
    if (!(declared == SimpleType::function(operands, SimpleType::ground())))
      throw InputError("state '" + rs.name + "': declared type " + declared.str() +
                       " does not match its argument list");

    ParseContext body_ctx = ctx;
    for (const auto& a : decl.args) body_ctx.var_names.insert(a.name);
    decl.body = parse_formula(rs.body_text, body_ctx, Dialect::ApkaBody);
    states.push_back(std::move(decl));
  }
  return Apka(std::move(props), std::move(states), init);
}

Apka Apka::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open automaton file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load(buf.str());
}

std::string Apka::save() const {
  std::ostringstream out;
  out << "props";
  for (const auto& p : props_) out << " " << p;
  out << "\n";
  out << "init " << states_[init_].name << "\n";
  for (std::size_t s = 0; s < states_.size(); ++s) {
    const StateDecl& d = states_[s];
    out << "state " << d.name << " : " << print_type(state_types_[s]) << " { prio " << d.priority;
    if (!d.args.empty()) {
      out << " ; args";
      for (const auto& a : d.args) out << " " << a.name << ":" << print_type(a.type);
    }
    out << " ; body " << print_formula(d.body) << " }\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Complement and descriptor
// ---------------------------------------------------------------------------

namespace {

FormulaPtr dualize(const FormulaPtr& f) {
  switch (f->kind) {
    case FKind::Top:
      return Formula::bot();
    case FKind::Bot:
      return Formula::top();
    case FKind::Prop:
      return Formula::neg_prop(f->name);
    case FKind::NegProp:
      return Formula::prop(f->name);
    case FKind::Diamond:
      return Formula::box(dualize(f->a));
    case FKind::Box:
      return Formula::diamond(dualize(f->a));
    case FKind::Or:
      return Formula::and_(dualize(f->a), dualize(f->b));
    case FKind::And:
      return Formula::or_(dualize(f->a), dualize(f->b));
    case FKind::Var:
      return Formula::var(f->name);
    case FKind::StateVar:
      return Formula::state_var(f->name);
    case FKind::App:
      return Formula::app(dualize(f->a), dualize(f->b));
    default:
      throw InputError("binder in a transition body");
  }
}

}  // namespace

Apka complement(const Apka& a) {
  if (!a.report().ok()) throw InputError("cannot complement an invalid automaton");
  int min_prio = a.states()[0].priority;
  for (const auto& s : a.states()) min_prio = std::min(min_prio, s.priority);
  int shift = min_prio == 0 ? 1 : -1;
  std::vector<StateDecl> states;
  for (const auto& s : a.states())
    states.push_back({s.name, s.args, s.priority + shift, dualize(s.body)});
  return Apka(a.props(), std::move(states), a.states()[a.init_index()].name);
}

ClassDescriptor descriptor(const Apka& a) {
  if (!a.report().ok()) throw InputError("cannot classify an invalid automaton");
  std::set<int> used;
  int order = 0;
  for (std::size_t s = 0; s < a.states().size(); ++s) {
    used.insert(a.states()[s].priority);
    order = std::max(order, a.state_type(static_cast<int>(s)).order());
  }
  return {used.size(), *used.rbegin() % 2 == 0 ? Parity::Even : Parity::Odd, order};
}

}  // namespace apka
