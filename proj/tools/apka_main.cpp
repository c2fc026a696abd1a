#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "apka/apka.hpp"
#include "apka/caps.hpp"
#include "apka/denot.hpp"
#include "apka/errors.hpp"
#include "apka/hierarchy.hpp"
#include "apka/machine.hpp"
#include "apka/syntax.hpp"
#include "apka/translate.hpp"
#include "apka/trees.hpp"

namespace {

using namespace apka;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

// Formula files: leading directive lines (`props ...`, `var x : T`,
// `fix X : T`), then the formula itself until end of file.
struct FormulaFile {
  ParseContext pctx;
  TypingContext tctx;
  bool has_declarations = false;
  FormulaPtr formula;
};

FormulaFile load_formula_file(const std::string& path, Dialect dialect) {
  FormulaFile ff;
  std::istringstream in(slurp(path));
  std::string line;
  std::ostringstream rest;
  bool directives = true;
  while (std::getline(in, line)) {
    std::istringstream probe(line);
    std::string head;
    probe >> head;
    if (directives && head == "props") {
      std::string p;
      while (probe >> p) ff.pctx.props.insert(p);
      continue;
    }
    if (directives && (head == "var" || head == "fix")) {
      std::string spec;
      std::getline(probe, spec);
      for (auto& [name, type] : parse_typed_names(spec)) {
        ff.has_declarations = true;
        if (head == "var") {
          ff.pctx.var_names.insert(name);
          ff.tctx.vars.emplace(name, type);
        } else {
          ff.pctx.state_names.insert(name);
          ff.tctx.fixes.emplace(name, type);
        }
      }
      continue;
    }
    directives = false;
    rest << line << "\n";
  }
  ff.formula = parse_formula(rest.str(), ff.pctx, dialect);
  return ff;
}

std::string formula_file_text(const std::vector<std::string>& props, const FormulaPtr& f) {
  std::ostringstream out;
  if (!props.empty()) {
    out << "props";
    for (const auto& p : props) out << " " << p;
    out << "\n";
  }
  out << print_formula(f) << "\n";
  return out.str();
}

int resolve_node(const RegularTree& t, const std::string& name) {
  int v = t.node_index(name);
  if (v < 0) throw InputError("tree has no node named " + name);
  return v;
}

int cmd_typecheck(const std::string& file, const std::string& dialect) {
  Dialect d = dialect == "apka" ? Dialect::ApkaBody : Dialect::Hfl;
  FormulaFile ff = load_formula_file(file, d);
  SimpleType ty = typecheck(ff.tctx, ff.formula, d);
  std::cout << print_type(ty) << "\n";
  return 0;
}

int cmd_validate(const std::string& file) {
  Apka a = Apka::load_file(file);
  if (a.report().ok()) {
    std::cout << "ok\n";
    return 0;
  }
  for (const auto& v : a.report().violations) std::cout << v << "\n";
  return 1;
}

int cmd_complement(const std::string& file, const std::string& out) {
  Apka a = Apka::load_file(file);
  if (!a.report().ok())
    throw InputError("automaton does not validate: " + a.report().violations.front());
  spill(out, complement(a).save());
  return 0;
}

int cmd_check(const std::string& tree_file, const std::string& node,
              const std::string& hfl_file, const std::string& apka_file) {
  RegularTree t = RegularTree::load_file(tree_file);
  int v = resolve_node(t, node);
  bool result;
  if (!hfl_file.empty()) {
    FormulaFile ff = load_formula_file(hfl_file, Dialect::Hfl);
    if (ff.has_declarations)
      throw InputError("check needs a closed formula (no var/fix declarations)");
    result = check_hfl(t, v, ff.formula);
  } else {
    Apka a = Apka::load_file(apka_file);
    result = check_apka(t, v, a);
  }
  std::cout << (result ? "true" : "false") << "\n";
  return result ? 0 : 1;
}

int cmd_simulate(const std::string& apka_file, const std::string& tree_file,
                 const std::string& script_file, std::size_t max_steps,
                 bool interactive, bool monitors, std::size_t stair_from) {
  Apka a = Apka::load_file(apka_file);
  RegularTree t = RegularTree::load_file(tree_file);
  std::vector<Choice> script;
  if (!script_file.empty()) script = parse_script(slurp(script_file));

  GameState gs(a, t, t.root());
  Trace tr;
  if (!interactive) {
    tr = run_script(gs, script, max_steps);
  } else {
    std::size_t si = 0;
    std::string closing;
    while (true) {
      Need nd = gs.need();
      if (nd.kind == NeedKind::ExistsWins || nd.kind == NeedKind::ForallWins) break;
      if (gs.configs() >= max_steps) {
        closing = "configuration limit reached";
        break;
      }
      if (nd.kind == NeedKind::Deterministic) {
        gs.step(std::nullopt);
        continue;
      }
      std::optional<Choice> ch;
      if (si < script.size()) {
        ch = script[si++];
      } else {
        std::cout << (nd.kind == NeedKind::ExistsChoice ? "∃?" : "∀?")
                  << " L: " << nd.left << "  R: " << nd.right << "\n> " << std::flush;
        std::string tok;
        while (std::cin >> tok) {
          if (tok == "L" || tok == "l") { ch = Choice::Left; break; }
          if (tok == "R" || tok == "r") { ch = Choice::Right; break; }
          std::cout << "enter L or R\n> " << std::flush;
        }
        if (!ch) {  // input ended
          closing = "input ended at a choice point";
          break;
        }
      }
      gs.step(ch);
    }
    tr = gs.trace();
    if (!closing.empty() && tr.verdict.empty()) tr.verdict = closing;
  }

  std::cout << tr.dump(true);
  if (!tr.verdict.empty()) std::cout << "result: " << tr.verdict << "\n";
  std::cout << "\n" << stair_summary(tr, stair_from).str();
  if (monitors) {
    MonitorReport mr = check_run_invariants(tr);
    if (mr.ok()) {
      std::cout << "monitors: ok\n";
    } else {
      for (const auto& v : mr.violations) std::cout << "monitor violation: " << v << "\n";
      return 1;
    }
  }
  return 0;
}

int cmd_translate(const std::string& to, const std::string& file, const std::string& out) {
  if (to == "apka") {
    FormulaFile ff = load_formula_file(file, Dialect::Hfl);
    if (ff.has_declarations)
      throw InputError("translation needs a closed formula (no var/fix declarations)");
    spill(out, hfl_to_apka(ff.formula).save());
  } else {
    Apka a = Apka::load_file(file);
    FormulaPtr f = apka_to_hfl(a);
    spill(out, formula_file_text(a.props(), f));
  }
  return 0;
}

int cmd_gen_hard(int n, const std::string& cls, const std::string& out) {
  HardClass hc = cls == "pi" ? HardClass::Pi : HardClass::Sigma;
  spill(out, gen_hard(n, hc).save());
  return 0;
}

int cmd_encode(const std::string& tree_file, const std::string& apka_file, int depth,
               const std::string& out) {
  auto t = std::make_shared<RegularTree>(RegularTree::load_file(tree_file));
  Apka a = Apka::load_file(apka_file);
  GameTreeHandle g = encode_game_tree(t, a);
  spill(out, prefix(*g, depth, Caps::from_env()).save());
  return 0;
}

int cmd_fixpoint(const std::string& apka_file, const std::string& seed_file, int iters,
                 int depth, const std::string& out) {
  Apka a = Apka::load_file(apka_file);
  RegularTree seed = RegularTree::load_file(seed_file);
  ConvergenceReport rep = banach_iterate(a, seed, iters, depth, Caps::from_env());
  std::cout << rep.str();
  if (!out.empty()) spill(out, rep.prefix.save());
  return rep.stabilized ? 0 : 1;
}

int cmd_distance(const std::string& p1, const std::string& p2, std::size_t cap) {
  PrefixTree a = PrefixTree::load_file(p1);
  PrefixTree b = PrefixTree::load_file(p2);
  std::cout << distance(a, b, cap).str() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"alternating parity Krivine automata over regular trees"};
  app.require_subcommand(1);

  auto* c_type = app.add_subcommand("typecheck", "type a formula file");
  std::string type_file, type_dialect = "hfl";
  c_type->add_option("file", type_file)->required();
  c_type->add_option("--dialect", type_dialect)->check(CLI::IsMember({"hfl", "apka"}));

  auto* c_val = app.add_subcommand("validate", "validate an automaton file");
  std::string val_file;
  c_val->add_option("file", val_file)->required();

  auto* c_comp = app.add_subcommand("complement", "complement an automaton");
  std::string comp_file, comp_out;
  c_comp->add_option("file", comp_file)->required();
  c_comp->add_option("-o,--out", comp_out)->required();

  auto* c_check = app.add_subcommand("check", "evaluate at a tree node");
  std::string check_tree, check_node, check_hfl_file, check_apka_file;
  c_check->add_option("--tree", check_tree)->required();
  c_check->add_option("--node", check_node)->required();
  auto* o_hfl = c_check->add_option("--hfl", check_hfl_file);
  auto* o_apka = c_check->add_option("--apka", check_apka_file);
  o_hfl->excludes(o_apka);

  auto* c_sim = app.add_subcommand("simulate", "drive the acceptance game");
  std::string sim_apka, sim_tree, sim_script;
  std::size_t sim_max = 200, sim_stair = 0;
  bool sim_inter = false, sim_mon = false;
  c_sim->add_option("--apka", sim_apka)->required();
  c_sim->add_option("--tree", sim_tree)->required();
  c_sim->add_option("--script", sim_script);
  c_sim->add_option("--max-steps", sim_max);
  c_sim->add_flag("--interactive", sim_inter);
  c_sim->add_flag("--monitors", sim_mon);
  c_sim->add_option("--stair-from", sim_stair);

  auto* c_tr = app.add_subcommand("translate", "convert between formula and automaton");
  std::string tr_to, tr_file, tr_out;
  c_tr->add_option("--to", tr_to)->required()->check(CLI::IsMember({"apka", "hfl"}));
  c_tr->add_option("file", tr_file)->required();
  c_tr->add_option("-o,--out", tr_out)->required();

  auto* c_gen = app.add_subcommand("gen-hard", "emit a staircase automaton");
  int gen_n = 1;
  std::string gen_class, gen_out;
  c_gen->add_option("--n", gen_n)->required();
  c_gen->add_option("--class", gen_class)->required()->check(CLI::IsMember({"sigma", "pi"}));
  c_gen->add_option("-o,--out", gen_out)->required();

  auto* c_enc = app.add_subcommand("encode", "game tree of an automaton on a tree");
  std::string enc_tree, enc_apka, enc_out;
  int enc_depth = 8;
  c_enc->add_option("--tree", enc_tree)->required();
  c_enc->add_option("--apka", enc_apka)->required();
  c_enc->add_option("--depth", enc_depth);
  c_enc->add_option("-o,--out", enc_out)->required();

  auto* c_fix = app.add_subcommand("fixpoint", "iterate the game-tree encoding");
  std::string fix_apka, fix_seed, fix_out;
  int fix_iters = 10, fix_depth = 8;
  c_fix->add_option("--apka", fix_apka)->required();
  c_fix->add_option("--seed", fix_seed)->required();
  c_fix->add_option("--iters", fix_iters);
  c_fix->add_option("--depth", fix_depth);
  c_fix->add_option("-o,--out", fix_out);

  auto* c_dist = app.add_subcommand("distance", "compare two tree prefixes");
  std::string dist_p1, dist_p2;
  std::size_t dist_cap = 32;
  c_dist->add_option("p1", dist_p1)->required();
  c_dist->add_option("p2", dist_p2)->required();
  c_dist->add_option("--cap", dist_cap);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_type->parsed()) return cmd_typecheck(type_file, type_dialect);
    if (c_val->parsed()) return cmd_validate(val_file);
    if (c_comp->parsed()) return cmd_complement(comp_file, comp_out);
    if (c_check->parsed()) {
      if (check_hfl_file.empty() == check_apka_file.empty())
        throw CLI::ValidationError("check", "exactly one of --hfl/--apka is required");
      return cmd_check(check_tree, check_node, check_hfl_file, check_apka_file);
    }
    if (c_sim->parsed())
      return cmd_simulate(sim_apka, sim_tree, sim_script, sim_max, sim_inter, sim_mon,
                          sim_stair);
    if (c_tr->parsed()) return cmd_translate(tr_to, tr_file, tr_out);
    if (c_gen->parsed()) return cmd_gen_hard(gen_n, gen_class, gen_out);
    if (c_enc->parsed()) return cmd_encode(enc_tree, enc_apka, enc_depth, enc_out);
    if (c_fix->parsed()) return cmd_fixpoint(fix_apka, fix_seed, fix_iters, fix_depth, fix_out);
    if (c_dist->parsed()) return cmd_distance(dist_p1, dist_p2, dist_cap);
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const CapError& e) {
    std::cerr << "cap exceeded: " << e.what() << "\n";
    return 4;
  } catch (const ParseError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const TypeError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const UnsupportedPrecedence& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }
  return 2;
}
