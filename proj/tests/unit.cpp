#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <atomic>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "apka/apka.hpp"
#include "apka/denot.hpp"
#include "apka/errors.hpp"
#include "apka/hierarchy.hpp"
#include "apka/machine.hpp"
#include "apka/syntax.hpp"
#include "apka/translate.hpp"
#include "apka/trees.hpp"
#include "corpus.hpp"

using namespace apka;
using namespace apka::testgen;

namespace {

std::string data_path(const std::string& name) { return std::string(APKA_TEST_DATA) + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RegularTree example_tree() { return RegularTree::load_file(data_path("ex2.tree")); }
Apka example_automaton() { return Apka::load_file(data_path("ex1.apka")); }

FormulaPtr example_formula() {
  std::string text = slurp(data_path("ex1.hfl"));
  std::string body;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.rfind("props", 0) != 0) body += line + "\n";
  return parse_closed(body);
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_SUITE("syntax") {
  namespace {
  SimpleType random_type(Rng& rng) {
    switch (pick(rng, 4)) {
      case 0: return SimpleType::ground();
      case 1: return SimpleType::arrow(SimpleType::ground(), SimpleType::ground());
      case 2:
        return SimpleType::function({SimpleType::ground(), SimpleType::ground()},
                                    SimpleType::ground());
      default:
        return SimpleType::arrow(SimpleType::arrow(SimpleType::ground(), SimpleType::ground()),
                                 SimpleType::ground());
    }
  }

  FormulaPtr random_hfl(Rng& rng, int budget) {
    static const char* vars[] = {"x", "y", "u", "v"};
    static const char* fixes[] = {"X", "Y", "A", "B"};
    if (budget <= 0) {
      switch (pick(rng, 6)) {
        case 0: return Formula::top();
        case 1: return Formula::bot();
        case 2: return Formula::prop("P");
        case 3: return Formula::neg_prop("Q");
        case 4: return Formula::var(vars[pick(rng, 4)]);
        default: return Formula::state_var(fixes[pick(rng, 4)]);
      }
    }
    switch (pick(rng, 9)) {
      case 0: return random_hfl(rng, 0);
      case 1: return Formula::diamond(random_hfl(rng, budget - 1));
      case 2: return Formula::box(random_hfl(rng, budget - 1));
      case 3: return Formula::or_(random_hfl(rng, budget - 1), random_hfl(rng, budget - 1));
      case 4: return Formula::and_(random_hfl(rng, budget - 1), random_hfl(rng, budget - 1));
      case 5: return Formula::app(random_hfl(rng, budget - 1), random_hfl(rng, budget - 1));
      case 6:
        return Formula::lambda(vars[pick(rng, 4)], random_type(rng), random_hfl(rng, budget - 1));
      case 7:
        return Formula::mu(fixes[pick(rng, 4)], random_type(rng), random_hfl(rng, budget - 1));
      default:
        return Formula::nu(fixes[pick(rng, 4)], random_type(rng), random_hfl(rng, budget - 1));
    }
  }
  }  // namespace

  TEST_CASE("print/parse round trip, hfl dialect") {
    Rng rng(7);
    ParseContext ctx;
    ctx.props = {"P", "Q"};
    ctx.var_names = {"x", "y", "u", "v"};
    ctx.state_names = {"X", "Y", "A", "B"};
    for (int i = 0; i < 1000; ++i) {
      FormulaPtr f = random_hfl(rng, 5);
      FormulaPtr back = parse_formula(print_formula(f), ctx, Dialect::Hfl);
      REQUIRE(struct_equal(f, back));
    }
  }

  TEST_CASE("print/parse round trip, transition dialect") {
    Rng rng(11);
    ParseContext ctx;
    ctx.props = {"P", "Q"};
    ctx.var_names = {"a0", "a1"};
    ctx.state_names = {"q0", "q1"};
    std::vector<std::pair<std::string, int>> sigs{{"q0", 0}, {"q1", 2}};
    for (int i = 0; i < 1000; ++i) {
      FormulaPtr f = random_body(rng, {"P", "Q"}, sigs, {"a0", "a1"}, 4);
      FormulaPtr back = parse_formula(print_formula(f), ctx, Dialect::ApkaBody);
      REQUIRE(struct_equal(f, back));
    }
  }

  TEST_CASE("type print/parse round trip") {
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
      SimpleType t = random_type(rng);
      CHECK(print_type(parse_type(print_type(t))) == print_type(t));
    }
    CHECK(parse_type("Pr").is_ground());
    CHECK(parse_type("Pr -> Pr -> Pr").arity() == 2);
    CHECK(parse_type("(Pr -> Pr) -> Pr").order() == 2);
  }

  TEST_CASE("typing assigns unique ground and arrow types") {
    TypingContext empty;
    CHECK(typecheck(empty, example_formula(), Dialect::Hfl).is_ground());
    FormulaPtr id = Formula::lambda("x", SimpleType::ground(), Formula::var("x"));
    CHECK(print_type(typecheck(empty, id, Dialect::Hfl)) == "Pr -> Pr");

    std::map<const Formula*, SimpleType> table;
    FormulaPtr f = Formula::app(id, Formula::prop("P"));
    typecheck(empty, f, Dialect::Hfl, &table);
    CHECK(table.at(f.get()).is_ground());
    CHECK(table.at(f->a.get()).arity() == 1);
  }

  TEST_CASE("typing failures carry their kind") {
    TypingContext empty;
    try {
      typecheck(empty, Formula::var("x"), Dialect::Hfl);
      FAIL("unbound variable accepted");
    } catch (const TypeError& e) {
      CHECK(e.kind == TypeErrorKind::Unbound);
    }
    try {
      typecheck(empty, Formula::app(Formula::prop("P"), Formula::prop("Q")), Dialect::Hfl);
      FAIL("ground application accepted");
    } catch (const TypeError& e) {
      CHECK(e.kind == TypeErrorKind::Mismatch);
    }
    try {
      typecheck(empty, Formula::mu("X", SimpleType::ground(), Formula::state_var("X")),
                Dialect::ApkaBody);
      FAIL("binder accepted in a transition body");
    } catch (const TypeError& e) {
      CHECK(e.kind == TypeErrorKind::Dialect);
    }
  }

  TEST_CASE("binding report") {
    FormulaPtr good = example_formula();
    BindingReport r = binding_report(good);
    CHECK(r.well_named);
    CHECK(r.free_vars.empty());
    CHECK(r.free_fixpoints.empty());

    FormulaPtr shadow =
        Formula::mu("X", SimpleType::ground(),
                    Formula::or_(Formula::mu("X", SimpleType::ground(), Formula::state_var("X")),
                                 Formula::state_var("X")));
    CHECK_FALSE(binding_report(shadow).well_named);

    BindingReport f = binding_report(Formula::or_(Formula::var("x"), Formula::state_var("Y")));
    CHECK(f.free_vars == std::set<std::string>{"x"});
    CHECK(f.free_fixpoints == std::set<std::string>{"Y"});
  }
}

// ---------------------------------------------------------------------------

TEST_SUITE("trees") {
  TEST_CASE("regular tree text round trip") {
    RegularTree t = example_tree();
    CHECK(t.size() == 3);
    CHECK(t.node_name(t.root()) == "n0");
    CHECK(t.holds(t.root(), 0));
    RegularTree back = RegularTree::load(t.save());
    CHECK(back.save() == t.save());
    CHECK_THROWS_AS(RegularTree::load("props P\nroot n0\nnode n0 : P"), ParseError);
    CHECK_THROWS_AS(RegularTree::load("props P\nroot n9\nnode n0 { labels ; left n0 ; right n0 }"),
                    InputError);
  }

  TEST_CASE("prefix text round trip and truncation") {
    RegularTree t = example_tree();
    PrefixTree p = prefix(t, 6);
    CHECK(p.depth() == 6);
    CHECK(p.masks().size() == (1u << 7) - 1);
    CHECK(PrefixTree::parse(p.save()) == p);
    CHECK(p.truncated(3) == prefix(t, 3));
    CHECK(prefix(t, 6) == p);
  }

  TEST_CASE("prefix depth respects caps") {
    RegularTree t = example_tree();
    Caps caps;
    caps.max_depth = 4;
    CHECK_THROWS_AS(prefix(t, 5, caps), CapError);
    CHECK(prefix(t, 4, caps).depth() == 4);
  }

  TEST_CASE("metric: identity, symmetry, ultrametric") {
    Rng rng(101);
    std::vector<std::string> props{"P", "Q"};
    for (int i = 0; i < 60; ++i) {
      RegularTree a = random_tree(rng, props, 4);
      RegularTree b = random_tree(rng, props, 4);
      RegularTree c = random_tree(rng, props, 4);
      DyadicDistance self = distance(a, a, 12);
      CHECK_FALSE(self.exact);
      CHECK(distance(a, b, 12) == distance(b, a, 12));
      DyadicDistance ab = distance(a, b, 12), bc = distance(b, c, 12), ac = distance(a, c, 12);
      if (ab.exact && bc.exact && ac.exact)
        CHECK(ac.level >= std::min(ab.level, bc.level));
    }
  }

  TEST_CASE("distance coheres with prefixes") {
    Rng rng(202);
    std::vector<std::string> props{"P"};
    int exact_seen = 0;
    for (int i = 0; i < 200; ++i) {
      RegularTree a = random_tree(rng, props, 4);
      RegularTree b = random_tree(rng, props, 4);
      DyadicDistance d = distance(a, b, 12);
      if (!d.exact) {
        CHECK(prefix(a, 11) == prefix(b, 11));
        continue;
      }
      ++exact_seen;
      int i0 = static_cast<int>(d.level);
      if (i0 > 0) CHECK(prefix(a, i0 - 1) == prefix(b, i0 - 1));
      CHECK(prefix(a, i0) != prefix(b, i0));
    }
    CHECK(exact_seen > 50);
  }

  TEST_CASE("distance strings") {
    CHECK(DyadicDistance{true, 3}.str() == "Exact(3)");
    CHECK(DyadicDistance{false, 5}.str() == "AtMost(5)");
  }
}

// ---------------------------------------------------------------------------

TEST_SUITE("apka") {
  TEST_CASE("automaton text round trip") {
    Apka a = example_automaton();
    CHECK(a.report().ok());
    CHECK(a.states().size() == 3);
    CHECK(a.states()[a.init_index()].name == "I");
    Apka back = Apka::load(a.save());
    CHECK(back.save() == a.save());
  }

  TEST_CASE("validation failures") {
    auto ground = SimpleType::ground();
    StateDecl q{"q0", {}, 0, Formula::top()};

    Apka dup({"P"}, {q, q}, "q0");
    CHECK_FALSE(dup.report().ok());

    Apka gap({"P"}, {{"q0", {}, 0, Formula::top()}, {"q1", {}, 2, Formula::top()}}, "q0");
    CHECK_FALSE(gap.report().ok());

    Apka high({"P"}, {{"q0", {}, 2, Formula::top()}}, "q0");
    CHECK_FALSE(high.report().ok());

    Apka fun({"P"}, {{"q0", {{"x", ground}}, 0, Formula::var("x")}}, "q0");
    CHECK_FALSE(fun.report().ok());  // initial state not ground

    Apka body({"P"}, {{"q0", {}, 0, Formula::state_var("q1")}}, "q0");
    CHECK_FALSE(body.report().ok());

    Apka unprop({"P"}, {{"q0", {}, 0, Formula::prop("R")}}, "q0");
    CHECK_FALSE(unprop.report().ok());

    Apka partial({"P"},
                 {{"q0", {}, 0,
                   Formula::app(Formula::state_var("q1"), Formula::top())},
                  {"q1", {{"x", ground}, {"y", ground}}, 0, Formula::var("x")}},
                 "q0");
    CHECK_FALSE(partial.report().ok());  // body of q0 is not ground
  }

  TEST_CASE("complement is an involution and shifts priorities") {
    Apka a = example_automaton();
    Apka c = complement(a);
    CHECK(c.report().ok());
    for (std::size_t s = 0; s < a.states().size(); ++s)
      CHECK(c.states()[s].priority == a.states()[s].priority + 1);
    CHECK(complement(c).save() == a.save());

    for (const Apka& r : automata_corpus()) {
      Apka cc = complement(complement(r));
      CHECK(cc.save() == r.save());
    }
  }

  TEST_CASE("complement flips the denotation") {
    Rng rng(51);
    Apka a = example_automaton();
    for (int i = 0; i < 10; ++i) {
      RegularTree t = random_tree(rng, {"P"}, 3);
      std::uint32_t full = (1u << t.size()) - 1;
      CHECK(apka_mask(t, a) == (full & ~apka_mask(t, complement(a))));
    }
  }

  TEST_CASE("class descriptor") {
    ClassDescriptor d = descriptor(example_automaton());
    CHECK(d.index == 2);
    CHECK(d.max_parity == Parity::Odd);
    CHECK(d.order == 1);
    CHECK(descriptor(gen_hard(3, HardClass::Sigma)).index == 3);
    CHECK(descriptor(gen_hard(3, HardClass::Sigma)).max_parity == Parity::Even);
    CHECK(descriptor(gen_hard(3, HardClass::Pi)).max_parity == Parity::Odd);
  }
}

// ---------------------------------------------------------------------------

TEST_SUITE("machine") {
  TEST_CASE("replayed example run") {
    Apka a = example_automaton();
    RegularTree t = example_tree();
    GameState gs = init_run(a, t, t.root());
    Trace tr = run_script(gs, parse_script(slurp(data_path("ex1.script"))), 20);
    REQUIRE(tr.steps.size() == 20);
    CHECK(tr.status == RunStatus::StepLimit);
    CHECK(tr.pstack_digits(0) == "");
    CHECK(tr.pstack_digits(8) == "1101");
    CHECK(tr.pstack_digits(11) == "110");
    CHECK(tr.pstack_digits(17) == "11001");
    CHECK(check_run_invariants(tr).ok());
  }

  TEST_CASE("ground deref cascade pops one environment per step") {
    auto ground = SimpleType::ground();
    Apka a({},
           {{"A", {}, 0, Formula::app(Formula::state_var("B"), Formula::top())},
            {"B", {{"x", ground}}, 0, Formula::app(Formula::state_var("C"), Formula::var("x"))},
            {"C", {{"y", ground}}, 0, Formula::var("y")}},
           "A");
    REQUIRE(a.report().ok());
    RegularTree t({}, {{"s", 0, 0, 0}}, 0);
    GameState gs = init_run(a, t, 0);
    Trace tr = run_script(gs, {}, 1000);
    CHECK(tr.status == RunStatus::ExistsWon);
    std::vector<StepEvent> want{StepEvent::Init,        StepEvent::Expand, StepEvent::PushArg,
                                StepEvent::Expand,      StepEvent::PushArg, StepEvent::Expand,
                                StepEvent::Pop,         StepEvent::DerefGround,
                                StepEvent::Pop,         StepEvent::DerefGround};
    REQUIRE(tr.steps.size() == want.size());
    std::vector<std::size_t> sizes{0, 1, 1, 2, 2, 3, 2, 2, 1, 1};
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(tr.steps[k].event.kind == want[k]);
      CHECK(tr.steps[k].psize == sizes[k]);
    }
    CHECK(check_run_invariants(tr).ok());
  }

  TEST_CASE("second-order state flows through the argument stack") {
    auto ground = SimpleType::ground();
    auto fun = SimpleType::arrow(ground, ground);
    FormulaPtr wbody = Formula::or_(
        Formula::app(Formula::var("g"), Formula::var("y")),
        Formula::diamond(Formula::app(Formula::app(Formula::state_var("W"), Formula::var("g")),
                                      Formula::var("y"))));
    Apka a({"P"},
           {{"I", {}, 0,
             Formula::app(Formula::app(Formula::state_var("W"), Formula::state_var("L")),
                          Formula::prop("P"))},
            {"W", {{"g", fun}, {"y", ground}}, 0, wbody},
            {"L", {{"z", ground}}, 0, Formula::box(Formula::var("z"))}},
           "I");
    REQUIRE(a.report().ok());
    CHECK(descriptor(a).order == 2);

    RegularTree t = example_tree();
    GameState gs = init_run(a, t, t.root());
    Trace tr = run_script(gs, parse_script("L L"), 1000);
    CHECK(tr.status == RunStatus::ExistsWon);  // lands on P at n1
    bool deref_fun = false;
    for (const auto& s : tr.steps) deref_fun |= s.event.kind == StepEvent::DerefFun;
    CHECK(deref_fun);
    CHECK(check_run_invariants(tr).ok());

    // The other disjunct keeps recursing through the stacked function.
    GameState gs2 = init_run(a, t, t.root());
    Trace tr2 = run_script(gs2, parse_script("R L R L L L"), 60);
    CHECK(check_run_invariants(tr2).ok());
  }

  TEST_CASE("terminal classification") {
    RegularTree t = example_tree();
    auto probe = [&](FormulaPtr body) {
      Apka a({"P"}, {{"q0", {}, 0, std::move(body)}}, "q0");
      REQUIRE(a.report().ok());
      GameState gs = init_run(a, t, t.root());
      gs.step(std::nullopt);  // expand
      return gs.need().kind;
    };
    CHECK(probe(Formula::top()) == NeedKind::ExistsWins);
    CHECK(probe(Formula::bot()) == NeedKind::ForallWins);
    CHECK(probe(Formula::prop("P")) == NeedKind::ExistsWins);
    CHECK(probe(Formula::neg_prop("P")) == NeedKind::ForallWins);
    CHECK(probe(Formula::or_(Formula::top(), Formula::bot())) == NeedKind::ExistsChoice);
    CHECK(probe(Formula::and_(Formula::top(), Formula::bot())) == NeedKind::ForallChoice);
    CHECK(probe(Formula::diamond(Formula::top())) == NeedKind::ExistsChoice);
    CHECK(probe(Formula::box(Formula::top())) == NeedKind::ForallChoice);
  }

  TEST_CASE("randomized runs satisfy the monitors") {
    Rng rng(3001);
    std::vector<std::string> props{"P", "Q"};
    for (int run = 0; run < 20; ++run) {
      Apka a = random_automaton(rng, props, 4);
      REQUIRE(a.report().ok());
      RegularTree t = random_tree(rng, props, 4);
      GameState gs = init_run(a, t, t.root());
      while (gs.configs() < 2000) {
        NeedKind k = gs.need().kind;
        if (k == NeedKind::ExistsWins || k == NeedKind::ForallWins) break;
        bool choice = k == NeedKind::ExistsChoice || k == NeedKind::ForallChoice;
        gs.step(choice ? std::optional<Choice>(coin(rng) ? Choice::Left : Choice::Right)
                       : std::nullopt);
      }
      MonitorReport rep = check_run_invariants(gs.trace());
      if (!rep.ok()) {
        for (const auto& v : rep.violations) MESSAGE(v);
      }
      CHECK(rep.ok());
    }
  }

  TEST_CASE("corrupted traces are rejected") {
    Apka a = example_automaton();
    RegularTree t = example_tree();
    GameState gs = init_run(a, t, t.root());
    Trace tr = run_script(gs, parse_script(slurp(data_path("ex1.script"))), 20);
    REQUIRE(check_run_invariants(tr).ok());

    Trace bad = tr;
    bad.steps[8].psize -= 1;  // drop a priority-stack entry
    bad.steps[8].phead = bad.pnodes[bad.steps[8].phead].parent;
    CHECK_FALSE(check_run_invariants(bad).ok());

    Trace bad2 = tr;
    bad2.steps[6].event.kind = StepEvent::DerefGround;  // was an expansion
    CHECK_FALSE(check_run_invariants(bad2).ok());

    Trace bad3 = tr;
    bad3.steps[10].cfg.comp = 1;  // wrong computing environment
    CHECK_FALSE(check_run_invariants(bad3).ok());
  }

  TEST_CASE("scripts parse") {
    std::vector<Choice> s = parse_script("// choices\nR R L\nL // tail\n");
    CHECK(s == std::vector<Choice>{Choice::Right, Choice::Right, Choice::Left, Choice::Left});
    CHECK_THROWS_AS(parse_script("L q R"), ParseError);
  }

  TEST_CASE("stair summary over a pure push loop") {
    Apka a({}, {{"S", {}, 1, Formula::diamond(Formula::state_var("S"))}}, "S");
    REQUIRE(a.report().ok());
    RegularTree t({}, {{"s", 0, 0, 0}}, 0);
    GameState gs = init_run(a, t, 0);
    std::vector<Choice> dirs(200, Choice::Left);
    Trace tr = run_script(gs, dirs, 300);
    StairSummary sum = stair_summary(tr, 50);
    CHECK_FALSE(sum.decided);
    REQUIRE(sum.candidate.has_value());
    CHECK(*sum.candidate == 1);
    CHECK(sum.pops.empty());
    CHECK(sum.str().find("candidate") != std::string::npos);
  }

  TEST_CASE("deterministic replay") {
    Apka a = example_automaton();
    RegularTree t = example_tree();
    GameState g1 = init_run(a, t, t.root());
    GameState g2 = init_run(a, t, t.root());
    Trace t1 = run_script(g1, parse_script("R R L L L L"), 40);
    Trace t2 = run_script(g2, parse_script("R R L L L L"), 40);
    CHECK(t1.dump(true) == t2.dump(true));
  }
}

// ---------------------------------------------------------------------------

TEST_SUITE("denot") {
  TEST_CASE("literals and modal operators on the example structure") {
    RegularTree t = example_tree();
    CHECK(hfl_mask(t, parse_closed("P")) == 0b011);
    CHECK(hfl_mask(t, parse_closed("! P")) == 0b100);
    CHECK(hfl_mask(t, parse_closed("tt")) == 0b111);
    CHECK(hfl_mask(t, parse_closed("ff")) == 0b000);
    CHECK(hfl_mask(t, parse_closed("<> P")) == 0b001);
    CHECK(hfl_mask(t, parse_closed("[] P")) == 0b001);
    CHECK(hfl_mask(t, parse_closed("<> (! P)")) == 0b110);
  }

  TEST_CASE("ground fixpoints") {
    RegularTree t = example_tree();
    CHECK(hfl_mask(t, parse_closed("mu X : Pr . <> X")) == 0);
    CHECK(hfl_mask(t, parse_closed("nu X : Pr . <> X")) == 0b111);
    CHECK(hfl_mask(t, parse_closed("mu X : Pr . P \\/ (<> X)")) == 0b011);
    CHECK(hfl_mask(t, parse_closed("nu X : Pr . P /\\ ([] X)")) == 0);
  }

  TEST_CASE("beta reduction is respected") {
    RegularTree t = example_tree();
    CHECK(hfl_mask(t, parse_closed("((\\x : Pr . <> x) P)")) ==
          hfl_mask(t, parse_closed("<> P")));
    CHECK(hfl_mask(t, parse_closed("(((\\x : Pr . \\y : Pr . x /\\ (<> y)) P) (! P))")) ==
          hfl_mask(t, parse_closed("P /\\ (<> (! P))")));
  }

  TEST_CASE("higher-order fixpoint matches its unrolling") {
    RegularTree t = example_tree();
    FormulaPtr f = example_formula();
    std::uint32_t m = hfl_mask(t, f);
    CHECK((m & 1u) == 1u);  // accepted at the root
    // (mu F. \x. x \/ <>(F <>x)) P  ==  mu X. P-chain reachability
    std::uint32_t chain = hfl_mask(t, parse_closed("((mu F : Pr -> Pr . \\x : Pr . x \\/ (<> (F (<> x)))) P)"));
    std::uint32_t flat = hfl_mask(t, parse_closed("mu X : Pr . P \\/ (<> X)"));
    CHECK(chain == flat);
  }

  TEST_CASE("automaton solving agrees with the formula") {
    RegularTree t = example_tree();
    CHECK(apka_mask(t, example_automaton()) == hfl_mask(t, example_formula()));
  }

  TEST_CASE("interpretation supplies free names") {
    RegularTree t = example_tree();
    EvalContext cx(t);
    Interpretation eta;
    eta.vars["x"] = SemValue::ground(0b010);
    CHECK(eval_formula(cx, eta, Formula::diamond(Formula::var("x"))).mask() == 0b001);
    CHECK_THROWS_AS(eval_formula(cx, {}, Formula::var("x")), TypeError);
  }

  TEST_CASE("resource caps") {
    std::vector<RegularTree::Node> five;
    for (int i = 0; i < 5; ++i) five.push_back({"n" + std::to_string(i), 0, 0, 0});
    RegularTree big({"P"}, five, 0);
    CHECK_THROWS_AS(hfl_mask(big, parse_closed("P")), CapError);

    RegularTree t = example_tree();
    CHECK_THROWS_AS(
        hfl_mask(t, parse_closed("((\\f : Pr -> Pr . (f P)) (\\x : Pr . <> x))")), CapError);
    CHECK_THROWS_AS(
        hfl_mask(t, parse_closed(
                        "(((((\\x : Pr . \\y : Pr . \\u : Pr . x) P) P) P))")),
        CapError);
  }

  TEST_CASE("lattice enumeration is ordered and bounded") {
    RegularTree t = example_tree();
    EvalContext cx(t);
    const auto& lat = cx.lattice(SimpleType::ground());
    REQUIRE(lat.size() == 8);
    for (std::size_t i = 0; i < lat.size(); ++i)
      CHECK(cx.canon_index(lat[i]) == i);
    CHECK(cx.height_bound(SimpleType::ground()) >= 3);
  }
}

// ---------------------------------------------------------------------------

TEST_SUITE("translate") {
  TEST_CASE("ground fixpoint becomes a two-state automaton") {
    Apka a = hfl_to_apka(parse_closed("mu X : Pr . <> X"));
    REQUIRE(a.report().ok());
    CHECK(a.states().size() == 2);
    std::set<int> prios;
    for (const auto& s : a.states()) prios.insert(s.priority);
    CHECK(prios == std::set<int>{1, 2});
    Rng rng(21);
    for (int i = 0; i < 8; ++i) {
      RegularTree t = random_tree(rng, {"P"}, 3);
      CHECK(apka_mask(t, a) == 0);
    }
  }

  TEST_CASE("the example formula translates to the example automaton") {
    Apka a = hfl_to_apka(example_formula());
    REQUIRE(a.report().ok());
    CHECK(a.states().size() == 3);
    std::multiset<int> prios;
    for (const auto& s : a.states()) prios.insert(s.priority);
    CHECK(prios == std::multiset<int>{0, 1, 2});
    Rng rng(22);
    Apka ref = example_automaton();
    RegularTree ex = example_tree();
    CHECK(apka_mask(ex, a) == apka_mask(ex, ref));
    for (int i = 0; i < 8; ++i) {
      RegularTree t = random_tree(rng, {"P"}, 3);
      CHECK(apka_mask(t, a) == apka_mask(t, ref));
    }
  }

  TEST_CASE("priorities are the least compatible with the nesting") {
    Apka a = hfl_to_apka(
        parse_closed("nu A : Pr . mu B : Pr . (P /\\ ([] A)) \\/ (<> B)"));
    REQUIRE(a.report().ok());
    std::map<int, int> by_prio;  // priority -> count
    for (const auto& s : a.states()) by_prio[s.priority] += 1;
    CHECK(by_prio == std::map<int, int>{{1, 1}, {2, 2}});  // B=1, A=2, wrapper=2
  }

  TEST_CASE("padding closes bare lambdas") {
    FormulaPtr f = parse_closed("((\\x : Pr . <> x) P)");
    Apka a = hfl_to_apka(f);
    REQUIRE(a.report().ok());
    CHECK(a.states().size() == 2);  // wrapper + padded lambda
    RegularTree t = example_tree();
    CHECK(apka_mask(t, a) == hfl_mask(t, f));
  }

  TEST_CASE("lambda-bound names are lifted out of fixpoint bodies") {
    FormulaPtr f = parse_closed("((\\x : Pr . (mu X : Pr . x \\/ (<> X))) P)");
    Apka a = hfl_to_apka(f);
    REQUIRE(a.report().ok());
    RegularTree t = example_tree();
    CHECK(apka_mask(t, a) == hfl_mask(t, parse_closed("mu X : Pr . P \\/ (<> X)")));
  }

  TEST_CASE("eta expansion reaches full arity") {
    FormulaPtr f = parse_closed("((mu F : Pr -> Pr . F) P)");
    Apka a = hfl_to_apka(f);
    REQUIRE(a.report().ok());
    for (std::size_t s = 0; s < a.states().size(); ++s)
      CHECK(a.state_type(static_cast<int>(s)).arity() == a.arity(static_cast<int>(s)));
    RegularTree t = example_tree();
    CHECK(apka_mask(t, a) == 0);
  }

  TEST_CASE("rejections") {
    CHECK_THROWS_AS(hfl_to_apka(Formula::var("x")), InputError);   // open
    CHECK_THROWS_AS(hfl_to_apka(Formula::lambda("x", SimpleType::ground(), Formula::var("x"))),
                    InputError);  // not ground
    FormulaPtr shadow =
        Formula::or_(Formula::mu("X", SimpleType::ground(), Formula::state_var("X")),
                     Formula::mu("X", SimpleType::ground(), Formula::prop("P")));
    CHECK_THROWS_AS(hfl_to_apka(shadow), InputError);  // not well-named
  }

  TEST_CASE("automaton to formula on the example") {
    Apka a = example_automaton();
    FormulaPtr f = apka_to_hfl(a);
    BindingReport r = binding_report(f);
    CHECK(r.well_named);
    CHECK(r.free_vars.empty());
    CHECK(r.free_fixpoints.empty());
    CHECK(typecheck({}, f, Dialect::Hfl).is_ground());
    RegularTree ex = example_tree();
    CHECK(hfl_mask(ex, f) == apka_mask(ex, a));
    Rng rng(23);
    for (int i = 0; i < 8; ++i) {
      RegularTree t = random_tree(rng, {"P"}, 3);
      CHECK(hfl_mask(t, f) == apka_mask(t, a));
    }
    // and back again
    Apka round = hfl_to_apka(f);
    REQUIRE(round.report().ok());
    CHECK(apka_mask(ex, round) == apka_mask(ex, a));
  }

  TEST_CASE("uniform-priority staircases translate, mixed ones refuse") {
    for (HardClass cls : {HardClass::Sigma, HardClass::Pi}) {
      Apka h = gen_hard(1, cls);
      FormulaPtr f = apka_to_hfl(h);
      Rng rng(31);
      for (int i = 0; i < 5; ++i) {
        RegularTree t = random_tree(rng, HierarchyVocab::make(1, cls).props, 3);
        CHECK(hfl_mask(t, f) == apka_mask(t, h));
      }
    }
    CHECK_THROWS_AS(apka_to_hfl(gen_hard(2, HardClass::Sigma)), UnsupportedPrecedence);
    try {
      apka_to_hfl(gen_hard(2, HardClass::Sigma));
    } catch (const UnsupportedPrecedence& e) {
      CHECK_FALSE(e.operand_state.empty());
      CHECK_FALSE(e.op_state.empty());
    }
  }

  TEST_CASE("corpus sample round trips") {
    Rng rng(41);
    auto corpus = hfl_corpus();
    for (std::size_t i = 0; i < corpus.size(); i += 4) {
      FormulaPtr f = parse_closed(corpus[i]);
      Apka a = hfl_to_apka(f);
      REQUIRE(a.report().ok());
      for (int j = 0; j < 3; ++j) {
        RegularTree t = random_tree(rng, {"P"}, 3);
        CHECK(apka_mask(t, a) == hfl_mask(t, f));
      }
    }
  }
}

// ---------------------------------------------------------------------------

TEST_SUITE("hierarchy") {
  TEST_CASE("vocabularies") {
    HierarchyVocab s1 = HierarchyVocab::make(1, HardClass::Sigma);
    CHECK(s1.props == std::vector<std::string>{"D", "C", "V", "T", "F", "F_0"});
    HierarchyVocab p2 = HierarchyVocab::make(2, HardClass::Pi);
    CHECK(p2.props == std::vector<std::string>{"D", "C", "V", "T", "F", "F_1", "F_2"});
    CHECK_THROWS_AS(HierarchyVocab::make(0, HardClass::Sigma), InputError);
  }

  TEST_CASE("staircase automata shapes") {
    for (int n = 1; n <= 3; ++n) {
      for (HardClass cls : {HardClass::Sigma, HardClass::Pi}) {
        int shift = cls == HardClass::Sigma ? 0 : 1;
        Apka a = gen_hard(n, cls);
        REQUIRE(a.report().ok());
        CHECK(a.states().size() == static_cast<std::size_t>(n) + 2);
        CHECK(a.priority(a.state_index("I")) == shift);
        CHECK(a.priority(a.state_index("O")) == shift);
        for (int i = 0; i < n; ++i)
          CHECK(a.priority(a.state_index("X_" + std::to_string(i))) == i + shift);
      }
    }
  }

  TEST_CASE("game tree of the example run") {
    auto base = std::make_shared<RegularTree>(example_tree());
    Apka a = example_automaton();
    GameTreeHandle gt = encode_game_tree(base, a);
    int f0 = gt->prop_index("F_0"), f1 = gt->prop_index("F_1");
    int d = gt->prop_index("D"), c = gt->prop_index("C"), v = gt->prop_index("V");
    REQUIRE(f0 >= 0);

    int r = gt->root();
    CHECK(gt->labels(r) == (1u << f1));
    CHECK(gt->child(r, 0) == gt->child(r, 1));  // deterministic successor is shared
    int c1 = gt->child(r, 0);
    CHECK(gt->labels(c1) == (1u << d));
    int c2 = gt->child(c1, 0);
    CHECK(gt->labels(c2) == (1u << f1));
    int c3 = gt->child(c2, 0);
    CHECK(gt->labels(c3) == (1u << d));
    int c4 = gt->child(c3, 1);
    CHECK(gt->labels(c4) == (1u << c));
    CHECK(gt->labels(gt->child(c4, 0)) == (1u << f0));

    // Down the abandoned disjunct: pop then deref.
    int dia = gt->child(c3, 0);
    CHECK(gt->labels(dia) == (1u << d));
    int pop = gt->child(dia, 0);
    CHECK(gt->labels(pop) == (1u << v));
    CHECK(gt->labels(gt->child(pop, 0)) == (1u << d));

    CHECK(gt->inner_priority_stack(r).empty());
    CHECK(gt->inner_priority_stack(c1) == std::vector<int>{1});
    CHECK(gt->config(r).node == base->root());
  }

  TEST_CASE("literal positions repeat forever") {
    auto base = std::make_shared<RegularTree>(example_tree());
    GameTreeHandle gt = encode_game_tree(base, example_automaton());
    // Walk the abandoned diamond disjunct to the falsified literal.
    int node = gt->root();
    for (int step : {0, 0, 0, 0, 0, 0, 0}) node = gt->child(node, step);
    int f = gt->prop_index("F");
    REQUIRE(gt->labels(node) == (1u << f));
    CHECK(gt->child(node, 0) == node);
    CHECK(gt->child(node, 1) == node);
  }

  TEST_CASE("every node carries exactly one label") {
    auto base = std::make_shared<RegularTree>(example_tree());
    GameTreeHandle gt = encode_game_tree(base, example_automaton());
    PrefixTree p = prefix(*gt, 6);
    for (std::uint32_t m : p.masks()) CHECK(std::popcount(m) == 1);
  }

  TEST_CASE("vocabulary checks") {
    auto base = std::make_shared<RegularTree>(example_tree());
    Apka a = example_automaton();
    // Example automaton uses priority 1; a Sigma-1 vocabulary lacks F_1.
    CHECK_THROWS_AS(encode_game_tree(base, a, HierarchyVocab::make(1, HardClass::Sigma)),
                    InputError);
    GameTreeHandle ok = encode_game_tree(base, a, HierarchyVocab::make(2, HardClass::Sigma));
    CHECK(prefix(*ok, 4) == prefix(*encode_game_tree(base, a), 4));

    auto empty = std::make_shared<RegularTree>(RegularTree({}, {{"s", 0, 0, 0}}, 0));
    CHECK_THROWS_AS(encode_game_tree(empty, a), InputError);  // base lacks P
  }

  TEST_CASE("concurrent prefix extraction") {
    auto base = std::make_shared<RegularTree>(example_tree());
    GameTreeHandle gt = encode_game_tree(base, example_automaton());
    PrefixTree want = prefix(*gt, 7);
    std::vector<std::thread> pool;
    std::atomic<int> mismatches{0};
    auto fresh = encode_game_tree(base, example_automaton());
    for (int i = 0; i < 4; ++i)
      pool.emplace_back([&] {
        PrefixTree got = prefix(*fresh, 7);
        if (got != want) mismatches.fetch_add(1);
      });
    for (auto& th : pool) th.join();
    CHECK(mismatches.load() == 0);
  }

  TEST_CASE("iterated encoding converges") {
    Apka h = gen_hard(1, HardClass::Sigma);
    std::vector<std::string> props = HierarchyVocab::make(1, HardClass::Sigma).props;
    Rng rng(61);
    RegularTree s1 = random_tree(rng, props, 3);
    RegularTree s2 = random_tree(rng, props, 3);
    ConvergenceReport r1 = banach_iterate(h, s1, 6, 4);
    ConvergenceReport r2 = banach_iterate(h, s2, 6, 4);
    CHECK(r1.stabilized);
    CHECK(r2.stabilized);
    CHECK(r1.prefix == r2.prefix);
    CHECK_FALSE(r1.residual.exact);
    CHECK(r1.str().find("stabilized: yes") != std::string::npos);
  }

  TEST_CASE("iteration guards") {
    Apka h = gen_hard(1, HardClass::Sigma);
    RegularTree seed({"D", "C", "V", "T", "F", "F_0"}, {{"s", 1u << 3, 0, 0}}, 0);
    CHECK_THROWS_AS(banach_iterate(h, seed, 0, 4), InputError);
    Caps caps;
    caps.max_depth = 3;
    CHECK_THROWS_AS(banach_iterate(h, seed, 4, 6, caps), CapError);
    Apka notvocab = example_automaton();
    CHECK_THROWS_AS(banach_iterate(notvocab, seed, 4, 4), InputError);
  }

  TEST_CASE("sampled contraction") {
    Apka h = gen_hard(1, HardClass::Sigma);
    std::vector<std::string> props = HierarchyVocab::make(1, HardClass::Sigma).props;
    Rng rng(71);
    int checked = 0;
    for (int i = 0; i < 12; ++i) {
      RegularTree a = random_tree(rng, props, 3);
      RegularTree b = random_tree(rng, props, 3);
      DyadicDistance d = distance(a, b, 8);
      if (!d.exact) continue;
      ++checked;
      auto ga = encode_game_tree(std::make_shared<RegularTree>(a), h);
      auto gb = encode_game_tree(std::make_shared<RegularTree>(b), h);
      std::size_t want = d.level + 1;
      DyadicDistance dg = distance(prefix(*ga, static_cast<int>(want)),
                                   prefix(*gb, static_cast<int>(want)), want + 1);
      CHECK((!dg.exact || dg.level >= want));
    }
    CHECK(checked > 3);
  }
}

// ---------------------------------------------------------------------------

TEST_SUITE("cli") {
  namespace {
  struct CmdResult {
    int code;
    std::string out;
  };

  CmdResult run_cli(const std::string& args) {
    static int counter = 0;
    std::string outfile = "/tmp/apka_cli_" + std::to_string(counter++) + ".out";
    std::string cmd = std::string(APKA_CLI_BIN) + " " + args + " >" + outfile + " 2>&1";
    int st = std::system(cmd.c_str());
    int code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    std::ifstream in(outfile);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::remove(outfile.c_str());
    return {code, ss.str()};
  }

  std::string dp(const std::string& name) { return data_path(name); }
  }  // namespace

  TEST_CASE("typecheck and validate") {
    CmdResult r = run_cli("typecheck " + dp("ex1.hfl"));
    CHECK(r.code == 0);
    CHECK(r.out.find("Pr") != std::string::npos);
    CmdResult v = run_cli("validate " + dp("ex1.apka"));
    CHECK(v.code == 0);
    CHECK(v.out.find("ok") != std::string::npos);
  }

  TEST_CASE("check in both modes, complement flips the verdict") {
    CmdResult apka = run_cli("check --apka " + dp("ex1.apka") + " --tree " + dp("ex2.tree") +
                             " --node n0");
    CHECK(apka.code == 0);
    CHECK(apka.out.find("true") != std::string::npos);
    CmdResult hfl = run_cli("check --hfl " + dp("ex1.hfl") + " --tree " + dp("ex2.tree") +
                            " --node n0");
    CHECK(hfl.code == 0);

    CmdResult comp = run_cli("complement " + dp("ex1.apka") + " -o /tmp/ex1c.apka");
    REQUIRE(comp.code == 0);
    CmdResult neg = run_cli("check --apka /tmp/ex1c.apka --tree " + dp("ex2.tree") +
                            " --node n0");
    CHECK(neg.code == 1);
    CHECK(neg.out.find("false") != std::string::npos);
  }

  TEST_CASE("simulate replays the committed script") {
    CmdResult r = run_cli("simulate --apka " + dp("ex1.apka") + " --tree " + dp("ex2.tree") +
                          " --script " + dp("ex1.script") + " --max-steps 20 --monitors");
    CHECK(r.code == 0);
    CHECK(r.out.find("D=1101") != std::string::npos);
    CHECK(r.out.find("monitors: ok") != std::string::npos);
  }

  TEST_CASE("simulate prompts interactively") {
    std::string outfile = "/tmp/apka_cli_interactive.out";
    std::string cmd = "printf 'R\\n' | " + std::string(APKA_CLI_BIN) +
                      " simulate --interactive --apka " + dp("ex1.apka") + " --tree " +
                      dp("ex2.tree") + " --max-steps 12 >" + outfile + " 2>&1";
    int st = std::system(cmd.c_str());
    CHECK(WIFEXITED(st));
    std::ifstream in(outfile);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::remove(outfile.c_str());
    CHECK(ss.str().find("?") != std::string::npos);
    CHECK(ss.str().find("input ended at a choice point") != std::string::npos);
  }

  TEST_CASE("translate in both directions") {
    CmdResult to_apka = run_cli("translate --to apka " + dp("ex1.hfl") + " -o /tmp/ex1t.apka");
    REQUIRE(to_apka.code == 0);
    Apka a = Apka::load_file("/tmp/ex1t.apka");
    CHECK(a.report().ok());
    CHECK(a.states().size() == 3);

    CmdResult to_hfl = run_cli("translate --to hfl " + dp("ex1.apka") + " -o /tmp/ex1t.hfl");
    REQUIRE(to_hfl.code == 0);
    CmdResult tc = run_cli("typecheck /tmp/ex1t.hfl");
    CHECK(tc.code == 0);
  }

  TEST_CASE("generate, encode, iterate, measure") {
    REQUIRE(run_cli("gen-hard --n 2 --class sigma -o /tmp/hard2.apka").code == 0);
    Apka h = Apka::load_file("/tmp/hard2.apka");
    CHECK(h.states().size() == 4);

    std::ofstream seed("/tmp/seed1.tree");
    seed << "props D C V T F F_0\nroot s0\nnode s0 { labels D ; left s0 ; right s0 }\n";
    seed.close();
    REQUIRE(run_cli("gen-hard --n 1 --class sigma -o /tmp/hard1.apka").code == 0);
    CmdResult enc = run_cli(
        "encode --apka /tmp/hard1.apka --tree /tmp/seed1.tree --depth 4 -o /tmp/enc.prefix");
    REQUIRE(enc.code == 0);
    PrefixTree p = PrefixTree::load_file("/tmp/enc.prefix");
    CHECK(p.depth() == 4);

    CmdResult fix = run_cli(
        "fixpoint --apka /tmp/hard1.apka --seed /tmp/seed1.tree --iters 6 --depth 4 -o "
        "/tmp/fix.prefix");
    CHECK(fix.code == 0);
    CHECK(fix.out.find("stabilized: yes") != std::string::npos);

    std::ofstream seed2("/tmp/seed2.tree");
    seed2 << "props D C V T F F_0\nroot s0\nnode s0 { labels C ; left s0 ; right s0 }\n";
    seed2.close();
    REQUIRE(run_cli("fixpoint --apka /tmp/hard1.apka --seed /tmp/seed2.tree --iters 6 "
                    "--depth 4 -o /tmp/fix2.prefix")
                .code == 0);
    CmdResult dist = run_cli("distance /tmp/fix.prefix /tmp/fix2.prefix");
    CHECK(dist.code == 0);
    CHECK(dist.out.find("AtMost(5)") != std::string::npos);

    CmdResult dself = run_cli("distance /tmp/enc.prefix /tmp/fix.prefix --cap 4");
    CHECK(dself.code == 0);
  }

  TEST_CASE("exit codes") {
    CHECK(run_cli("frobnicate").code == 2);
    CHECK(run_cli("typecheck").code == 2);
    CHECK(run_cli("typecheck /tmp/definitely-missing.hfl").code == 3);
    std::ofstream bad("/tmp/bad.apka");
    bad << "props P\ninit I\nstate I : Pr { prio 0 ; body (Q tt) }\n";
    bad.close();
    CHECK(run_cli("validate /tmp/bad.apka").code == 1);
    std::ofstream worse("/tmp/worse.apka");
    worse << "this is not an automaton\n";
    worse.close();
    CHECK(run_cli("validate /tmp/worse.apka").code == 3);
  }
}
