#pragma once

#include "apka/apka.hpp"
#include "apka/syntax.hpp"

namespace apka {

// Closed, well-named, ground formula to an equivalent automaton: lambdas not
// already heading a fixpoint body get wrapped in vacuous greatest fixpoints,
// fixpoint bodies are closed against outer lambda variables by
// abstraction-application rewrites, every fixpoint is brought to full arity,
// and priorities are the least ones compatible with the nesting (odd for
// least, even for greatest fixpoints).
Apka hfl_to_apka(const FormulaPtr& f);

// Automaton to a closed formula by eliminating states in ascending priority
// order, substituting each state's fixpoint form for its occurrences.  Throws
// UnsupportedPrecedence when that would drive a higher-priority fixpoint
// strictly inside a lower-priority one in operator position.
FormulaPtr apka_to_hfl(const Apka& a);

}  // namespace apka
