#pragma once

#include <cstddef>

namespace apka {

// Resource limits for the explicit-state evaluators.  Function lattices over
// n propositions explode doubly exponentially, so the defaults are small; the
// APKA_CAPS environment variable ("states=..,order=..,depth=..") raises them.
struct Caps {
  std::size_t denot_states = 4;   // structure states for denotational evaluation
  std::size_t max_order = 1;      // highest admitted type order
  std::size_t max_args = 2;       // widest admitted arrow type
  std::size_t max_depth = 20;     // deepest tree unfolding
  std::size_t max_lattice = 200000;  // largest enumerated lattice

  static Caps from_env();
};

}  // namespace apka
