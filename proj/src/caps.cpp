#include "apka/caps.hpp"

#include <cstdlib>
#include <sstream>
#include <string>

namespace apka {

Caps Caps::from_env() {
  Caps caps;
  const char* raw = std::getenv("APKA_CAPS");
  if (!raw) return caps;
  std::istringstream in(raw);
  std::string item;
  while (std::getline(in, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) continue;
    std::string key = item.substr(0, eq);
    unsigned long value = std::strtoul(item.c_str() + eq + 1, nullptr, 10);
    if (key == "states")
      caps.denot_states = value;
    else if (key == "order")
      caps.max_order = value;
    else if (key == "args")
      caps.max_args = value;
    else if (key == "depth")
      caps.max_depth = value;
    else if (key == "lattice")
      caps.max_lattice = value;
  }
  return caps;
}

}  // namespace apka
