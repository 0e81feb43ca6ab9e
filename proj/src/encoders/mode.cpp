#include "cran/mode.hpp"

#include <stdexcept>

namespace cran {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kBaseline: return "baseline";
    case Mode::kLocal: return "local";
    case Mode::kRelation: return "relation";
    case Mode::kFull: return "full";
  }
  return "unknown";
}

Mode parse_mode(std::string_view text) {
  if (text == "baseline") return Mode::kBaseline;
  if (text == "local") return Mode::kLocal;
  if (text == "relation") return Mode::kRelation;
  if (text == "full") return Mode::kFull;
  throw std::invalid_argument("unknown mode '" + std::string(text) +
                              "' (expected baseline, local, relation or full)");
}

}  // namespace cran
