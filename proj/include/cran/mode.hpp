#ifndef CRAN_MODE_HPP_
#define CRAN_MODE_HPP_

#include <string>
#include <string_view>

namespace cran {

// Which alignment levels are trained and scored.
enum class Mode { kBaseline, kLocal, kRelation, kFull };

// Representation levels an encoder computes.
struct Channels {
  bool global = true;
  bool local = true;
  bool relation = true;
};

inline Channels channels_for(Mode mode) {
  switch (mode) {
    case Mode::kBaseline: return {true, false, false};
    case Mode::kLocal: return {true, true, false};
    case Mode::kRelation: return {true, false, true};
    case Mode::kFull: return {true, true, true};
  }
  return {};
}

std::string to_string(Mode mode);
// Accepts baseline | local | relation | full.
Mode parse_mode(std::string_view text);

}  // namespace cran

#endif  // CRAN_MODE_HPP_
