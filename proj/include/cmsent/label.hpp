#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace cmsent {

// Class order is fixed: it is the confusion-matrix order and the argmax
// tie-break order (lowest index wins).
enum class Label { negative = 0, neutral = 1, positive = 2 };

inline constexpr std::size_t kNumLabels = 3;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {Label::negative, Label::neutral,
                                                             Label::positive};

inline constexpr std::size_t label_index(Label l) { return static_cast<std::size_t>(l); }

inline constexpr std::string_view label_name(Label l) {
  switch (l) {
    case Label::negative: return "negative";
    case Label::neutral: return "neutral";
    case Label::positive: return "positive";
  }
  return "?";
}

inline std::optional<Label> parse_label(std::string_view s) {
  for (Label l : kAllLabels) {
    if (label_name(l) == s) return l;
  }
  return std::nullopt;
}

}  // namespace cmsent
