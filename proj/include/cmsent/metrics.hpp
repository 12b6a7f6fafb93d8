#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include <json.hpp>

#include "cmsent/label.hpp"

namespace cmsent {

/// 3x3 counts; rows are gold labels, columns predictions.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumLabels>, kNumLabels> counts{};

  std::int64_t at(Label gold, Label pred) const {
    return counts[label_index(gold)][label_index(pred)];
  }
  std::int64_t total() const;
  std::int64_t support(Label gold) const;
  std::int64_t predicted(Label pred) const;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct F1Report {
  std::array<ClassScores, kNumLabels> per_class{};
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
};

/// Throws DimensionError on length mismatch, Error on empty input.
ConfusionMatrix confusion(std::span<const Label> gold, std::span<const Label> pred);

/// 0/0 is taken as 0 for precision, recall and F1.
F1Report f1_report(const ConfusionMatrix& cm);

/// Macro F1 of always predicting the most frequent gold label.
double majority_baseline_macro_f1(std::span<const Label> gold);

nlohmann::ordered_json report_to_json(const ConfusionMatrix& cm, const F1Report& report);
std::string report_to_table(const ConfusionMatrix& cm, const F1Report& report);

}  // namespace cmsent
