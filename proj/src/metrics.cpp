#include "cmsent/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "cmsent/error.hpp"

namespace cmsent {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts)
    for (auto c : row) t += c;
  return t;
}

std::int64_t ConfusionMatrix::support(Label gold) const {
  std::int64_t t = 0;
  for (auto c : counts[label_index(gold)]) t += c;
  return t;
}

std::int64_t ConfusionMatrix::predicted(Label pred) const {
  std::int64_t t = 0;
  for (const auto& row : counts) t += row[label_index(pred)];
  return t;
}

ConfusionMatrix confusion(std::span<const Label> gold, std::span<const Label> pred) {
  if (gold.size() != pred.size()) {
    throw DimensionError("confusion: " + std::to_string(gold.size()) + " gold labels vs " +
                         std::to_string(pred.size()) + " predictions");
  }
  if (gold.empty()) {
    throw Error("confusion: no examples");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++cm.counts[label_index(gold[i])][label_index(pred[i])];
  }
  return cm;
}

namespace {
double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace

F1Report f1_report(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total <= 0) {
    throw Error("f1_report: empty confusion matrix");
  }
  F1Report r;
  std::int64_t correct = 0;
  for (Label l : kAllLabels) {
    const auto k = label_index(l);
    const double tp = static_cast<double>(cm.counts[k][k]);
    auto& s = r.per_class[k];
    s.support = cm.support(l);
    s.precision = safe_div(tp, static_cast<double>(cm.predicted(l)));
    s.recall = safe_div(tp, static_cast<double>(s.support));
    s.f1 = safe_div(2.0 * s.precision * s.recall, s.precision + s.recall);
    r.macro_f1 += s.f1 / static_cast<double>(kNumLabels);
    r.weighted_f1 += s.f1 * static_cast<double>(s.support) / static_cast<double>(total);
    correct += cm.counts[k][k];
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return r;
}

double majority_baseline_macro_f1(std::span<const Label> gold) {
  if (gold.empty()) {
    throw Error("majority baseline: no examples");
  }
  std::array<std::int64_t, kNumLabels> counts{};
  for (Label l : gold) ++counts[label_index(l)];
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumLabels; ++k) {
    if (counts[k] > counts[best]) best = k;
  }
  std::vector<Label> pred(gold.size(), kAllLabels[best]);
  return f1_report(confusion(gold, pred)).macro_f1;
}

nlohmann::ordered_json report_to_json(const ConfusionMatrix& cm, const F1Report& report) {
  nlohmann::ordered_json j;
  j["classes"] = {"negative", "neutral", "positive"};
  j["confusion"] = cm.counts;
  j["total"] = cm.total();
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (Label l : kAllLabels) {
    const auto& s = report.per_class[label_index(l)];
    per[std::string(label_name(l))] = {{"precision", s.precision},
                                       {"recall", s.recall},
                                       {"f1", s.f1},
                                       {"support", s.support}};
  }
  j["per_class"] = per;
  j["macro_f1"] = report.macro_f1;
  j["weighted_f1"] = report.weighted_f1;
  j["accuracy"] = report.accuracy;
  return j;
}

std::string report_to_table(const ConfusionMatrix& cm, const F1Report& report) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-10s %9s %9s %9s %9s\n", "class", "precision", "recall", "f1",
                "support");
  os << buf;
  for (Label l : kAllLabels) {
    const auto& s = report.per_class[label_index(l)];
    std::snprintf(buf, sizeof(buf), "%-10s %9.4f %9.4f %9.4f %9lld\n",
                  std::string(label_name(l)).c_str(), s.precision, s.recall, s.f1,
                  static_cast<long long>(s.support));
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-10s %29.4f %9lld\n", "macro", report.macro_f1,
                static_cast<long long>(cm.total()));
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-10s %29.4f\n", "weighted", report.weighted_f1);
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-10s %29.4f\n", "accuracy", report.accuracy);
  os << buf;
  os << "confusion (rows=gold, cols=pred: neg neu pos)\n";
  for (const auto& row : cm.counts) {
    std::snprintf(buf, sizeof(buf), "  %8lld %8lld %8lld\n", static_cast<long long>(row[0]),
                  static_cast<long long>(row[1]), static_cast<long long>(row[2]));
    os << buf;
  }
  return os.str();
}

}  // namespace cmsent
