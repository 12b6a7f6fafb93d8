#pragma once

// Independent reference computations used as test oracles. They avoid the
// library's code paths on purpose: plain loops, no Eigen expressions.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cmsent/label.hpp"
#include "cmsent/neural.hpp"

namespace cmsent::testing {

/// Most frequent adjacent pair over a frequency map of words split into
/// single characters; ties go to the smallest pair.
inline std::pair<std::pair<std::string, std::string>, std::int64_t> brute_force_best_pair(
    const std::map<std::string, std::int64_t>& freq) {
  std::vector<std::pair<std::pair<std::string, std::string>, std::int64_t>> counts;
  for (const auto& [word, n] : freq) {
    for (std::size_t i = 0; i + 1 < word.size(); ++i) {
      std::pair<std::string, std::string> p{word.substr(i, 1), word.substr(i + 1, 1)};
      bool found = false;
      for (auto& c : counts) {
        if (c.first == p) {
          c.second += n;
          found = true;
        }
      }
      if (!found) counts.push_back({p, n});
    }
  }
  auto best = counts.front();
  for (const auto& c : counts) {
    if (c.second > best.second || (c.second == best.second && c.first < best.first)) best = c;
  }
  return best;
}

/// Per-class F1 and macro F1 counted directly from (gold, pred) pairs.
struct BruteF1 {
  std::array<double, 3> f1{};
  double macro = 0.0;
  double weighted = 0.0;
  double accuracy = 0.0;
};

inline BruteF1 brute_force_f1(const std::vector<Label>& gold, const std::vector<Label>& pred) {
  BruteF1 out;
  double correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i] ? 1 : 0;
  out.accuracy = correct / static_cast<double>(gold.size());
  for (int c = 0; c < 3; ++c) {
    const Label l = kAllLabels[static_cast<std::size_t>(c)];
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] == l) ++support;
      if (gold[i] == l && pred[i] == l) ++tp;
      if (gold[i] != l && pred[i] == l) ++fp;
      if (gold[i] == l && pred[i] != l) ++fn;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    out.f1[static_cast<std::size_t>(c)] = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    out.macro += out.f1[static_cast<std::size_t>(c)] / 3.0;
    out.weighted += out.f1[static_cast<std::size_t>(c)] * support / static_cast<double>(gold.size());
  }
  return out;
}

/// Scalar LSTM recurrence for one direction, gate order i, f, c, o.
/// x is T rows of input vectors already in processing order.
inline std::vector<double> reference_lstm_direction(const LstmDirection& d, int units,
                                                    const std::vector<std::vector<double>>& x) {
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> h(static_cast<std::size_t>(units), 0.0), c(static_cast<std::size_t>(units), 0.0);
  for (const auto& xt : x) {
    std::vector<double> z(static_cast<std::size_t>(4 * units), 0.0);
    for (int r = 0; r < 4 * units; ++r) {
      double s = d.b(r, 0);
      for (std::size_t j = 0; j < xt.size(); ++j) s += d.w(r, static_cast<Eigen::Index>(j)) * xt[j];
      for (int j = 0; j < units; ++j) s += d.u(r, j) * h[static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(r)] = s;
    }
    for (int k = 0; k < units; ++k) {
      const auto K = static_cast<std::size_t>(k);
      const auto U = static_cast<std::size_t>(units);
      const double i = sig(z[K]);
      const double f = sig(z[U + K]);
      const double g = std::tanh(z[2 * U + K]);
      const double o = sig(z[3 * U + K]);
      c[K] = f * c[K] + i * g;
      h[K] = o * std::tanh(c[K]);
    }
  }
  return h;
}

/// Central finite difference of f at every entry of every parameter.
inline ClassifierModel finite_difference(ClassifierModel model, const std::function<double(const ClassifierModel&)>& f,
                                         double h) {
  ClassifierModel grad = model.zeros_like();
  auto params = model.parameters();
  auto gparams = grad.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = *params[k].value;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = f(model);
      m.data()[i] = saved - h;
      const double down = f(model);
      m.data()[i] = saved;
      gparams[k].value->data()[i] = (up - down) / (2 * h);
    }
  }
  return grad;
}

/// Max over all entries of |a - n| / max(|a|, |n|, floor).
inline double max_relative_error(const ClassifierModel& analytic, const ClassifierModel& numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  const auto a = analytic.parameters();
  const auto n = numeric.parameters();
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (Eigen::Index i = 0; i < a[k].value->size(); ++i) {
      const double x = a[k].value->data()[i];
      const double y = n[k].value->data()[i];
      const double denom = std::max({std::abs(x), std::abs(y), floor});
      worst = std::max(worst, std::abs(x - y) / denom);
    }
  }
  return worst;
}

/// Classic BPE over space-separated symbol strings (ASCII words only).
inline std::vector<std::pair<std::string, std::string>> reference_learn_bpe(
    const std::map<std::string, std::int64_t>& freq, std::size_t num_merges) {
  std::vector<std::pair<std::string, std::int64_t>> words;
  for (const auto& [w, n] : freq) {
    std::string spaced = " ";
    for (char ch : w) {
      spaced += ch;
      spaced += ' ';
    }
    words.push_back({spaced, n});
  }
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      if (ch == ' ') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    return out;
  };
  std::vector<std::pair<std::string, std::string>> merges;
  for (std::size_t round = 0; round < num_merges; ++round) {
    std::vector<std::pair<std::pair<std::string, std::string>, std::int64_t>> counts;
    for (const auto& [spaced, n] : words) {
      const auto sym = split(spaced);
      for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
        bool found = false;
        for (auto& c : counts) {
          if (c.first.first == sym[i] && c.first.second == sym[i + 1]) {
            c.second += n;
            found = true;
          }
        }
        if (!found) counts.push_back({{sym[i], sym[i + 1]}, n});
      }
    }
    if (counts.empty()) break;
    auto best = counts.front();
    for (const auto& c : counts) {
      if (c.second > best.second || (c.second == best.second && c.first < best.first)) best = c;
    }
    if (best.second < 2) break;
    merges.push_back(best.first);
    const std::string pattern = " " + best.first.first + " " + best.first.second + " ";
    const std::string replacement = " " + best.first.first + best.first.second + " ";
    for (auto& entry : words) {
      std::string& s = entry.first;
      std::size_t pos = 0;
      while ((pos = s.find(pattern, pos)) != std::string::npos) {
        s.replace(pos, pattern.size(), replacement);
        pos += replacement.size() - 1;
      }
    }
  }
  return merges;
}

}  // namespace cmsent::testing
