#include "cmsent/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_set>

#include "cmsent/error.hpp"
#include "text_util.hpp"

namespace cmsent {

std::string_view origin_name(Origin o) {
  switch (o) {
    case Origin::en: return "en";
    case Origin::es: return "es";
    case Origin::cm: return "cm";
    case Origin::unknown: return "unknown";
  }
  return "unknown";
}

Origin parse_origin(std::string_view s) {
  for (Origin o : {Origin::en, Origin::es, Origin::cm, Origin::unknown}) {
    if (origin_name(o) == s) return o;
  }
  throw ConfigError("unknown origin tag \"" + std::string(s) + "\" (expected en, es, cm, unknown)");
}

namespace {

const char* const kEmoticonSource =
#include "emoticons.inc"
    ;

std::vector<std::string> parse_inventory() {
  std::vector<std::string> out;
  std::string_view src(kEmoticonSource);
  for (auto line : detail::split_char(src, '\n')) {
    line = detail::strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    out.emplace_back(line);
  }
  // Longest first, so the scanner takes the longest match.
  std::stable_sort(out.begin(), out.end(),
                   [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
  return out;
}

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c >= 0x80;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char a = s[i];
    if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
    if (a != prefix[i]) return false;
  }
  return true;
}

bool is_url(std::string_view chunk) {
  if (starts_with_ci(chunk, "www.") && chunk.size() > 4) return true;
  auto pos = chunk.find("://");
  if (pos == std::string_view::npos || pos == 0 || pos + 3 >= chunk.size()) return false;
  const auto first = static_cast<unsigned char>(chunk[0]);
  if (!std::isalpha(first)) return false;
  for (std::size_t i = 1; i < pos; ++i) {
    const auto c = static_cast<unsigned char>(chunk[i]);
    if (!(std::isalnum(c) || c == '+' || c == '.' || c == '-')) return false;
  }
  return true;
}

// ASCII plus the Latin-1 supplement uppercase block (U+00C0..U+00DE).
std::string to_lower(std::string_view s) {
  std::string out(s);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto c = static_cast<unsigned char>(out[i]);
    if (c >= 'A' && c <= 'Z') {
      out[i] = static_cast<char>(c - 'A' + 'a');
    } else if (c == 0xC3 && i + 1 < out.size()) {
      auto n = static_cast<unsigned char>(out[i + 1]);
      if (n >= 0x80 && n <= 0x9E && n != 0x97) {
        out[i + 1] = static_cast<char>(n + 0x20);
      }
      ++i;
    }
  }
  return out;
}

std::size_t match_emoticon(std::string_view chunk, std::size_t i) {
  const auto& inv = emoticon_inventory();
  const bool word_start_ok = i == 0 || !is_word_byte(static_cast<unsigned char>(chunk[i - 1]));
  for (const auto& e : inv) {
    if (chunk.substr(i, e.size()) != e) continue;
    if (is_word_byte(static_cast<unsigned char>(e.front())) && !word_start_ok) continue;
    const std::size_t end = i + e.size();
    if (is_word_byte(static_cast<unsigned char>(e.back())) && end < chunk.size() &&
        is_word_byte(static_cast<unsigned char>(chunk[end]))) {
      continue;
    }
    return e.size();
  }
  return 0;
}

void tokenize_chunk(std::string_view chunk, std::vector<std::string>& out) {
  if (chunk == "<url>" || is_url(chunk)) {
    out.emplace_back("<url>");
    return;
  }
  std::size_t i = 0;
  while (i < chunk.size()) {
    if (auto len = match_emoticon(chunk, i); len > 0) {
      out.emplace_back(chunk.substr(i, len));
      i += len;
      continue;
    }
    const auto c = static_cast<unsigned char>(chunk[i]);
    if ((c == '@' || c == '#') && i + 1 < chunk.size() &&
        is_word_byte(static_cast<unsigned char>(chunk[i + 1]))) {
      std::size_t j = i + 1;
      while (j < chunk.size() && is_word_byte(static_cast<unsigned char>(chunk[j]))) ++j;
      out.push_back(to_lower(chunk.substr(i, j - i)));
      i = j;
      continue;
    }
    if (is_word_byte(c)) {
      std::size_t j = i;
      while (j < chunk.size()) {
        const auto cj = static_cast<unsigned char>(chunk[j]);
        if (is_word_byte(cj)) {
          ++j;
        } else if (cj == '\'' && j + 1 < chunk.size() &&
                   is_word_byte(static_cast<unsigned char>(chunk[j + 1]))) {
          // Inner apostrophe: "don't".
          ++j;
        } else {
          break;
        }
      }
      out.push_back(to_lower(chunk.substr(i, j - i)));
      i = j;
      continue;
    }
    out.emplace_back(1, static_cast<char>(c));
    ++i;
  }
}

}  // namespace

const std::vector<std::string>& emoticon_inventory() {
  static const std::vector<std::string> inventory = parse_inventory();
  return inventory;
}

std::vector<std::string> tokenize_tweet(std::string_view text) {
  std::vector<std::string> out;
  for (auto chunk : detail::split_whitespace(text)) {
    tokenize_chunk(chunk, out);
  }
  return out;
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path, Origin origin) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open dataset: " + path.string());
  }
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    auto fields = detail::split_char(detail::strip_cr(line), '\t');
    if (fields.size() != 3) {
      throw FormatError(path.string() + ": row " + std::to_string(row) + ": expected 3 columns, found " +
                        std::to_string(fields.size()));
    }
    auto label = parse_label(fields[1]);
    if (!label) {
      throw FormatError(path.string() + ": row " + std::to_string(row) + ": unknown label \"" +
                        std::string(fields[1]) + "\"");
    }
    LabeledExample ex;
    ex.id = std::string(fields[0]);
    ex.raw_text = std::string(fields[2]);
    ex.tokens = tokenize_tweet(ex.raw_text);
    ex.label = *label;
    ex.origin = origin;
    out.push_back(std::move(ex));
  }
  return out;
}

void save_dataset(std::span<const LabeledExample> examples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write dataset: " + path.string());
  }
  for (const auto& ex : examples) {
    out << ex.id << '\t' << label_name(ex.label) << '\t' << ex.raw_text << '\n';
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> make_splits(
    std::span<const LabeledExample> examples, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in (0, 1)");
  }
  if (examples.size() < 10) {
    throw Error("make_splits needs at least 10 examples, got " + std::to_string(examples.size()));
  }
  std::mt19937_64 rng(seed);
  std::vector<bool> to_validation(examples.size(), false);
  for (Label l : kAllLabels) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (examples[i].label == l) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(static_cast<double>(idx.size()) * val_fraction));
    for (std::size_t k = 0; k < take && k < idx.size(); ++k) to_validation[idx[k]] = true;
  }
  std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    (to_validation[i] ? out.second : out.first).push_back(examples[i]);
  }
  return out;
}

void check_disjoint(const DatasetSplit& split) {
  std::unordered_set<std::string> seen;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    std::unordered_set<std::string> local;
    for (const auto& ex : *part) local.insert(ex.id);
    for (const auto& id : local) {
      if (!seen.insert(id).second) {
        throw Error("example id \"" + id + "\" appears in more than one split");
      }
    }
  }
}

std::vector<Label> labels_of(std::span<const LabeledExample> examples) {
  std::vector<Label> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.label);
  return out;
}

}  // namespace cmsent
