#include "cmsent/subword.hpp"

#include <cmath>
#include <fstream>
#include <tuple>

#include <json.hpp>

#include "cmsent/error.hpp"
#include "text_util.hpp"

namespace cmsent {

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0 && c < 0xF8) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    if (i + len > s.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

MergeTable learn_bpe(const std::map<std::string, std::int64_t>& word_frequencies,
                     std::size_t num_merges) {
  struct Word {
    std::vector<std::string> symbols;
    std::int64_t freq;
  };
  std::vector<Word> words;
  words.reserve(word_frequencies.size());
  for (const auto& [w, f] : word_frequencies) {
    if (f > 0) words.push_back({utf8_chars(w), f});
  }

  MergeTable table;
  for (std::size_t round = 0; round < num_merges; ++round) {
    std::map<std::pair<std::string, std::string>, std::int64_t> pair_counts;
    for (const auto& w : words) {
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
        pair_counts[{w.symbols[i], w.symbols[i + 1]}] += w.freq;
      }
    }
    // std::map iterates in lexicographic order, so the first maximum wins ties.
    const std::pair<std::string, std::string>* best = nullptr;
    std::int64_t best_count = 0;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    if (best == nullptr || best_count < 2) break;
    const auto merged = *best;
    table.merges.push_back(merged);
    for (auto& w : words) {
      std::vector<std::string> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == merged.first &&
            w.symbols[i + 1] == merged.second) {
          next.push_back(merged.first + merged.second);
          ++i;
        } else {
          next.push_back(std::move(w.symbols[i]));
        }
      }
      w.symbols = std::move(next);
    }
  }
  return table;
}

std::vector<std::string> apply_bpe(std::string_view token, const MergeTable& table) {
  auto symbols = utf8_chars(token);
  for (const auto& [left, right] : table.merges) {
    if (symbols.size() < 2) break;
    std::vector<std::string> next;
    next.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        next.push_back(left + right);
        ++i;
      } else {
        next.push_back(std::move(symbols[i]));
      }
    }
    symbols = std::move(next);
  }
  return symbols;
}

void NGramConfig::validate() const {
  if (n_min < 1 || n_max < n_min) {
    throw ConfigError("n-gram range must satisfy 1 <= n_min <= n_max");
  }
  if (buckets < 1) {
    throw ConfigError("n-gram buckets must be positive");
  }
}

std::vector<std::string> extract_ngrams(std::string_view token, const NGramConfig& cfg) {
  std::vector<std::string> out;
  if (token.empty()) return out;
  std::vector<std::string> chars;
  chars.emplace_back("<");
  for (auto& c : utf8_chars(token)) chars.push_back(std::move(c));
  chars.emplace_back(">");
  const auto len = static_cast<int>(chars.size());
  for (int i = 0; i < len; ++i) {
    std::string gram;
    for (int n = 1; n <= cfg.n_max && i + n <= len; ++n) {
      gram += chars[static_cast<std::size_t>(i + n - 1)];
      if (n >= cfg.n_min) out.push_back(gram);
    }
  }
  return out;
}

std::uint32_t fnv1a32(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 16777619u;
  }
  return h;
}

std::uint32_t hash_ngram(std::string_view s, std::uint32_t buckets) {
  return fnv1a32(s) % buckets;
}

std::vector<std::uint32_t> ngram_buckets(std::string_view token, const NGramConfig& cfg) {
  std::vector<std::uint32_t> ids;
  for (const auto& g : extract_ngrams(token, cfg)) ids.push_back(hash_ngram(g, cfg.buckets));
  return ids;
}

Vector oov_vector(const SubwordEmbeddingSpace& space, std::string_view token) {
  const auto dim = static_cast<Eigen::Index>(space.dim());
  Vector v = Vector::Zero(dim);
  const auto ids = ngram_buckets(token, space.ngram_config);
  for (auto id : ids) v += space.ngram_matrix.row(id).transpose();
  std::size_t parts = ids.size();
  if (auto w = space.base.vocab().find(token)) {
    v += space.base.matrix().row(static_cast<Eigen::Index>(*w)).transpose();
    ++parts;
  }
  if (space.ngram_config.oov_reduce == OovReduce::mean && parts > 0) {
    v /= static_cast<double>(parts);
  }
  return v;
}

EmbeddingSpace word_vectors(const SubwordEmbeddingSpace& space) {
  RowMatrix m(static_cast<Eigen::Index>(space.base.size()), static_cast<Eigen::Index>(space.dim()));
  for (std::size_t i = 0; i < space.base.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = oov_vector(space, space.base.vocab().token(i)).transpose();
  }
  return EmbeddingSpace(space.base.vocab(), std::move(m), space.base.name());
}

std::filesystem::path with_suffix(const std::filesystem::path& prefix, std::string_view suffix) {
  auto p = prefix;
  p += std::string(suffix);
  return p;
}

void save_subword_space(const SubwordEmbeddingSpace& space, const std::filesystem::path& prefix) {
  save_embeddings(space.base, with_suffix(prefix, ".words.vec"));

  Vocabulary bucket_vocab;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < space.ngram_matrix.rows(); ++i) {
    if (!space.ngram_matrix.row(i).isZero(0.0)) {
      bucket_vocab.add("b" + std::to_string(i));
      rows.push_back(i);
    }
  }
  const auto ngram_path = with_suffix(prefix, ".ngrams.vec");
  {
    std::ofstream out(ngram_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + ngram_path.string());
    out << rows.size() << ' ' << space.dim() << '\n';
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out << bucket_vocab.token(k);
      for (Eigen::Index j = 0; j < space.ngram_matrix.cols(); ++j) {
        out << ' ' << format_double(space.ngram_matrix(rows[k], j));
      }
      out << '\n';
    }
  }

  nlohmann::ordered_json meta;
  meta["format"] = "cmsent-subword";
  meta["version"] = 1;
  meta["dim"] = space.dim();
  meta["n_min"] = space.ngram_config.n_min;
  meta["n_max"] = space.ngram_config.n_max;
  meta["buckets"] = space.ngram_config.buckets;
  meta["oov_reduce"] = space.ngram_config.oov_reduce == OovReduce::sum ? "sum" : "mean";
  meta["stored_buckets"] = rows.size();
  const auto meta_path = with_suffix(prefix, ".meta.json");
  std::ofstream out(meta_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + meta_path.string());
  out << meta.dump(2) << '\n';
}

SubwordEmbeddingSpace load_subword_space(const std::filesystem::path& prefix) {
  const auto meta_path = with_suffix(prefix, ".meta.json");
  std::ifstream in(meta_path);
  if (!in) throw IoError("cannot open " + meta_path.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(meta_path.string() + ": " + e.what());
  }
  SubwordEmbeddingSpace space;
  try {
    space.ngram_config.n_min = meta.at("n_min").get<int>();
    space.ngram_config.n_max = meta.at("n_max").get<int>();
    space.ngram_config.buckets = meta.at("buckets").get<std::uint32_t>();
    const auto reduce = meta.at("oov_reduce").get<std::string>();
    if (reduce == "sum") space.ngram_config.oov_reduce = OovReduce::sum;
    else if (reduce == "mean") space.ngram_config.oov_reduce = OovReduce::mean;
    else throw FormatError(meta_path.string() + ": unknown oov_reduce \"" + reduce + "\"");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(meta_path.string() + ": " + e.what());
  }
  space.ngram_config.validate();
  space.base = load_embeddings(with_suffix(prefix, ".words.vec"));
  const auto dim = static_cast<Eigen::Index>(space.base.dim());
  space.ngram_matrix = RowMatrix::Zero(space.ngram_config.buckets, dim);

  const auto ngram_path = with_suffix(prefix, ".ngrams.vec");
  std::ifstream ng(ngram_path);
  if (!ng) throw IoError("cannot open " + ngram_path.string());
  std::string line;
  std::getline(ng, line);
  auto header = detail::split_whitespace(line);
  std::size_t n = 0;
  std::size_t d = 0;
  if (header.size() != 2 || !detail::parse_size(header[0], n) || !detail::parse_size(header[1], d) ||
      static_cast<Eigen::Index>(d) != dim) {
    throw FormatError(ngram_path.string() + ": malformed header");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::getline(ng, line)) throw FormatError(ngram_path.string() + ": truncated");
    auto fields = detail::split_whitespace(line);
    std::size_t bucket = 0;
    if (fields.size() != d + 1 || fields[0].size() < 2 || fields[0][0] != 'b' ||
        !detail::parse_size(fields[0].substr(1), bucket) || bucket >= space.ngram_config.buckets) {
      throw FormatError(ngram_path.string() + ": bad row " + std::to_string(k + 2));
    }
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0.0;
      if (!detail::parse_double(fields[j + 1], v) || !std::isfinite(v)) {
        throw FormatError(ngram_path.string() + ": bad value in row " + std::to_string(k + 2));
      }
      space.ngram_matrix(static_cast<Eigen::Index>(bucket), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return space;
}

}  // namespace cmsent
