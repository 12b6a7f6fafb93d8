#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmsent/embed_store.hpp"

namespace cmsent {

// ---------------------------------------------------------------------------
// Byte pair encoding

struct MergeTable {
  std::vector<std::pair<std::string, std::string>> merges;  // priority order
};

/// Greedy BPE over a word-frequency map. Each round merges the adjacent pair
/// with the highest frequency-weighted count; ties go to the lexicographically
/// smallest (left, right). Learning stops early once no pair occurs twice.
MergeTable learn_bpe(const std::map<std::string, std::int64_t>& word_frequencies,
                     std::size_t num_merges);

/// Segments `token` by applying the merges in table order. The segments
/// always concatenate back to `token`.
std::vector<std::string> apply_bpe(std::string_view token, const MergeTable& table);

/// Splits UTF-8 text into code points (invalid bytes become single units).
std::vector<std::string> utf8_chars(std::string_view s);

// ---------------------------------------------------------------------------
// Character n-grams

enum class OovReduce { sum, mean };

struct NGramConfig {
  int n_min = 3;
  int n_max = 6;
  std::uint32_t buckets = 2'000'000;
  OovReduce oov_reduce = OovReduce::sum;

  void validate() const;
};

/// All n-grams of "<" + token + ">" with length in [n_min, n_max], in
/// position-major order. Lengths are counted in code points.
std::vector<std::string> extract_ngrams(std::string_view token, const NGramConfig& cfg);

/// 32-bit FNV-1a over the UTF-8 bytes.
std::uint32_t fnv1a32(std::string_view s);

std::uint32_t hash_ngram(std::string_view s, std::uint32_t buckets);

/// Bucket ids of every n-gram of `token` (repeats kept).
std::vector<std::uint32_t> ngram_buckets(std::string_view token, const NGramConfig& cfg);

// ---------------------------------------------------------------------------
// Subword embedding space

struct SubwordEmbeddingSpace {
  EmbeddingSpace base;     // word-level input vectors
  RowMatrix ngram_matrix;  // buckets x dim
  NGramConfig ngram_config;

  std::size_t dim() const { return base.dim(); }
};

/// Input representation of an in-vocabulary word, or the n-gram composition
/// for an unknown token; the zero vector if the token yields no n-grams.
Vector oov_vector(const SubwordEmbeddingSpace& space, std::string_view token);

/// Materializes the input representation of every vocabulary word.
EmbeddingSpace word_vectors(const SubwordEmbeddingSpace& space);

/// Writes <prefix>.words.vec, <prefix>.ngrams.vec (nonzero buckets only,
/// labelled "b<index>") and <prefix>.meta.json.
void save_subword_space(const SubwordEmbeddingSpace& space, const std::filesystem::path& prefix);
SubwordEmbeddingSpace load_subword_space(const std::filesystem::path& prefix);

std::filesystem::path with_suffix(const std::filesystem::path& prefix, std::string_view suffix);

}  // namespace cmsent
