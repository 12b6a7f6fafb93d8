#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cmsent/subword.hpp"

namespace cmsent {

using Sentence = std::vector<std::string>;
using Corpus = std::vector<Sentence>;

/// One sentence per line, whitespace-tokenized; files are concatenated in order.
Corpus read_corpus(std::span<const std::filesystem::path> paths);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SkipgramConfig {
  int dim = 100;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double initial_lr = 0.025;
  int min_count = 5;
  double subsample_t = 1e-4;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double mean_pair_loss = 0.0;
  std::int64_t pairs = 0;
};

/// Skip-gram with negative sampling over words plus hashed character n-grams.
/// Single-threaded and deterministic for a fixed seed.
class SkipgramTrainer {
 public:
  SkipgramTrainer(const Corpus& corpus, SkipgramConfig cfg, NGramConfig ngrams);

  /// Runs one pass over the corpus; returns the mean loss per (center, context) pair.
  EpochStats run_epoch();
  void train();

  int epochs_done() const { return epochs_done_; }
  const std::vector<EpochStats>& history() const { return history_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::int64_t count(std::size_t word) const { return counts_.at(word); }

  /// The center-word representation used during training for vocabulary word `word`.
  Vector input_vector(std::size_t word) const;

  SubwordEmbeddingSpace result() const;

 private:
  void build_vocab(const Corpus& corpus);
  void build_negative_table();
  std::size_t sample_negative();

  SkipgramConfig cfg_;
  NGramConfig ngrams_;
  Vocabulary vocab_;
  std::vector<std::int64_t> counts_;
  std::vector<std::vector<std::uint32_t>> sentences_;    // vocabulary ids
  std::vector<std::vector<std::uint32_t>> input_rows_;   // per word: word row + n-gram rows
  std::vector<double> keep_prob_;
  std::vector<std::uint32_t> negative_table_;
  RowMatrix input_;   // words then buckets
  RowMatrix output_;  // words
  std::mt19937_64 rng_;
  std::int64_t total_tokens_ = 0;
  std::int64_t processed_tokens_ = 0;
  int epochs_done_ = 0;
  std::vector<EpochStats> history_;
};

/// Throws Error if no word reaches min_count.
SubwordEmbeddingSpace train_skipgram(const Corpus& corpus, const SkipgramConfig& cfg,
                                     const NGramConfig& ngrams,
                                     std::vector<EpochStats>* history = nullptr);

}  // namespace cmsent
