#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmsent/align.hpp"
#include "cmsent/data.hpp"
#include "cmsent/skipgram.hpp"

namespace cmsent {

/// Token bijection from the source language to a synthetic "cipher" language.
class CipherLexicon {
 public:
  void add(const std::string& source, const std::string& image);

  /// Throws Error for a token outside the domain.
  const std::string& image(std::string_view source) const;
  bool contains(std::string_view source) const;
  std::size_t size() const { return pairs_.size(); }
  const std::vector<std::pair<std::string, std::string>>& pairs() const { return pairs_; }

  /// Ground-truth source -> cipher dictionary.
  BilingualDictionary as_dictionary() const;

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> index_;
};

struct CipherOptions {
  /// Every image starts with this prefix.
  std::string prefix = "x";
  /// Per-letter probability of re-spelling (vowel for vowel, consonant for consonant).
  double respell_rate = 0.25;
};

/// Deterministic re-spelling of every token; images never collide with each
/// other or with a source token.
CipherLexicon build_cipher_lexicon(std::span<const std::string> vocab, std::uint64_t seed,
                                   const CipherOptions& options = {});

struct SynthConfig {
  std::vector<std::string> vocabulary;  // includes both lexicons
  std::vector<std::string> pos_lexicon;
  std::vector<std::string> neg_lexicon;
  int min_length = 6;
  int max_length = 14;
  std::size_t n_sentences = 1000;
  double switch_prob = 0.5;
  /// Probability that a filler word is drawn from the sentence-intent group
  /// instead of the shared Zipfian pool.
  double intent_affinity = 0.5;
  std::string id_prefix = "s";
  Origin origin = Origin::en;
  std::uint64_t seed = 1;

  void validate() const;

  std::size_t vocab_size() const { return vocabulary.size(); }

  /// A generated vocabulary whose first lexicon_size words are positive and
  /// the next lexicon_size negative.
  static SynthConfig standard(std::size_t vocab_size, std::size_t lexicon_size,
                              std::size_t n_sentences, std::uint64_t seed);
};

/// `n` distinct pronounceable lowercase words over a fixed alphabet that
/// excludes 'x' and 'q'.
std::vector<std::string> synth_vocabulary(std::size_t n, std::uint64_t seed);

/// Label rule: positive if positive-lexicon hits outnumber negative ones,
/// negative if the reverse, neutral otherwise.
Label lexicon_label(std::span<const std::string> tokens, const SynthConfig& cfg);

std::vector<LabeledExample> gen_mono_corpus(const SynthConfig& cfg);

/// Replaces each token independently with its cipher image with probability
/// p; ids and labels are kept and the origin becomes cm.
std::vector<LabeledExample> gen_codemixed(std::span<const LabeledExample> mono,
                                          const CipherLexicon& lex, double p, std::uint64_t seed);

/// Token sequences of the examples, for skip-gram training.
Corpus to_corpus(std::span<const LabeledExample> examples);

}  // namespace cmsent
