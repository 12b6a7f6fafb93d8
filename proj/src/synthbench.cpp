#include "cmsent/synthbench.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <unordered_set>

#include "cmsent/error.hpp"

namespace cmsent {

namespace {
constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

bool is_vowel(char c) { return kVowels.find(c) != std::string_view::npos; }
bool is_consonant(char c) { return kConsonants.find(c) != std::string_view::npos; }

std::string join(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}
}  // namespace

void CipherLexicon::add(const std::string& source, const std::string& image) {
  if (index_.count(source)) throw Error("cipher lexicon: duplicate source token " + source);
  index_.emplace(source, pairs_.size());
  pairs_.emplace_back(source, image);
}

const std::string& CipherLexicon::image(std::string_view source) const {
  auto it = index_.find(source);
  if (it == index_.end()) {
    throw Error("token \"" + std::string(source) + "\" is outside the cipher lexicon");
  }
  return pairs_[it->second].second;
}

bool CipherLexicon::contains(std::string_view source) const { return index_.find(source) != index_.end(); }

BilingualDictionary CipherLexicon::as_dictionary() const {
  BilingualDictionary d;
  for (const auto& [s, t] : pairs_) d.add(s, t);
  return d;
}

CipherLexicon build_cipher_lexicon(std::span<const std::string> vocab, std::uint64_t seed,
                                   const CipherOptions& options) {
  if (vocab.empty()) throw ConfigError("cipher lexicon needs a nonempty vocabulary");
  if (options.prefix.empty()) throw ConfigError("cipher prefix must be nonempty");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution respell(options.respell_rate);
  std::uniform_int_distribution<std::size_t> pick_v(0, kVowels.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_c(0, kConsonants.size() - 1);

  const std::unordered_set<std::string> sources(vocab.begin(), vocab.end());
  std::unordered_set<std::string> used;
  CipherLexicon lex;
  for (const auto& token : vocab) {
    std::string image;
    for (int attempt = 0;; ++attempt) {
      std::string body = token;
      for (char& c : body) {
        if (!respell(rng)) continue;
        if (is_vowel(c)) c = kVowels[pick_v(rng)];
        else if (is_consonant(c)) c = kConsonants[pick_c(rng)];
      }
      // Lengthen the prefix after repeated collisions so the loop terminates.
      std::string prefix = options.prefix;
      for (int k = 0; k < attempt / 16; ++k) prefix += options.prefix;
      image = prefix + body;
      if (!sources.count(image) && !used.count(image)) break;
    }
    used.insert(image);
    lex.add(token, image);
  }
  return lex;
}

void SynthConfig::validate() const {
  if (vocabulary.empty()) throw ConfigError("synth: empty vocabulary");
  if (min_length < 1 || max_length < min_length) throw ConfigError("synth: bad sentence length range");
  if (!(switch_prob >= 0.0 && switch_prob <= 1.0)) throw ConfigError("synth: switch_prob must lie in [0, 1]");
  if (!(intent_affinity >= 0.0 && intent_affinity <= 1.0)) {
    throw ConfigError("synth: intent_affinity must lie in [0, 1]");
  }
  if (pos_lexicon.empty() || neg_lexicon.empty()) throw ConfigError("synth: lexicons must be nonempty");
  const std::unordered_set<std::string> vocab(vocabulary.begin(), vocabulary.end());
  const std::unordered_set<std::string> pos(pos_lexicon.begin(), pos_lexicon.end());
  for (const auto& t : neg_lexicon) {
    if (pos.count(t)) throw ConfigError("synth: lexicons overlap on \"" + t + "\"");
  }
  for (const auto* lexicon : {&pos_lexicon, &neg_lexicon}) {
    for (const auto& t : *lexicon) {
      if (!vocab.count(t)) throw ConfigError("synth: lexicon token \"" + t + "\" not in vocabulary");
    }
  }
  if (vocabulary.size() < pos_lexicon.size() + neg_lexicon.size() + 3) {
    throw ConfigError("synth: vocabulary needs at least 3 filler words");
  }
}

std::vector<std::string> synth_vocabulary(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> syllables(2, 3);
  std::uniform_int_distribution<std::size_t> pick_v(0, kVowels.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_c(0, kConsonants.size() - 1);
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w;
    const int k = syllables(rng);
    for (int s = 0; s < k; ++s) {
      w += kConsonants[pick_c(rng)];
      w += kVowels[pick_v(rng)];
    }
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

SynthConfig SynthConfig::standard(std::size_t vocab_size, std::size_t lexicon_size,
                                  std::size_t n_sentences, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.vocabulary = synth_vocabulary(vocab_size, seed ^ 0x9E3779B97F4A7C15ULL);
  cfg.pos_lexicon.assign(cfg.vocabulary.begin(), cfg.vocabulary.begin() + static_cast<std::ptrdiff_t>(lexicon_size));
  cfg.neg_lexicon.assign(cfg.vocabulary.begin() + static_cast<std::ptrdiff_t>(lexicon_size),
                         cfg.vocabulary.begin() + static_cast<std::ptrdiff_t>(2 * lexicon_size));
  cfg.n_sentences = n_sentences;
  cfg.seed = seed;
  return cfg;
}

Label lexicon_label(std::span<const std::string> tokens, const SynthConfig& cfg) {
  const std::unordered_set<std::string_view> pos(cfg.pos_lexicon.begin(), cfg.pos_lexicon.end());
  const std::unordered_set<std::string_view> neg(cfg.neg_lexicon.begin(), cfg.neg_lexicon.end());
  int p = 0;
  int n = 0;
  for (const auto& t : tokens) {
    if (pos.count(t)) ++p;
    else if (neg.count(t)) ++n;
  }
  if (p > n) return Label::positive;
  if (n > p) return Label::negative;
  return Label::neutral;
}

std::vector<LabeledExample> gen_mono_corpus(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);

  const std::unordered_set<std::string> lexicon_words = [&] {
    std::unordered_set<std::string> s(cfg.pos_lexicon.begin(), cfg.pos_lexicon.end());
    s.insert(cfg.neg_lexicon.begin(), cfg.neg_lexicon.end());
    return s;
  }();
  std::vector<std::string> fillers;
  for (const auto& t : cfg.vocabulary) {
    if (!lexicon_words.count(t)) fillers.push_back(t);
  }
  // Zipfian pool over all fillers, plus one intent group per class.
  std::vector<double> zipf;
  for (std::size_t r = 1; r <= fillers.size(); ++r) zipf.push_back(1.0 / static_cast<double>(r));
  std::discrete_distribution<std::size_t> shared_pool(zipf.begin(), zipf.end());
  std::array<std::vector<std::size_t>, kNumLabels> intent_groups;
  for (std::size_t i = 0; i < fillers.size(); ++i) intent_groups[i % kNumLabels].push_back(i);

  std::uniform_int_distribution<int> length(cfg.min_length, cfg.max_length);
  std::uniform_int_distribution<std::size_t> intent_pick(0, kNumLabels - 1);
  std::uniform_int_distribution<std::size_t> pos_pick(0, cfg.pos_lexicon.size() - 1);
  std::uniform_int_distribution<std::size_t> neg_pick(0, cfg.neg_lexicon.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<LabeledExample> out;
  out.reserve(cfg.n_sentences);
  for (std::size_t s = 0; s < cfg.n_sentences; ++s) {
    const auto intent = kAllLabels[intent_pick(rng)];
    const int len = length(rng);
    std::vector<std::string> sentiment;
    const auto& group = intent_groups[label_index(intent)];
    std::uniform_int_distribution<std::size_t> group_pick(0, group.size() - 1);

    if (intent == Label::neutral) {
      if (unit(rng) < 0.3) {
        sentiment.push_back(cfg.pos_lexicon[pos_pick(rng)]);
        sentiment.push_back(cfg.neg_lexicon[neg_pick(rng)]);
      }
    } else {
      const bool positive = intent == Label::positive;
      const int hits = unit(rng) < 0.5 ? 1 : 2;
      for (int h = 0; h < hits; ++h) {
        sentiment.push_back(positive ? cfg.pos_lexicon[pos_pick(rng)] : cfg.neg_lexicon[neg_pick(rng)]);
      }
      if (unit(rng) < 0.25) {
        sentiment.push_back(positive ? cfg.neg_lexicon[neg_pick(rng)] : cfg.pos_lexicon[pos_pick(rng)]);
      }
    }

    std::vector<std::string> tokens;
    const int n_fill = std::max(0, len - static_cast<int>(sentiment.size()));
    for (int i = 0; i < n_fill; ++i) {
      const std::size_t f = unit(rng) < cfg.intent_affinity ? group[group_pick(rng)] : shared_pool(rng);
      tokens.push_back(fillers[f]);
    }
    for (auto& w : sentiment) {
      std::uniform_int_distribution<std::size_t> at(0, tokens.size());
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at(rng)), std::move(w));
    }

    LabeledExample ex;
    ex.id = cfg.id_prefix + std::to_string(s);
    ex.raw_text = join(tokens);
    ex.label = lexicon_label(tokens, cfg);
    ex.tokens = std::move(tokens);
    ex.origin = cfg.origin;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<LabeledExample> gen_codemixed(std::span<const LabeledExample> mono,
                                          const CipherLexicon& lex, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("switch probability must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<LabeledExample> out;
  out.reserve(mono.size());
  for (const auto& ex : mono) {
    LabeledExample cm = ex;
    for (auto& t : cm.tokens) {
      const auto& image = lex.image(t);  // validates the domain for every token
      if (unit(rng) < p) t = image;
    }
    cm.raw_text = join(cm.tokens);
    cm.origin = Origin::cm;
    out.push_back(std::move(cm));
  }
  return out;
}

Corpus to_corpus(std::span<const LabeledExample> examples) {
  Corpus c;
  c.reserve(examples.size());
  for (const auto& ex : examples) c.push_back(ex.tokens);
  return c;
}

}  // namespace cmsent
