#include <set>

#include <doctest.h>

#include "cmsent/error.hpp"
#include "cmsent/synthbench.hpp"

using namespace cmsent;

namespace {

std::size_t count_label(const std::vector<LabeledExample>& xs, Label l) {
  std::size_t n = 0;
  for (const auto& x : xs) n += x.label == l ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("synthetic vocabulary") {
  const auto v = synth_vocabulary(500, 3);
  CHECK(v.size() == 500);
  CHECK(std::set<std::string>(v.begin(), v.end()).size() == 500);
  for (const auto& w : v) {
    REQUIRE(w.find_first_of("xq") == std::string::npos);
    REQUIRE_FALSE(w.empty());
  }
  CHECK(v == synth_vocabulary(500, 3));
}

TEST_CASE("cipher lexicon is a bijection disjoint from the source") {
  for (double rate : {0.0, 0.25, 0.75, 1.0}) {
    const auto vocab = synth_vocabulary(100, 1);
    const auto lex = build_cipher_lexicon(vocab, 9, CipherOptions{"x", rate});
    REQUIRE(lex.size() == 100);
    std::set<std::string> images;
    const std::set<std::string> sources(vocab.begin(), vocab.end());
    for (const auto& [s, t] : lex.pairs()) {
      images.insert(t);
      REQUIRE(sources.count(t) == 0);
      REQUIRE(t.rfind("x", 0) == 0);
      REQUIRE(lex.image(s) == t);
    }
    REQUIRE(images.size() == 100);
    REQUIRE(lex.pairs() == build_cipher_lexicon(vocab, 9, CipherOptions{"x", rate}).pairs());
  }
  const auto vocab = synth_vocabulary(100, 1);
  const auto lex = build_cipher_lexicon(vocab, 9);
  CHECK_THROWS_AS(lex.image("unknownword"), Error);
  CHECK_FALSE(lex.contains("unknownword"));
  CHECK(lex.as_dictionary().size() == 100);
}

TEST_CASE("cipher with collisions keeps images distinct") {
  // Short one-letter words force re-spellings to collide.
  const std::vector<std::string> vocab = {"a", "e", "i", "o", "u", "ba", "be", "bi"};
  const auto lex = build_cipher_lexicon(vocab, 2, CipherOptions{"x", 1.0});
  std::set<std::string> images;
  for (const auto& [s, t] : lex.pairs()) images.insert(t);
  CHECK(images.size() == vocab.size());
}

TEST_CASE("lexicon labeling rule") {
  auto cfg = SynthConfig::standard(100, 5, 10, 1);
  const auto& p = cfg.pos_lexicon;
  const auto& n = cfg.neg_lexicon;
  const std::string filler = cfg.vocabulary.back();
  CHECK(lexicon_label(std::vector<std::string>{p[0], filler, p[1]}, cfg) == Label::positive);
  CHECK(lexicon_label(std::vector<std::string>{filler, filler}, cfg) == Label::neutral);
  CHECK(lexicon_label(std::vector<std::string>{n[0], p[0]}, cfg) == Label::neutral);
  CHECK(lexicon_label(std::vector<std::string>{n[0], p[0], n[2]}, cfg) == Label::negative);
  CHECK(lexicon_label(std::vector<std::string>{}, cfg) == Label::neutral);
}

TEST_CASE("config validation") {
  auto cfg = SynthConfig::standard(100, 5, 10, 1);
  CHECK_NOTHROW(cfg.validate());
  auto overlap = cfg;
  overlap.neg_lexicon.push_back(cfg.pos_lexicon[0]);
  CHECK_THROWS_AS(overlap.validate(), ConfigError);
  auto prob = cfg;
  prob.switch_prob = 1.5;
  CHECK_THROWS_AS(prob.validate(), ConfigError);
  auto lengths = cfg;
  lengths.min_length = 10;
  lengths.max_length = 5;
  CHECK_THROWS_AS(lengths.validate(), ConfigError);
}

TEST_CASE("monolingual corpus follows its own labeling rule") {
  const auto cfg = SynthConfig::standard(400, 20, 10000, 5);
  const auto xs = gen_mono_corpus(cfg);
  REQUIRE(xs.size() == 10000);
  std::set<std::string> ids;
  const std::set<std::string> vocab(cfg.vocabulary.begin(), cfg.vocabulary.end());
  for (const auto& x : xs) {
    REQUIRE(lexicon_label(x.tokens, cfg) == x.label);
    REQUIRE(static_cast<int>(x.tokens.size()) >= cfg.min_length);
    REQUIRE(static_cast<int>(x.tokens.size()) <= cfg.max_length);
    for (const auto& t : x.tokens) REQUIRE(vocab.count(t) == 1);
    REQUIRE(tokenize_tweet(x.raw_text) == x.tokens);
    ids.insert(x.id);
  }
  CHECK(ids.size() == xs.size());
  for (Label l : kAllLabels) CHECK(count_label(xs, l) > 0);

  const auto again = gen_mono_corpus(cfg);
  for (std::size_t i = 0; i < xs.size(); ++i) REQUIRE(again[i].tokens == xs[i].tokens);
}

TEST_CASE("code-mixing at the extremes") {
  auto cfg = SynthConfig::standard(200, 10, 200, 6);
  const auto mono = gen_mono_corpus(cfg);
  const auto lex = build_cipher_lexicon(cfg.vocabulary, 7);

  const auto none = gen_codemixed(mono, lex, 0.0, 8);
  const auto all = gen_codemixed(mono, lex, 1.0, 8);
  const std::set<std::string> source(cfg.vocabulary.begin(), cfg.vocabulary.end());
  for (std::size_t i = 0; i < mono.size(); ++i) {
    REQUIRE(none[i].tokens == mono[i].tokens);
    REQUIRE(none[i].raw_text == mono[i].raw_text);
    REQUIRE(none[i].id == mono[i].id);
    REQUIRE(none[i].origin == Origin::cm);
    REQUIRE(all[i].tokens.size() == mono[i].tokens.size());
    for (std::size_t k = 0; k < all[i].tokens.size(); ++k) {
      REQUIRE(source.count(all[i].tokens[k]) == 0);
      REQUIRE(all[i].tokens[k] == lex.image(mono[i].tokens[k]));
    }
  }
}

TEST_CASE("code-mixing at p=0.5 preserves labels and lengths") {
  const auto cfg = SynthConfig::standard(300, 15, 1500, 10);
  const auto mono = gen_mono_corpus(cfg);
  const auto lex = build_cipher_lexicon(cfg.vocabulary, 11);
  const auto cm = gen_codemixed(mono, lex, 0.5, 12);
  const std::set<std::string> source(cfg.vocabulary.begin(), cfg.vocabulary.end());
  std::size_t total = 0, ciphered = 0;
  for (std::size_t i = 0; i < mono.size(); ++i) {
    REQUIRE(cm[i].label == mono[i].label);
    REQUIRE(cm[i].tokens.size() == mono[i].tokens.size());
    REQUIRE(tokenize_tweet(cm[i].raw_text) == cm[i].tokens);
    for (const auto& t : cm[i].tokens) {
      ++total;
      ciphered += source.count(t) == 0 ? 1 : 0;
    }
  }
  REQUIRE(total >= 10000);
  const double frac = static_cast<double>(ciphered) / static_cast<double>(total);
  CHECK(frac >= 0.45);
  CHECK(frac <= 0.55);
}

TEST_CASE("code-mixing rejects tokens outside the lexicon") {
  const auto cfg = SynthConfig::standard(100, 5, 10, 1);
  const auto lex = build_cipher_lexicon(cfg.vocabulary, 1);
  LabeledExample ex;
  ex.id = "z";
  ex.tokens = {cfg.vocabulary[0], "stranger"};
  ex.raw_text = cfg.vocabulary[0] + " stranger";
  CHECK_THROWS_AS(gen_codemixed(std::vector<LabeledExample>{ex}, lex, 0.5, 1), Error);
}

TEST_CASE("source plus ciphered copy is a skip-gram corpus") {
  auto cfg = SynthConfig::standard(60, 5, 300, 13);
  const auto mono = gen_mono_corpus(cfg);
  const auto lex = build_cipher_lexicon(cfg.vocabulary, 14);
  auto corpus = to_corpus(mono);
  const auto ciphered = to_corpus(gen_codemixed(mono, lex, 1.0, 15));
  corpus.insert(corpus.end(), ciphered.begin(), ciphered.end());
  SkipgramConfig sg;
  sg.dim = 8;
  sg.epochs = 1;
  sg.min_count = 1;
  NGramConfig ng;
  ng.buckets = 1000;
  const auto space = train_skipgram(corpus, sg, ng);
  for (const auto& [s, t] : lex.pairs()) {
    bool used = false;
    for (const auto& x : mono)
      for (const auto& tok : x.tokens) used = used || tok == s;
    if (used) {
      REQUIRE(space.base.vocab().contains(s));
      REQUIRE(space.base.vocab().contains(t));
    }
  }
}
