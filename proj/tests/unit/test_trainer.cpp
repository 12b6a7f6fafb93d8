#include <random>

#include <doctest.h>

#include "cmsent/error.hpp"
#include "cmsent/metrics.hpp"
#include "cmsent/trainer.hpp"
#include "tempdir.hpp"

using namespace cmsent;

namespace {

/// Words of three sentiment groups plus neutral filler; each group has its own direction.
struct ToyWorld {
  EmbeddingSpace space;
  std::vector<std::vector<std::string>> groups;  // indexed by label
  std::vector<std::string> filler;
};

ToyWorld toy_world(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  ToyWorld w;
  std::vector<std::string> tokens;
  w.groups.resize(3);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 5; ++i) {
      w.groups[static_cast<std::size_t>(c)].push_back("g" + std::to_string(c) + "w" + std::to_string(i));
      tokens.push_back(w.groups[static_cast<std::size_t>(c)].back());
    }
  for (int i = 0; i < 10; ++i) {
    w.filler.push_back("f" + std::to_string(i));
    tokens.push_back(w.filler.back());
  }
  RowMatrix m(static_cast<Eigen::Index>(tokens.size()), 6);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index j = 0; j < 6; ++j) m(r, j) = g(rng);
    if (r < 15) m(r, r / 5) += 1.0;
  }
  w.space = EmbeddingSpace(Vocabulary(tokens), m);
  return w;
}

std::vector<LabeledExample> toy_examples(const ToyWorld& w, int n, std::uint64_t seed, const std::string& prefix) {
  std::mt19937_64 rng(seed);
  std::vector<LabeledExample> out;
  for (int k = 0; k < n; ++k) {
    LabeledExample ex;
    ex.id = prefix + std::to_string(k);
    const auto c = rng() % 3;
    ex.label = kAllLabels[c];
    const int len = 2 + static_cast<int>(rng() % 4);
    for (int t = 0; t < len; ++t) ex.tokens.push_back(w.filler[rng() % w.filler.size()]);
    ex.tokens.insert(ex.tokens.begin() + static_cast<long>(rng() % ex.tokens.size()), w.groups[c][rng() % 5]);
    out.push_back(ex);
  }
  return out;
}

EncodedSplit toy_split(const ToyWorld& w, std::uint64_t seed) {
  const TokenVectorizer vec(w.space);
  return {encode_examples(toy_examples(w, 150, seed, "tr"), vec), encode_examples(toy_examples(w, 60, seed + 1, "va"), vec)};
}

TrainConfig fast_config(int max_epochs) {
  TrainConfig c;
  c.max_epochs = max_epochs;
  c.patience = 3;
  c.lr = 0.01;
  c.batch_size = 16;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("early stopping patience semantics") {
  EarlyStopping s(10);
  std::vector<double> metrics = {0.5, 0.6};
  for (int k = 0; k < 10; ++k) metrics.push_back(k % 2 ? 0.6 : 0.55);
  int observed = 0;
  for (double m : metrics) {
    REQUIRE_FALSE(s.should_stop());
    s.observe(m);
    ++observed;
  }
  CHECK(s.should_stop());
  CHECK(observed == 12);
  CHECK(s.best_epoch() == 2);
  CHECK(s.best_metric() == 0.6);

  EarlyStopping first(1);
  CHECK(first.observe(0.0));
  CHECK(first.best_epoch() == 1);
  CHECK_FALSE(first.observe(0.0));
  CHECK(first.should_stop());
}

TEST_CASE("mode and curriculum names") {
  for (auto m : {LearningMode::unsupervised, LearningMode::partially_supervised, LearningMode::supervised})
    CHECK(parse_mode(mode_name(m)) == m);
  CHECK_THROWS_AS(parse_mode("semi"), ConfigError);
  CHECK(parse_curriculum("mixed") == CurriculumKind::mixed);
  CHECK_THROWS_AS(parse_curriculum("random"), ConfigError);
}

TEST_CASE("fit_phase with one epoch") {
  const auto w = toy_world(1);
  const auto split = toy_split(w, 2);
  auto cfg = fast_config(1);
  cfg.patience = 100;
  TrainingHistory h;
  const auto r = fit_phase(ClassifierModel::token_model(6, 4, 3), split, cfg, "p", &h);
  CHECK(r.epochs_run == 1);
  CHECK(h.epochs.size() == 1);
  CHECK(r.best_epoch == 1);
}

TEST_CASE("fit_phase learns, keeps the best checkpoint and is deterministic") {
  const auto w = toy_world(3);
  const auto split = toy_split(w, 4);
  const auto cfg = fast_config(25);
  TrainingHistory h1, h2;
  const auto a = fit_phase(ClassifierModel::token_model(6, 4, 3), split, cfg, "p", &h1);
  const auto b = fit_phase(ClassifierModel::token_model(6, 4, 3), split, cfg, "p", &h2);
  CHECK(h1.to_jsonl() == h2.to_jsonl());
  CHECK(parameters_equal(a.model, b.model));

  double best = 0.0;
  for (const auto& e : h1.epochs) {
    best = std::max(best, e.validation_metric);
    if (e.epoch == a.best_epoch) CHECK(e.validation_metric == a.best_metric);
  }
  CHECK(a.best_metric == best);
  CHECK(evaluate_macro_f1(a.model, split.validation) == a.best_metric);
  CHECK(a.best_metric >= 0.9);
  REQUIRE(h1.best.size() == 1);
  CHECK(h1.best[0].metric == best);
}

TEST_CASE("fit_phase rejects empty splits") {
  const auto w = toy_world(5);
  auto split = toy_split(w, 6);
  split.validation.clear();
  CHECK_THROWS_AS(fit_phase(ClassifierModel::token_model(6, 4, 3), split, fast_config(2), "p"), Error);
  CHECK_THROWS_AS(fit_phase(ClassifierModel::token_model(6, 4, 3), EncodedSplit{}, fast_config(2), "p"), Error);
}

TEST_CASE("curriculum phases follow the mode") {
  const auto w = toy_world(7);
  CurriculumConfig cfg;
  cfg.phase1 = {toy_split(w, 8), toy_split(w, 9)};
  cfg.train = fast_config(4);
  const auto model = ClassifierModel::token_model(6, 3, 1);

  const auto u = run_curriculum(model, cfg, LearningMode::unsupervised);
  CHECK(u.history.phases() == std::vector<std::string>{"monolingual"});
  CHECK(u.phase_start.size() == 1);
  CHECK(parameters_equal(u.phase_start[0], model));

  auto with_cm = cfg;
  with_cm.phase2 = toy_split(w, 10);
  CHECK_THROWS_AS(run_curriculum(model, with_cm, LearningMode::unsupervised), ConfigError);
  CHECK_THROWS_AS(run_curriculum(model, with_cm, LearningMode::partially_supervised), ConfigError);
  CHECK_THROWS_AS(run_curriculum(model, cfg, LearningMode::supervised), ConfigError);

  const auto s = run_curriculum(model, with_cm, LearningMode::supervised);
  CHECK(s.history.phases() == std::vector<std::string>{"monolingual", "code-mixed"});
  REQUIRE(s.phase_start.size() == 2);
  // Phase 2 starts exactly from the phase-1 best checkpoint.
  CHECK(parameters_equal(s.phase_start[1], u.model));

  auto mixed = with_cm;
  mixed.curriculum = CurriculumKind::mixed;
  CHECK(run_curriculum(model, mixed, LearningMode::supervised).history.phases() == std::vector<std::string>{"mixed"});
  auto mixed_u = cfg;
  mixed_u.curriculum = CurriculumKind::mixed;
  CHECK_THROWS_AS(run_curriculum(model, mixed_u, LearningMode::unsupervised), ConfigError);
}

TEST_CASE("history serializes one record per epoch") {
  TrainingHistory h;
  h.epochs = {{"a", 1, 0.5, 0.25}, {"a", 2, 0.4, 0.5}, {"b", 1, 0.3, 0.75}};
  h.best = {{"a", 2, 0.5}, {"b", 1, 0.75}};
  const auto text = h.to_jsonl();
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(text.find("\"phase\":\"b\"") != std::string::npos);
  CHECK(h.phases() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("vectorizer") {
  RowMatrix m(2, 2);
  m << 1, 2, 3, 4;
  const EmbeddingSpace s(Vocabulary({"a", "b"}), m);
  const TokenVectorizer v(s);
  const std::vector<std::string> toks = {"b", "zz", "a"};
  const Matrix x = v.encode(toks);
  REQUIRE(x.rows() == 2);
  CHECK(x(0, 0) == 3);
  CHECK(x(1, 1) == 2);
  const Matrix empty = v.encode(std::vector<std::string>{});
  CHECK(empty.rows() == 1);
  CHECK(empty.isZero(0.0));
  CHECK(v.encode(std::vector<std::string>{"zz"}).isZero(0.0));

  SubwordEmbeddingSpace sw;
  sw.base = s;
  sw.ngram_config.buckets = 20;
  sw.ngram_matrix = RowMatrix::Ones(20, 2);
  const TokenVectorizer vs(sw);
  const Matrix y = vs.encode(std::vector<std::string>{"zz"});
  REQUIRE(y.rows() == 1);
  CHECK(y.row(0).transpose() == oov_vector(sw, "zz"));
}

TEST_CASE("prediction degenerate inputs") {
  RowMatrix m(1, 3);
  m << 1, 1, 1;
  const EmbeddingSpace s(Vocabulary({"a"}), m);
  const TokenVectorizer v(s);
  auto model = ClassifierModel::token_model(3, 2, 1);
  LabeledExample empty;
  empty.id = "e";
  CHECK_NOTHROW(predict(model, std::vector<LabeledExample>{empty}, v));

  model.head = DenseSoftmaxHead::zeros(model.feature_dim());
  LabeledExample ex;
  ex.tokens = {"a", "a"};
  CHECK(predict(model, std::vector<LabeledExample>{ex, empty}, v) ==
        std::vector<Label>{Label::negative, Label::negative});

  const auto other = ClassifierModel::token_model(4, 2, 1);
  CHECK_THROWS_AS(predict(other, std::vector<LabeledExample>{ex}, v), DimensionError);
}

TEST_CASE("sentence classifier on separable blobs") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 0.3);
  DatasetSplit labels;
  std::vector<std::string> ids;
  RowMatrix vecs(300, 4);
  for (int i = 0; i < 300; ++i) {
    LabeledExample ex;
    ex.id = "v" + std::to_string(i);
    ex.label = kAllLabels[static_cast<std::size_t>(i % 3)];
    for (int j = 0; j < 4; ++j) vecs(i, j) = g(rng);
    vecs(i, i % 3) += 2.0;
    ids.push_back(ex.id);
    (i < 240 ? labels.train : labels.validation).push_back(ex);
  }
  const EmbeddingSpace vectors(Vocabulary(ids), vecs);
  auto cfg = fast_config(60);
  cfg.patience = 10;
  const auto r = train_sentence_classifier(vectors, labels, cfg);
  const auto train_rows = encode_sentence_vectors(labels.train, vectors);
  const auto pred = predict(r.model, train_rows);
  double correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels.train[i].label ? 1 : 0;
  CHECK(correct / static_cast<double>(pred.size()) >= 0.95);

  labels.validation[0].id = "nobody";
  try {
    train_sentence_classifier(vectors, labels, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("nobody") != std::string::npos);
  }
}

TEST_CASE("sentence classifier on identical vectors converges to the prior") {
  DatasetSplit labels;
  std::vector<std::string> ids;
  for (int i = 0; i < 200; ++i) {
    LabeledExample ex;
    ex.id = "v" + std::to_string(i);
    ex.label = i % 10 < 6 ? Label::positive : (i % 10 < 8 ? Label::neutral : Label::negative);
    ids.push_back(ex.id);
    (i < 150 ? labels.train : labels.validation).push_back(ex);
  }
  const EmbeddingSpace vectors(Vocabulary(ids), RowMatrix::Constant(200, 5, 0.7));
  auto cfg = fast_config(80);
  cfg.patience = 80;
  cfg.dropout = false;
  const auto r = train_sentence_classifier(vectors, labels, cfg);
  const auto probs = forward(r.model, Matrix::Constant(1, 5, 0.7));
  // Cross-entropy under identical inputs is minimized by the empirical class prior.
  CHECK(probs(2) == doctest::Approx(0.6).epsilon(0.05));
  CHECK(probs(1) == doctest::Approx(0.2).epsilon(0.1));
  CHECK(probs(0) == doctest::Approx(0.2).epsilon(0.1));
  const auto gold = labels_of(labels.validation);
  CHECK(r.best_metric == doctest::Approx(majority_baseline_macro_f1(gold)));
}
