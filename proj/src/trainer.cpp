#include "cmsent/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cmsent/error.hpp"
#include "cmsent/metrics.hpp"

namespace cmsent {

std::string_view mode_name(LearningMode m) {
  switch (m) {
    case LearningMode::unsupervised: return "unsupervised";
    case LearningMode::partially_supervised: return "partially_supervised";
    case LearningMode::supervised: return "supervised";
  }
  return "unknown";
}

LearningMode parse_mode(std::string_view s) {
  if (s == "unsupervised") return LearningMode::unsupervised;
  if (s == "partially_supervised") return LearningMode::partially_supervised;
  if (s == "supervised") return LearningMode::supervised;
  throw ConfigError("unknown learning mode \"" + std::string(s) + "\"");
}

std::string_view curriculum_name(CurriculumKind c) { return c == CurriculumKind::staged ? "staged" : "mixed"; }

CurriculumKind parse_curriculum(std::string_view s) {
  if (s == "staged") return CurriculumKind::staged;
  if (s == "mixed") return CurriculumKind::mixed;
  throw ConfigError("unknown curriculum \"" + std::string(s) + "\"");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (patience < 1) throw ConfigError("patience must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
}

std::vector<std::string> TrainingHistory::phases() const {
  std::vector<std::string> out;
  for (const auto& b : best) out.push_back(b.phase);
  return out;
}

std::string TrainingHistory::to_jsonl() const {
  std::ostringstream os;
  for (const auto& r : epochs) {
    nlohmann::ordered_json j;
    j["phase"] = r.phase;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["validation_macro_f1"] = r.validation_metric;
    os << j.dump() << '\n';
  }
  return os.str();
}

void TrainingHistory::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << to_jsonl();
  if (!os) throw IoError("failed writing " + path.string());
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw ConfigError("patience must be positive");
}

bool EarlyStopping::observe(double metric) {
  ++seen_;
  if (seen_ == 1 || metric > best_) {
    best_ = metric;
    best_epoch_ = seen_;
    stall_ = 0;
    return true;
  }
  ++stall_;
  return false;
}

std::vector<Label> predict(const ClassifierModel& model, std::span<const TrainingExample> examples) {
  std::vector<Label> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(argmax_label(forward(model, ex.input)));
  return out;
}

double evaluate_macro_f1(const ClassifierModel& model, std::span<const TrainingExample> examples) {
  std::vector<Label> gold;
  gold.reserve(examples.size());
  for (const auto& ex : examples) gold.push_back(ex.label);
  const auto pred = predict(model, examples);
  return f1_report(confusion(gold, pred)).macro_f1;
}

FitResult fit_phase(const ClassifierModel& model, const EncodedSplit& split, const TrainConfig& cfg,
                    std::string_view phase, TrainingHistory* history) {
  cfg.validate();
  if (split.train.empty()) throw Error("phase " + std::string(phase) + ": empty training set");
  if (split.validation.empty()) throw Error("phase " + std::string(phase) + ": empty validation set");

  ClassifierModel current = model;
  AdamState adam = AdamState::for_model(current);
  adam.lr = cfg.lr;
  adam.beta1 = cfg.beta1;
  std::mt19937_64 rng(cfg.seed);
  EarlyStopping stopper(cfg.patience);
  FitResult result{current, 0, 0.0, 0};

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainingExample> batch;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(split.train[order[k]]);
      const auto lg = loss_and_gradients(current, batch, cfg.dropout, rng());
      adam_step(current, lg.gradients, adam);
      loss_sum += lg.loss;
      ++batches;
    }
    const double metric = evaluate_macro_f1(current, split.validation);
    if (history) history->epochs.push_back({std::string(phase), epoch, loss_sum / static_cast<double>(batches), metric});
    if (stopper.observe(metric)) result.model = current;
    result.epochs_run = epoch;
    if (stopper.should_stop()) break;
  }
  result.best_epoch = stopper.best_epoch();
  result.best_metric = stopper.best_metric();
  if (history) history->best.push_back({std::string(phase), result.best_epoch, result.best_metric});
  return result;
}

void CurriculumConfig::validate(LearningMode mode) const {
  train.validate();
  if (phase1.empty()) throw ConfigError("curriculum needs at least one monolingual split");
  if (mode == LearningMode::supervised && !phase2) {
    throw ConfigError("supervised mode needs code-mixed phase-2 data");
  }
  if (mode != LearningMode::supervised && phase2) {
    throw ConfigError("code-mixed phase-2 data supplied for " + std::string(mode_name(mode)) + " mode");
  }
  if (curriculum == CurriculumKind::mixed && mode != LearningMode::supervised) {
    throw ConfigError("the mixed curriculum requires supervised mode");
  }
}

CurriculumResult run_curriculum(const ClassifierModel& model, const CurriculumConfig& cfg, LearningMode mode) {
  cfg.validate(mode);
  EncodedSplit mono;
  for (const auto& s : cfg.phase1) {
    mono.train.insert(mono.train.end(), s.train.begin(), s.train.end());
    mono.validation.insert(mono.validation.end(), s.validation.begin(), s.validation.end());
  }

  CurriculumResult out{model, {}, {}};
  if (cfg.curriculum == CurriculumKind::mixed) {
    EncodedSplit all = mono;
    all.train.insert(all.train.end(), cfg.phase2->train.begin(), cfg.phase2->train.end());
    all.validation = cfg.phase2->validation;
    out.phase_start.push_back(model);
    out.model = fit_phase(model, all, cfg.train, "mixed", &out.history).model;
    return out;
  }

  out.phase_start.push_back(model);
  auto p1 = fit_phase(model, mono, cfg.train, "monolingual", &out.history);
  out.model = std::move(p1.model);
  if (mode == LearningMode::supervised) {
    TrainConfig c2 = cfg.train;
    c2.seed = cfg.train.seed + 1;
    out.phase_start.push_back(out.model);
    out.model = fit_phase(out.model, *cfg.phase2, c2, "code-mixed", &out.history).model;
  }
  return out;
}

TokenVectorizer::TokenVectorizer(const EmbeddingSpace& space)
    : words_(&space), dim_(static_cast<int>(space.dim())) {
  if (space.empty()) throw Error("vectorizer needs a nonempty embedding space");
}

TokenVectorizer::TokenVectorizer(const SubwordEmbeddingSpace& space)
    : subword_(&space), dim_(static_cast<int>(space.dim())) {
  if (space.base.empty()) throw Error("vectorizer needs a nonempty embedding space");
}

Matrix TokenVectorizer::encode(std::span<const std::string> tokens) const {
  std::vector<Vector> rows;
  rows.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (subword_) {
      Vector v = oov_vector(*subword_, t);
      if (subword_->base.vocab().contains(t) || !v.isZero(0.0)) rows.push_back(std::move(v));
    } else if (auto i = words_->vocab().find(t)) {
      rows.push_back(words_->row(*i));
    }
  }
  if (rows.empty()) return Matrix::Zero(1, dim_);
  Matrix m(static_cast<Eigen::Index>(rows.size()), dim_);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

std::vector<TrainingExample> encode_examples(std::span<const LabeledExample> examples,
                                             const TokenVectorizer& vectorizer) {
  std::vector<TrainingExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back({vectorizer.encode(ex.tokens), ex.label});
  return out;
}

EncodedSplit encode_split(const DatasetSplit& split, const TokenVectorizer& vectorizer) {
  return {encode_examples(split.train, vectorizer), encode_examples(split.validation, vectorizer)};
}

std::vector<Label> predict(const ClassifierModel& model, std::span<const LabeledExample> examples,
                           const TokenVectorizer& vectorizer) {
  if (vectorizer.dim() != model.input_dim) {
    throw DimensionError("embedding dimension " + std::to_string(vectorizer.dim()) +
                         " does not match model input " + std::to_string(model.input_dim));
  }
  std::vector<Label> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(argmax_label(forward(model, vectorizer.encode(ex.tokens))));
  return out;
}

std::vector<TrainingExample> encode_sentence_vectors(std::span<const LabeledExample> examples,
                                                     const EmbeddingSpace& vectors) {
  std::vector<TrainingExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const auto i = vectors.vocab().find(ex.id);
    if (!i) throw Error("no sentence vector for example id \"" + ex.id + "\"");
    out.push_back({vectors.row(*i).transpose(), ex.label});
  }
  return out;
}

FitResult train_sentence_classifier(const EmbeddingSpace& vectors, const DatasetSplit& labels,
                                    const TrainConfig& cfg, TrainingHistory* history, DropoutSpec dropout) {
  if (vectors.empty()) throw Error("empty sentence-vector table");
  EncodedSplit split{encode_sentence_vectors(labels.train, vectors),
                     encode_sentence_vectors(labels.validation, vectors)};
  const auto model = ClassifierModel::sentence_model(static_cast<int>(vectors.dim()), cfg.seed, dropout);
  return fit_phase(model, split, cfg, "sentence", history);
}

}  // namespace cmsent
