#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmsent/data.hpp"
#include "cmsent/embed_store.hpp"
#include "cmsent/neural.hpp"
#include "cmsent/subword.hpp"

namespace cmsent {

enum class LearningMode { unsupervised, partially_supervised, supervised };

std::string_view mode_name(LearningMode m);
/// Throws ConfigError for an unknown name.
LearningMode parse_mode(std::string_view s);

enum class CurriculumKind { staged, mixed };
std::string_view curriculum_name(CurriculumKind c);
CurriculumKind parse_curriculum(std::string_view s);

struct TrainConfig {
  int batch_size = 32;
  int patience = 10;
  int max_epochs = 50;
  double lr = 0.001;
  double beta1 = 0.9;
  std::uint64_t seed = 1;
  /// Apply dropout during training updates.
  bool dropout = true;

  void validate() const;
};

struct EpochRecord {
  std::string phase;
  int epoch = 0;
  double train_loss = 0.0;
  double validation_metric = 0.0;
};

struct PhaseBest {
  std::string phase;
  int epoch = 0;
  double metric = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  std::vector<PhaseBest> best;

  std::vector<std::string> phases() const;
  /// One JSON object per epoch record.
  std::string to_jsonl() const;
  void write_jsonl(const std::filesystem::path& path) const;
};

/// Patience-based early stopping on a metric to maximize. Only a strict
/// improvement resets the counter.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);
  /// Records the metric of the next epoch (numbered from 1); returns true if
  /// it is a new best.
  bool observe(double metric);
  bool should_stop() const { return stall_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_; }
  int epochs_seen() const { return seen_; }

 private:
  int patience_;
  int seen_ = 0;
  int stall_ = 0;
  int best_epoch_ = 0;
  double best_ = 0.0;
};

/// Model inputs of a dataset split, already vectorized.
struct EncodedSplit {
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> validation;
};

struct FitResult {
  ClassifierModel model;  // best validation checkpoint
  int best_epoch = 0;
  double best_metric = 0.0;
  int epochs_run = 0;
};

/// Macro F1 of the model on encoded examples (inference mode).
double evaluate_macro_f1(const ClassifierModel& model, std::span<const TrainingExample> examples);

FitResult fit_phase(const ClassifierModel& model, const EncodedSplit& split, const TrainConfig& cfg,
                    std::string_view phase, TrainingHistory* history = nullptr);

struct CurriculumConfig {
  /// Monolingual splits (e.g. EN and ES); concatenated for phase 1.
  std::vector<EncodedSplit> phase1;
  /// Code-mixed split; present iff the mode is supervised.
  std::optional<EncodedSplit> phase2;
  TrainConfig train;
  CurriculumKind curriculum = CurriculumKind::staged;

  void validate(LearningMode mode) const;
};

struct CurriculumResult {
  ClassifierModel model;
  TrainingHistory history;
  /// Parameters each phase started from.
  std::vector<ClassifierModel> phase_start;
};

CurriculumResult run_curriculum(const ClassifierModel& model, const CurriculumConfig& cfg, LearningMode mode);

/// Maps token sequences to model input rows. Tokens missing from the space
/// are composed from subword n-grams when available, else skipped; a
/// sentence with no usable token becomes a single zero row.
class TokenVectorizer {
 public:
  explicit TokenVectorizer(const EmbeddingSpace& space);
  explicit TokenVectorizer(const SubwordEmbeddingSpace& space);

  Matrix encode(std::span<const std::string> tokens) const;
  int dim() const { return dim_; }

 private:
  const EmbeddingSpace* words_ = nullptr;
  const SubwordEmbeddingSpace* subword_ = nullptr;
  int dim_ = 0;
};

std::vector<TrainingExample> encode_examples(std::span<const LabeledExample> examples,
                                             const TokenVectorizer& vectorizer);
EncodedSplit encode_split(const DatasetSplit& split, const TokenVectorizer& vectorizer);

std::vector<Label> predict(const ClassifierModel& model, std::span<const LabeledExample> examples,
                           const TokenVectorizer& vectorizer);
std::vector<Label> predict(const ClassifierModel& model, std::span<const TrainingExample> examples);

/// Sentence-vector rows for the examples; throws Error naming a missing id.
std::vector<TrainingExample> encode_sentence_vectors(std::span<const LabeledExample> examples,
                                                     const EmbeddingSpace& vectors);

/// Dense softmax head over per-example sentence vectors keyed by example id.
FitResult train_sentence_classifier(const EmbeddingSpace& vectors, const DatasetSplit& labels,
                                    const TrainConfig& cfg, TrainingHistory* history = nullptr,
                                    DropoutSpec dropout = {});

}  // namespace cmsent
