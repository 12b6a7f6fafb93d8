#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmsent/align.hpp"
#include "cmsent/data.hpp"
#include "cmsent/metrics.hpp"
#include "cmsent/neural.hpp"
#include "cmsent/skipgram.hpp"
#include "cmsent/subword.hpp"
#include "cmsent/synthbench.hpp"
#include "cmsent/trainer.hpp"

namespace cmsent {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Output handling

/// CMSENT_OUTPUT_DIR, when set and nonempty, replaces `requested`.
fs::path resolve_output_dir(const fs::path& requested);

/// CMSENT_THREADS, when set, replaces `requested`; must be a positive integer.
int resolve_threads(int requested);

/// Creates `dir`. Throws IoError if it already holds files, unless `overwrite`.
void prepare_output_dir(const fs::path& dir, bool overwrite);

/// FNV-1a 64-bit digest of the file bytes, as 16 hex digits.
std::string file_digest(const fs::path& path);

/// Writes dir/manifest.json: command, settings, and every input with its
/// digest. Contains no timestamps.
void write_manifest(const fs::path& dir, const std::string& command, const json& settings,
                    std::span<const fs::path> inputs, std::span<const fs::path> outputs);

// ---------------------------------------------------------------------------
// Commands

struct EmbedTrainOptions {
  std::vector<fs::path> corpora;
  SkipgramConfig skipgram;
  NGramConfig ngrams;
};

struct EmbedTrainResult {
  fs::path prefix;  // <dir>/embedding
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
};

/// Trains on the concatenation of the corpora and saves <dir>/embedding.*.
EmbedTrainResult cmd_embed_train(const EmbedTrainOptions& options, const fs::path& out_dir, bool overwrite = false);

enum class AlignMethod { procrustes, adversarial };
AlignMethod parse_align_method(std::string_view s);
std::string_view align_method_name(AlignMethod m);

struct AlignOptions {
  fs::path source;
  fs::path target;
  AlignMethod method = AlignMethod::adversarial;
  std::optional<fs::path> dictionary;
  int refine_iters = 5;
  RefineConfig refine;
  AdversarialConfig adversarial;
};

struct AlignResult {
  LinearMap map;
  EmbeddingSpace merged;
};

/// Maps source onto target, optionally refines, merges; saves map.txt and
/// merged.vec in `out_dir`.
AlignResult cmd_align(const AlignOptions& options, const fs::path& out_dir, bool overwrite = false);

/// Saves merged.vec in `out_dir`.
EmbeddingSpace cmd_merge(const fs::path& a, const fs::path& b, const fs::path& out_dir, bool overwrite = false);

struct SynthOptions {
  std::size_t vocab_size = 400;
  std::size_t lexicon_size = 20;
  std::size_t corpus_sentences = 12000;
  std::size_t train_sentences = 4000;
  std::size_t codemixed_train_sentences = 500;
  std::size_t test_sentences = 1000;
  int min_length = 6;
  int max_length = 14;
  double switch_prob = 0.5;
  double intent_affinity = 0.5;
  CipherOptions cipher{"x", 0.65};
  std::uint64_t seed = 1;

  void validate() const;
  static SynthOptions from_json(const nlohmann::json& j);
  json to_json() const;
};

/// Generated benchmark, all derived from one seed.
struct SynthBundle {
  SynthConfig config;
  CipherLexicon lexicon;
  std::vector<LabeledExample> corpus_source;  // unlabeled use
  std::vector<LabeledExample> corpus_cipher;  // fully ciphered copy
  std::vector<LabeledExample> train;          // source language, origin en
  std::vector<LabeledExample> codemixed_train;
  std::vector<LabeledExample> test;           // code-mixed
};

SynthBundle generate_synth(const SynthOptions& options);

/// Writes corpus.source.txt, corpus.cipher.txt, train.en.tsv, train.cm.tsv,
/// test.cm.tsv, dictionary.tsv and lexicon.tsv.
SynthBundle cmd_synth(const SynthOptions& options, const fs::path& out_dir, bool overwrite = false);

// ---------------------------------------------------------------------------
// Pipeline configuration

enum class EmbeddingKind { mapped, pseudo_multilingual, sentence };

struct DatasetInput {
  fs::path path;
  Origin origin = Origin::unknown;
};

struct PipelineConfig {
  struct Embeddings {
    EmbeddingKind kind = EmbeddingKind::pseudo_multilingual;
    // pseudo_multilingual: a saved subword space, or corpora to train one.
    std::optional<fs::path> space;
    std::vector<fs::path> corpora;
    SkipgramConfig skipgram;
    NGramConfig ngrams;
    // mapped: a saved merged space, or source/target spaces to align.
    std::optional<fs::path> merged;
    std::optional<fs::path> source;
    std::optional<fs::path> target;
    AlignMethod method = AlignMethod::adversarial;
    std::optional<fs::path> dictionary;
    int refine_iters = 5;
    RefineConfig refine;
    AdversarialConfig adversarial;
    // sentence: vectors keyed by example id.
    std::optional<fs::path> vectors;
  } embeddings;

  struct Data {
    std::vector<DatasetInput> monolingual;
    std::optional<fs::path> codemixed_train;
    std::optional<fs::path> test;
    double val_fraction = 0.1;
  } data;

  struct Model {
    EncoderKind encoder = EncoderKind::bilstm;
    int units = 50;
    DropoutSpec dropout;
  } model;

  struct Curriculum {
    LearningMode mode = LearningMode::unsupervised;
    CurriculumKind kind = CurriculumKind::staged;
    TrainConfig train;
  } curriculum;

  fs::path output_dir;
  int threads = 1;

  /// Parses and validates; relative paths resolve against `base_dir`.
  /// Errors name the offending field path.
  static PipelineConfig from_json(const nlohmann::json& j, const fs::path& base_dir);
  static PipelineConfig load(const fs::path& path);

  /// Field consistency, mode rules and existence of referenced files.
  void validate() const;
  json to_json() const;
};

struct PipelineResult {
  ClassifierModel model;
  TrainingHistory history;
  std::optional<ConfusionMatrix> confusion;
  std::optional<F1Report> report;
  fs::path output_dir;
};

/// Embedding stage, curriculum, checkpoint and history. With `evaluate`,
/// also scores data.test and writes metrics.json / metrics.txt.
PipelineResult cmd_train(const PipelineConfig& cfg, bool evaluate, bool overwrite = false);

/// Loads an embedding artifact: a subword space prefix (with .meta.json) or
/// a text .vec file.
struct LoadedEmbedding {
  std::optional<EmbeddingSpace> words;
  std::optional<SubwordEmbeddingSpace> subword;
  TokenVectorizer vectorizer() const;
  std::size_t dim() const;
};
LoadedEmbedding load_embedding_artifact(const fs::path& path);

struct EvalResult {
  ConfusionMatrix confusion;
  F1Report report;
};

/// Scores a checkpoint on a dataset; writes metrics.json / metrics.txt.
EvalResult cmd_eval(const fs::path& model, const fs::path& dataset, Origin origin, const fs::path& embedding,
                    const fs::path& out_dir, bool overwrite = false);

}  // namespace cmsent
