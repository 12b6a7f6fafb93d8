#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmsent/embed_store.hpp"

namespace cmsent {

/// d x d map applied to column vectors: mapped = matrix * x.
struct LinearMap {
  Eigen::MatrixXd matrix;
  bool orthogonal = false;

  std::size_t dim() const { return static_cast<std::size_t>(matrix.rows()); }
  static LinearMap identity(std::size_t d);
};

/// max |W^T W - I|.
double orthogonality_error(const Eigen::MatrixXd& w);

class BilingualDictionary {
 public:
  /// Returns false (and keeps the dictionary unchanged) for an exact duplicate.
  bool add(std::string source, std::string target);
  const std::vector<std::pair<std::string, std::string>>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;
};

/// "src<TAB>tgt" per line.
BilingualDictionary load_dictionary(const std::filesystem::path& path);
void save_dictionary(const BilingualDictionary& dict, const std::filesystem::path& path);

/// Maps persist as d x d embedding-format matrices with rows "r0".."r{d-1}".
void save_map(const LinearMap& map, const std::filesystem::path& path);
LinearMap load_map(const std::filesystem::path& path);

/// Frequency-order override: tokens listed in `order` move to the front in
/// list order; unlisted tokens follow in their original order. Unknown
/// tokens in the list are ignored.
EmbeddingSpace reorder_by_frequency(const EmbeddingSpace& space, std::span<const std::string> order);

/// Applies `map` to every row of `space`.
EmbeddingSpace map_space(const EmbeddingSpace& space, const LinearMap& map);

// ---------------------------------------------------------------------------
// Supervised alignment

/// Orthogonal Procrustes: W = U V^T from the SVD of Y X^T over the dictionary
/// pairs found in both vocabularies. `skipped` receives the number of pairs
/// that could not be resolved.
LinearMap procrustes(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                     const BilingualDictionary& dict, std::size_t* skipped = nullptr);

/// Procrustes on explicit column-paired d x n matrices.
Eigen::MatrixXd procrustes_solve(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// ---------------------------------------------------------------------------
// CSLS retrieval

inline constexpr int kCslsNeighbors = 10;

/// 2 cos(x, y) - r_T(x) - r_S(y).
double csls_score(const Vector& x_mapped, const Vector& y, double src_neighbors_mean,
                  double tgt_neighbors_mean);

/// For each query row, the mean cosine to its k nearest key rows. Rows are
/// assumed unit-length, so dot products are cosines.
Vector neighborhood_means(const RowMatrix& queries, const RowMatrix& keys, int k);

/// Mutual CSLS nearest-neighbour pairs among the first `top_n` words of each
/// space (file order is frequency order). `top_n` is clamped to the smaller
/// vocabulary, with a warning.
BilingualDictionary induce_dictionary(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                                      const LinearMap& map, std::size_t top_n,
                                      int k = kCslsNeighbors);

/// Unsupervised model-selection score: mean cosine between each of the first
/// `words` mapped source words and its CSLS nearest target word.
double validation_criterion(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                            const LinearMap& map, std::size_t words = 10000,
                            int k = kCslsNeighbors);

struct RefineConfig {
  std::size_t top_n = 10000;
  int k = kCslsNeighbors;
  std::size_t validation_words = 10000;
};

/// Alternates induce_dictionary and procrustes; returns the iterate with the
/// best validation criterion.
LinearMap refine(const EmbeddingSpace& src, const EmbeddingSpace& tgt, const LinearMap& w0,
                 int iterations, const RefineConfig& cfg = {});

// ---------------------------------------------------------------------------
// Unsupervised (adversarial) alignment

struct AdversarialConfig {
  int discriminator_hidden = 2048;
  int discriminator_layers = 2;
  double discriminator_input_dropout = 0.1;
  double smoothing = 0.2;
  double ortho_beta = 0.01;
  int steps = 5000;
  int discriminator_steps = 5;
  int batch = 32;
  double lr = 0.1;      // discriminator SGD
  double map_lr = 0.1;  // mapping SGD
  std::size_t vocab_top = 50000;
  std::size_t validation_words = 10000;
  int eval_every = 250;
  /// Independent runs from the identity with derived seeds; the best
  /// snapshot over all runs is returned.
  int restarts = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct AdversarialTrace {
  std::vector<std::pair<int, double>> criterion;  // (step, validation criterion)
  double max_orthogonality_error = 0.0;
  int best_step = 0;  // counted across restarts
  int best_restart = 0;
};

/// Two-player training of a mapping against an MLP discriminator; returns the
/// snapshot with the best validation criterion. Inputs must be unit-normalized.
LinearMap adversarial_align(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                            const AdversarialConfig& cfg, AdversarialTrace* trace = nullptr);

/// One orthogonalization update: W <- (1 + beta) W - beta (W W^T) W.
void orthogonalize_step(Eigen::MatrixXd& w, double beta);

// ---------------------------------------------------------------------------

/// Union of vocabularies: tokens of `a` in order, then tokens only in `b`.
/// Shared tokens get the elementwise mean.
EmbeddingSpace merge_spaces(const EmbeddingSpace& a, const EmbeddingSpace& b);

}  // namespace cmsent
