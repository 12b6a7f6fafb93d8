#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace cmsent {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

/// Ordered set of unique tokens with a token -> position index.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Throws FormatError on a duplicate token.
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Appends `token` unless already present; returns false for a duplicate.
  bool add(std::string token);

  std::optional<std::size_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }

  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> index_;
};

/// A vocabulary together with one finite real row per token.
class EmbeddingSpace {
 public:
  EmbeddingSpace() = default;
  /// Throws DimensionError if row count differs from vocabulary size or a
  /// value is non-finite.
  EmbeddingSpace(Vocabulary vocab, RowMatrix matrix, std::string name = {});

  const Vocabulary& vocab() const { return vocab_; }
  const RowMatrix& matrix() const { return matrix_; }
  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  std::size_t size() const { return vocab_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.cols()); }
  bool empty() const { return vocab_.empty(); }

  Vector row(std::size_t i) const { return matrix_.row(static_cast<Eigen::Index>(i)).transpose(); }

 private:
  Vocabulary vocab_;
  RowMatrix matrix_;
  std::string name_;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t duplicates = 0;
};

/// Reads the "N D" header text format. `limit` caps the number of rows kept.
EmbeddingSpace load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> limit = std::nullopt,
                               LoadReport* report = nullptr);

/// Writes the text format with shortest round-trip decimal values.
void save_embeddings(const EmbeddingSpace& space, const std::filesystem::path& path);

std::optional<Vector> lookup(const EmbeddingSpace& space, std::string_view token);

/// Scales each nonzero row to unit Euclidean norm; zero rows are kept.
EmbeddingSpace l2_normalize(const EmbeddingSpace& space);

/// Max deviation of row norms from 1 over nonzero rows.
double max_norm_deviation(const EmbeddingSpace& space);

// Shared by every text writer so persisted numbers are byte-stable.
std::string format_double(double value);

}  // namespace cmsent
