#include "cmsent/embed_store.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cmsent/error.hpp"
#include "cmsent/log.hpp"
#include "text_util.hpp"

namespace cmsent {

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  tokens_.reserve(tokens.size());
  for (auto& t : tokens) {
    if (!add(std::move(t))) {
      throw FormatError("duplicate token in vocabulary: " + tokens_.back());
    }
  }
}

bool Vocabulary::add(std::string token) {
  if (index_.find(token) != index_.end()) {
    return false;
  }
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  return true;
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(token);
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

EmbeddingSpace::EmbeddingSpace(Vocabulary vocab, RowMatrix matrix, std::string name)
    : vocab_(std::move(vocab)), matrix_(std::move(matrix)), name_(std::move(name)) {
  if (static_cast<std::size_t>(matrix_.rows()) != vocab_.size()) {
    throw DimensionError("embedding matrix has " + std::to_string(matrix_.rows()) +
                         " rows for a vocabulary of " + std::to_string(vocab_.size()));
  }
  if (!matrix_.allFinite()) {
    throw DimensionError("embedding matrix contains non-finite values");
  }
}

EmbeddingSpace load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> limit, LoadReport* report) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open embedding file: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(path.string() + ": missing header line");
  }
  auto header = detail::split_whitespace(line);
  std::size_t n = 0;
  std::size_t d = 0;
  if (header.size() != 2 || !detail::parse_size(header[0], n) || !detail::parse_size(header[1], d) ||
      d == 0) {
    throw FormatError(path.string() + ": malformed header \"" + line + "\"");
  }
  if (n == 0) {
    throw FormatError(path.string() + ": empty vocabulary");
  }
  const std::size_t keep = limit ? std::min(n, *limit) : n;

  Vocabulary vocab;
  std::vector<double> values;
  values.reserve(keep * d);
  LoadReport local;
  std::size_t line_no = 1;
  while (vocab.size() < keep && std::getline(in, line)) {
    ++line_no;
    ++local.rows_read;
    auto fields = detail::split_whitespace(line);
    if (fields.size() != d + 1) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(d + 1) + " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (!detail::parse_double(fields[j + 1], row[j]) || !std::isfinite(row[j])) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": non-finite or unparsable value \"" + std::string(fields[j + 1]) + "\"");
      }
    }
    if (!vocab.add(std::string(fields[0]))) {
      ++local.duplicates;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
  }
  if (vocab.size() < keep && local.rows_read < n) {
    throw FormatError(path.string() + ": header announces " + std::to_string(n) + " rows, found " +
                      std::to_string(local.rows_read));
  }
  if (vocab.empty()) {
    throw FormatError(path.string() + ": empty vocabulary");
  }
  if (local.duplicates > 0) {
    warn(path.string() + ": skipped " + std::to_string(local.duplicates) + " duplicate token rows");
  }
  RowMatrix matrix = Eigen::Map<RowMatrix>(values.data(), static_cast<Eigen::Index>(vocab.size()),
                                           static_cast<Eigen::Index>(d));
  if (report) {
    *report = local;
  }
  return EmbeddingSpace(std::move(vocab), std::move(matrix), path.stem().string());
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void save_embeddings(const EmbeddingSpace& space, const std::filesystem::path& path) {
  if (space.empty()) {
    throw Error("refusing to write an embedding space with an empty vocabulary");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write embedding file: " + path.string());
  }
  const auto& m = space.matrix();
  out << space.size() << ' ' << space.dim() << '\n';
  for (std::size_t i = 0; i < space.size(); ++i) {
    out << space.vocab().token(i);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << ' ' << format_double(m(static_cast<Eigen::Index>(i), j));
    }
    out << '\n';
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

std::optional<Vector> lookup(const EmbeddingSpace& space, std::string_view token) {
  auto idx = space.vocab().find(token);
  if (!idx) {
    return std::nullopt;
  }
  return space.row(*idx);
}

EmbeddingSpace l2_normalize(const EmbeddingSpace& space) {
  RowMatrix m = space.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    // Rows already unit length (to rounding) are left bit-identical, which
    // makes the operation idempotent.
    if (norm > 0.0 && std::abs(norm - 1.0) > 1e-13) {
      m.row(i) /= norm;
    }
  }
  return EmbeddingSpace(space.vocab(), std::move(m), space.name());
}

double max_norm_deviation(const EmbeddingSpace& space) {
  double worst = 0.0;
  const auto& m = space.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (norm > 0.0) {
      worst = std::max(worst, std::abs(norm - 1.0));
    }
  }
  return worst;
}

}  // namespace cmsent
