#include "cmsent/align.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "cmsent/error.hpp"
#include "cmsent/log.hpp"
#include "text_util.hpp"

namespace cmsent {

LinearMap LinearMap::identity(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return LinearMap{Eigen::MatrixXd::Identity(n, n), true};
}

double orthogonality_error(const Eigen::MatrixXd& w) {
  const Eigen::MatrixXd g = w.transpose() * w - Eigen::MatrixXd::Identity(w.cols(), w.cols());
  return g.cwiseAbs().maxCoeff();
}

bool BilingualDictionary::add(std::string source, std::string target) {
  auto p = std::make_pair(std::move(source), std::move(target));
  if (std::find(pairs_.begin(), pairs_.end(), p) != pairs_.end()) return false;
  pairs_.push_back(std::move(p));
  return true;
}

BilingualDictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dictionary: " + path.string());
  BilingualDictionary dict;
  std::string line;
  std::size_t row = 0;
  std::size_t duplicates = 0;
  // Dictionaries can be large; de-duplicate through a set instead of add()'s scan.
  std::set<std::pair<std::string, std::string>> seen;
  while (std::getline(in, line)) {
    ++row;
    auto fields = detail::split_char(detail::strip_cr(line), '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw FormatError(path.string() + ": row " + std::to_string(row) +
                        ": expected \"source<TAB>target\"");
    }
    if (!seen.emplace(fields[0], fields[1]).second) {
      ++duplicates;
      continue;
    }
    dict.add(std::string(fields[0]), std::string(fields[1]));
  }
  if (duplicates > 0) {
    warn(path.string() + ": skipped " + std::to_string(duplicates) + " duplicate dictionary pairs");
  }
  return dict;
}

void save_dictionary(const BilingualDictionary& dict, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dictionary: " + path.string());
  for (const auto& [s, t] : dict.pairs()) out << s << '\t' << t << '\n';
}

void save_map(const LinearMap& map, const std::filesystem::path& path) {
  Vocabulary labels;
  for (std::size_t i = 0; i < map.dim(); ++i) labels.add("r" + std::to_string(i));
  RowMatrix m = map.matrix;
  save_embeddings(EmbeddingSpace(std::move(labels), std::move(m), "map"), path);
}

LinearMap load_map(const std::filesystem::path& path) {
  auto space = load_embeddings(path);
  if (space.size() != space.dim()) {
    throw FormatError(path.string() + ": map must be square, got " + std::to_string(space.size()) +
                      "x" + std::to_string(space.dim()));
  }
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (space.vocab().token(i) != "r" + std::to_string(i)) {
      throw FormatError(path.string() + ": unexpected row label " + space.vocab().token(i));
    }
  }
  LinearMap map{Eigen::MatrixXd(space.matrix()), false};
  map.orthogonal = orthogonality_error(map.matrix) <= 1e-8;
  return map;
}

EmbeddingSpace reorder_by_frequency(const EmbeddingSpace& space, std::span<const std::string> order) {
  std::vector<std::size_t> rows;
  std::vector<bool> taken(space.size(), false);
  for (const auto& t : order) {
    if (auto i = space.vocab().find(t); i && !taken[*i]) {
      taken[*i] = true;
      rows.push_back(*i);
    }
  }
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (!taken[i]) rows.push_back(i);
  }
  std::vector<std::string> tokens;
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(space.dim()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    tokens.push_back(space.vocab().token(rows[k]));
    m.row(static_cast<Eigen::Index>(k)) = space.matrix().row(static_cast<Eigen::Index>(rows[k]));
  }
  return EmbeddingSpace(Vocabulary(std::move(tokens)), std::move(m), space.name());
}

EmbeddingSpace map_space(const EmbeddingSpace& space, const LinearMap& map) {
  if (map.dim() != space.dim()) {
    throw DimensionError("map of dimension " + std::to_string(map.dim()) +
                         " applied to a space of dimension " + std::to_string(space.dim()));
  }
  RowMatrix mapped = space.matrix() * map.matrix.transpose();
  return EmbeddingSpace(space.vocab(), std::move(mapped), space.name());
}

Eigen::MatrixXd procrustes_solve(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd m = y * x.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

LinearMap procrustes(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                     const BilingualDictionary& dict, std::size_t* skipped) {
  if (src.dim() != tgt.dim()) {
    throw DimensionError("procrustes: source dimension " + std::to_string(src.dim()) +
                         " differs from target dimension " + std::to_string(tgt.dim()));
  }
  std::vector<std::pair<std::size_t, std::size_t>> usable;
  for (const auto& [s, t] : dict.pairs()) {
    auto si = src.vocab().find(s);
    auto ti = tgt.vocab().find(t);
    if (si && ti) usable.emplace_back(*si, *ti);
  }
  if (skipped) *skipped = dict.size() - usable.size();
  if (usable.size() < 2) {
    throw Error("procrustes: need at least 2 dictionary pairs present in both vocabularies, found " +
                std::to_string(usable.size()));
  }
  const auto d = static_cast<Eigen::Index>(src.dim());
  const auto n = static_cast<Eigen::Index>(usable.size());
  Eigen::MatrixXd x(d, n);
  Eigen::MatrixXd y(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.col(i) = src.matrix().row(static_cast<Eigen::Index>(usable[i].first)).transpose();
    y.col(i) = tgt.matrix().row(static_cast<Eigen::Index>(usable[i].second)).transpose();
  }
  return LinearMap{procrustes_solve(x, y), true};
}

double csls_score(const Vector& x_mapped, const Vector& y, double src_neighbors_mean,
                  double tgt_neighbors_mean) {
  const double denom = x_mapped.norm() * y.norm();
  const double cos = denom > 0.0 ? x_mapped.dot(y) / denom : 0.0;
  return 2.0 * cos - src_neighbors_mean - tgt_neighbors_mean;
}

namespace {

constexpr Eigen::Index kBlock = 1024;

RowMatrix normalized_rows(const RowMatrix& m) {
  RowMatrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

// Mapped (unit-length) copies of the first n source rows and first m target rows.
struct Candidates {
  RowMatrix mapped_src;
  RowMatrix tgt;
};

Candidates candidates(const EmbeddingSpace& src, const EmbeddingSpace& tgt, const LinearMap& map,
                      std::size_t n_src, std::size_t n_tgt) {
  if (map.dim() != src.dim() || src.dim() != tgt.dim()) {
    throw DimensionError("dimension mismatch between map and spaces");
  }
  Candidates c;
  c.mapped_src = normalized_rows(src.matrix().topRows(static_cast<Eigen::Index>(n_src)) *
                                 map.matrix.transpose());
  c.tgt = normalized_rows(tgt.matrix().topRows(static_cast<Eigen::Index>(n_tgt)));
  return c;
}

// For every query row, argmax over keys of 2 * cos - penalty[key]; lowest index on ties.
std::vector<std::size_t> csls_argmax(const RowMatrix& queries, const RowMatrix& keys,
                                     const Vector& key_penalty) {
  std::vector<std::size_t> best(static_cast<std::size_t>(queries.rows()), 0);
  for (Eigen::Index start = 0; start < queries.rows(); start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, queries.rows() - start);
    const Eigen::MatrixXd sims = queries.middleRows(start, rows) * keys.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      Eigen::Index arg = 0;
      double top = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < sims.cols(); ++j) {
        const double s = 2.0 * sims(i, j) - key_penalty(j);
        if (s > top) {
          top = s;
          arg = j;
        }
      }
      best[static_cast<std::size_t>(start + i)] = static_cast<std::size_t>(arg);
    }
  }
  return best;
}

}  // namespace

Vector neighborhood_means(const RowMatrix& queries, const RowMatrix& keys, int k) {
  Vector out(queries.rows());
  const auto kk = static_cast<std::size_t>(std::clamp<Eigen::Index>(k, 1, keys.rows()));
  std::vector<double> row;
  for (Eigen::Index start = 0; start < queries.rows(); start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, queries.rows() - start);
    const Eigen::MatrixXd sims = queries.middleRows(start, rows) * keys.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      row.resize(static_cast<std::size_t>(sims.cols()));
      for (Eigen::Index j = 0; j < sims.cols(); ++j) row[static_cast<std::size_t>(j)] = sims(i, j);
      std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(kk), row.end(),
                        std::greater<>());
      double sum = 0.0;
      for (std::size_t j = 0; j < kk; ++j) sum += row[j];
      out(start + i) = sum / static_cast<double>(kk);
    }
  }
  return out;
}

BilingualDictionary induce_dictionary(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                                      const LinearMap& map, std::size_t top_n, int k) {
  const std::size_t limit = std::min(src.size(), tgt.size());
  if (top_n > limit) {
    warn("induce_dictionary: top_n=" + std::to_string(top_n) + " exceeds vocabulary; clamped to " +
         std::to_string(limit));
    top_n = limit;
  }
  auto c = candidates(src, tgt, map, top_n, top_n);
  const Vector r_tgt = neighborhood_means(c.mapped_src, c.tgt, k);  // r_T(Wx)
  const Vector r_src = neighborhood_means(c.tgt, c.mapped_src, k);  // r_S(y)
  const auto forward = csls_argmax(c.mapped_src, c.tgt, r_src);
  const auto backward = csls_argmax(c.tgt, c.mapped_src, r_tgt);
  BilingualDictionary dict;
  for (std::size_t s = 0; s < forward.size(); ++s) {
    if (backward[forward[s]] == s) {
      dict.add(src.vocab().token(s), tgt.vocab().token(forward[s]));
    }
  }
  return dict;
}

double validation_criterion(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                            const LinearMap& map, std::size_t words, int k) {
  const std::size_t n_src = std::min(words, src.size());
  const std::size_t n_tgt = std::min(words, tgt.size());
  auto c = candidates(src, tgt, map, n_src, n_tgt);
  const Vector r_src = neighborhood_means(c.tgt, c.mapped_src, k);
  const auto forward = csls_argmax(c.mapped_src, c.tgt, r_src);
  double sum = 0.0;
  for (std::size_t s = 0; s < forward.size(); ++s) {
    sum += c.mapped_src.row(static_cast<Eigen::Index>(s))
               .dot(c.tgt.row(static_cast<Eigen::Index>(forward[s])));
  }
  return sum / static_cast<double>(forward.size());
}

LinearMap refine(const EmbeddingSpace& src, const EmbeddingSpace& tgt, const LinearMap& w0,
                 int iterations, const RefineConfig& cfg) {
  if (iterations < 1) throw ConfigError("refine: iterations must be >= 1");
  LinearMap current = w0;
  LinearMap best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < iterations; ++it) {
    const auto dict = induce_dictionary(src, tgt, current,
                                        std::min({cfg.top_n, src.size(), tgt.size()}), cfg.k);
    if (dict.size() < 2) {
      throw Error("refine: induced dictionary has " + std::to_string(dict.size()) +
                  " pairs; at least 2 are required");
    }
    current = procrustes(src, tgt, dict);
    const double score = validation_criterion(src, tgt, current, cfg.validation_words, cfg.k);
    if (score > best_score) {
      best_score = score;
      best = current;
    }
  }
  return best;
}

EmbeddingSpace merge_spaces(const EmbeddingSpace& a, const EmbeddingSpace& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("merge_spaces: dimensions " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()) + " differ");
  }
  Vocabulary vocab = a.vocab();
  std::vector<std::size_t> b_only;
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (!a.vocab().contains(b.vocab().token(j))) b_only.push_back(j);
  }
  RowMatrix m(static_cast<Eigen::Index>(a.size() + b_only.size()), static_cast<Eigen::Index>(a.dim()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (auto j = b.vocab().find(a.vocab().token(i))) {
      m.row(ii) = 0.5 * (a.matrix().row(ii) + b.matrix().row(static_cast<Eigen::Index>(*j)));
    } else {
      m.row(ii) = a.matrix().row(ii);
    }
  }
  for (std::size_t k = 0; k < b_only.size(); ++k) {
    vocab.add(b.vocab().token(b_only[k]));
    m.row(static_cast<Eigen::Index>(a.size() + k)) = b.matrix().row(static_cast<Eigen::Index>(b_only[k]));
  }
  return EmbeddingSpace(std::move(vocab), std::move(m), "merged");
}

}  // namespace cmsent
