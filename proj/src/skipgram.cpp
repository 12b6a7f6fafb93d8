#include "cmsent/skipgram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "cmsent/error.hpp"
#include "text_util.hpp"

namespace cmsent {

Corpus read_corpus(std::span<const std::filesystem::path> paths) {
  Corpus corpus;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
      Sentence s;
      for (auto tok : detail::split_whitespace(line)) s.emplace_back(tok);
      if (!s.empty()) corpus.push_back(std::move(s));
    }
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus: " + path.string());
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out << ' ';
      out << s[i];
    }
    out << '\n';
  }
}

void SkipgramConfig::validate() const {
  if (dim < 1 || window < 1 || negatives < 1 || epochs < 1 || min_count < 1) {
    throw ConfigError("skip-gram dim, window, negatives, epochs and min_count must be positive");
  }
  if (!(initial_lr > 0.0) || !(subsample_t > 0.0)) {
    throw ConfigError("skip-gram initial_lr and subsample_t must be positive");
  }
}

namespace {
constexpr double kNegativeTableSize = 1e6;

double log_sigmoid_loss(double score, bool positive) {
  // -log(sigmoid(s)) for positives, -log(1 - sigmoid(s)) for negatives.
  const double z = positive ? score : -score;
  return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

SkipgramTrainer::SkipgramTrainer(const Corpus& corpus, SkipgramConfig cfg, NGramConfig ngrams)
    : cfg_(cfg), ngrams_(ngrams), rng_(cfg.seed) {
  cfg_.validate();
  ngrams_.validate();
  build_vocab(corpus);
  build_negative_table();

  const auto nwords = static_cast<Eigen::Index>(vocab_.size());
  const auto dim = static_cast<Eigen::Index>(cfg_.dim);
  input_ = RowMatrix::Zero(nwords + static_cast<Eigen::Index>(ngrams_.buckets), dim);
  output_ = RowMatrix::Zero(nwords, dim);
  // Word rows start uniform in +-1/dim; n-gram buckets start at zero so
  // untouched buckets stay exactly zero.
  std::uniform_real_distribution<double> init(-1.0 / cfg_.dim, 1.0 / cfg_.dim);
  for (Eigen::Index i = 0; i < nwords; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) input_(i, j) = init(rng_);

  input_rows_.resize(vocab_.size());
  for (std::size_t w = 0; w < vocab_.size(); ++w) {
    auto& rows = input_rows_[w];
    rows.push_back(static_cast<std::uint32_t>(w));
    for (auto b : ngram_buckets(vocab_.token(w), ngrams_)) {
      rows.push_back(static_cast<std::uint32_t>(vocab_.size()) + b);
    }
  }
}

void SkipgramTrainer::build_vocab(const Corpus& corpus) {
  std::unordered_map<std::string, std::int64_t> counts;
  std::vector<std::string> first_seen;
  for (const auto& s : corpus) {
    for (const auto& t : s) {
      auto [it, inserted] = counts.try_emplace(t, 0);
      if (inserted) first_seen.push_back(t);
      ++it->second;
    }
  }
  std::vector<std::size_t> order(first_seen.size());
  std::iota(order.begin(), order.end(), 0);
  // Frequency-descending; first occurrence breaks ties.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return counts[first_seen[a]] > counts[first_seen[b]];
  });
  for (auto i : order) {
    const auto c = counts[first_seen[i]];
    if (c >= cfg_.min_count) {
      vocab_.add(first_seen[i]);
      counts_.push_back(c);
    }
  }
  if (vocab_.empty()) {
    throw Error("skip-gram: no word reaches min_count=" + std::to_string(cfg_.min_count));
  }
  for (const auto& s : corpus) {
    std::vector<std::uint32_t> ids;
    for (const auto& t : s) {
      if (auto w = vocab_.find(t)) ids.push_back(static_cast<std::uint32_t>(*w));
    }
    total_tokens_ += static_cast<std::int64_t>(ids.size());
    if (!ids.empty()) sentences_.push_back(std::move(ids));
  }
  keep_prob_.resize(vocab_.size());
  for (std::size_t w = 0; w < vocab_.size(); ++w) {
    const double f = static_cast<double>(counts_[w]) / static_cast<double>(total_tokens_);
    keep_prob_[w] = std::sqrt(cfg_.subsample_t / f) + cfg_.subsample_t / f;
  }
}

void SkipgramTrainer::build_negative_table() {
  double z = 0.0;
  for (auto c : counts_) z += std::pow(static_cast<double>(c), 0.75);
  for (std::size_t w = 0; w < counts_.size(); ++w) {
    const double share = std::pow(static_cast<double>(counts_[w]), 0.75) / z;
    const auto copies = static_cast<std::size_t>(std::ceil(share * kNegativeTableSize));
    negative_table_.insert(negative_table_.end(), std::max<std::size_t>(1, copies),
                           static_cast<std::uint32_t>(w));
  }
  std::shuffle(negative_table_.begin(), negative_table_.end(), rng_);
}

std::size_t SkipgramTrainer::sample_negative() {
  std::uniform_int_distribution<std::size_t> pick(0, negative_table_.size() - 1);
  return negative_table_[pick(rng_)];
}

EpochStats SkipgramTrainer::run_epoch() {
  const auto dim = static_cast<Eigen::Index>(cfg_.dim);
  const double total_planned = static_cast<double>(total_tokens_) * cfg_.epochs;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> window_size(1, cfg_.window);
  Vector hidden(dim);
  Vector grad(dim);
  double loss = 0.0;
  std::int64_t pairs = 0;

  for (const auto& sentence : sentences_) {
    std::vector<std::uint32_t> kept;
    kept.reserve(sentence.size());
    for (auto w : sentence) {
      if (unit(rng_) < keep_prob_[w]) kept.push_back(w);
    }
    const double progress = std::min(1.0, static_cast<double>(processed_tokens_) / total_planned);
    const double lr = cfg_.initial_lr * (1.0 - progress);
    processed_tokens_ += static_cast<std::int64_t>(sentence.size());

    for (std::size_t pos = 0; pos < kept.size(); ++pos) {
      const auto& rows = input_rows_[kept[pos]];
      hidden.setZero();
      for (auto r : rows) hidden += input_.row(r).transpose();
      const double scale = ngrams_.oov_reduce == OovReduce::mean ? 1.0 / rows.size() : 1.0;
      hidden *= scale;

      const int b = window_size(rng_);
      const std::size_t lo = pos >= static_cast<std::size_t>(b) ? pos - b : 0;
      const std::size_t hi = std::min(kept.size() - 1, pos + static_cast<std::size_t>(b));
      for (std::size_t c = lo; c <= hi; ++c) {
        if (c == pos) continue;
        grad.setZero();
        double pair_loss = 0.0;
        for (int n = 0; n <= cfg_.negatives; ++n) {
          std::size_t target = kept[c];
          const bool positive = n == 0;
          if (!positive) {
            do {
              target = sample_negative();
            } while (target == kept[c] && vocab_.size() > 1);
          }
          auto out_row = output_.row(static_cast<Eigen::Index>(target));
          const double score = out_row.dot(hidden.transpose());
          pair_loss += log_sigmoid_loss(score, positive);
          const double alpha = lr * ((positive ? 1.0 : 0.0) - sigmoid(score));
          grad += alpha * out_row.transpose();
          out_row += alpha * hidden.transpose();
        }
        for (auto r : rows) input_.row(r) += grad.transpose();
        loss += pair_loss;
        ++pairs;
      }
    }
  }
  ++epochs_done_;
  EpochStats stats{epochs_done_, pairs > 0 ? loss / static_cast<double>(pairs) : 0.0, pairs};
  history_.push_back(stats);
  return stats;
}

void SkipgramTrainer::train() {
  while (epochs_done_ < cfg_.epochs) run_epoch();
}

Vector SkipgramTrainer::input_vector(std::size_t word) const {
  const auto& rows = input_rows_.at(word);
  Vector v = Vector::Zero(cfg_.dim);
  // Same summation order as oov_vector: n-grams first, then the word row.
  for (std::size_t k = 1; k < rows.size(); ++k) v += input_.row(rows[k]).transpose();
  v += input_.row(rows[0]).transpose();
  if (ngrams_.oov_reduce == OovReduce::mean) v /= static_cast<double>(rows.size());
  return v;
}

SubwordEmbeddingSpace SkipgramTrainer::result() const {
  const auto nwords = static_cast<Eigen::Index>(vocab_.size());
  SubwordEmbeddingSpace out;
  out.base = EmbeddingSpace(vocab_, input_.topRows(nwords), "skipgram");
  out.ngram_matrix = input_.bottomRows(static_cast<Eigen::Index>(ngrams_.buckets));
  out.ngram_config = ngrams_;
  return out;
}

SubwordEmbeddingSpace train_skipgram(const Corpus& corpus, const SkipgramConfig& cfg,
                                     const NGramConfig& ngrams, std::vector<EpochStats>* history) {
  SkipgramTrainer trainer(corpus, cfg, ngrams);
  trainer.train();
  if (history) *history = trainer.history();
  return trainer.result();
}

}  // namespace cmsent
