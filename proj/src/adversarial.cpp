#include <cmath>
#include <random>

#include "cmsent/align.hpp"
#include "cmsent/error.hpp"

namespace cmsent {

void AdversarialConfig::validate() const {
  if (!(smoothing >= 0.0 && smoothing < 0.5)) throw ConfigError("smoothing must lie in [0, 0.5)");
  if (!(ortho_beta > 0.0)) throw ConfigError("ortho_beta must be positive");
  if (discriminator_hidden < 1 || discriminator_layers < 1) {
    throw ConfigError("discriminator needs at least one hidden layer of positive width");
  }
  if (steps < 0 || discriminator_steps < 1 || batch < 1 || eval_every < 1 || restarts < 1) {
    throw ConfigError("discriminator_steps, batch, eval_every and restarts must be positive; steps nonnegative");
  }
  if (!(lr > 0.0) || !(map_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(discriminator_input_dropout >= 0.0 && discriminator_input_dropout < 1.0)) {
    throw ConfigError("discriminator_input_dropout must lie in [0, 1)");
  }
}

void orthogonalize_step(Eigen::MatrixXd& w, double beta) {
  w = (1.0 + beta) * w - beta * (w * w.transpose()) * w;
}

namespace {

constexpr double kLeakySlope = 0.2;

// MLP: [Linear, LeakyReLU] x layers, then Linear -> one logit per row.
class Discriminator {
 public:
  Discriminator(int input_dim, int hidden, int layers, double input_dropout, std::mt19937_64& rng)
      : input_dropout_(input_dropout) {
    int fan_in = input_dim;
    for (int l = 0; l <= layers; ++l) {
      const int fan_out = l == layers ? 1 : hidden;
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      Eigen::MatrixXd w(fan_out, fan_in);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
      Eigen::RowVectorXd b(fan_out);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = u(rng);
      weights_.push_back(std::move(w));
      biases_.push_back(std::move(b));
      fan_in = fan_out;
    }
  }

  // Forward pass on rows of `x`; caches activations for backward().
  Eigen::VectorXd forward(const Eigen::MatrixXd& x, std::mt19937_64& rng) {
    mask_ = Eigen::MatrixXd::Ones(x.rows(), x.cols());
    if (input_dropout_ > 0.0) {
      std::bernoulli_distribution keep(1.0 - input_dropout_);
      const double scale = 1.0 / (1.0 - input_dropout_);
      for (Eigen::Index i = 0; i < mask_.size(); ++i) mask_.data()[i] = keep(rng) ? scale : 0.0;
    }
    acts_.clear();
    pre_.clear();
    acts_.push_back(x.cwiseProduct(mask_));
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::MatrixXd z = acts_.back() * weights_[l].transpose();
      z.rowwise() += biases_[l];
      if (l + 1 < weights_.size()) {
        pre_.push_back(z);
        acts_.push_back(z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; }));
      } else {
        return z.col(0);
      }
    }
    return {};
  }

  // Back-propagates dL/dlogits; returns dL/dinput and, if `update`, takes an SGD step.
  Eigen::MatrixXd backward(const Eigen::VectorXd& dlogits, bool update, double lr) {
    Eigen::MatrixXd grad = dlogits;  // rows x 1
    for (std::size_t l = weights_.size(); l-- > 0;) {
      const Eigen::MatrixXd& input = acts_[l];
      Eigen::MatrixXd dinput = grad * weights_[l];
      if (update) {
        weights_[l] -= lr * (grad.transpose() * input);
        biases_[l] -= lr * grad.colwise().sum();
      }
      if (l > 0) {
        const Eigen::MatrixXd& z = pre_[l - 1];
        grad = dinput.cwiseProduct(z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }));
      } else {
        grad = dinput;
      }
    }
    return grad.cwiseProduct(mask_);
  }

 private:
  double input_dropout_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::RowVectorXd> biases_;
  std::vector<Eigen::MatrixXd> acts_;
  std::vector<Eigen::MatrixXd> pre_;
  Eigen::MatrixXd mask_;
};

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Mean binary cross-entropy gradient w.r.t. logits.
Eigen::VectorXd bce_grad(const Eigen::VectorXd& logits, const Eigen::VectorXd& targets) {
  Eigen::VectorXd g(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) g(i) = sigmoid(logits(i)) - targets(i);
  return g / static_cast<double>(logits.size());
}

void check_normalized(const EmbeddingSpace& space, const char* which) {
  if (max_norm_deviation(space) > 1e-6) {
    throw Error(std::string("adversarial_align: ") + which +
                " space must be length-normalized (row norms within 1e-6 of 1)");
  }
  for (Eigen::Index i = 0; i < space.matrix().rows(); ++i) {
    if (space.matrix().row(i).squaredNorm() == 0.0) {
      throw Error(std::string("adversarial_align: ") + which + " space has a zero row");
    }
  }
}

// One adversarial run from the identity; updates `best` whenever a snapshot
// beats `best_score`.
void run_adversarial(const EmbeddingSpace& src, const EmbeddingSpace& tgt, const AdversarialConfig& cfg,
                     int restart, LinearMap& best, double& best_score, AdversarialTrace& local) {
  std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(restart) * 0x9E3779B97F4A7C15ULL);
  const auto d = static_cast<Eigen::Index>(src.dim());
  Discriminator dis(static_cast<int>(d), cfg.discriminator_hidden, cfg.discriminator_layers,
                    cfg.discriminator_input_dropout, rng);
  Eigen::MatrixXd w = Eigen::MatrixXd::Identity(d, d);

  std::uniform_int_distribution<std::size_t> pick_src(0, std::min(cfg.vocab_top, src.size()) - 1);
  std::uniform_int_distribution<std::size_t> pick_tgt(0, std::min(cfg.vocab_top, tgt.size()) - 1);
  const Eigen::Index b = cfg.batch;

  // Rows [0, b) are mapped source vectors, rows [b, 2b) target vectors.
  Eigen::VectorXd dis_targets(2 * b);
  dis_targets.head(b).setConstant(1.0 - cfg.smoothing);
  dis_targets.tail(b).setConstant(cfg.smoothing);
  const Eigen::VectorXd map_targets = Eigen::VectorXd::Ones(2 * b) - dis_targets;

  Eigen::MatrixXd x_src(b, d);
  Eigen::MatrixXd batch(2 * b, d);
  auto sample = [&]() {
    for (Eigen::Index i = 0; i < b; ++i) {
      x_src.row(i) = src.matrix().row(static_cast<Eigen::Index>(pick_src(rng)));
      batch.row(b + i) = tgt.matrix().row(static_cast<Eigen::Index>(pick_tgt(rng)));
    }
    batch.topRows(b) = x_src * w.transpose();
  };

  const int offset = restart * cfg.steps;
  for (int step = 1; step <= cfg.steps; ++step) {
    for (int k = 0; k < cfg.discriminator_steps; ++k) {
      sample();
      const Eigen::VectorXd logits = dis.forward(batch, rng);
      dis.backward(bce_grad(logits, dis_targets), true, cfg.lr);
    }
    // Mapping step: flipped labels, gradient flows only into W.
    sample();
    const Eigen::VectorXd logits = dis.forward(batch, rng);
    const Eigen::MatrixXd dinput = dis.backward(bce_grad(logits, map_targets), false, 0.0);
    Eigen::MatrixXd grad_w = dinput.topRows(b).transpose() * x_src;
    // Riemannian gradient: project onto the tangent space of the orthogonal group.
    const Eigen::MatrixXd a = w.transpose() * grad_w;
    grad_w = w * (0.5 * (a - a.transpose()));
    w -= cfg.map_lr * grad_w;
    orthogonalize_step(w, cfg.ortho_beta);
    local.max_orthogonality_error = std::max(local.max_orthogonality_error, orthogonality_error(w));

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      LinearMap snapshot{w, false};
      const double score = validation_criterion(src, tgt, snapshot, cfg.validation_words);
      local.criterion.emplace_back(offset + step, score);
      if (score > best_score) {
        best_score = score;
        best = snapshot;
        local.best_step = offset + step;
        local.best_restart = restart;
      }
    }
  }
}

}  // namespace

LinearMap adversarial_align(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                            const AdversarialConfig& cfg, AdversarialTrace* trace) {
  cfg.validate();
  if (src.dim() != tgt.dim()) {
    throw DimensionError("adversarial_align: source dimension " + std::to_string(src.dim()) +
                         " differs from target dimension " + std::to_string(tgt.dim()));
  }
  check_normalized(src, "source");
  check_normalized(tgt, "target");

  AdversarialTrace local;
  LinearMap best{Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(src.dim()), static_cast<Eigen::Index>(src.dim())), false};
  double best_score = validation_criterion(src, tgt, best, cfg.validation_words);
  local.criterion.emplace_back(0, best_score);
  for (int r = 0; r < cfg.restarts; ++r) {
    run_adversarial(src, tgt, cfg, r, best, best_score, local);
  }
  if (trace) *trace = std::move(local);
  best.orthogonal = orthogonality_error(best.matrix) <= 1e-8;
  return best;
}

}  // namespace cmsent
