#include "cmsent/neural.hpp"

#include <cmath>
#include <cstring>

#include "cmsent/error.hpp"

namespace cmsent {

namespace {

Matrix glorot(int rows, int cols, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-r, r);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
  return m;
}

LstmDirection init_direction(int input_dim, int units, std::mt19937_64& rng) {
  LstmDirection d;
  d.w = glorot(4 * units, input_dim, input_dim, 4 * units, rng);
  d.u = glorot(4 * units, units, units, 4 * units, rng);
  d.b = Matrix::Zero(4 * units, 1);
  d.b.block(units, 0, units, 1).setOnes();
  return d;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::VectorXd sample_mask(Eigen::Index n, double rate, std::mt19937_64& rng) {
  Eigen::VectorXd m = Eigen::VectorXd::Ones(n);
  if (rate <= 0.0) return m;
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < n; ++i) m[i] = keep(rng) ? scale : 0.0;
  return m;
}

// Activations of one direction, in processing order.
struct DirTrace {
  Matrix xm;     // T x in, masked inputs
  Matrix hprev;  // T x u, masked previous hidden states
  Matrix act;    // T x 4u, activated gates (i, f, g, o)
  Matrix c;      // (T+1) x u, row 0 is the initial zero state
  Eigen::VectorXd h;
};

DirTrace run_direction(const LstmDirection& d, int units, const Matrix& seq, bool reverse,
                       const Eigen::VectorXd* in_mask, const Eigen::VectorXd* rec_mask) {
  const Eigen::Index t_len = seq.rows();
  DirTrace tr;
  tr.xm.resize(t_len, seq.cols());
  for (Eigen::Index t = 0; t < t_len; ++t) {
    tr.xm.row(t) = seq.row(reverse ? t_len - 1 - t : t);
  }
  if (in_mask) tr.xm = tr.xm.array().rowwise() * in_mask->transpose().array();
  Matrix pre = tr.xm * d.w.transpose();
  pre.rowwise() += d.b.col(0).transpose();

  const int u = units;
  tr.hprev.resize(t_len, u);
  tr.act.resize(t_len, 4 * u);
  tr.c = Matrix::Zero(t_len + 1, u);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(u);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    Eigen::VectorXd hm = rec_mask ? Eigen::VectorXd(h.cwiseProduct(*rec_mask)) : h;
    tr.hprev.row(t) = hm.transpose();
    Eigen::VectorXd z = pre.row(t).transpose() + d.u * hm;
    for (int k = 0; k < u; ++k) {
      const double i = sigmoid(z[k]);
      const double f = sigmoid(z[u + k]);
      const double g = std::tanh(z[2 * u + k]);
      const double o = sigmoid(z[3 * u + k]);
      tr.act(t, k) = i;
      tr.act(t, u + k) = f;
      tr.act(t, 2 * u + k) = g;
      tr.act(t, 3 * u + k) = o;
      const double c = f * tr.c(t, k) + i * g;
      tr.c(t + 1, k) = c;
      h[k] = o * std::tanh(c);
    }
  }
  tr.h = std::move(h);
  return tr;
}

void backprop_direction(const LstmDirection& d, int units, const DirTrace& tr, Eigen::VectorXd dh,
                        const Eigen::VectorXd* rec_mask, LstmDirection& grad) {
  const Eigen::Index t_len = tr.xm.rows();
  const int u = units;
  Matrix dz(t_len, 4 * u);
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(u);
  for (Eigen::Index t = t_len - 1; t >= 0; --t) {
    for (int k = 0; k < u; ++k) {
      const double i = tr.act(t, k);
      const double f = tr.act(t, u + k);
      const double g = tr.act(t, 2 * u + k);
      const double o = tr.act(t, 3 * u + k);
      const double tc = std::tanh(tr.c(t + 1, k));
      const double d_o = dh[k] * tc;
      const double dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
      dz(t, k) = dck * g * i * (1.0 - i);
      dz(t, u + k) = dck * tr.c(t, k) * f * (1.0 - f);
      dz(t, 2 * u + k) = dck * i * (1.0 - g * g);
      dz(t, 3 * u + k) = d_o * o * (1.0 - o);
      dc[k] = dck * f;
    }
    dh = d.u.transpose() * dz.row(t).transpose();
    if (rec_mask) dh = dh.cwiseProduct(*rec_mask);
  }
  grad.w += dz.transpose() * tr.xm;
  grad.u += dz.transpose() * tr.hprev;
  grad.b += dz.colwise().sum().transpose();
}

void check_input(const ClassifierModel& model, const Matrix& input) {
  if (input.cols() != model.input_dim) {
    throw DimensionError("input dimension " + std::to_string(input.cols()) + " does not match model input " +
                         std::to_string(model.input_dim));
  }
  if (model.kind == EncoderKind::bilstm) {
    if (input.rows() < 1) throw Error("empty sequence");
  } else if (input.rows() != 1) {
    throw DimensionError("sentence path expects a single row, got " + std::to_string(input.rows()));
  }
}

Eigen::VectorXd features(const ClassifierModel& model, const Matrix& input, const DropoutMasks* masks,
                         DirTrace* fwd_out, DirTrace* bwd_out) {
  if (model.kind == EncoderKind::identity) {
    Eigen::VectorXd x = input.row(0).transpose();
    if (masks) x = x.cwiseProduct(masks->sentence);
    return x;
  }
  const auto& l = *model.lstm;
  DirTrace f = run_direction(l.forward, l.units, input, false, masks ? &masks->input_fwd : nullptr,
                             masks ? &masks->recurrent_fwd : nullptr);
  DirTrace b = run_direction(l.backward, l.units, input, true, masks ? &masks->input_bwd : nullptr,
                             masks ? &masks->recurrent_bwd : nullptr);
  Eigen::VectorXd out(2 * l.units);
  out << f.h, b.h;
  if (fwd_out) *fwd_out = std::move(f);
  if (bwd_out) *bwd_out = std::move(b);
  return out;
}

}  // namespace

BiLSTMLayer BiLSTMLayer::init(int input_dim, int units, std::mt19937_64& rng) {
  if (input_dim < 1 || units < 1) throw ConfigError("LSTM dimensions must be positive");
  BiLSTMLayer l;
  l.input_dim = input_dim;
  l.units = units;
  l.forward = init_direction(input_dim, units, rng);
  l.backward = init_direction(input_dim, units, rng);
  return l;
}

BiLSTMLayer BiLSTMLayer::zeros(int input_dim, int units) {
  BiLSTMLayer l;
  l.input_dim = input_dim;
  l.units = units;
  for (auto* d : {&l.forward, &l.backward}) {
    d->w = Matrix::Zero(4 * units, input_dim);
    d->u = Matrix::Zero(4 * units, units);
    d->b = Matrix::Zero(4 * units, 1);
  }
  return l;
}

void BiLSTMLayer::check_shapes() const {
  for (const auto* d : {&forward, &backward}) {
    if (d->w.rows() != 4 * units || d->w.cols() != input_dim || d->u.rows() != 4 * units ||
        d->u.cols() != units || d->b.rows() != 4 * units || d->b.cols() != 1) {
      throw DimensionError("inconsistent LSTM parameter shapes");
    }
  }
}

DenseSoftmaxHead DenseSoftmaxHead::init(int feature_dim, std::mt19937_64& rng) {
  DenseSoftmaxHead h;
  h.w = glorot(kNumLabels, feature_dim, feature_dim, kNumLabels, rng);
  h.b = Matrix::Zero(kNumLabels, 1);
  return h;
}

DenseSoftmaxHead DenseSoftmaxHead::zeros(int feature_dim) {
  return {Matrix::Zero(kNumLabels, feature_dim), Matrix::Zero(kNumLabels, 1)};
}

void DropoutSpec::validate() const {
  if (!(input_rate >= 0.0 && input_rate < 1.0) || !(recurrent_rate >= 0.0 && recurrent_rate < 1.0)) {
    throw ConfigError("dropout rates must lie in [0, 1)");
  }
}

ClassifierModel ClassifierModel::token_model(int input_dim, int units, std::uint64_t seed, DropoutSpec dropout) {
  dropout.validate();
  std::mt19937_64 rng(seed);
  ClassifierModel m;
  m.kind = EncoderKind::bilstm;
  m.input_dim = input_dim;
  m.lstm = BiLSTMLayer::init(input_dim, units, rng);
  m.head = DenseSoftmaxHead::init(2 * units, rng);
  m.dropout = dropout;
  return m;
}

ClassifierModel ClassifierModel::sentence_model(int input_dim, std::uint64_t seed, DropoutSpec dropout) {
  dropout.validate();
  if (input_dim < 1) throw ConfigError("sentence dimension must be positive");
  std::mt19937_64 rng(seed);
  ClassifierModel m;
  m.kind = EncoderKind::identity;
  m.input_dim = input_dim;
  m.head = DenseSoftmaxHead::init(input_dim, rng);
  m.dropout = dropout;
  return m;
}

int ClassifierModel::feature_dim() const { return kind == EncoderKind::bilstm ? 2 * lstm->units : input_dim; }

std::vector<ParamRef> ClassifierModel::parameters() {
  std::vector<ParamRef> out;
  if (lstm) {
    out.push_back({"lstm.forward.w", &lstm->forward.w});
    out.push_back({"lstm.forward.u", &lstm->forward.u});
    out.push_back({"lstm.forward.b", &lstm->forward.b});
    out.push_back({"lstm.backward.w", &lstm->backward.w});
    out.push_back({"lstm.backward.u", &lstm->backward.u});
    out.push_back({"lstm.backward.b", &lstm->backward.b});
  }
  out.push_back({"head.w", &head.w});
  out.push_back({"head.b", &head.b});
  return out;
}

std::vector<ConstParamRef> ClassifierModel::parameters() const {
  std::vector<ConstParamRef> out;
  for (auto& p : const_cast<ClassifierModel*>(this)->parameters()) out.push_back({p.name, p.value});
  return out;
}

std::size_t ClassifierModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += static_cast<std::size_t>(p.value->size());
  return n;
}

ClassifierModel ClassifierModel::zeros_like() const {
  ClassifierModel z = *this;
  for (auto& p : z.parameters()) p.value->setZero();
  return z;
}

void ClassifierModel::validate() const {
  dropout.validate();
  if (kind == EncoderKind::bilstm) {
    if (!lstm) throw ConfigError("token model without an LSTM layer");
    lstm->check_shapes();
    if (lstm->input_dim != input_dim) throw DimensionError("LSTM input dimension mismatch");
  } else if (lstm) {
    throw ConfigError("sentence model must not carry an LSTM layer");
  }
  if (head.w.rows() != kNumLabels || head.b.rows() != kNumLabels || head.b.cols() != 1) {
    throw DimensionError("head output dimension must be 3");
  }
  if (head.w.cols() != feature_dim()) throw DimensionError("head feature dimension mismatch");
  for (const auto& p : parameters()) {
    if (!p.value->allFinite()) throw Error("non-finite value in parameter " + p.name);
  }
}

DropoutMasks DropoutMasks::sample(const ClassifierModel& model, std::mt19937_64& rng) {
  DropoutMasks m;
  const auto& d = model.dropout;
  if (model.kind == EncoderKind::bilstm) {
    const int u = model.lstm->units;
    m.input_fwd = sample_mask(model.input_dim, d.input_rate, rng);
    m.recurrent_fwd = sample_mask(u, d.recurrent_rate, rng);
    m.input_bwd = sample_mask(model.input_dim, d.input_rate, rng);
    m.recurrent_bwd = sample_mask(u, d.recurrent_rate, rng);
  } else {
    m.sentence = sample_mask(model.input_dim, d.input_rate, rng);
  }
  return m;
}

Eigen::VectorXd lstm_forward(const BiLSTMLayer& layer, const Matrix& sequence, const DropoutMasks* masks) {
  if (sequence.rows() < 1) throw Error("empty sequence");
  if (sequence.cols() != layer.input_dim) throw DimensionError("sequence width does not match LSTM input");
  const auto f = run_direction(layer.forward, layer.units, sequence, false, masks ? &masks->input_fwd : nullptr,
                               masks ? &masks->recurrent_fwd : nullptr);
  const auto b = run_direction(layer.backward, layer.units, sequence, true, masks ? &masks->input_bwd : nullptr,
                               masks ? &masks->recurrent_bwd : nullptr);
  Eigen::VectorXd out(2 * layer.units);
  out << f.h, b.h;
  return out;
}

// std::exp underflows to exactly 0 where the vectorized exp stops at a subnormal.
const auto scalar_exp = [](double x) { return std::exp(x); };

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).unaryExpr(scalar_exp).matrix();
  return e / e.sum();
}

Eigen::VectorXd forward(const ClassifierModel& model, const Matrix& input, bool train_mode,
                        std::optional<std::uint64_t> seed) {
  check_input(model, input);
  std::optional<DropoutMasks> masks;
  if (train_mode) {
    std::mt19937_64 rng(seed.value_or(0));
    masks = DropoutMasks::sample(model, rng);
  }
  const Eigen::VectorXd feat = features(model, input, masks ? &*masks : nullptr, nullptr, nullptr);
  return softmax(model.head.w * feat + model.head.b.col(0));
}

Label argmax_label(const Eigen::VectorXd& p) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < static_cast<Eigen::Index>(kNumLabels); ++k) {
    if (p[k] > p[best]) best = k;
  }
  return kAllLabels[static_cast<std::size_t>(best)];
}

LossAndGradients loss_and_gradients(const ClassifierModel& model, std::span<const TrainingExample> batch,
                                    bool train_mode, std::uint64_t seed) {
  if (batch.empty()) throw Error("empty batch");
  LossAndGradients out{0.0, model.zeros_like()};
  auto& g = out.gradients;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& ex = batch[n];
    check_input(model, ex.input);
    std::optional<DropoutMasks> masks;
    if (train_mode) {
      std::mt19937_64 rng(seed + n);
      masks = DropoutMasks::sample(model, rng);
    }
    DirTrace tf, tb;
    const Eigen::VectorXd feat = features(model, ex.input, masks ? &*masks : nullptr, &tf, &tb);
    const Eigen::VectorXd logits = model.head.w * feat + model.head.b.col(0);
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).unaryExpr(scalar_exp).sum());
    const int gold = label_index(ex.label);
    out.loss += lse - logits[gold];

    Eigen::VectorXd dlogits = (logits.array() - lse).unaryExpr(scalar_exp).matrix();
    dlogits[gold] -= 1.0;
    g.head.w += dlogits * feat.transpose();
    g.head.b.col(0) += dlogits;
    if (model.kind == EncoderKind::bilstm) {
      const auto& l = *model.lstm;
      const int u = l.units;
      const Eigen::VectorXd dfeat = model.head.w.transpose() * dlogits;
      backprop_direction(l.forward, u, tf, dfeat.head(u), masks ? &masks->recurrent_fwd : nullptr, g.lstm->forward);
      backprop_direction(l.backward, u, tb, dfeat.tail(u), masks ? &masks->recurrent_bwd : nullptr,
                         g.lstm->backward);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  if (!std::isfinite(out.loss)) throw Error("non-finite loss");
  for (auto& p : g.parameters()) {
    *p.value *= inv;
    if (!p.value->allFinite()) throw Error("non-finite gradient in parameter " + p.name);
  }
  return out;
}

AdamState AdamState::for_model(const ClassifierModel& model) {
  AdamState s;
  for (const auto& p : model.parameters()) {
    s.m.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    s.v.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
  }
  return s;
}

void adam_step(ClassifierModel& model, const ClassifierModel& gradients, AdamState& state) {
  auto params = model.parameters();
  const auto grads = gradients.parameters();
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("Adam: parameter, gradient and state counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& gk = *grads[k].value;
    if (gk.rows() != params[k].value->rows() || gk.cols() != params[k].value->cols() ||
        state.m[k].rows() != gk.rows() || state.m[k].cols() != gk.cols()) {
      throw DimensionError("Adam: shape mismatch for " + params[k].name);
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& gk = *grads[k].value;
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * gk;
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * gk.cwiseProduct(gk);
    const auto m_hat = state.m[k].array() / bc1;
    const auto v_hat = state.v[k].array() / bc2;
    params[k].value->array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
  }
}

bool parameters_equal(const ClassifierModel& a, const ClassifierModel& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size() || a.kind != b.kind || a.input_dim != b.input_dim) return false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    const auto& x = *pa[k].value;
    const auto& y = *pb[k].value;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), static_cast<std::size_t>(x.size()) * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace cmsent
