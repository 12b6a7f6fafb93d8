#include <cmath>
#include <fstream>
#include <random>

#include <doctest.h>

#include "cmsent/error.hpp"
#include "cmsent/neural.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

using namespace cmsent;
using namespace cmsent::testing;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

/// Model with every parameter drawn from N(0, scale^2), so gates are far from saturation.
ClassifierModel random_token_model(int in, int units, std::mt19937_64& rng, double scale = 0.5) {
  auto m = ClassifierModel::token_model(in, units, rng());
  for (auto& p : m.parameters()) *p.value = random_matrix(p.value->rows(), p.value->cols(), rng, scale);
  return m;
}

std::vector<TrainingExample> random_batch(const ClassifierModel& m, int n, int max_t, std::mt19937_64& rng) {
  std::vector<TrainingExample> batch;
  for (int k = 0; k < n; ++k) {
    const Eigen::Index t = m.kind == EncoderKind::bilstm ? 1 + static_cast<Eigen::Index>(rng() % max_t) : 1;
    batch.push_back({random_matrix(t, m.input_dim, rng), kAllLabels[rng() % 3]});
  }
  return batch;
}

std::vector<std::vector<double>> rows_of(const Matrix& x, bool reverse) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const Eigen::Index r = reverse ? x.rows() - 1 - t : t;
    std::vector<double> row;
    for (Eigen::Index j = 0; j < x.cols(); ++j) row.push_back(x(r, j));
    out.push_back(row);
  }
  return out;
}

}  // namespace

TEST_CASE("zero weights give zero features") {
  const auto layer = BiLSTMLayer::zeros(4, 3);
  std::mt19937_64 rng(1);
  const auto h = lstm_forward(layer, random_matrix(5, 4, rng));
  CHECK(h.size() == 6);
  CHECK(h.isZero(0.0));
}

TEST_CASE("single-step sequence with shared weights is symmetric") {
  std::mt19937_64 rng(2);
  auto layer = BiLSTMLayer::init(4, 50, rng);
  layer.backward = layer.forward;
  const auto h = lstm_forward(layer, random_matrix(1, 4, rng));
  CHECK(h.head(50) == h.tail(50));
}

TEST_CASE("lstm matches the scalar reference recurrence") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_token_model(4, 2, rng);
    const Matrix x = random_matrix(3, 4, rng);
    const auto h = lstm_forward(*m.lstm, x);
    const auto f = reference_lstm_direction(m.lstm->forward, 2, rows_of(x, false));
    const auto b = reference_lstm_direction(m.lstm->backward, 2, rows_of(x, true));
    for (int k = 0; k < 2; ++k) {
      REQUIRE(h(k) == doctest::Approx(f[static_cast<std::size_t>(k)]).epsilon(1e-12));
      REQUIRE(h(2 + k) == doctest::Approx(b[static_cast<std::size_t>(k)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("initialization") {
  std::mt19937_64 rng(4);
  const auto layer = BiLSTMLayer::init(10, 5, rng);
  const double r = std::sqrt(6.0 / (10 + 20));
  CHECK(layer.forward.w.cwiseAbs().maxCoeff() <= r);
  CHECK(layer.forward.b.block(5, 0, 5, 1).isOnes(0.0));
  CHECK(layer.forward.b.block(0, 0, 5, 1).isZero(0.0));
  CHECK(layer.backward.b.block(10, 0, 10, 1).isZero(0.0));
  const auto m = ClassifierModel::token_model(10, 50, 7);
  CHECK(m.feature_dim() == 100);
  CHECK(m.head.w.rows() == 3);
  CHECK(ClassifierModel::sentence_model(30, 7).feature_dim() == 30);
}

TEST_CASE("softmax") {
  const auto u = softmax(Eigen::VectorXd::Zero(3));
  for (int k = 0; k < 3; ++k) CHECK(u(k) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  Eigen::VectorXd big(3);
  big << 1000, 0, 0;
  const auto p = softmax(big);
  CHECK(p.allFinite());
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(p(1) < 1e-300);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto m = trial % 2 ? random_token_model(3, 2, rng, 2.0) : ClassifierModel::sentence_model(6, rng());
    const auto batch = random_batch(m, 1, 5, rng);
    const auto probs = forward(m, batch[0].input, trial % 3 == 0, rng());
    REQUIRE((probs.array() > 0).all());
    REQUIRE(std::abs(probs.sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("argmax ties go to the lowest index") {
  CHECK(argmax_label(Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3)) == Label::negative);
  CHECK(argmax_label(Eigen::Vector3d(0.2, 0.4, 0.4)) == Label::neutral);
  CHECK(argmax_label(Eigen::Vector3d(0.1, 0.2, 0.7)) == Label::positive);
}

TEST_CASE("loss at the analytic extremes") {
  auto m = ClassifierModel::sentence_model(4, 1).zeros_like();
  std::vector<TrainingExample> batch = {{Matrix::Ones(1, 4), Label::neutral}};
  const auto uniform = loss_and_gradients(m, batch);
  CHECK(uniform.loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));

  m.head.b(1, 0) = 800.0;
  const auto perfect = loss_and_gradients(m, batch);
  CHECK(perfect.loss == 0.0);
  CHECK(perfect.gradients.head.w.isZero(0.0));
  CHECK(perfect.gradients.head.b.isZero(0.0));
}

TEST_CASE("analytic gradients match finite differences") {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const int in = 1 + static_cast<int>(rng() % 3);
    const int units = 1 + static_cast<int>(rng() % 3);
    const auto m = inst % 5 == 4 ? ClassifierModel::sentence_model(in + 2, rng()) : random_token_model(in, units, rng);
    const auto batch = random_batch(m, 3, 4, rng);
    const auto analytic = loss_and_gradients(m, batch);
    const auto numeric =
        finite_difference(m, [&](const ClassifierModel& x) { return loss_and_gradients(x, batch).loss; }, 1e-5);
    worst = std::max(worst, max_relative_error(analytic.gradients, numeric));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("gradients with fixed dropout masks match finite differences") {
  std::mt19937_64 rng(7);
  for (int inst = 0; inst < 10; ++inst) {
    const auto m = random_token_model(2, 3, rng);
    const auto batch = random_batch(m, 2, 4, rng);
    const auto seed = rng();
    const auto analytic = loss_and_gradients(m, batch, true, seed);
    const auto numeric = finite_difference(
        m, [&](const ClassifierModel& x) { return loss_and_gradients(x, batch, true, seed).loss; }, 1e-5);
    REQUIRE(max_relative_error(analytic.gradients, numeric) <= 1e-4);
  }
}

TEST_CASE("gradients are parameter-shaped only") {
  const auto m = ClassifierModel::token_model(7, 4, 1);
  std::mt19937_64 rng(8);
  const auto g = loss_and_gradients(m, random_batch(m, 2, 3, rng)).gradients;
  CHECK(g.parameter_count() == m.parameter_count());
  const auto a = m.parameters();
  const auto b = g.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].name == b[k].name);
    CHECK(a[k].value->rows() == b[k].value->rows());
    CHECK(a[k].value->cols() == b[k].value->cols());
  }
  CHECK(m.parameter_count() == 2 * (16 * 7 + 16 * 4 + 16) + 3 * 8 + 3);
}

TEST_CASE("adam first step, zero gradient and second step") {
  auto m = ClassifierModel::sentence_model(2, 1);
  const auto before = m;
  auto g = m.zeros_like();
  g.head.w(0, 0) = 37.0;
  g.head.w(1, 1) = -0.002;
  auto state = AdamState::for_model(m);
  adam_step(m, g, state);
  CHECK(state.t == 1);
  CHECK(m.head.w(0, 0) - before.head.w(0, 0) == doctest::Approx(-0.001).epsilon(1e-6));
  CHECK(m.head.w(1, 1) - before.head.w(1, 1) == doctest::Approx(0.001).epsilon(1e-4));
  CHECK(m.head.w(2, 0) == before.head.w(2, 0));

  const double w1 = m.head.w(0, 0);
  adam_step(m, g, state);
  CHECK(state.t == 2);
  // m_hat = g and v_hat = g^2 again after bias correction.
  CHECK(m.head.w(0, 0) - w1 == doctest::Approx(-0.001 * 37.0 / (37.0 + 1e-8)).epsilon(1e-9));

  auto z = ClassifierModel::sentence_model(2, 2);
  const auto z0 = z;
  auto zs = AdamState::for_model(z);
  adam_step(z, z.zeros_like(), zs);
  CHECK(zs.t == 1);
  CHECK(parameters_equal(z, z0));
}

TEST_CASE("inverted dropout preserves expectations") {
  std::mt19937_64 rng(9);
  const auto m = ClassifierModel::token_model(5, 4, 1);
  Eigen::VectorXd sum_in = Eigen::VectorXd::Zero(5), sum_rec = Eigen::VectorXd::Zero(4);
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) {
    const auto masks = DropoutMasks::sample(m, rng);
    sum_in += masks.input_fwd;
    sum_rec += masks.recurrent_bwd;
  }
  // Masked activation x * mask averages to x when the mask mean is 1.
  for (int j = 0; j < 5; ++j) CHECK(std::abs(sum_in(j) / draws - 1.0) <= 0.01);
  for (int j = 0; j < 4; ++j) CHECK(std::abs(sum_rec(j) / draws - 1.0) <= 0.01);

  const auto s = ClassifierModel::sentence_model(3, 1);
  Eigen::VectorXd x(3);
  x << 0.5, -2.0, 3.0;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(3);
  for (int k = 0; k < draws; ++k) acc += x.cwiseProduct(DropoutMasks::sample(s, rng).sentence);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(acc(j) / draws - x(j)) <= 0.01 * std::abs(x(j)));
}

TEST_CASE("inference is deterministic") {
  std::mt19937_64 rng(10);
  const auto m = random_token_model(3, 3, rng);
  const auto x = random_matrix(4, 3, rng);
  const auto a = forward(m, x);
  const auto b = forward(m, x);
  CHECK(a == b);
  CHECK(forward(m, x, true, 5) == forward(m, x, true, 5));
}

TEST_CASE("dimension errors") {
  const auto m = ClassifierModel::token_model(3, 2, 1);
  CHECK_THROWS_AS(forward(m, Matrix::Zero(2, 4)), DimensionError);
  CHECK_THROWS_AS(lstm_forward(*m.lstm, Matrix::Zero(0, 3)), Error);
  const auto s = ClassifierModel::sentence_model(3, 1);
  CHECK_THROWS_AS(forward(s, Matrix::Zero(1, 2)), DimensionError);
  CHECK_THROWS_AS(loss_and_gradients(s, std::vector<TrainingExample>{}), Error);
  DropoutSpec bad{1.0, 0.3};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("non-finite values are reported") {
  auto m = ClassifierModel::sentence_model(2, 1);
  m.head.w(0, 0) = std::numeric_limits<double>::infinity();
  std::vector<TrainingExample> batch = {{Matrix::Ones(1, 2), Label::positive}};
  CHECK_THROWS_AS(loss_and_gradients(m, batch), Error);
}

TEST_CASE("checkpoints are bit-exact") {
  TempDir dir;
  std::mt19937_64 rng(11);
  for (auto m : {random_token_model(3, 5, rng), ClassifierModel::sentence_model(7, 3)}) {
    m.dropout = DropoutSpec{0.1, 0.2};
    save_checkpoint(m, dir / "m.ckpt");
    const auto back = load_checkpoint(dir / "m.ckpt");
    CHECK(parameters_equal(m, back));
    CHECK(back.kind == m.kind);
    CHECK(back.dropout.input_rate == 0.1);
    CHECK(back.dropout.recurrent_rate == 0.2);
    const auto x = random_matrix(m.kind == EncoderKind::bilstm ? 4 : 1, m.input_dim, rng);
    CHECK(forward(m, x) == forward(back, x));
  }
}

TEST_CASE("damaged checkpoints are rejected") {
  TempDir dir;
  save_checkpoint(ClassifierModel::token_model(3, 2, 1), dir / "m.ckpt");
  std::ifstream in(dir / "m.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});

  std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 8);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), Error);
  std::ofstream(dir / "long.ckpt", std::ios::binary) << bytes << "x";
  CHECK_THROWS_AS(load_checkpoint(dir / "long.ckpt"), Error);
  std::string magic = bytes;
  magic[0] = 'X';
  std::ofstream(dir / "magic.ckpt", std::ios::binary) << magic;
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), Error);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), IoError);
}
