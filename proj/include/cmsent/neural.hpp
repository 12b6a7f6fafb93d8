#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cmsent/label.hpp"

namespace cmsent {

using Matrix = Eigen::MatrixXd;

/// One LSTM direction. Gate blocks are stacked in the order input, forget,
/// cell, output: rows [k*units, (k+1)*units) of w, u and b belong to gate k.
struct LstmDirection {
  Matrix w;  // 4u x input_dim
  Matrix u;  // 4u x u
  Matrix b;  // 4u x 1
};

struct BiLSTMLayer {
  int input_dim = 0;
  int units = 0;
  LstmDirection forward;
  LstmDirection backward;

  /// Glorot-uniform weights, forget-gate bias 1, other biases 0.
  static BiLSTMLayer init(int input_dim, int units, std::mt19937_64& rng);
  static BiLSTMLayer zeros(int input_dim, int units);
  void check_shapes() const;
};

struct DenseSoftmaxHead {
  Matrix w;  // kNumLabels x feature_dim
  Matrix b;  // kNumLabels x 1

  static DenseSoftmaxHead init(int feature_dim, std::mt19937_64& rng);
  static DenseSoftmaxHead zeros(int feature_dim);
  int feature_dim() const { return static_cast<int>(w.cols()); }
};

struct DropoutSpec {
  double input_rate = 0.3;
  double recurrent_rate = 0.3;
  void validate() const;
};

enum class EncoderKind { bilstm, identity };

/// A named reference to one parameter tensor of a model.
struct ParamRef {
  std::string name;
  Matrix* value;
};
struct ConstParamRef {
  std::string name;
  const Matrix* value;
};

/// Token path: BiLSTM over a T x input_dim sequence, head over the 2*units
/// concatenated final states. Sentence path: head directly over a 1 x d
/// sentence vector.
struct ClassifierModel {
  EncoderKind kind = EncoderKind::identity;
  int input_dim = 0;
  std::optional<BiLSTMLayer> lstm;
  DenseSoftmaxHead head;
  DropoutSpec dropout;

  static ClassifierModel token_model(int input_dim, int units, std::uint64_t seed,
                                     DropoutSpec dropout = {});
  static ClassifierModel sentence_model(int input_dim, std::uint64_t seed, DropoutSpec dropout = {});

  int feature_dim() const;
  /// Parameters in a fixed order; the same order is used by gradients,
  /// Adam state and checkpoints.
  std::vector<ParamRef> parameters();
  std::vector<ConstParamRef> parameters() const;
  std::size_t parameter_count() const;

  /// Same structure, every parameter zero.
  ClassifierModel zeros_like() const;
  void validate() const;
};

/// Per-sequence variational dropout masks, already scaled by 1/(1-rate).
struct DropoutMasks {
  Eigen::VectorXd input_fwd, input_bwd;
  Eigen::VectorXd recurrent_fwd, recurrent_bwd;
  Eigen::VectorXd sentence;

  static DropoutMasks sample(const ClassifierModel& model, std::mt19937_64& rng);
};

/// Concatenated final hidden states (forward then backward), length 2*units.
Eigen::VectorXd lstm_forward(const BiLSTMLayer& layer, const Matrix& sequence,
                             const DropoutMasks* masks = nullptr);

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Class probabilities. With train_mode, dropout masks are drawn from `seed`
/// (or a fixed default seed when absent).
Eigen::VectorXd forward(const ClassifierModel& model, const Matrix& input, bool train_mode = false,
                        std::optional<std::uint64_t> seed = std::nullopt);

/// Argmax of the probabilities; ties resolve to the lowest class index.
Label argmax_label(const Eigen::VectorXd& probabilities);

struct TrainingExample {
  Matrix input;
  Label label;
};

struct LossAndGradients {
  double loss = 0.0;
  ClassifierModel gradients;  // parameter-shaped
};

/// Mean cross-entropy and its gradients. Example i draws its dropout masks
/// from seed + i when train_mode is set.
LossAndGradients loss_and_gradients(const ClassifierModel& model, std::span<const TrainingExample> batch,
                                    bool train_mode = false, std::uint64_t seed = 0);

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  /// Zero moments shaped like the model's parameters.
  static AdamState for_model(const ClassifierModel& model);
};

void adam_step(ClassifierModel& model, const ClassifierModel& gradients, AdamState& state);

/// Binary checkpoint: magic, format version, JSON header (structure,
/// hyperparameters, tensor shapes) and raw little-endian doubles.
void save_checkpoint(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_checkpoint(const std::filesystem::path& path);

bool parameters_equal(const ClassifierModel& a, const ClassifierModel& b);

}  // namespace cmsent
