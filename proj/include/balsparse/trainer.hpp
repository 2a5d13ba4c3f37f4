#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "balsparse/format.hpp"
#include "balsparse/pruning.hpp"

namespace balsparse::trainer {

struct Dataset {
  Matrix<double> features;  // one sample per row
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct LabeledData {
  Dataset train;
  Dataset test;
};

/// Two interleaved spiral arms, one per class.
struct SpiralOptions {
  std::size_t train_size = 2000;
  std::size_t test_size = 500;
  double turns = 3.0;
  double noise = 0.02;
};

LabeledData make_dataset(std::uint64_t seed, const SpiralOptions& options = {});

struct Layer {
  Matrix<double> weights;  // out x in
  std::vector<double> bias;
  std::optional<PruneMask> mask;
};

/// Rectifier hidden layers, softmax output.
class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(const std::vector<std::size_t>& dims, std::uint64_t seed);

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  std::size_t input_dim() const noexcept { return layers_.front().weights.cols(); }
  std::size_t output_dim() const noexcept { return layers_.back().weights.rows(); }

  /// Attaches a mask to a layer and zeros its masked weights.
  void set_mask(std::size_t layer, PruneMask mask);

  /// Logits for each sample row.
  Matrix<double> logits(const Matrix<double>& features) const;

 private:
  std::vector<Layer> layers_;
};

struct Gradients {
  std::vector<Matrix<double>> weights;
  std::vector<std::vector<double>> bias;
};

/// Mean softmax cross-entropy over the samples listed in `rows` (all rows when empty).
double loss(const MlpModel& model, const Dataset& data, const std::vector<std::size_t>& rows = {});

/// Analytic gradient of `loss`. Masked weights get zero gradient.
Gradients gradients(const MlpModel& model, const Dataset& data, const std::vector<std::size_t>& rows,
                    double* loss_out = nullptr);

struct TrainOptions {
  std::size_t epochs = 10;
  double learning_rate = 0.003;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  /// Epoch e uses learning_rate / (1 + lr_decay * e).
  double lr_decay = 0.0;
  /// Reverts any epoch that raises the full training loss and halves the
  /// learning rate; accepted epochs grow it back by 1.25x up to the nominal
  /// rate. Epoch losses then never increase.
  bool reject_worse_epochs = false;
};

/// Minibatch Adam on the cross-entropy. Masked weights stay exactly zero.
/// `epoch_losses`, if given, receives the full-set loss after each epoch
/// (the retained loss when the epoch was reverted).
/// Throws kDivergenceDetected when the loss becomes non-finite.
MlpModel train(MlpModel model, const Dataset& data, const TrainOptions& options,
               std::vector<double>* epoch_losses = nullptr);

/// Fraction of samples whose argmax logit matches the label.
double evaluate(const MlpModel& model, const Dataset& data);

enum class PatternKind { kBalanced, kRandom, kBlock, kVector };

std::string_view to_string(PatternKind pattern);
PatternKind parse_pattern(std::string_view name);

struct ReferenceModel {
  MlpModel model;
  double test_accuracy = 0.0;
};

struct ReferenceOptions {
  std::vector<std::size_t> dims = {2, 64, 64, 2};
  TrainOptions training = {200, 0.01, 64, 1, 0.0, true};
  std::uint64_t init_seed = 2;
};

ReferenceModel train_reference(const LabeledData& data, const ReferenceOptions& options = {});

struct ExperimentConfig {
  PatternKind pattern = PatternKind::kBalanced;
  double target_sparsity = 0.8;
  PruneSchedule schedule = {0.8, 8, ScheduleShape::kCubic};  // target is overwritten by target_sparsity
  /// Balance range (balanced) or square tile edge (block); unused otherwise.
  std::size_t knob = 16;
  VectorAxis vector_axis = VectorAxis::kCol;
  TileCriterion tile_criterion = TileCriterion::kMax;
  /// Layers pruned one after another, each through the whole schedule.
  std::vector<std::size_t> target_layers = {1, 2};
  TrainOptions retraining = {20, 0.01, 64, 4, 0.0, true};
  /// Stop and roll back an iteration when test accuracy falls more than this
  /// below the reference after retraining. Disabled when empty.
  std::optional<double> withdraw_threshold = 0.02;
};

struct Checkpoint {
  std::size_t iteration = 0;  // global count across layers
  double sparsity = 0.0;      // fraction of zeros across all target layers
  double accuracy = 0.0;
};

struct ExperimentResult {
  PatternKind pattern = PatternKind::kBalanced;
  std::size_t knob = 0;
  std::vector<Checkpoint> checkpoints;  // sparsity strictly increasing
  bool withdrawn = false;
  MlpModel model;

  double final_accuracy() const { return checkpoints.back().accuracy; }
  double final_sparsity() const { return checkpoints.back().sparsity; }
};

/// Prunes the reference layer by layer with retraining after every schedule
/// step. Throws kReferenceModelMissing when `reference` has no layers.
ExperimentResult prune_retrain_experiment(const ReferenceModel& reference, const LabeledData& data,
                                          const ExperimentConfig& config);

/// Header `pattern,knob,sparsity,accuracy,iteration`, then one row per checkpoint.
void write_csv(std::ostream& out, const std::vector<ExperimentResult>& results);

}  // namespace balsparse::trainer
