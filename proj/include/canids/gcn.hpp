#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "canids/graph_builder.hpp"
#include "canids/matrix.hpp"
#include "canids/rng.hpp"

namespace canids {

inline constexpr std::size_t kInputChannels = 2;
inline constexpr std::size_t kHiddenChannels = 8;
inline constexpr std::size_t kClasses = 2;  // column 1 = Attacked

/// Trainable weights: two graph convolutions with bias (2 -> 8 -> 8) and a
/// linear head (8 -> 2).
struct GcnParams {
  DenseMatrix w1{kInputChannels, kHiddenChannels};
  DenseMatrix b1{1, kHiddenChannels};
  DenseMatrix w2{kHiddenChannels, kHiddenChannels};
  DenseMatrix b2{1, kHiddenChannels};
  DenseMatrix wc{kHiddenChannels, kClasses};
  DenseMatrix bc{1, kClasses};

  std::size_t parameter_count() const noexcept {
    return w1.size() + b1.size() + w2.size() + b2.size() + wc.size() + bc.size();
  }
  friend bool operator==(const GcnParams&, const GcnParams&) = default;
};

/// Same shapes as GcnParams; used for gradients and optimizer moments.
using GcnGradients = GcnParams;

/// Glorot-uniform weights, zero bias.
GcnParams init_params(std::uint64_t seed);

/// Throws ShapeMismatch / FiniteViolation.
void validate_params(const GcnParams& params);

/// Intermediates of a training-mode forward pass, consumed by `backward`.
/// Holds a pointer to the batch, which must outlive the cache.
struct ForwardCache {
  const GraphBatch* batch = nullptr;
  GcnParams params;
  DenseMatrix propagated_x;   // A X
  DenseMatrix z1, h1;         // A X W1 + b1, relu
  DenseMatrix propagated_h1;  // A H1
  DenseMatrix z2, h2;         // A H1 W2 + b2, relu
  DenseMatrix readout;        // per-graph mean of H2
  DenseMatrix mask;           // inverted dropout mask on the readout
  DenseMatrix dropped;        // readout * mask
  DenseMatrix logits;
  DenseMatrix probabilities;  // softmax of logits, graphs x 2
};

/// Inference: no dropout, no PRNG use. Returns graphs x 2 class probabilities.
DenseMatrix forward_infer(const GraphBatch& batch, const GcnParams& params);

/// Training: inverted dropout with probability `dropout_p` on the readout.
ForwardCache forward_train(const GraphBatch& batch, const GcnParams& params, SeededRng& rng, double dropout_p);

/// Positive-class probability column of a forward result.
std::vector<double> attacked_probabilities(const DenseMatrix& probabilities);

inline constexpr double kProbabilityClamp = 1e-12;

/// Mean binary cross-entropy of attacked-probabilities against 0/1 labels,
/// probabilities clamped to [1e-12, 1 - 1e-12]. Throws EmptyBatchLabels,
/// LengthMismatch.
double bce_loss(std::span<const double> attacked_probability, std::span<const int> labels);

/// Exact gradient of bce_loss(forward_train(...)) with respect to every parameter.
GcnGradients backward(const ForwardCache& cache, std::span<const int> labels);

std::vector<int> label_vector(std::span<const GraphLabel> labels);

enum class OptimizerKind : std::uint8_t { SGD, Adam };

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  double dropout_p = 0.5;
  AdjacencyMode adjacency_mode = AdjacencyMode::SymNormSelfLoop;
  bool normalize_features = false;
  std::size_t early_stop_patience = 0;  // 0 = off; needs validation graphs
  bool allow_single_class = false;
};

/// Throws BadConfig.
void validate_config(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;      // mean over the epoch's training-mode batches
  double train_accuracy = 0.0;  // inference-mode, after the epoch
  std::optional<double> validation_loss;
  std::optional<double> validation_accuracy;
};

struct TrainResult {
  GcnParams params;
  std::vector<EpochRecord> history;
};

/// Seeded mini-batch training. Fully deterministic in (graphs, config).
/// Throws EmptyDataset; SingleClassDataset unless config.allow_single_class.
TrainResult train(std::span<const MessageGraph> graphs, const TrainConfig& config,
                  std::span<const MessageGraph> validation = {});
TrainResult train(std::span<const GraphTensors> graphs, const TrainConfig& config,
                  std::span<const GraphTensors> validation = {});

struct InferenceOptions {
  AdjacencyMode adjacency_mode = AdjacencyMode::SymNormSelfLoop;
  bool normalize_features = false;
  double threshold = 0.5;  // ties go to Attacked
};

struct Prediction {
  GraphLabel label = GraphLabel::AttackFree;
  double attacked_probability = 0.0;
};

Prediction predict(const MessageGraph& graph, const GcnParams& params, const InferenceOptions& options = {});

/// Batched inference in chunks of `batch_size` graphs.
std::vector<Prediction> predict_all(std::span<const GraphTensors> graphs, const GcnParams& params,
                                    double threshold = 0.5, std::size_t batch_size = 256);

// Model file: "GCNIDS01", then per tensor (W1, b1, W2, b2, Wc, bc) two u32 LE dims
// and row-major f64 LE values.
inline constexpr char kModelMagic[] = "GCNIDS01";

std::vector<std::uint8_t> encode_params(const GcnParams& params);
/// Throws BadMagic, VersionMismatch, ShapeMismatch, IoError (truncated).
GcnParams decode_params(std::span<const std::uint8_t> bytes);
void save_params(const GcnParams& params, const std::string& path);
GcnParams load_params(const std::string& path);

}  // namespace canids
