#include "canids/gcn.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

namespace canids {

namespace {

struct ForwardCore {
  DenseMatrix propagated_x, z1, h1, propagated_h1, z2, h2, readout;
};

ForwardCore forward_core(const GraphBatch& batch, const GcnParams& params) {
  if (batch.features.cols() != kInputChannels) {
    throw Error(ErrorCode::ShapeMismatch, "batch features must have 2 columns");
  }
  ForwardCore c;
  c.propagated_x = matmul(batch.adjacency, batch.features);
  c.z1 = add_row_broadcast(matmul(c.propagated_x, params.w1), params.b1);
  c.h1 = relu(c.z1);
  c.propagated_h1 = matmul(batch.adjacency, c.h1);
  c.z2 = add_row_broadcast(matmul(c.propagated_h1, params.w2), params.b2);
  c.h2 = relu(c.z2);
  c.readout = segment_mean(c.h2, batch.graph_of_node, batch.graph_count());
  return c;
}

DenseMatrix head(const DenseMatrix& pooled, const GcnParams& params) {
  return add_row_broadcast(matmul(pooled, params.wc), params.bc);
}

std::array<DenseMatrix*, 6> tensors(GcnParams& p) { return {&p.w1, &p.b1, &p.w2, &p.b2, &p.wc, &p.bc}; }
std::array<const DenseMatrix*, 6> tensors(const GcnParams& p) {
  return {&p.w1, &p.b1, &p.w2, &p.b2, &p.wc, &p.bc};
}

void check_shape(const DenseMatrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorCode::ShapeMismatch, std::string(name) + " must be " + std::to_string(rows) + "x" +
                                              std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                                              std::to_string(m.cols()));
  }
}

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& config) : config_(config) {}

  void step(GcnParams& params, const GcnGradients& grads) {
    const auto p = tensors(params);
    const auto g = tensors(grads);
    const double lr = config_.learning_rate;
    if (config_.optimizer == OptimizerKind::SGD) {
      for (std::size_t t = 0; t < p.size(); ++t) {
        auto pv = p[t]->values();
        auto gv = g[t]->values();
        for (std::size_t i = 0; i < pv.size(); ++i) pv[i] -= lr * gv[i];
      }
      return;
    }
    ++steps_;
    const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.epsilon;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const auto m = tensors(first_moment_);
    const auto v = tensors(second_moment_);
    for (std::size_t t = 0; t < p.size(); ++t) {
      auto pv = p[t]->values();
      auto gv = g[t]->values();
      auto mv = m[t]->values();
      auto vv = v[t]->values();
      for (std::size_t i = 0; i < pv.size(); ++i) {
        mv[i] = b1 * mv[i] + (1.0 - b1) * gv[i];
        vv[i] = b2 * vv[i] + (1.0 - b2) * gv[i] * gv[i];
        pv[i] -= lr * (mv[i] / c1) / (std::sqrt(vv[i] / c2) + eps);
      }
    }
  }

 private:
  TrainConfig config_;
  GcnParams first_moment_;
  GcnParams second_moment_;
  std::uint64_t steps_ = 0;
};

double accuracy_of(std::span<const Prediction> preds, std::span<const GraphTensors> graphs) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i].label == graphs[i].label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double infer_loss(std::span<const Prediction> preds, std::span<const GraphTensors> graphs) {
  std::vector<double> p;
  std::vector<int> y;
  p.reserve(preds.size());
  y.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    p.push_back(preds[i].attacked_probability);
    y.push_back(graphs[i].label == GraphLabel::Attacked ? 1 : 0);
  }
  return bce_loss(p, y);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t take(std::size_t width) {
    if (pos_ + width > bytes_.size()) throw Error(ErrorCode::IoError, "model file is truncated");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

GcnParams init_params(std::uint64_t seed) {
  SeededRng rng(seed);
  GcnParams p;
  auto glorot = [&rng](DenseMatrix& w) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (auto& v : w.values()) v = rng.uniform(-bound, bound);
  };
  glorot(p.w1);
  glorot(p.w2);
  glorot(p.wc);
  return p;
}

void validate_params(const GcnParams& params) {
  check_shape(params.w1, kInputChannels, kHiddenChannels, "W1");
  check_shape(params.b1, 1, kHiddenChannels, "b1");
  check_shape(params.w2, kHiddenChannels, kHiddenChannels, "W2");
  check_shape(params.b2, 1, kHiddenChannels, "b2");
  check_shape(params.wc, kHiddenChannels, kClasses, "Wc");
  check_shape(params.bc, 1, kClasses, "bc");
  static constexpr const char* kNames[] = {"W1", "b1", "W2", "b2", "Wc", "bc"};
  const auto all = tensors(params);
  for (std::size_t t = 0; t < all.size(); ++t) require_finite(*all[t], kNames[t]);
}

DenseMatrix forward_infer(const GraphBatch& batch, const GcnParams& params) {
  validate_params(params);
  const auto core = forward_core(batch, params);
  return softmax_rows(head(core.readout, params));
}

ForwardCache forward_train(const GraphBatch& batch, const GcnParams& params, SeededRng& rng, double dropout_p) {
  validate_params(params);
  auto core = forward_core(batch, params);
  ForwardCache cache;
  cache.batch = &batch;
  cache.params = params;
  cache.mask = dropout_mask(rng, core.readout.rows(), core.readout.cols(), dropout_p);
  cache.dropped = elementwise_mul(core.readout, cache.mask);
  cache.logits = head(cache.dropped, params);
  cache.probabilities = softmax_rows(cache.logits);
  cache.propagated_x = std::move(core.propagated_x);
  cache.z1 = std::move(core.z1);
  cache.h1 = std::move(core.h1);
  cache.propagated_h1 = std::move(core.propagated_h1);
  cache.z2 = std::move(core.z2);
  cache.h2 = std::move(core.h2);
  cache.readout = std::move(core.readout);
  return cache;
}

std::vector<double> attacked_probabilities(const DenseMatrix& probabilities) {
  std::vector<double> out(probabilities.rows());
  for (std::size_t r = 0; r < probabilities.rows(); ++r) out[r] = probabilities(r, 1);
  return out;
}

double bce_loss(std::span<const double> attacked_probability, std::span<const int> labels) {
  if (labels.empty()) throw Error(ErrorCode::EmptyBatchLabels, "bce_loss needs at least one sample");
  if (labels.size() != attacked_probability.size()) {
    throw Error(ErrorCode::LengthMismatch, "bce_loss: probabilities vs labels");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(attacked_probability[i])) throw Error(ErrorCode::FiniteViolation, "bce_loss");
    const double p = std::clamp(attacked_probability[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total += labels[i] != 0 ? std::log(p) : std::log(1.0 - p);
  }
  return -total / static_cast<double>(labels.size());
}

GcnGradients backward(const ForwardCache& cache, std::span<const int> labels) {
  if (cache.batch == nullptr) throw Error(ErrorCode::CacheMismatch, "cache holds no batch");
  const auto& batch = *cache.batch;
  const auto graphs = cache.probabilities.rows();
  if (labels.size() != graphs || batch.graph_count() != graphs || cache.h2.rows() != batch.node_count()) {
    throw Error(ErrorCode::CacheMismatch, "labels/cache/batch sizes disagree");
  }
  // Softmax + cross-entropy: d loss / d logits = (probabilities - one_hot) / N.
  DenseMatrix d_logits = cache.probabilities;
  const double inv_n = 1.0 / static_cast<double>(graphs);
  for (std::size_t r = 0; r < graphs; ++r) {
    d_logits(r, static_cast<std::size_t>(labels[r] != 0 ? 1 : 0)) -= 1.0;
    for (auto& v : d_logits.row(r)) v *= inv_n;
  }
  const auto& p = cache.params;
  GcnGradients g;
  g.wc = matmul(transpose(cache.dropped), d_logits);
  g.bc = column_sums(d_logits);
  const auto d_readout = elementwise_mul(matmul(d_logits, transpose(p.wc)), cache.mask);
  const auto d_h2 = segment_mean_backward(d_readout, batch.graph_of_node, batch.node_count());
  const auto d_z2 = relu_backward(cache.z2, d_h2);
  g.w2 = matmul(transpose(cache.propagated_h1), d_z2);
  g.b2 = column_sums(d_z2);
  const auto d_h1 = matmul(batch.adjacency.transposed(), matmul(d_z2, transpose(p.w2)));
  const auto d_z1 = relu_backward(cache.z1, d_h1);
  g.w1 = matmul(transpose(cache.propagated_x), d_z1);
  g.b1 = column_sums(d_z1);
  return g;
}

std::vector<int> label_vector(std::span<const GraphLabel> labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (auto l : labels) out.push_back(l == GraphLabel::Attacked ? 1 : 0);
  return out;
}

void validate_config(const TrainConfig& config) {
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    throw Error(ErrorCode::BadConfig, "learning rate must be > 0");
  }
  if (!(config.dropout_p >= 0.0 && config.dropout_p < 1.0)) {
    throw Error(ErrorCode::BadConfig, "dropout probability must be in [0, 1)");
  }
  if (config.batch_size == 0) throw Error(ErrorCode::BadConfig, "batch size must be > 0");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0) ||
      !(config.epsilon > 0.0)) {
    throw Error(ErrorCode::BadConfig, "bad Adam hyperparameters");
  }
}

TrainResult train(std::span<const GraphTensors> graphs, const TrainConfig& config,
                  std::span<const GraphTensors> validation) {
  validate_config(config);
  if (graphs.empty()) throw Error(ErrorCode::EmptyDataset, "no training graphs");
  const auto positives = std::count_if(graphs.begin(), graphs.end(),
                                       [](const GraphTensors& g) { return g.label == GraphLabel::Attacked; });
  if ((positives == 0 || static_cast<std::size_t>(positives) == graphs.size()) && !config.allow_single_class) {
    throw Error(ErrorCode::SingleClassDataset, "training graphs contain a single label");
  }

  TrainResult result;
  result.params = init_params(config.seed);
  SeededRng rng(derive_seed(config.seed, 1));
  Optimizer optimizer(config);

  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const GraphTensors*> members;
  std::vector<int> labels;

  std::optional<double> best_val;
  GcnParams best_params = result.params;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto stop = std::min(order.size(), start + config.batch_size);
      members.clear();
      for (auto i = start; i < stop; ++i) members.push_back(&graphs[order[i]]);
      const auto batch = batch_graphs(std::span<const GraphTensors* const>(members));
      labels = label_vector(batch.labels);
      const auto cache = forward_train(batch, result.params, rng, config.dropout_p);
      loss_sum += bce_loss(attacked_probabilities(cache.probabilities), labels) * static_cast<double>(stop - start);
      optimizer.step(result.params, backward(cache, labels));
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(graphs.size());
    const auto train_preds = predict_all(graphs, result.params);
    record.train_accuracy = accuracy_of(train_preds, graphs);
    if (!validation.empty()) {
      const auto val_preds = predict_all(validation, result.params);
      record.validation_loss = infer_loss(val_preds, validation);
      record.validation_accuracy = accuracy_of(val_preds, validation);
    }
    result.history.push_back(record);

    if (config.early_stop_patience > 0 && record.validation_loss) {
      if (!best_val || *record.validation_loss < *best_val) {
        best_val = record.validation_loss;
        best_params = result.params;
        since_best = 0;
      } else if (++since_best >= config.early_stop_patience) {
        result.params = best_params;
        break;
      }
    }
  }
  return result;
}

TrainResult train(std::span<const MessageGraph> graphs, const TrainConfig& config,
                  std::span<const MessageGraph> validation) {
  auto prepare = [&config](std::span<const MessageGraph> in) {
    std::vector<GraphTensors> out(in.size());
    const auto n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] =
          prepare_graph(in[static_cast<std::size_t>(i)], config.adjacency_mode, config.normalize_features);
    }
    return out;
  };
  const auto train_set = prepare(graphs);
  const auto val_set = prepare(validation);
  return train(std::span<const GraphTensors>(train_set), config, std::span<const GraphTensors>(val_set));
}

Prediction predict(const MessageGraph& graph, const GcnParams& params, const InferenceOptions& options) {
  const GraphTensors tensors = prepare_graph(graph, options.adjacency_mode, options.normalize_features);
  return predict_all(std::span<const GraphTensors>(&tensors, 1), params, options.threshold).front();
}

std::vector<Prediction> predict_all(std::span<const GraphTensors> graphs, const GcnParams& params, double threshold,
                                    std::size_t batch_size) {
  std::vector<Prediction> out;
  out.reserve(graphs.size());
  std::vector<const GraphTensors*> members;
  for (std::size_t start = 0; start < graphs.size(); start += batch_size) {
    const auto stop = std::min(graphs.size(), start + batch_size);
    members.clear();
    for (auto i = start; i < stop; ++i) members.push_back(&graphs[i]);
    const auto probs = forward_infer(batch_graphs(std::span<const GraphTensors* const>(members)), params);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      const double p = probs(r, 1);
      out.push_back({p >= threshold ? GraphLabel::Attacked : GraphLabel::AttackFree, p});
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_params(const GcnParams& params) {
  validate_params(params);
  std::vector<std::uint8_t> out(kModelMagic, kModelMagic + 8);
  for (const auto* m : tensors(params)) {
    put_u32(out, static_cast<std::uint32_t>(m->rows()));
    put_u32(out, static_cast<std::uint32_t>(m->cols()));
    for (auto v : m->values()) put_f64(out, v);
  }
  return out;
}

GcnParams decode_params(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw Error(ErrorCode::BadMagic, "model file shorter than its magic");
  if (std::memcmp(bytes.data(), kModelMagic, 6) != 0) throw Error(ErrorCode::BadMagic, "not a GCNIDS model file");
  if (std::memcmp(bytes.data() + 6, kModelMagic + 6, 2) != 0) {
    throw Error(ErrorCode::VersionMismatch, "model format version '" +
                                                std::string(reinterpret_cast<const char*>(bytes.data()) + 6, 2) +
                                                "', expected '01'");
  }
  ByteReader reader(bytes.subspan(8));
  GcnParams p;
  const std::pair<DenseMatrix*, std::pair<std::size_t, std::size_t>> layout[] = {
      {&p.w1, {kInputChannels, kHiddenChannels}},
      {&p.b1, {1, kHiddenChannels}},
      {&p.w2, {kHiddenChannels, kHiddenChannels}},
      {&p.b2, {1, kHiddenChannels}},
      {&p.wc, {kHiddenChannels, kClasses}},
      {&p.bc, {1, kClasses}},
  };
  static constexpr const char* kNames[] = {"W1", "b1", "W2", "b2", "Wc", "bc"};
  for (std::size_t t = 0; t < std::size(layout); ++t) {
    auto [target, shape] = layout[t];
    const auto rows = reader.take(4);
    const auto cols = reader.take(4);
    if (rows != shape.first || cols != shape.second) {
      throw Error(ErrorCode::ShapeMismatch, std::string(kNames[t]) + " stored as " + std::to_string(rows) + "x" +
                                                std::to_string(cols) + ", architecture needs " +
                                                std::to_string(shape.first) + "x" + std::to_string(shape.second));
    }
    for (auto& v : target->values()) v = std::bit_cast<double>(reader.take(8));
  }
  if (!reader.at_end()) throw Error(ErrorCode::IoError, "trailing bytes after model payload");
  validate_params(p);
  return p;
}

void save_params(const GcnParams& params, const std::string& path) {
  const auto bytes = encode_params(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

GcnParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed for '" + path + "'");
  return decode_params(bytes);
}

}  // namespace canids
