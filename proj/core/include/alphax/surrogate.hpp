#pragma once

// The meta-DNN: a from-scratch MLP regressor over architecture encodings
// (rectifier hidden layers, logistic output, Adam updates, hand-derived
// gradients) and the multi-stage variant: a softmax router picking one of
// S range-specialist regressors.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "alphax/space.hpp"
#include "alphax/util.hpp"
#include "json.hpp"

namespace alphax {

struct MlpTopology {
  int input_dim = 56;
  std::vector<int> hidden = {512, 2048, 2048, 512};
  int output_dim = 1;

  static MlpTopology paper_default(int input_dim) {
    return {input_dim, {512, 2048, 2048, 512}, 1};
  }
  bool operator==(const MlpTopology&) const = default;
};

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 0.00002;
  int batch_size = 128;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double init_range = 0.1;  // uniform init on [-init_range, init_range]
};

enum class OutputHead { Sigmoid, Softmax };
enum class Loss { MeanSquaredError, CrossEntropy };

struct Gradients {
  std::vector<std::vector<double>> weights;  // per layer, row-major
  std::vector<std::vector<double>> biases;
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpTopology topo, OutputHead head, double init_range, Rng& rng);

  // Full output vector; ReLU hidden layers, head on the final layer.
  std::vector<double> forward(const std::vector<double>& x) const;
  // Scalar prediction in (0, 1); requires output_dim == 1.
  double forward_scalar(const std::vector<double>& x) const;

  // Exact analytic gradients of the loss over the batch.
  // MSE pairs with the sigmoid head (targets = scalars), cross-entropy
  // with softmax (targets = class labels cast to double).
  Gradients gradients(const std::vector<std::vector<double>>& xs,
                      const std::vector<double>& targets, Loss loss) const;

  double loss_value(const std::vector<std::vector<double>>& xs,
                    const std::vector<double>& targets, Loss loss) const;

  // One Adam step with the given gradients.
  void adam_step(const Gradients& g, const TrainConfig& cfg);

  // cfg.epochs passes of shuffled mini-batches. Throws EmptyPredictions
  // on an empty sample list.
  void train(const std::vector<std::vector<double>>& xs,
             const std::vector<double>& targets, Loss loss,
             const TrainConfig& cfg, Rng& rng);

  const MlpTopology& topology() const { return topo_; }
  OutputHead head() const { return head_; }
  std::size_t num_layers() const { return weights_.size(); }
  std::vector<double>& weights(std::size_t layer) { return weights_[layer]; }
  std::vector<double>& biases(std::size_t layer) { return biases_[layer]; }
  const std::vector<double>& weights(std::size_t layer) const { return weights_[layer]; }
  const std::vector<double>& biases(std::size_t layer) const { return biases_[layer]; }
  int layer_rows(std::size_t layer) const { return dims_[layer + 1]; }
  int layer_cols(std::size_t layer) const { return dims_[layer]; }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  MlpTopology topo_;
  OutputHead head_ = OutputHead::Sigmoid;
  std::vector<int> dims_;                    // input, hidden..., output
  std::vector<std::vector<double>> weights_;  // [layer][row*cols+col]
  std::vector<std::vector<double>> biases_;
  // Adam state.
  std::vector<std::vector<double>> m_w_, v_w_, m_b_, v_b_;
  long adam_t_ = 0;
};

// Append-only (encoding, accuracy) pairs gathered during search.
class SampleSet {
 public:
  void add(const EncodingVector& enc, double accuracy);
  std::size_t size() const { return encodings_.size(); }
  bool empty() const { return encodings_.empty(); }
  const std::vector<EncodingVector>& encodings() const { return encodings_; }
  const std::vector<double>& accuracies() const { return accuracies_; }

  nlohmann::json to_json() const;
  static SampleSet from_json(const nlohmann::json& j, SpaceKind space);

 private:
  std::vector<EncodingVector> encodings_;
  std::vector<double> accuracies_;
};

// Encoding digits scaled by the per-space maximum digit value.
std::vector<double> encoding_features(const EncodingVector& enc);

// The surrogate interface the search engine consumes.
class Surrogate {
 public:
  virtual ~Surrogate() = default;
  virtual double predict(const EncodingVector& enc) const = 0;
  // Online retrain on the accumulated samples (continues from the
  // current weights).
  virtual void fit(const SampleSet& samples, Rng& rng) = 0;
  virtual nlohmann::json to_json() const = 0;
  virtual void load_json(const nlohmann::json& j) = 0;
};

class MultiStageModel final : public Surrogate {
 public:
  MultiStageModel() = default;
  MultiStageModel(SpaceKind space, MlpTopology expert_topo, int stages,
                  TrainConfig cfg, std::uint64_t init_seed);

  // Router argmax picks the expert; its output is clamped to [0,1].
  // Experts that never saw data fall back to the mean observed accuracy
  // (0.5 before any data).
  double predict(const EncodingVector& enc) const override;

  // Router trained as a classifier on stage labels floor(acc*S) (top
  // stage clamped); each expert trained only on samples in its range.
  void fit(const SampleSet& samples, Rng& rng) override;

  int stage_of(double accuracy) const;
  int stages() const { return stages_; }
  const Mlp& router() const { return router_; }
  const Mlp& expert(int i) const { return experts_[static_cast<std::size_t>(i)]; }
  bool expert_has_data(int i) const { return expert_samples_[static_cast<std::size_t>(i)] > 0; }

  nlohmann::json to_json() const override;
  void load_json(const nlohmann::json& j) override;

 private:
  SpaceKind space_ = SpaceKind::NasBenchDag;
  int stages_ = 4;
  TrainConfig cfg_;
  Mlp router_;
  std::vector<Mlp> experts_;
  std::vector<long> expert_samples_;
  double mean_accuracy_ = 0.5;
  long seen_ = 0;
};

// Constant predictor used by the meta-DNN ablation: q-hat is the running
// mean of observed accuracies (0.5 before any data).
class ConstantMeanSurrogate final : public Surrogate {
 public:
  double predict(const EncodingVector&) const override { return mean_; }
  void fit(const SampleSet& samples, Rng&) override;
  nlohmann::json to_json() const override;
  void load_json(const nlohmann::json& j) override;

 private:
  double mean_ = 0.5;
};

// Standard Pearson coefficient. Throws DegenerateVariance on zero
// variance or fewer than two points.
double pearson_correlation(const std::vector<double>& preds,
                           const std::vector<double>& truths);

}  // namespace alphax
