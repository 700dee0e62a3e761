#include "alphax/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace alphax {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void softmax_inplace(std::vector<double>& z) {
  double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

}  // namespace

Mlp::Mlp(MlpTopology topo, OutputHead head, double init_range, Rng& rng)
    : topo_(std::move(topo)), head_(head) {
  dims_.push_back(topo_.input_dim);
  for (int h : topo_.hidden) dims_.push_back(h);
  dims_.push_back(topo_.output_dim);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    std::size_t rows = static_cast<std::size_t>(dims_[l + 1]);
    std::size_t cols = static_cast<std::size_t>(dims_[l]);
    std::vector<double> w(rows * cols), b(rows);
    for (double& x : w) x = (uniform_real(rng) * 2.0 - 1.0) * init_range;
    for (double& x : b) x = (uniform_real(rng) * 2.0 - 1.0) * init_range;
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
  }
  auto zeros_like = [](const std::vector<std::vector<double>>& src) {
    std::vector<std::vector<double>> z;
    for (const auto& v : src) z.emplace_back(v.size(), 0.0);
    return z;
  };
  m_w_ = zeros_like(weights_);
  v_w_ = zeros_like(weights_);
  m_b_ = zeros_like(biases_);
  v_b_ = zeros_like(biases_);
}

std::vector<double> Mlp::forward(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != topo_.input_dim)
    throw DimensionMismatch("input size " + std::to_string(x.size()) +
                            " != " + std::to_string(topo_.input_dim));
  std::vector<double> a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    std::size_t rows = static_cast<std::size_t>(dims_[l + 1]);
    std::size_t cols = static_cast<std::size_t>(dims_[l]);
    std::vector<double> z(rows);
    const double* w = weights_[l].data();
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = biases_[l][r];
      const double* wr = w + r * cols;
      for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * a[c];
      z[r] = acc;
    }
    if (l + 1 < weights_.size()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;  // ReLU
    } else if (head_ == OutputHead::Sigmoid) {
      for (double& v : z) v = sigmoid(v);
    } else {
      softmax_inplace(z);
    }
    a = std::move(z);
  }
  return a;
}

double Mlp::forward_scalar(const std::vector<double>& x) const {
  return forward(x)[0];
}

Gradients Mlp::gradients(const std::vector<std::vector<double>>& xs,
                         const std::vector<double>& targets, Loss loss) const {
  if (xs.empty()) throw EmptyPredictions("empty batch");
  Gradients g;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.weights.emplace_back(weights_[l].size(), 0.0);
    g.biases.emplace_back(biases_[l].size(), 0.0);
  }
  const double inv_batch = 1.0 / static_cast<double>(xs.size());
  const std::size_t L = weights_.size();

  for (std::size_t n = 0; n < xs.size(); ++n) {
    // Forward pass keeping activations.
    std::vector<std::vector<double>> acts;  // acts[0] = input
    acts.push_back(xs[n]);
    for (std::size_t l = 0; l < L; ++l) {
      std::size_t rows = static_cast<std::size_t>(dims_[l + 1]);
      std::size_t cols = static_cast<std::size_t>(dims_[l]);
      std::vector<double> z(rows);
      const double* w = weights_[l].data();
      const auto& a = acts.back();
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = biases_[l][r];
        const double* wr = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * a[c];
        z[r] = acc;
      }
      if (l + 1 < L) {
        for (double& v : z) v = v > 0.0 ? v : 0.0;
      } else if (head_ == OutputHead::Sigmoid) {
        for (double& v : z) v = sigmoid(v);
      } else {
        softmax_inplace(z);
      }
      acts.push_back(std::move(z));
    }

    // Output-layer delta (dL/dz_out).
    std::vector<double> delta(static_cast<std::size_t>(dims_[L]));
    const auto& out = acts[L];
    if (loss == Loss::MeanSquaredError) {
      // L = mean_n (p - y)^2, p = sigmoid(z):  dL/dz = 2(p-y) p(1-p) / B
      for (std::size_t r = 0; r < delta.size(); ++r) {
        double p = out[r];
        delta[r] = 2.0 * (p - targets[n]) * p * (1.0 - p) * inv_batch;
      }
    } else {
      // L = mean_n -log softmax(z)[label]:  dL/dz = (softmax - onehot) / B
      auto label = static_cast<std::size_t>(targets[n]);
      for (std::size_t r = 0; r < delta.size(); ++r)
        delta[r] = (out[r] - (r == label ? 1.0 : 0.0)) * inv_batch;
    }

    // Backward pass.
    for (std::size_t li = L; li-- > 0;) {
      std::size_t rows = static_cast<std::size_t>(dims_[li + 1]);
      std::size_t cols = static_cast<std::size_t>(dims_[li]);
      const auto& a = acts[li];
      double* gw = g.weights[li].data();
      for (std::size_t r = 0; r < rows; ++r) {
        g.biases[li][r] += delta[r];
        double* gwr = gw + r * cols;
        const double dr = delta[r];
        for (std::size_t c = 0; c < cols; ++c) gwr[c] += dr * a[c];
      }
      if (li == 0) break;
      std::vector<double> prev(cols, 0.0);
      const double* w = weights_[li].data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double dr = delta[r];
        const double* wr = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) prev[c] += dr * wr[c];
      }
      // ReLU derivative via the stored activation.
      for (std::size_t c = 0; c < cols; ++c)
        if (a[c] <= 0.0) prev[c] = 0.0;
      delta = std::move(prev);
    }
  }
  return g;
}

double Mlp::loss_value(const std::vector<std::vector<double>>& xs,
                       const std::vector<double>& targets, Loss loss) const {
  double total = 0.0;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    auto out = forward(xs[n]);
    if (loss == Loss::MeanSquaredError) {
      double r = out[0] - targets[n];
      total += r * r;
    } else {
      auto label = static_cast<std::size_t>(targets[n]);
      total += -std::log(std::max(out[label], 1e-300));
    }
  }
  return total / static_cast<double>(xs.size());
}

void Mlp::adam_step(const Gradients& g, const TrainConfig& cfg) {
  ++adam_t_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t_));
  auto update = [&](std::vector<double>& p, const std::vector<double>& grad,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
      p[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
    }
  };
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    update(weights_[l], g.weights[l], m_w_[l], v_w_[l]);
    update(biases_[l], g.biases[l], m_b_[l], v_b_[l]);
  }
}

void Mlp::train(const std::vector<std::vector<double>>& xs,
                const std::vector<double>& targets, Loss loss,
                const TrainConfig& cfg, Rng& rng) {
  if (xs.empty()) throw EmptyPredictions("train on an empty sample set");
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    deterministic_shuffle(order, rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(),
                                 start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<std::vector<double>> bx;
      std::vector<double> by;
      bx.reserve(end - start);
      by.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        bx.push_back(xs[order[i]]);
        by.push_back(targets[order[i]]);
      }
      adam_step(gradients(bx, by, loss), cfg);
    }
  }
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json j;
  j["input_dim"] = topo_.input_dim;
  j["hidden"] = topo_.hidden;
  j["output_dim"] = topo_.output_dim;
  j["head"] = head_ == OutputHead::Sigmoid ? "sigmoid" : "softmax";
  j["weights"] = weights_;
  j["biases"] = biases_;
  j["adam_m_w"] = m_w_;
  j["adam_v_w"] = v_w_;
  j["adam_m_b"] = m_b_;
  j["adam_v_b"] = v_b_;
  j["adam_t"] = adam_t_;
  return j;
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp m;
  m.topo_.input_dim = j["input_dim"].get<int>();
  m.topo_.hidden = j["hidden"].get<std::vector<int>>();
  m.topo_.output_dim = j["output_dim"].get<int>();
  m.head_ = j["head"].get<std::string>() == "sigmoid" ? OutputHead::Sigmoid
                                                      : OutputHead::Softmax;
  m.dims_.push_back(m.topo_.input_dim);
  for (int h : m.topo_.hidden) m.dims_.push_back(h);
  m.dims_.push_back(m.topo_.output_dim);
  m.weights_ = j["weights"].get<std::vector<std::vector<double>>>();
  m.biases_ = j["biases"].get<std::vector<std::vector<double>>>();
  m.m_w_ = j["adam_m_w"].get<std::vector<std::vector<double>>>();
  m.v_w_ = j["adam_v_w"].get<std::vector<std::vector<double>>>();
  m.m_b_ = j["adam_m_b"].get<std::vector<std::vector<double>>>();
  m.v_b_ = j["adam_v_b"].get<std::vector<std::vector<double>>>();
  m.adam_t_ = j["adam_t"].get<long>();
  return m;
}

void SampleSet::add(const EncodingVector& enc, double accuracy) {
  encodings_.push_back(enc);
  accuracies_.push_back(accuracy);
}

nlohmann::json SampleSet::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < encodings_.size(); ++i)
    arr.push_back({{"encoding", encodings_[i].digits},
                   {"accuracy", accuracies_[i]}});
  return arr;
}

SampleSet SampleSet::from_json(const nlohmann::json& j, SpaceKind space) {
  SampleSet s;
  for (const auto& e : j) {
    EncodingVector v;
    v.space = space;
    v.digits = e["encoding"].get<std::vector<int>>();
    s.add(v, e["accuracy"].get<double>());
  }
  return s;
}

std::vector<double> encoding_features(const EncodingVector& enc) {
  double scale = 1.0 / static_cast<double>(encoding_max_digit(enc.space));
  std::vector<double> x(enc.digits.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<double>(enc.digits[i]) * scale;
  return x;
}

MultiStageModel::MultiStageModel(SpaceKind space, MlpTopology expert_topo,
                                 int stages, TrainConfig cfg,
                                 std::uint64_t init_seed)
    : space_(space), stages_(stages), cfg_(cfg) {
  Rng rng(init_seed);
  MlpTopology router_topo = expert_topo;
  router_topo.output_dim = stages;
  router_ = Mlp(router_topo, OutputHead::Softmax, cfg.init_range, rng);
  for (int i = 0; i < stages; ++i)
    experts_.emplace_back(expert_topo, OutputHead::Sigmoid, cfg.init_range, rng);
  expert_samples_.assign(static_cast<std::size_t>(stages), 0);
}

int MultiStageModel::stage_of(double accuracy) const {
  int s = static_cast<int>(std::floor(accuracy * stages_));
  return std::clamp(s, 0, stages_ - 1);
}

double MultiStageModel::predict(const EncodingVector& enc) const {
  auto x = encoding_features(enc);
  auto probs = router_.forward(x);
  int stage = static_cast<int>(
      std::max_element(probs.begin(), probs.end()) - probs.begin());
  if (!expert_has_data(stage)) return seen_ > 0 ? mean_accuracy_ : 0.5;
  double p = experts_[static_cast<std::size_t>(stage)].forward_scalar(x);
  return std::clamp(p, 0.0, 1.0);
}

void MultiStageModel::fit(const SampleSet& samples, Rng& rng) {
  if (samples.empty()) throw EmptyPredictions("fit on an empty sample set");
  std::vector<std::vector<double>> xs;
  std::vector<double> labels;
  std::vector<std::vector<std::vector<double>>> expert_xs(
      static_cast<std::size_t>(stages_));
  std::vector<std::vector<double>> expert_ys(static_cast<std::size_t>(stages_));
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto x = encoding_features(samples.encodings()[i]);
    double acc = samples.accuracies()[i];
    int stage = stage_of(acc);
    xs.push_back(x);
    labels.push_back(static_cast<double>(stage));
    expert_xs[static_cast<std::size_t>(stage)].push_back(std::move(x));
    expert_ys[static_cast<std::size_t>(stage)].push_back(acc);
    sum += acc;
  }
  mean_accuracy_ = sum / static_cast<double>(samples.size());
  seen_ = static_cast<long>(samples.size());

  router_.train(xs, labels, Loss::CrossEntropy, cfg_, rng);
  for (int s = 0; s < stages_; ++s) {
    auto& ex = expert_xs[static_cast<std::size_t>(s)];
    if (ex.empty()) continue;  // untouched experts remain at initialization
    experts_[static_cast<std::size_t>(s)].train(
        ex, expert_ys[static_cast<std::size_t>(s)], Loss::MeanSquaredError,
        cfg_, rng);
    expert_samples_[static_cast<std::size_t>(s)] =
        static_cast<long>(ex.size());
  }
}

nlohmann::json MultiStageModel::to_json() const {
  nlohmann::json j;
  j["kind"] = "multistage";
  j["space"] = to_string(space_);
  j["stages"] = stages_;
  j["router"] = router_.to_json();
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& e : experts_) ex.push_back(e.to_json());
  j["experts"] = ex;
  j["expert_samples"] = expert_samples_;
  j["mean_accuracy"] = mean_accuracy_;
  j["seen"] = seen_;
  j["epochs"] = cfg_.epochs;
  j["learning_rate"] = cfg_.learning_rate;
  j["batch_size"] = cfg_.batch_size;
  return j;
}

void MultiStageModel::load_json(const nlohmann::json& j) {
  space_ = space_kind_from_string(j["space"].get<std::string>());
  stages_ = j["stages"].get<int>();
  router_ = Mlp::from_json(j["router"]);
  experts_.clear();
  for (const auto& e : j["experts"]) experts_.push_back(Mlp::from_json(e));
  expert_samples_ = j["expert_samples"].get<std::vector<long>>();
  mean_accuracy_ = j["mean_accuracy"].get<double>();
  seen_ = j["seen"].get<long>();
  cfg_.epochs = j["epochs"].get<int>();
  cfg_.learning_rate = j["learning_rate"].get<double>();
  cfg_.batch_size = j["batch_size"].get<int>();
}

void ConstantMeanSurrogate::fit(const SampleSet& samples, Rng&) {
  if (samples.empty()) throw EmptyPredictions("fit on an empty sample set");
  double sum = 0.0;
  for (double a : samples.accuracies()) sum += a;
  mean_ = sum / static_cast<double>(samples.size());
}

nlohmann::json ConstantMeanSurrogate::to_json() const {
  return {{"kind", "constant_mean"}, {"mean", mean_}};
}

void ConstantMeanSurrogate::load_json(const nlohmann::json& j) {
  mean_ = j["mean"].get<double>();
}

double pearson_correlation(const std::vector<double>& preds,
                           const std::vector<double>& truths) {
  if (preds.size() != truths.size() || preds.size() < 2)
    throw DegenerateVariance("need two equal-length series");
  double n = static_cast<double>(preds.size());
  double mp = std::accumulate(preds.begin(), preds.end(), 0.0) / n;
  double mt = std::accumulate(truths.begin(), truths.end(), 0.0) / n;
  double sp = 0.0, st = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double dp = preds[i] - mp;
    double dt = truths[i] - mt;
    sp += dp * dp;
    st += dt * dt;
    cov += dp * dt;
  }
  if (sp == 0.0 || st == 0.0)
    throw DegenerateVariance("zero variance in a series");
  return cov / std::sqrt(sp * st);
}

}  // namespace alphax
