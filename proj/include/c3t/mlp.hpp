#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "c3t/codec.hpp"
#include "c3t/errors.hpp"
#include "c3t/profile.hpp"
#include "c3t/rng.hpp"

namespace c3t {

/// Fully connected tanh network: input -> 5 hidden layers -> 1 output.
struct MlpArchitecture {
  int input_width = 0;
  std::vector<int> hidden;
  int output_width = 1;

  /// Widths [4n, 8n, 16n, 8n, 4n], each at least 8.
  static MlpArchitecture default_for(int input_width, int n) {
    MlpArchitecture a;
    a.input_width = input_width;
    for (int f : {4, 8, 16, 8, 4}) a.hidden.push_back(std::max(8, f * n));
    return a;
  }

  /// Layer sizes including input and output.
  std::vector<int> sizes() const {
    std::vector<int> s{input_width};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(output_width);
    return s;
  }

  void validate() const {
    if (input_width < 1) throw ValidationError("MLP input width must be >= 1");
    if (output_width != 1) throw ValidationError("MLP output width must be 1");
    if (hidden.size() != 5) throw ValidationError("MLP needs exactly 5 hidden layers");
    for (int w : hidden) {
      if (w < 1) throw ValidationError("MLP hidden widths must be positive");
    }
    // widths rise to the middle layer, then fall
    for (std::size_t i = 1; i <= 2; ++i) {
      if (hidden[i] < hidden[i - 1]) throw ValidationError("MLP widths must not shrink before the middle layer");
    }
    for (std::size_t i = 3; i < 5; ++i) {
      if (hidden[i] > hidden[i - 1]) throw ValidationError("MLP widths must not grow after the middle layer");
    }
  }

  bool operator==(const MlpArchitecture&) const = default;
};

struct DenseLayer {
  int in = 0;
  int out = 0;
  Vector weights;  ///< out x in, row-major
  Vector biases;
};

struct MlpWeights {
  MlpArchitecture arch;
  std::vector<DenseLayer> layers;

  static MlpWeights zeros(const MlpArchitecture& arch) {
    arch.validate();
    MlpWeights w;
    w.arch = arch;
    const auto s = arch.sizes();
    for (std::size_t l = 0; l + 1 < s.size(); ++l) {
      DenseLayer d;
      d.in = s[l];
      d.out = s[l + 1];
      d.weights.assign(static_cast<std::size_t>(d.in * d.out), 0.0);
      d.biases.assign(static_cast<std::size_t>(d.out), 0.0);
      w.layers.push_back(std::move(d));
    }
    return w;
  }

  /// LeCun uniform: U(-sqrt(3 / fan_in), sqrt(3 / fan_in)); zero biases.
  static MlpWeights lecun_uniform(const MlpArchitecture& arch, std::uint64_t seed) {
    MlpWeights w = zeros(arch);
    std::mt19937_64 gen(seed);
    for (auto& layer : w.layers) {
      const double limit = std::sqrt(3.0 / layer.in);
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& v : layer.weights) v = dist(gen);
    }
    return w;
  }

  std::size_t parameter_count() const {
    std::size_t c = 0;
    for (const auto& l : layers) c += l.weights.size() + l.biases.size();
    return c;
  }

  /// Visits every parameter in a fixed order: per layer, weights then biases.
  template <typename Fn>
  void for_each_parameter(Fn&& fn) {
    for (auto& l : layers) {
      for (double& v : l.weights) fn(v);
      for (double& v : l.biases) fn(v);
    }
  }
};

namespace detail {

/// Forward pass storing every layer's post-activation output.
inline double forward_cached(const MlpWeights& w, std::span<const double> x,
                             std::vector<Vector>& acts) {
  acts.resize(w.layers.size() + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const auto& layer = w.layers[l];
    const Vector& in = acts[l];
    Vector& out = acts[l + 1];
    out.resize(static_cast<std::size_t>(layer.out));
    for (int o = 0; o < layer.out; ++o) {
      const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
      double z = layer.biases[o];
      for (int i = 0; i < layer.in; ++i) z += row[i] * in[i];
      out[o] = std::tanh(z);
    }
  }
  return acts.back()[0];
}

}  // namespace detail

/// s_hat in (-1, 1); tanh on every layer including the output.
inline double mlp_forward(const MlpWeights& w, std::span<const double> features) {
  if (features.size() != static_cast<std::size_t>(w.arch.input_width)) {
    throw ValidationError("feature width " + std::to_string(features.size()) +
                          " does not match MLP input width " + std::to_string(w.arch.input_width));
  }
  std::vector<Vector> acts;
  return detail::forward_cached(w, features, acts);
}

/// Row-major feature matrix with one target per row.
struct Dataset {
  int width = 0;
  Vector features;
  Vector targets;

  std::size_t size() const noexcept { return targets.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(width), static_cast<std::size_t>(width)};
  }
  void push(std::span<const double> f, double target) {
    if (width == 0) width = static_cast<int>(f.size());
    if (f.size() != static_cast<std::size_t>(width)) throw ValidationError("dataset row width mismatch");
    features.insert(features.end(), f.begin(), f.end());
    targets.push_back(target);
  }
};

/// MSE loss over the listed rows and its gradient, shaped like the weights.
inline double loss_and_gradient(const MlpWeights& w, const Dataset& data,
                                std::span<const std::size_t> rows, MlpWeights& grad) {
  if (grad.layers.size() != w.layers.size()) grad = MlpWeights::zeros(w.arch);
  for (auto& l : grad.layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.biases.begin(), l.biases.end(), 0.0);
  }
  if (rows.empty()) throw TrainingError("empty batch");
  std::vector<Vector> acts;
  Vector delta;
  Vector prev_delta;
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (std::size_t r : rows) {
    const double out = detail::forward_cached(w, data.row(r), acts);
    const double err = out - data.targets[r];
    loss += err * err * inv;
    delta.assign(1, 2.0 * err * inv * (1.0 - out * out));
    for (std::size_t l = w.layers.size(); l-- > 0;) {
      const auto& layer = w.layers[l];
      auto& g = grad.layers[l];
      const Vector& in = acts[l];
      for (int o = 0; o < layer.out; ++o) {
        double* grow = g.weights.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) grow[i] += delta[o] * in[i];
        g.biases[o] += delta[o];
      }
      if (l == 0) break;
      prev_delta.assign(static_cast<std::size_t>(layer.in), 0.0);
      for (int o = 0; o < layer.out; ++o) {
        const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) prev_delta[i] += row[i] * delta[o];
      }
      for (int i = 0; i < layer.in; ++i) prev_delta[i] *= 1.0 - in[i] * in[i];
      std::swap(delta, prev_delta);
    }
  }
  return loss;
}

inline double mean_squared_error(const MlpWeights& w, const Dataset& data) {
  std::vector<Vector> acts;
  double acc = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const double e = detail::forward_cached(w, data.row(r), acts) - data.targets[r];
    acc += e * e;
  }
  return acc / static_cast<double>(data.size());
}

struct TrainingConfig {
  double learning_rate = 1e-4;
  /// Learning rate at step t is learning_rate / (1 + adam_decay t).
  double adam_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int epochs = 50;
  int examples_per_snr = 15000;
  std::vector<double> train_snrs_db{-5.0, 0.0, 5.0, 10.0};
  int batch_size = 128;
  /// Concatenated in this order.
  std::vector<FeatureMode> features{FeatureMode::Raw};
  std::uint64_t seed = 0;
  /// Permits learning rates outside [1e-6, 1e-4].
  bool allow_any_learning_rate = false;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
    if (!allow_any_learning_rate && (learning_rate < 1e-6 || learning_rate > 1e-4)) {
      throw ValidationError("learning rate outside [1e-6, 1e-4]; set allow_any_learning_rate to override");
    }
    if (adam_decay < 0.0) throw ValidationError("decay must be >= 0");
    if (epochs < 1 || examples_per_snr < 1 || batch_size < 1) {
      throw ValidationError("epochs, examples_per_snr and batch_size must be >= 1");
    }
    if (train_snrs_db.empty()) throw ValidationError("need at least one training SNR");
    if (features.empty()) throw ValidationError("need at least one feature mode");
  }
};

inline int feature_width(const CodeProfile& profile, std::span<const FeatureMode> modes) {
  int w = 0;
  for (auto m : modes) w += m == FeatureMode::AnglesOnly ? profile.pairs() : profile.n;
  return w;
}

/// Concatenated features of one channel output.
inline Vector concat_features(const CodeProfile& profile, std::span<const double> y,
                              std::span<const FeatureMode> modes) {
  Vector out;
  for (auto m : modes) {
    const auto f = extract_features(profile, y, m);
    out.insert(out.end(), f.data.begin(), f.data.end());
  }
  return out;
}

/// examples_per_snr pairs per training SNR, s ~ U[-1, 1]. Each SNR block has
/// its own generator derived from the seed.
inline Dataset generate_training_set(const CodeProfile& profile, const TrainingConfig& config,
                                     std::uint64_t seed) {
  config.validate();
  Dataset data;
  data.width = feature_width(profile, config.features);
  const auto total = config.train_snrs_db.size() * static_cast<std::size_t>(config.examples_per_snr);
  data.features.reserve(total * static_cast<std::size_t>(data.width));
  data.targets.reserve(total);
  for (std::size_t k = 0; k < config.train_snrs_db.size(); ++k) {
    const auto spec = ChannelSpec::for_profile(profile, config.train_snrs_db[k]);
    std::mt19937_64 gen(derive_seed(seed, {k}));
    std::uniform_real_distribution<double> source(-1.0, 1.0);
    for (int i = 0; i < config.examples_per_snr; ++i) {
      const double s = source(gen);
      const Vector y = awgn_channel(encode(profile, s), spec, gen);
      data.push(concat_features(profile, y, config.features), s);
    }
  }
  return data;
}

struct TrainingResult {
  MlpWeights weights;
  Vector epoch_losses;
};

/// Adam on mini-batches with a per-epoch seeded shuffle.
inline TrainingResult mlp_train(const MlpArchitecture& arch, const Dataset& data,
                                const TrainingConfig& config) {
  config.validate();
  arch.validate();
  if (data.size() == 0) throw TrainingError("empty training set");
  if (data.width != arch.input_width) throw ValidationError("dataset width does not match architecture");

  TrainingResult result;
  result.weights = MlpWeights::lecun_uniform(arch, derive_seed(config.seed, {0}));
  MlpWeights grad = MlpWeights::zeros(arch);
  MlpWeights m = MlpWeights::zeros(arch);
  MlpWeights v = MlpWeights::zeros(arch);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_gen(derive_seed(config.seed, {1}));
  std::uint64_t t = 0;
  std::vector<double*> params;
  std::vector<double*> grads;
  std::vector<double*> ms;
  std::vector<double*> vs;
  result.weights.for_each_parameter([&](double& p) { params.push_back(&p); });
  grad.for_each_parameter([&](double& p) { grads.push_back(&p); });
  m.for_each_parameter([&](double& p) { ms.push_back(&p); });
  v.for_each_parameter([&](double& p) { vs.push_back(&p); });

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_gen);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const double loss = loss_and_gradient(result.weights, data, batch, grad);
      epoch_loss += loss * static_cast<double>(batch.size());
      ++t;
      const double lr = config.learning_rate / (1.0 + config.adam_decay * static_cast<double>(t));
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
      for (std::size_t p = 0; p < params.size(); ++p) {
        const double g = *grads[p];
        *ms[p] = config.beta1 * *ms[p] + (1.0 - config.beta1) * g;
        *vs[p] = config.beta2 * *vs[p] + (1.0 - config.beta2) * g * g;
        *params[p] -= lr * (*ms[p] / c1) / (std::sqrt(*vs[p] / c2) + config.adam_epsilon);
      }
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) +
                          " with learning rate " + std::to_string(config.learning_rate));
    }
    result.epoch_losses.push_back(epoch_loss);
  }
  return result;
}

/// Trained network plus the feature modes it consumes.
struct MlpModel {
  MlpWeights weights;
  std::vector<FeatureMode> features{FeatureMode::Raw};
  nlohmann::json metadata = nlohmann::json::object();

  double decode(const CodeProfile& profile, std::span<const double> y) const {
    return mlp_forward(weights, concat_features(profile, y, features));
  }
};

inline void to_json(nlohmann::json& j, const MlpModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.weights.layers) {
    layers.push_back({{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"biases", l.biases}});
  }
  std::vector<std::string> feats;
  for (auto f : model.features) feats.push_back(to_string(f));
  j = {{"architecture",
        {{"input_width", model.weights.arch.input_width},
         {"hidden", model.weights.arch.hidden},
         {"output_width", model.weights.arch.output_width},
         {"activation", "tanh"}}},
       {"features", feats},
       {"layers", layers},
       {"metadata", model.metadata}};
}

inline void from_json(const nlohmann::json& j, MlpModel& model) {
  try {
    MlpArchitecture arch;
    arch.input_width = j.at("architecture").at("input_width").get<int>();
    arch.hidden = j.at("architecture").at("hidden").get<std::vector<int>>();
    arch.output_width = j.at("architecture").at("output_width").get<int>();
    model.weights = MlpWeights::zeros(arch);
    const auto& layers = j.at("layers");
    if (layers.size() != model.weights.layers.size()) throw ValidationError("layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& d = model.weights.layers[l];
      d.weights = layers[l].at("weights").get<Vector>();
      d.biases = layers[l].at("biases").get<Vector>();
      if (d.weights.size() != static_cast<std::size_t>(d.in * d.out) ||
          d.biases.size() != static_cast<std::size_t>(d.out)) {
        throw ValidationError("layer " + std::to_string(l) + " has the wrong parameter count");
      }
    }
    model.features.clear();
    for (const auto& f : j.at("features")) model.features.push_back(feature_mode_from_string(f.get<std::string>()));
    model.metadata = j.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed MLP weights: ") + e.what());
  }
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open weights file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("cannot parse " + path + ": " + e.what());
  }
  return j.get<MlpModel>();
}

inline void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << nlohmann::json(model).dump(1) << '\n';
}

}  // namespace c3t
