#include "balsparse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include "balsparse/random.hpp"

namespace balsparse::trainer {

namespace {

Dataset make_spiral_split(CounterRng& rng, std::size_t n, const SpiralOptions& options) {
  Dataset data{Matrix<double>(n, 2), std::vector<int>(n)};
  const double span = options.turns * 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = std::sqrt(rng.uniform()) * span;
    const double radius = 2.0 * t / span;
    const double angle = t + label * std::numbers::pi;
    data.features(i, 0) = radius * std::cos(angle) + options.noise * rng.normal();
    data.features(i, 1) = radius * std::sin(angle) + options.noise * rng.normal();
    data.labels[i] = label;
  }
  return data;
}

// Activations of every layer for a batch: acts[0] is the input, acts.back()
// the logits. Hidden activations are post-rectifier.
std::vector<Matrix<double>> forward(const MlpModel& model, const Matrix<double>& input) {
  std::vector<Matrix<double>> acts;
  acts.reserve(model.layers().size() + 1);
  acts.push_back(input);
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    const auto& in = acts.back();
    const std::size_t batch = in.rows();
    const std::size_t out_dim = layer.weights.rows();
    const std::size_t in_dim = layer.weights.cols();
    Matrix<double> out(batch, out_dim);
    const bool hidden = l + 1 < model.layers().size();
    for (std::size_t s = 0; s < batch; ++s) {
      const auto x = in.row(s);
      auto y = out.row(s);
      for (std::size_t o = 0; o < out_dim; ++o) {
        const auto w = layer.weights.row(o);
        double acc = layer.bias[o];
        for (std::size_t i = 0; i < in_dim; ++i) acc += w[i] * x[i];
        y[o] = hidden ? std::max(acc, 0.0) : acc;
      }
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

Matrix<double> gather_rows(const Matrix<double>& m, const std::vector<std::size_t>& rows) {
  Matrix<double> out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::ranges::copy(m.row(rows[i]), out.row(i).begin());
  return out;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

// Softmax probabilities in place; returns summed cross-entropy.
double softmax_cross_entropy(Matrix<double>& logits, const std::vector<int>& labels,
                             const std::vector<std::size_t>& rows) {
  double total = 0.0;
  for (std::size_t s = 0; s < logits.rows(); ++s) {
    auto z = logits.row(s);
    const double peak = *std::ranges::max_element(z);
    double norm = 0.0;
    for (auto& v : z) {
      v = std::exp(v - peak);
      norm += v;
    }
    for (auto& v : z) v /= norm;
    total -= std::log(std::max(z[static_cast<std::size_t>(labels[rows[s]])], 1e-300));
  }
  return total;
}

void check_shape(const MlpModel& model, const Dataset& data) {
  if (model.layers().empty()) throw Error(ErrorKind::kShapeMismatch, "model has no layers");
  if (data.features.cols() != model.input_dim() || data.features.rows() != data.labels.size()) {
    throw Error(ErrorKind::kShapeMismatch, "dataset has " + std::to_string(data.features.cols()) +
                                               " features per sample, model expects " +
                                               std::to_string(model.input_dim()));
  }
}

struct AdamState {
  std::vector<Matrix<double>> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;
  std::size_t step = 0;
};

}  // namespace

LabeledData make_dataset(std::uint64_t seed, const SpiralOptions& options) {
  CounterRng train_rng(seed, 0);
  CounterRng test_rng(seed, 1);
  return {make_spiral_split(train_rng, options.train_size, options),
          make_spiral_split(test_rng, options.test_size, options)};
}

MlpModel::MlpModel(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw Error(ErrorKind::kInvalidArgument, "an MLP needs at least input and output dims");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    CounterRng rng(seed, l);
    Layer layer{Matrix<double>(dims[l + 1], dims[l]), std::vector<double>(dims[l + 1], 0.0), std::nullopt};
    const double scale = std::sqrt(2.0 / static_cast<double>(dims[l]));
    for (auto& w : layer.weights.values()) w = scale * rng.normal();
    layers_.push_back(std::move(layer));
  }
}

void MlpModel::set_mask(std::size_t layer, PruneMask mask) {
  auto& target = layers_.at(layer);
  if (mask.rows() != target.weights.rows() || mask.cols() != target.weights.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "mask shape does not match layer " + std::to_string(layer));
  }
  mask.apply(target.weights);
  target.mask = std::move(mask);
}

Matrix<double> MlpModel::logits(const Matrix<double>& features) const { return forward(*this, features).back(); }

double loss(const MlpModel& model, const Dataset& data, const std::vector<std::size_t>& rows) {
  check_shape(model, data);
  const auto& picked = rows.empty() ? all_rows(data.size()) : rows;
  auto logits = model.logits(gather_rows(data.features, picked));
  return softmax_cross_entropy(logits, data.labels, picked) / static_cast<double>(picked.size());
}

Gradients gradients(const MlpModel& model, const Dataset& data, const std::vector<std::size_t>& rows,
                    double* loss_out) {
  check_shape(model, data);
  const auto& picked = rows.empty() ? all_rows(data.size()) : rows;
  const double inv_batch = 1.0 / static_cast<double>(picked.size());
  auto acts = forward(model, gather_rows(data.features, picked));
  const double total = softmax_cross_entropy(acts.back(), data.labels, picked);
  if (loss_out != nullptr) *loss_out = total * inv_batch;

  // delta = dLoss/dPreactivation of the current layer.
  Matrix<double> delta = acts.back();
  for (std::size_t s = 0; s < delta.rows(); ++s) {
    delta(s, static_cast<std::size_t>(data.labels[picked[s]])) -= 1.0;
    for (auto& v : delta.row(s)) v *= inv_batch;
  }

  const std::size_t depth = model.layers().size();
  Gradients grads;
  grads.weights.resize(depth);
  grads.bias.resize(depth);
  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = model.layers()[l];
    const auto& input = acts[l];
    Matrix<double> gw(layer.weights.rows(), layer.weights.cols());
    std::vector<double> gb(layer.weights.rows(), 0.0);
    for (std::size_t s = 0; s < delta.rows(); ++s) {
      const auto d = delta.row(s);
      const auto x = input.row(s);
      for (std::size_t o = 0; o < gw.rows(); ++o) {
        gb[o] += d[o];
        auto g = gw.row(o);
        for (std::size_t i = 0; i < gw.cols(); ++i) g[i] += d[o] * x[i];
      }
    }
    if (layer.mask) layer.mask->apply(gw);
    if (l > 0) {
      Matrix<double> prev(delta.rows(), layer.weights.cols());
      for (std::size_t s = 0; s < delta.rows(); ++s) {
        const auto d = delta.row(s);
        auto p = prev.row(s);
        for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
          const auto w = layer.weights.row(o);
          for (std::size_t i = 0; i < p.size(); ++i) p[i] += d[o] * w[i];
        }
        // Rectifier derivative: the activation fed to this layer was positive.
        const auto a = input.row(s);
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (a[i] <= 0.0) p[i] = 0.0;
        }
      }
      delta = std::move(prev);
    }
    grads.weights[l] = std::move(gw);
    grads.bias[l] = std::move(gb);
  }
  return grads;
}

MlpModel train(MlpModel model, const Dataset& data, const TrainOptions& options, std::vector<double>* epoch_losses) {
  check_shape(model, data);
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  const std::size_t depth = model.layers().size();
  AdamState state;
  for (const auto& layer : model.layers()) {
    state.m_w.emplace_back(layer.weights.rows(), layer.weights.cols());
    state.v_w.emplace_back(layer.weights.rows(), layer.weights.cols());
    state.m_b.emplace_back(layer.bias.size(), 0.0);
    state.v_b.emplace_back(layer.bias.size(), 0.0);
  }

  double rate = options.learning_rate;
  const auto adam = [&](double& param, double grad, double& m, double& v, double c1, double c2) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
    param -= rate * (m / c1) / (std::sqrt(v / c2) + kEps);
  };
  const auto full_loss = [&](std::size_t epoch) {
    const double value = loss(model, data);
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::kDivergenceDetected, "loss became non-finite after epoch " + std::to_string(epoch));
    }
    return value;
  };

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  std::vector<std::size_t> order = all_rows(data.size());
  double backoff = 1.0;
  double last_loss = options.reject_worse_epochs && options.epochs > 0 ? full_loss(0) : 0.0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rate = backoff * options.learning_rate / (1.0 + options.lr_decay * static_cast<double>(epoch));
    std::optional<std::pair<MlpModel, AdamState>> saved;
    if (options.reject_worse_epochs) saved.emplace(model, state);
    CounterRng rng(options.seed, epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), begin + batch)));
      double batch_loss = 0.0;
      const Gradients g = gradients(model, data, rows, &batch_loss);
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorKind::kDivergenceDetected, "loss became non-finite in epoch " + std::to_string(epoch));
      }
      ++state.step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
      for (std::size_t l = 0; l < depth; ++l) {
        auto& layer = model.layers()[l];
        auto w = layer.weights.values();
        const auto gw = g.weights[l].values();
        auto mw = state.m_w[l].values();
        auto vw = state.v_w[l].values();
        for (std::size_t i = 0; i < w.size(); ++i) adam(w[i], gw[i], mw[i], vw[i], c1, c2);
        for (std::size_t o = 0; o < layer.bias.size(); ++o) {
          adam(layer.bias[o], g.bias[l][o], state.m_b[l][o], state.v_b[l][o], c1, c2);
        }
        if (layer.mask) layer.mask->apply(layer.weights);
      }
    }
    if (options.reject_worse_epochs) {
      const double epoch_loss = full_loss(epoch);
      if (epoch_loss > last_loss) {
        std::tie(model, state) = std::move(*saved);
        backoff *= 0.5;
      } else {
        last_loss = epoch_loss;
        backoff = std::min(1.0, backoff * 1.25);
      }
      if (epoch_losses != nullptr) epoch_losses->push_back(last_loss);
    } else if (epoch_losses != nullptr) {
      epoch_losses->push_back(full_loss(epoch));
    }
  }
  return model;
}

double evaluate(const MlpModel& model, const Dataset& data) {
  check_shape(model, data);
  if (data.size() == 0) return 0.0;
  const auto logits = model.logits(data.features);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < logits.rows(); ++s) {
    const auto z = logits.row(s);
    const auto best = static_cast<int>(std::ranges::max_element(z) - z.begin());
    if (best == data.labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::string_view to_string(PatternKind pattern) {
  switch (pattern) {
    case PatternKind::kBalanced: return "balanced";
    case PatternKind::kRandom: return "random";
    case PatternKind::kBlock: return "block";
    case PatternKind::kVector: return "vector";
  }
  return "unknown";
}

PatternKind parse_pattern(std::string_view name) {
  for (const auto p : {PatternKind::kBalanced, PatternKind::kRandom, PatternKind::kBlock, PatternKind::kVector}) {
    if (to_string(p) == name) return p;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown pattern '" + std::string(name) + "'");
}

ReferenceModel train_reference(const LabeledData& data, const ReferenceOptions& options) {
  MlpModel model = train(MlpModel(options.dims, options.init_seed), data.train, options.training);
  const double accuracy = evaluate(model, data.test);
  return {std::move(model), accuracy};
}

// ---------------------------------------------------------------------------

namespace {

PruneMask pattern_mask(const DenseMatrix& weights, const PruneMask& current, const ExperimentConfig& config,
                       double sparsity) {
  switch (config.pattern) {
    case PatternKind::kBalanced: {
      if (config.knob == 0 || weights.cols() % config.knob != 0) {
        throw Error(ErrorKind::kNonDivisibleColumns, "balance range " + std::to_string(config.knob) +
                                                         " does not divide " + std::to_string(weights.cols()) +
                                                         " columns");
      }
      return balanced_prune_step(weights, weights.cols() / config.knob, sparsity, &current).mask;
    }
    case PatternKind::kRandom:
      return random_prune(weights, sparsity);
    case PatternKind::kBlock: {
      // Matrices shorter than a tile use full-height tiles.
      const std::size_t bh = std::min(config.knob, weights.rows());
      return block_prune(weights, bh, config.knob, sparsity, config.tile_criterion);
    }
    case PatternKind::kVector:
      return vector_prune(weights, sparsity, config.vector_axis);
  }
  return current;
}

struct LayerCounts {
  std::size_t zeros = 0;
  std::size_t total = 0;
};

double target_sparsity_of(const MlpModel& model, const std::vector<std::size_t>& targets) {
  LayerCounts counts;
  for (const auto l : targets) {
    const auto& layer = model.layers()[l];
    counts.total += layer.weights.size();
    counts.zeros += layer.mask ? layer.weights.size() - layer.mask->kept_count() : 0;
  }
  return static_cast<double>(counts.zeros) / static_cast<double>(counts.total);
}

}  // namespace

ExperimentResult prune_retrain_experiment(const ReferenceModel& reference, const LabeledData& data,
                                          const ExperimentConfig& config) {
  if (reference.model.layers().empty()) {
    throw Error(ErrorKind::kReferenceModelMissing, "prune_retrain_experiment needs a trained reference model");
  }
  for (const auto l : config.target_layers) {
    if (l >= reference.model.layers().size()) {
      throw Error(ErrorKind::kInvalidArgument, "target layer " + std::to_string(l) + " does not exist");
    }
  }
  PruneSchedule schedule = config.schedule;
  schedule.target_sparsity = config.target_sparsity;

  ExperimentResult result;
  result.pattern = config.pattern;
  result.knob = config.knob;
  result.model = reference.model;
  result.checkpoints.push_back({0, 0.0, reference.test_accuracy});
  if (config.target_sparsity == 0.0) return result;

  std::size_t iteration = 0;
  std::uint64_t retrain_stream = 0;
  for (const auto l : config.target_layers) {
    for (std::size_t it = 1; it <= schedule.num_iterations; ++it) {
      ++iteration;
      const double sparsity = schedule_value(schedule, it);
      MlpModel candidate = result.model;
      const auto& layer = candidate.layers()[l];
      const PruneMask current = layer.mask.value_or(PruneMask(layer.weights.rows(), layer.weights.cols(), true));
      PruneMask next = pattern_mask(layer.weights.cast<float>(), current, config, sparsity);
      // Survivors only shrink: once masked, a weight stays masked.
      for (std::size_t r = 0; r < next.rows(); ++r) {
        for (std::size_t c = 0; c < next.cols(); ++c) {
          if (!current.kept(r, c)) next.set(r, c, false);
        }
      }
      candidate.set_mask(l, std::move(next));
      TrainOptions retraining = config.retraining;
      retraining.seed = config.retraining.seed * 1000003u + retrain_stream++;
      candidate = train(std::move(candidate), data.train, retraining);
      const double accuracy = evaluate(candidate, data.test);
      if (config.withdraw_threshold && accuracy < reference.test_accuracy - *config.withdraw_threshold) {
        result.withdrawn = true;
        return result;
      }
      result.model = std::move(candidate);
      const double achieved = target_sparsity_of(result.model, config.target_layers);
      if (achieved > result.checkpoints.back().sparsity) {
        result.checkpoints.push_back({iteration, achieved, accuracy});
      } else if (result.checkpoints.size() > 1) {
        result.checkpoints.back().accuracy = accuracy;
        result.checkpoints.back().iteration = iteration;
      }
    }
  }
  return result;
}

void write_csv(std::ostream& out, const std::vector<ExperimentResult>& results) {
  out << "pattern,knob,sparsity,accuracy,iteration\n";
  for (const auto& result : results) {
    for (const auto& cp : result.checkpoints) {
      out << to_string(result.pattern) << ',' << result.knob << ',' << cp.sparsity << ',' << cp.accuracy << ','
          << cp.iteration << '\n';
    }
  }
}

}  // namespace balsparse::trainer
