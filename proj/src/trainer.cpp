#include "dumn/trainer.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dumn {

AdamState AdamState::zeros(const ParamStore& store) {
  AdamState s;
  for (const Parameter& p : store.all()) {
    s.first.emplace_back(p.value.rows(), p.value.cols());
    s.second.emplace_back(p.value.rows(), p.value.cols());
  }
  return s;
}

void adam_step(ParamStore& store, const GradBuffer& grads, AdamState& state, const AdamSettings& settings) {
  if (grads.size() != store.size() || state.first.size() != store.size() || state.second.size() != store.size())
    throw std::invalid_argument("adam_step: parameter, gradient and state counts differ");
  ++state.step;
  const double c1 = 1.0 - std::pow(settings.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(settings.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store.at(i);
    const Matrix& g = grads.at(i).values();
    Matrix& m = state.first[i];
    Matrix& v = state.second[i];
    if (!p.value.same_shape(g) || !p.value.same_shape(m) || !p.value.same_shape(v))
      throw std::invalid_argument("adam_step: shape mismatch for " + p.name + ": " + p.value.shape_string() +
                                  " vs gradient " + g.shape_string());
    const std::size_t start = p.frozen_row0 ? p.value.cols() : 0;
    for (std::size_t j = start; j < p.value.size(); ++j) {
      m[j] = settings.beta1 * m[j] + (1.0 - settings.beta1) * g[j];
      v[j] = settings.beta2 * v[j] + (1.0 - settings.beta2) * g[j] * g[j];
      p.value[j] -= settings.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + settings.eps);
    }
  }
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("auc: needs at least one positive and one negative sample (got " +
                                std::to_string(pos) + " positive, " + std::to_string(neg) + " negative)");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Ranks are 1-based; tied groups share their average rank. Sums of ranks stay
  // exact in doubles for the sizes used here (twice the rank is an integer).
  double rank_sum2 = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double twice_rank = static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) rank_sum2 += twice_rank;
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double u2 = rank_sum2 - p * (p + 1.0);
  return u2 / (2.0 * p * static_cast<double>(neg));
}

std::string format_metrics(std::span<const MetricsRow> rows) {
  std::ostringstream os;
  os.precision(17);
  os << kMetricsHeader << '\n';
  for (const auto& r : rows)
    os << r.epoch << ',' << r.split << ',' << r.l1 << ',' << r.l2 << ',' << r.auc << ',' << r.seconds << '\n';
  return os.str();
}

void apply_thread_setting(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

Trainer::Trainer(Model& model)
    : model_(model), adam_(AdamState::zeros(model.params())), grads_(model.params()) {}

BatchResult Trainer::batch_gradient(const Dataset& data, std::span<const std::size_t> batch, GradBuffer& out,
                                    bool parallel) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  const std::size_t N = batch.size();
  const std::size_t K = model_.channels().size();
  const TrainConfig& cfg = model_.config();

  std::vector<double> triplet_count(K, 0.0);
  for (std::size_t i : batch)
    for (std::size_t k = 0; k < K; ++k)
      triplet_count[k] += model_.has_triplet(data.samples[i], data.histories[data.samples[i].history], k);

  const std::size_t chunks = (N + kGradientChunk - 1) / kGradientChunk;
  while (chunk_grads_.size() < chunks) chunk_grads_.emplace_back(model_.params());
  pending_.assign(N, {});
  std::vector<double> l1(N, 0.0);
  std::vector<double> l2(N * K, 0.0);
  BatchResult result;
  result.predictions.assign(N, 0.0);
  result.labels.assign(N, 0);

  auto run_chunk = [&](std::size_t c) {
    GradBuffer& g = chunk_grads_[c];
    g.clear();
    Tape t(&model_.params());
    for (std::size_t pos = c * kGradientChunk; pos < std::min(N, (c + 1) * kGradientChunk); ++pos) {
      const Sample& s = data.samples[batch[pos]];
      t.clear();
      ForwardOptions options;
      options.mining_seed = derive_seed(cfg.seed, 0x3a1e, static_cast<std::uint64_t>(adam_.step), pos);
      SampleForward f = model_.forward(t, s, data.histories[s.history], options);
      Var bce = binary_cross_entropy(f.prediction, s.label, cfg.prediction_eps);
      l1[pos] = bce.scalar();
      Var loss = scale(bce, 1.0 / static_cast<double>(N));
      for (std::size_t k = 0; k < K; ++k) {
        if (!f.triplets[k]) continue;
        l2[pos * K + k] = f.triplets[k]->scalar();
        loss = add(loss, scale(*f.triplets[k], 1.0 / triplet_count[k]));
      }
      t.backward(loss, g);
      result.predictions[pos] = f.prediction.scalar();
      result.labels[pos] = s.label;
      pending_[pos] = Model::write_values(f);
    }
  };

  if (parallel) {
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t c = 0; c < chunks; ++c) {
      try {
        run_chunk(c);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  } else {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  }

  out.clear();
  for (std::size_t c = 0; c < chunks; ++c) chunk_grads_[c].accumulate_into(out);

  for (double v : l1) result.l1 += v;
  result.l1 /= static_cast<double>(N);
  for (std::size_t k = 0; k < K; ++k) {
    if (triplet_count[k] == 0) continue;
    double sum = 0.0;
    for (std::size_t pos = 0; pos < N; ++pos) sum += l2[pos * K + k];
    result.l2 += sum / triplet_count[k];
  }
  return result;
}

BatchResult Trainer::step(const Dataset& data, std::span<const std::size_t> batch) {
  BatchResult r = batch_gradient(data, batch, grads_, true);
  if (!std::isfinite(r.l1) || !std::isfinite(r.l2))
    throw std::runtime_error("non-finite loss at step " + std::to_string(adam_.step));
  const TrainConfig& cfg = model_.config();
  adam_step(model_.params(), grads_, adam_, {cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps});
  for (const auto& w : pending_) model_.commit_writes(w);
  return r;
}

std::vector<MetricsRow> Trainer::fit(const Dataset& data, const Split& split) {
  if (split.train.empty()) throw std::invalid_argument("train: empty training set");
  const TrainConfig& cfg = model_.config();
  std::vector<MetricsRow> rows;
  std::vector<std::size_t> order = split.train;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(derive_seed(cfg.seed, 0x5eed, static_cast<std::uint64_t>(epoch)));
    order = split.train;
    rng.shuffle(order.begin(), order.end());
    MetricsRow train{epoch, "train"};
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const auto slice = std::span<const std::size_t>(order).subspan(b, std::min(batch, order.size() - b));
      const BatchResult r = step(data, slice);
      train.l1 += r.l1 * static_cast<double>(slice.size());
      train.l2 += r.l2 * static_cast<double>(slice.size());
      scores.insert(scores.end(), r.predictions.begin(), r.predictions.end());
      labels.insert(labels.end(), r.labels.begin(), r.labels.end());
    }
    train.l1 /= static_cast<double>(order.size());
    train.l2 /= static_cast<double>(order.size());
    train.auc = auc(scores, labels);
    const auto mid = std::chrono::steady_clock::now();
    if (cfg.record_time) train.seconds = std::chrono::duration<double>(mid - start).count();
    rows.push_back(train);
    if (!split.test.empty()) {
      const Evaluation e = evaluate(model_, data, split.test, true);
      MetricsRow test{epoch, "test", e.l1, 0.0, e.auc};
      if (cfg.record_time)
        test.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - mid).count();
      rows.push_back(test);
    }
  }
  return rows;
}

std::vector<double> score(const Model& model, const Dataset& data, std::span<const std::size_t> indices,
                          bool parallel) {
  std::vector<double> out(indices.size(), 0.0);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
  for (std::size_t i = 0; i < indices.size(); ++i) {
    try {
      const Sample& s = data.samples[indices[i]];
      out[i] = model.predict(s, data.histories[s.history]);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

Evaluation evaluate(const Model& model, const Dataset& data, std::span<const std::size_t> indices, bool parallel) {
  Evaluation e;
  for (std::size_t i : indices) e.labels.push_back(data.samples[i].label);
  e.scores = score(model, data, indices, parallel);
  e.auc = auc(e.scores, e.labels);
  e.l1 = logloss(e.scores, e.labels, model.config().prediction_eps);
  return e;
}

}  // namespace dumn
