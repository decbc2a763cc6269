#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dumn/model.hpp"

namespace dumn {

/// Adam moments for every parameter, in store order.
struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  std::int64_t step = 0;

  static AdamState zeros(const ParamStore& store);
};

struct AdamSettings {
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update of every parameter; frozen pad rows are left untouched.
void adam_step(ParamStore& store, const GradBuffer& grads, AdamState& state, const AdamSettings& settings);

/// Rank-sum AUC with ties counted half. Throws when either class is absent.
double auc(std::span<const double> scores, std::span<const int> labels);

struct MetricsRow {
  int epoch = 0;
  std::string split;
  double l1 = 0.0;
  double l2 = 0.0;
  double auc = 0.0;
  double seconds = 0.0;
};

inline constexpr const char* kMetricsHeader = "epoch,split,l1,l2,auc,seconds";
std::string format_metrics(std::span<const MetricsRow> rows);

struct BatchResult {
  double l1 = 0.0;
  double l2 = 0.0;
  std::vector<double> predictions;
  std::vector<int> labels;
};

/// Samples per gradient chunk. Chunks are reduced in index order, so the batch gradient
/// does not depend on how chunks are spread over threads.
inline constexpr std::size_t kGradientChunk = 8;

/// Owns the optimizer state and runs training steps against a model.
class Trainer {
 public:
  explicit Trainer(Model& model);

  /// Loss and parameter gradient of one batch at the current memory, without updating anything.
  /// Batch loss = mean logloss + Σ_k mean triplet term of channel k.
  BatchResult batch_gradient(const Dataset& data, std::span<const std::size_t> batch, GradBuffer& out,
                             bool parallel);
  /// Forward + backward + Adam step + memory writes. Throws on a non-finite loss, naming the step.
  BatchResult step(const Dataset& data, std::span<const std::size_t> batch);

  /// Runs config().epochs epochs over `split.train`, evaluating on `split.test` after each.
  std::vector<MetricsRow> fit(const Dataset& data, const Split& split);

  AdamState& adam() { return adam_; }
  const AdamState& adam() const { return adam_; }
  std::int64_t steps() const { return adam_.step; }
  Model& model() { return model_; }

 private:
  Model& model_;
  AdamState adam_;
  GradBuffer grads_;
  std::vector<GradBuffer> chunk_grads_;
  std::vector<std::vector<WriteValues>> pending_;  // per batch position, committed after the update
};

struct Evaluation {
  double l1 = 0.0;
  double auc = 0.0;
  std::vector<double> scores;
  std::vector<int> labels;
};

/// Read-only scoring of `indices`; memory is not written. Throws on single-class input.
Evaluation evaluate(const Model& model, const Dataset& data, std::span<const std::size_t> indices, bool parallel);
std::vector<double> score(const Model& model, const Dataset& data, std::span<const std::size_t> indices,
                          bool parallel);

/// Number of OpenMP threads to use for `threads` config value (0: runtime default).
void apply_thread_setting(int threads);

}  // namespace dumn
