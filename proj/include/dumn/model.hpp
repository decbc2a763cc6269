#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dumn/config.hpp"
#include "dumn/encoder.hpp"
#include "dumn/head.hpp"
#include "dumn/memory.hpp"
#include "dumn/samples.hpp"

namespace dumn {

using MemoryState = std::vector<MemoryBank>;

struct ForwardOptions {
  bool with_triplets = true;
  bool unit_gates = false;       // gate fusion with both gates forced to 1
  std::uint64_t mining_seed = 0; // random-mode triplet draws
};

/// Everything one sample's forward pass produces. Per-channel vectors are indexed
/// like Model::channels().
struct SampleForward {
  Var prediction;                     // 1×1 in (0,1)
  std::vector<Var> pooled;            // f_k
  std::vector<Var> purified;          // f_k after denoising (f_k when not denoised)
  std::vector<Var> reads;             // r_k (zero when memory is off)
  std::vector<WriteResult> writes;    // empty when memory is off
  std::vector<std::optional<Var>> triplets;  // absent when no triplet for that channel
};

struct WriteValues {
  std::vector<double> weights, erase, add;
};

/// The full network: four (or fewer) feedback channels, their memory banks and the
/// prediction head. Parameters are owned by `params()`, mutable memory by `memory()`.
class Model {
 public:
  Model(const TrainConfig& config, const Vocab& vocab);

  const TrainConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  MemoryState& memory() { return memory_; }
  const MemoryState& memory() const { return memory_; }

  /// Feedback type encoded by each channel; the merged layout has one channel tagged click.
  const std::vector<Feedback>& channels() const { return channels_; }
  bool merged() const { return config_.feedback == FeedbackMode::merged_sequence; }
  /// Bank used by channel k, or -1 when memory is off.
  int bank_of(std::size_t k) const;
  /// Whether sample `s` gets a triplet term for channel k (both candidate pools nonempty).
  bool has_triplet(const Sample& s, const UserHistory& h, std::size_t k) const;

  SampleForward forward(Tape& t, const Sample& s, const UserHistory& h, const ForwardOptions& options = {}) const;
  /// ŷ without recording triplets.
  double predict(const Sample& s, const UserHistory& h) const;

  /// Plain copies of a forward pass's write weights, erase and add vectors.
  static std::vector<WriteValues> write_values(const SampleForward& f);
  /// Applies one sample's writes to the banks, in channel order.
  void commit_writes(std::span<const WriteValues> writes);

  const EmbeddingTables& tables() const { return tables_; }

 private:
  std::span<const HistoryEvent> pool(const Sample& s, const UserHistory& h, Feedback type) const;
  Matrix candidate_rows(std::span<const HistoryEvent> events) const;
  std::optional<Var> triplet_term(Tape& t, const Sample& s, const UserHistory& h, std::size_t k, Var anchor,
                                  std::uint64_t mining_seed) const;

  TrainConfig config_;
  Vocab vocab_;
  ParamStore store_;
  EmbeddingTables tables_;
  std::vector<Feedback> channels_;
  std::vector<SelfAttention> attention_;
  std::vector<TargetPooling> pooling_;
  std::vector<MemoryController> controllers_;
  std::vector<ParamId> anchor_proj_;  // per bank, Z×E; unused when Z == E
  std::vector<Fusion> fusion_;
  PredictionHead head_;
  MemoryState memory_;
};

/// Triplet pairing: positives of the channel's own type, negatives of its partner
/// (click↔unclick, like↔dislike).
Feedback triplet_partner(Feedback f);

}  // namespace dumn
