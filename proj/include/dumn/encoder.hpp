#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dumn/config.hpp"
#include "dumn/params.hpp"
#include "dumn/rng.hpp"
#include "dumn/samples.hpp"
#include "dumn/tape.hpp"

namespace dumn {

/// Logit added to masked attention positions.
inline constexpr double kMaskLogit = -1e9;

/// Glorot-uniform matrix.
Matrix glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out);
Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev);

/// Id → dense lookup for users, profile fields, items and brands. Row 0 of every
/// table is the frozen pad.
struct EmbeddingTables {
  ParamId items;
  ParamId brands;
  ParamId users;
  std::vector<ParamId> fields;
  // Sequence rows are Concat(item, brand) mapped affinely to E.
  ParamId seq_weight;
  ParamId seq_bias;
  int dim = 0;

  static EmbeddingTables create(ParamStore& store, Rng& rng, const Vocab& vocab, int dim,
                                double init_scale);

  std::size_t user_width() const { return static_cast<std::size_t>(dim) * (1 + fields.size()); }
  std::size_t item_width() const { return 2 * static_cast<std::size_t>(dim); }

  /// e_user: Concat(user-id embedding, one embedding per profile field).
  Var user_vector(Tape& t, std::int64_t user_id, std::span<const int> fields) const;
  /// e_item: Concat(item-id embedding, brand embedding).
  Var item_vector(Tape& t, int item_token, int brand) const;
  /// Projected item rows (no mask applied), one per (item, brand) pair → n×E.
  Var item_rows(Tape& t, std::span<const int> items, std::span<const int> brands) const;
  /// T×E sequence matrix; rows with mask 0 are exactly zero.
  Var embed_sequence(Tape& t, const Sequence& seq) const;
};

/// Multi-head self-attention over one feedback sequence (per-type parameters).
struct SelfAttention {
  std::vector<ParamId> query, key, value;  // per head, (E/H)×(E/H)
  ParamId output;                          // E×E
  int heads = 1;
  int dim = 0;
  AttentionScale scale = AttentionScale::seq_len;

  static SelfAttention create(ParamStore& store, Rng& rng, const std::string& prefix, int dim,
                              int heads, AttentionScale scale);

  /// Masked key columns get kMaskLogit before the softmax; masked output rows are zeroed.
  /// A fully masked sequence yields a zero matrix.
  Var forward(Tape& t, Var seq, std::span<const std::uint8_t> mask) const;
};

/// Target-aware pooling: α_j = ReLU(Concat(e_user, e_item, o_j)·W), softmax over valid
/// positions, f = Σ α̃_j o_j.
struct TargetPooling {
  ParamId weight;  // (user_width + item_width + E) × 1

  static TargetPooling create(ParamStore& store, Rng& rng, const std::string& prefix,
                              std::size_t context_width, int dim);

  struct Result {
    Var pooled;   // 1×E
    Var weights;  // 1×T (absent when fully masked)
    bool empty = false;
  };
  Result forward(Tape& t, Var seq_out, Var e_user, Var e_item, std::span<const std::uint8_t> mask) const;
};

/// Component of `a` along `b`; zero when ‖b‖ < kDegenerateNorm.
std::vector<double> orthogonal_project(std::span<const double> a, std::span<const double> b);

struct Purified {
  std::vector<double> kept;     // f_o = f − f_p
  std::vector<double> removed;  // f_p = project(f, f_explicit)
};
Purified purify(std::span<const double> implicit, std::span<const double> explicit_);

struct PurifiedVars {
  Var kept;
  Var removed;
};
/// Differentiable purification; falls back to (implicit, 0) for a degenerate explicit vector.
PurifiedVars purify(Tape& t, Var implicit, Var explicit_);

}  // namespace dumn
