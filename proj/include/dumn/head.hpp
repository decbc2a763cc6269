#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dumn/config.hpp"
#include "dumn/params.hpp"
#include "dumn/rng.hpp"
#include "dumn/tape.hpp"

namespace dumn {

/// Combines the purified short-term vector f_o (1×E) with the memory read r (1×Z)
/// of one feedback type. r is first mapped to E by a bias-free `convert` matrix.
struct Fusion {
  FusionMode mode = FusionMode::gate;
  int dim = 0;
  ParamId convert;               // Z×E
  ParamId short_gate, long_gate; // gate: E×E each
  ParamId short_w, short_b, long_w, long_b;  // ffn
  ParamId query;                 // attention: item_width×E

  static Fusion create(ParamStore& store, Rng& rng, const std::string& prefix, FusionMode mode, int embed_dim,
                       int slot_dim, std::size_t item_width);

  std::size_t width() const;
  /// `unit_gates` replaces both sigmoid gates by 1 (gate mode only).
  Var forward(Tape& t, Var f_o, Var r, Var e_item, bool unit_gates = false) const;
};

/// R_cross = Concat(U_c, U_u, U_l, U_d) in the given order.
Var cross_representation(std::span<const Var> parts);

/// ŷ = sigmoid(FFN(Concat(e_user, e_item, R_cross))), ReLU hidden layers.
struct PredictionHead {
  std::vector<ParamId> weights;  // hidden layers then the 1-wide output layer
  std::vector<ParamId> biases;

  static PredictionHead create(ParamStore& store, Rng& rng, const std::string& prefix, std::size_t input_width,
                               std::span<const int> hidden);
  Var logit(Tape& t, Var input) const;
  Var forward(Tape& t, Var input) const { return sigmoid(logit(t, input)); }
  ParamId output_bias() const { return biases.back(); }
};

/// Mean binary cross-entropy over a batch, predictions clamped to [eps, 1-eps].
Var logloss(std::span<const Var> predictions, std::span<const int> labels, double eps);
double logloss(std::span<const double> predictions, std::span<const int> labels, double eps);

/// d(a, b) = 1 - cosine(a, b).
double triplet_distance(std::span<const double> a, std::span<const double> b);
/// max(d(q, pos) - d(q, neg) + margin, 0).
Var triplet(Var anchor, Var positive, Var negative, double margin);
double triplet(std::span<const double> anchor, std::span<const double> positive,
               std::span<const double> negative, double margin);

/// L = L1 + Σ triplet terms; L1 alone when triplets are disabled.
Var total_loss(Var l1, std::span<const Var> triplet_terms, bool triplets_enabled);
double total_loss(double l1, std::span<const double> triplet_terms, bool triplets_enabled);

struct TripletChoice {
  std::size_t positive = 0;
  std::size_t negative = 0;
};

/// Picks one positive and one negative candidate for `anchor`. Hardest mode takes the
/// positive farthest from and the negative closest to the anchor, ties to the lowest
/// index; random mode draws uniformly from `rng`. Empty when either pool is empty.
std::optional<TripletChoice> mine_triplet(std::span<const double> anchor, const Matrix& positives,
                                          const Matrix& negatives, TripletMode mode, Rng& rng);

}  // namespace dumn
