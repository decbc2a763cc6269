#include "dumn/head.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dumn/encoder.hpp"

namespace dumn {

Fusion Fusion::create(ParamStore& store, Rng& rng, const std::string& prefix, FusionMode mode, int embed_dim,
                      int slot_dim, std::size_t item_width) {
  const auto E = static_cast<std::size_t>(embed_dim);
  Fusion f;
  f.mode = mode;
  f.dim = embed_dim;
  f.convert = store.add(prefix + ".convert", glorot(rng, static_cast<std::size_t>(slot_dim), E));
  switch (mode) {
    case FusionMode::gate:
      f.short_gate = store.add(prefix + ".w1", glorot(rng, E, E));
      f.long_gate = store.add(prefix + ".w2", glorot(rng, E, E));
      break;
    case FusionMode::ffn:
      f.short_w = store.add(prefix + ".short.w", glorot(rng, E, E));
      f.short_b = store.add(prefix + ".short.b", Matrix(1, E));
      f.long_w = store.add(prefix + ".long.w", glorot(rng, E, E));
      f.long_b = store.add(prefix + ".long.b", Matrix(1, E));
      break;
    case FusionMode::attention:
      f.query = store.add(prefix + ".query", glorot(rng, item_width, E));
      break;
    case FusionMode::concat:
    case FusionMode::cross:
      break;
  }
  return f;
}

std::size_t Fusion::width() const {
  const auto E = static_cast<std::size_t>(dim);
  switch (mode) {
    case FusionMode::cross: return 3 * E;
    case FusionMode::attention: return E;
    default: return 2 * E;
  }
}

Var Fusion::forward(Tape& t, Var f_o, Var r, Var e_item, bool unit_gates) const {
  if (f_o.rows() != 1 || f_o.cols() != static_cast<std::size_t>(dim))
    throw std::invalid_argument("Fusion: short-term input " + f_o.value().shape_string() + ", expected 1x" +
                                std::to_string(dim));
  Var rc = matmul(r, t.param(convert));
  switch (mode) {
    case FusionMode::gate: {
      if (unit_gates) return concat_cols({f_o, rc});
      Var s = mul(f_o, sigmoid(matmul(f_o, t.param(short_gate))));
      Var l = mul(rc, sigmoid(matmul(rc, t.param(long_gate))));
      return concat_cols({s, l});
    }
    case FusionMode::concat:
      return concat_cols({f_o, rc});
    case FusionMode::cross:
      return concat_cols({add(f_o, rc), sub(f_o, rc), mul(f_o, rc)});
    case FusionMode::ffn:
      return concat_cols({relu(affine(f_o, t.param(short_w), t.param(short_b))),
                          relu(affine(rc, t.param(long_w), t.param(long_b)))});
    case FusionMode::attention: {
      Var q = matmul(e_item, t.param(query));
      Var logits = scale(concat_cols({dot(q, f_o), dot(q, rc)}), 1.0 / std::sqrt(static_cast<double>(dim)));
      Var beta = softmax_rows(logits);
      return add(scale_by(slice_cols(beta, 0, 1), f_o), scale_by(slice_cols(beta, 1, 2), rc));
    }
  }
  throw std::logic_error("Fusion: unknown mode");
}

Var cross_representation(std::span<const Var> parts) { return concat_cols(parts); }

PredictionHead PredictionHead::create(ParamStore& store, Rng& rng, const std::string& prefix,
                                      std::size_t input_width, std::span<const int> hidden) {
  PredictionHead h;
  std::size_t in = input_width;
  for (std::size_t l = 0; l <= hidden.size(); ++l) {
    const std::size_t out = l < hidden.size() ? static_cast<std::size_t>(hidden[l]) : 1;
    h.weights.push_back(store.add(prefix + ".layer" + std::to_string(l) + ".w", glorot(rng, in, out)));
    h.biases.push_back(store.add(prefix + ".layer" + std::to_string(l) + ".b", Matrix(1, out)));
    in = out;
  }
  return h;
}

Var PredictionHead::logit(Tape& t, Var input) const {
  Var x = input;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    x = affine(x, t.param(weights[l]), t.param(biases[l]));
    if (l + 1 < weights.size()) x = relu(x);
  }
  return x;
}

Var logloss(std::span<const Var> predictions, std::span<const int> labels, double eps) {
  if (predictions.empty()) throw std::invalid_argument("logloss: empty batch");
  if (predictions.size() != labels.size()) throw std::invalid_argument("logloss: predictions and labels differ in length");
  Var total = binary_cross_entropy(predictions[0], labels[0], eps);
  for (std::size_t i = 1; i < predictions.size(); ++i)
    total = add(total, binary_cross_entropy(predictions[i], labels[i], eps));
  return scale(total, 1.0 / static_cast<double>(predictions.size()));
}

double logloss(std::span<const double> predictions, std::span<const int> labels, double eps) {
  if (predictions.empty()) throw std::invalid_argument("logloss: empty batch");
  if (predictions.size() != labels.size()) throw std::invalid_argument("logloss: predictions and labels differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], eps, 1.0 - eps);
    total -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(predictions.size());
}

double triplet_distance(std::span<const double> a, std::span<const double> b) { return 1.0 - cosine(a, b); }

Var triplet(Var anchor, Var positive, Var negative, double margin) {
  // d_pos - d_neg = cos(q, neg) - cos(q, pos)
  Var gap = sub(cosine(anchor, negative), cosine(anchor, positive));
  Matrix m(1, 1, margin);
  return relu(add(gap, anchor.tape->constant(std::move(m))));
}

double triplet(std::span<const double> anchor, std::span<const double> positive,
               std::span<const double> negative, double margin) {
  return std::max(triplet_distance(anchor, positive) - triplet_distance(anchor, negative) + margin, 0.0);
}

Var total_loss(Var l1, std::span<const Var> triplet_terms, bool triplets_enabled) {
  if (!triplets_enabled) return l1;
  Var total = l1;
  for (Var v : triplet_terms) total = add(total, v);
  return total;
}

double total_loss(double l1, std::span<const double> triplet_terms, bool triplets_enabled) {
  if (!triplets_enabled) return l1;
  for (double v : triplet_terms) l1 += v;
  return l1;
}

std::optional<TripletChoice> mine_triplet(std::span<const double> anchor, const Matrix& positives,
                                          const Matrix& negatives, TripletMode mode, Rng& rng) {
  if (positives.rows() == 0 || negatives.rows() == 0 || mode == TripletMode::off) return std::nullopt;
  TripletChoice c;
  if (mode == TripletMode::random) {
    c.positive = static_cast<std::size_t>(rng.below(positives.rows()));
    c.negative = static_cast<std::size_t>(rng.below(negatives.rows()));
    return c;
  }
  double far = -1.0;
  for (std::size_t i = 0; i < positives.rows(); ++i) {
    const double d = triplet_distance(anchor, positives.row(i));
    if (d > far) {
      far = d;
      c.positive = i;
    }
  }
  double near = 3.0;
  for (std::size_t i = 0; i < negatives.rows(); ++i) {
    const double d = triplet_distance(anchor, negatives.row(i));
    if (d < near) {
      near = d;
      c.negative = i;
    }
  }
  return c;
}

}  // namespace dumn
