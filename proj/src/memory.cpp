#include "dumn/memory.hpp"

#include <cmath>
#include <stdexcept>

#include "dumn/encoder.hpp"

namespace dumn {

MemoryBank MemoryBank::random(Rng& rng, int slots, int slot_dim) {
  if (slots < 1 || slot_dim < 1) throw std::invalid_argument("MemoryBank: slots and slot_dim must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(slot_dim));
  MemoryBank b{Matrix(static_cast<std::size_t>(slots), static_cast<std::size_t>(slot_dim))};
  for (double& v : b.slots.values()) v = rng.uniform(-bound, bound);
  return b;
}

KeyNetwork KeyNetwork::create(ParamStore& store, Rng& rng, const std::string& prefix, std::size_t in,
                              std::size_t hidden, std::size_t out) {
  KeyNetwork k;
  k.w1 = store.add(prefix + ".w1", glorot(rng, in, hidden));
  k.b1 = store.add(prefix + ".b1", Matrix(1, hidden));
  k.w2 = store.add(prefix + ".w2", glorot(rng, hidden, out));
  k.b2 = store.add(prefix + ".b2", Matrix(1, out));
  return k;
}

Var KeyNetwork::forward(Tape& t, Var x) const {
  Var h = relu(affine(x, t.param(w1), t.param(b1)));
  return affine(h, t.param(w2), t.param(b2));
}

MemoryController MemoryController::create(ParamStore& store, Rng& rng, const std::string& prefix,
                                          std::size_t input_width, int hidden, int slot_dim) {
  const auto h = static_cast<std::size_t>(hidden);
  const auto z = static_cast<std::size_t>(slot_dim);
  MemoryController c;
  c.read_key = KeyNetwork::create(store, rng, prefix + ".read", input_width, h, z);
  c.write_key = KeyNetwork::create(store, rng, prefix + ".write", input_width, h, z);
  c.erase_w = store.add(prefix + ".erase.w", glorot(rng, input_width, z));
  c.erase_b = store.add(prefix + ".erase.b", Matrix(1, z));
  c.add_w = store.add(prefix + ".add.w", glorot(rng, input_width, z));
  c.add_b = store.add(prefix + ".add.b", Matrix(1, z));
  return c;
}

Var address(Var key, Var slots) {
  if (key.rows() != 1 || key.cols() != slots.cols())
    throw std::invalid_argument("address: key " + key.value().shape_string() + " vs slots " +
                                slots.value().shape_string());
  return softmax_rows(cosine_rows(key, slots));
}

std::vector<double> address(std::span<const double> key, const Matrix& slots) {
  if (key.size() != slots.cols())
    throw std::invalid_argument("address: key dim " + std::to_string(key.size()) + " vs slots " +
                                slots.shape_string());
  Matrix sims(1, slots.rows());
  for (std::size_t j = 0; j < slots.rows(); ++j) sims[j] = cosine(key, slots.row(j));
  Matrix w = softmax_rows(sims);
  return {w.values().begin(), w.values().end()};
}

Var memory_read(Var weights, Var slots) {
  if (weights.rows() != 1 || weights.cols() != slots.rows())
    throw std::invalid_argument("memory_read: weights " + weights.value().shape_string() + " vs slots " +
                                slots.value().shape_string());
  return matmul(weights, slots);
}

std::vector<double> memory_read(std::span<const double> weights, const Matrix& slots) {
  if (weights.size() != slots.rows())
    throw std::invalid_argument("memory_read: " + std::to_string(weights.size()) + " weights vs slots " +
                                slots.shape_string());
  std::vector<double> r(slots.cols(), 0.0);
  for (std::size_t j = 0; j < slots.rows(); ++j) axpy(weights[j], slots.row(j), r);
  return r;
}

void apply_write(Matrix& slots, std::span<const double> weights, std::span<const double> erase,
                 std::span<const double> add) {
  if (weights.size() != slots.rows() || erase.size() != slots.cols() || add.size() != slots.cols())
    throw std::invalid_argument("apply_write: shapes disagree with slots " + slots.shape_string());
  for (std::size_t j = 0; j < slots.rows(); ++j) {
    auto row = slots.row(j);
    for (std::size_t z = 0; z < row.size(); ++z)
      row[z] = (1.0 - weights[j] * erase[z]) * row[z] + weights[j] * add[z];
  }
}

Var write_slots(Var slots, Var weights, Var erase, Var add) {
  Var wt = transpose(weights);
  Var kept = sub(slots, mul(slots, matmul(wt, erase)));
  return dumn::add(kept, matmul(wt, add));
}

ReadResult read_memory(Tape& t, const MemoryController& c, Var controller_input, Var slots) {
  Var key = c.read_key.forward(t, controller_input);
  Var w = address(key, slots);
  return {memory_read(w, slots), w};
}

WriteResult write_memory(Tape& t, const MemoryController& c, Var controller_input, Var slots,
                         bool anchor_post_write) {
  Var key = c.write_key.forward(t, controller_input);
  WriteResult out;
  out.weights = address(key, slots);
  out.erase = sigmoid(affine(controller_input, t.param(c.erase_w), t.param(c.erase_b)));
  out.add = tanh(affine(controller_input, t.param(c.add_w), t.param(c.add_b)));
  Var content = anchor_post_write ? write_slots(slots, out.weights, out.erase, out.add) : slots;
  out.anchor = memory_read(out.weights, content);
  return out;
}

}  // namespace dumn
