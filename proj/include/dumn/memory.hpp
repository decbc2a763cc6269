#pragma once

#include <span>
#include <string>
#include <vector>

#include "dumn/params.hpp"
#include "dumn/rng.hpp"
#include "dumn/tape.hpp"

namespace dumn {

/// One m×Z slot matrix. Contents are state, not parameters: they change through
/// erase/add writes and are treated as constants inside a training step.
struct MemoryBank {
  Matrix slots;

  static MemoryBank random(Rng& rng, int slots, int slot_dim);
  std::size_t slot_count() const { return slots.rows(); }
  std::size_t slot_dim() const { return slots.cols(); }
};

/// Two-layer FFN: ReLU hidden layer, linear output.
struct KeyNetwork {
  ParamId w1, b1, w2, b2;

  static KeyNetwork create(ParamStore& store, Rng& rng, const std::string& prefix,
                           std::size_t in, std::size_t hidden, std::size_t out);
  Var forward(Tape& t, Var x) const;
};

/// Controller of one bank: separate read and write key networks, erase and add heads.
/// Input is Concat(f_o, e_user).
struct MemoryController {
  KeyNetwork read_key;
  KeyNetwork write_key;
  ParamId erase_w, erase_b;
  ParamId add_w, add_b;

  static MemoryController create(ParamStore& store, Rng& rng, const std::string& prefix,
                                 std::size_t input_width, int hidden, int slot_dim);
};

/// softmax over slots of cosine(key, slot). Zero-norm slots or key score 0.
Var address(Var key, Var slots);
std::vector<double> address(std::span<const double> key, const Matrix& slots);

/// r = Σ_j w(j)·M(j).
Var memory_read(Var weights, Var slots);
std::vector<double> memory_read(std::span<const double> weights, const Matrix& slots);

/// M ← (1 − w ⊗ erase) ⊙ M + w ⊗ add, in place.
void apply_write(Matrix& slots, std::span<const double> weights, std::span<const double> erase,
                 std::span<const double> add);
/// Differentiable form of apply_write.
Var write_slots(Var slots, Var weights, Var erase, Var add);

struct ReadResult {
  Var value;    // r, 1×Z
  Var weights;  // w_r, 1×m
};

/// k = FFN(Concat(f_o, e_user)); w = address(k, M); r = Σ w(j) M(j).
ReadResult read_memory(Tape& t, const MemoryController& c, Var controller_input, Var slots);

struct WriteResult {
  Var weights;  // w_w, 1×m
  Var erase;    // sigmoid head, in (0,1)^Z
  Var add;      // tanh head, in (−1,1)^Z
  Var anchor;   // q = Σ w_w(j) M(j) over pre- or post-write content
};

WriteResult write_memory(Tape& t, const MemoryController& c, Var controller_input, Var slots,
                         bool anchor_post_write);

}  // namespace dumn
