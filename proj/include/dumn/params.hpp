#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dumn/matrix.hpp"

namespace dumn {

/// One trainable tensor. Embedding tables set `frozen_row0` so the pad row stays zero.
struct Parameter {
  std::string name;
  Matrix value;
  bool frozen_row0 = false;
};

/// Index of a Parameter inside a ParamStore.
struct ParamId {
  std::size_t index = static_cast<std::size_t>(-1);
  bool valid() const noexcept { return index != static_cast<std::size_t>(-1); }
};

/// Owns every trainable tensor of a model in registration order. Names are unique.
class ParamStore {
 public:
  ParamId add(std::string name, Matrix value, bool frozen_row0 = false);

  Parameter& operator[](ParamId id) { return params_[id.index]; }
  const Parameter& operator[](ParamId id) const { return params_[id.index]; }
  Parameter& at(std::size_t i) { return params_[i]; }
  const Parameter& at(std::size_t i) const { return params_[i]; }
  std::size_t size() const noexcept { return params_.size(); }
  std::span<Parameter> all() noexcept { return params_; }
  std::span<const Parameter> all() const noexcept { return params_; }

  ParamId find(const std::string& name) const;
  std::size_t scalar_count() const;

 private:
  std::vector<Parameter> params_;
};

/// Gradient slot for one parameter. Rows are tracked so sparse embedding
/// updates only clear and reduce what they touched.
class ParamGrad {
 public:
  void reset_shape(std::size_t rows, std::size_t cols);
  void add_dense(const Matrix& g);
  void add_row(std::size_t r, std::span<const double> g);
  void clear();
  void accumulate_into(ParamGrad& dst) const;

  const Matrix& values() const noexcept { return grad_; }
  Matrix& values() noexcept { return grad_; }
  std::span<const std::uint32_t> touched_rows() const noexcept { return rows_; }
  bool touched(std::size_t r) const noexcept { return touched_[r] != 0; }
  void mark_all();

 private:
  void touch(std::size_t r);

  Matrix grad_;
  std::vector<std::uint8_t> touched_;
  std::vector<std::uint32_t> rows_;
};

/// One gradient slot per parameter of a store.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParamStore& store);

  ParamGrad& operator[](ParamId id) { return grads_[id.index]; }
  const ParamGrad& operator[](ParamId id) const { return grads_[id.index]; }
  ParamGrad& at(std::size_t i) { return grads_[i]; }
  const ParamGrad& at(std::size_t i) const { return grads_[i]; }
  std::size_t size() const noexcept { return grads_.size(); }

  void clear();
  void accumulate_into(GradBuffer& dst) const;
  /// Scalar lookup by flat (param, entry) position.
  double entry(std::size_t param, std::size_t flat) const { return grads_[param].values()[flat]; }

 private:
  std::vector<ParamGrad> grads_;
};

}  // namespace dumn
