#include "dumn/params.hpp"

#include <stdexcept>

namespace dumn {

ParamId ParamStore::add(std::string name, Matrix value, bool frozen_row0) {
  if (find(name).valid()) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
  if (frozen_row0 && value.rows() > 0) {
    for (double& v : value.row(0)) v = 0.0;
  }
  params_.push_back(Parameter{std::move(name), std::move(value), frozen_row0});
  return ParamId{params_.size() - 1};
}

ParamId ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return ParamId{i};
  return {};
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamGrad::reset_shape(std::size_t rows, std::size_t cols) {
  grad_ = Matrix(rows, cols);
  touched_.assign(rows, 0);
  rows_.clear();
}

void ParamGrad::touch(std::size_t r) {
  if (touched_[r] == 0) {
    touched_[r] = 1;
    rows_.push_back(static_cast<std::uint32_t>(r));
  }
}

void ParamGrad::mark_all() {
  for (std::size_t r = 0; r < grad_.rows(); ++r) touch(r);
}

void ParamGrad::add_dense(const Matrix& g) {
  if (!g.same_shape(grad_)) {
    throw std::invalid_argument("ParamGrad: gradient shape " + g.shape_string() +
                                " does not match " + grad_.shape_string());
  }
  mark_all();
  axpy(1.0, g.values(), grad_.values());
}

void ParamGrad::add_row(std::size_t r, std::span<const double> g) {
  if (r >= grad_.rows() || g.size() != grad_.cols()) {
    throw std::invalid_argument("ParamGrad: row gradient out of range");
  }
  touch(r);
  axpy(1.0, g, grad_.row(r));
}

void ParamGrad::clear() {
  for (std::uint32_t r : rows_) {
    for (double& v : grad_.row(r)) v = 0.0;
    touched_[r] = 0;
  }
  rows_.clear();
}

void ParamGrad::accumulate_into(ParamGrad& dst) const {
  for (std::uint32_t r : rows_) dst.add_row(r, grad_.row(r));
}

GradBuffer::GradBuffer(const ParamStore& store) : grads_(store.size()) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& v = store.at(i).value;
    grads_[i].reset_shape(v.rows(), v.cols());
  }
}

void GradBuffer::clear() {
  for (auto& g : grads_) g.clear();
}

void GradBuffer::accumulate_into(GradBuffer& dst) const {
  if (dst.grads_.size() != grads_.size()) throw std::invalid_argument("GradBuffer: size mismatch");
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i].accumulate_into(dst.grads_[i]);
}

}  // namespace dumn
