#include "dumn/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dumn {

Matrix glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (double& v : m.values()) v = rng.uniform(-limit, limit);
  return m;
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = stddev * rng.normal();
  return m;
}

namespace {

Matrix row_mask(std::span<const std::uint8_t> mask, std::size_t cols) {
  Matrix m(mask.size(), cols);
  for (std::size_t t = 0; t < mask.size(); ++t)
    if (mask[t]) std::fill(m.row(t).begin(), m.row(t).end(), 1.0);
  return m;
}

bool any_valid(std::span<const std::uint8_t> mask) {
  for (auto v : mask)
    if (v) return true;
  return false;
}

}  // namespace

EmbeddingTables EmbeddingTables::create(ParamStore& store, Rng& rng, const Vocab& vocab, int dim,
                                        double init_scale) {
  if (dim < 1) throw std::invalid_argument("EmbeddingTables: dim must be >= 1");
  const auto E = static_cast<std::size_t>(dim);
  EmbeddingTables t;
  t.dim = dim;
  t.items = store.add("emb.item", gaussian_matrix(rng, static_cast<std::size_t>(vocab.item_tokens), E, init_scale), true);
  t.brands = store.add("emb.brand", gaussian_matrix(rng, static_cast<std::size_t>(vocab.brand_ids), E, init_scale), true);
  t.users = store.add("emb.user", gaussian_matrix(rng, static_cast<std::size_t>(vocab.user_tokens), E, init_scale), true);
  for (std::size_t f = 0; f < vocab.field_sizes.size(); ++f) {
    t.fields.push_back(store.add("emb.field" + std::to_string(f),
                                 gaussian_matrix(rng, static_cast<std::size_t>(vocab.field_sizes[f]), E, init_scale), true));
  }
  t.seq_weight = store.add("emb.seq_proj.w", glorot(rng, 2 * E, E));
  t.seq_bias = store.add("emb.seq_proj.b", Matrix(1, E));
  return t;
}

Var EmbeddingTables::user_vector(Tape& t, std::int64_t user_id, std::span<const int> field_values) const {
  std::vector<Var> parts;
  const int token = user_token(user_id);
  parts.push_back(t.gather_rows(users, std::span<const int>(&token, 1)));
  for (std::size_t f = 0; f < fields.size(); ++f) {
    const int v = f < field_values.size() ? field_values[f] : 0;
    parts.push_back(t.gather_rows(fields[f], std::span<const int>(&v, 1)));
  }
  return concat_cols(parts);
}

Var EmbeddingTables::item_vector(Tape& t, int item_token, int brand) const {
  return concat_cols({t.gather_rows(items, std::span<const int>(&item_token, 1)),
                      t.gather_rows(brands, std::span<const int>(&brand, 1))});
}

Var EmbeddingTables::item_rows(Tape& t, std::span<const int> item_ids, std::span<const int> brand_ids) const {
  if (item_ids.size() != brand_ids.size()) throw std::invalid_argument("item_rows: items and brands differ in length");
  Var raw = concat_cols({t.gather_rows(items, item_ids), t.gather_rows(brands, brand_ids)});
  return affine(raw, t.param(seq_weight), t.param(seq_bias));
}

Var EmbeddingTables::embed_sequence(Tape& t, const Sequence& seq) const {
  if (seq.mask.size() != seq.items.size() || seq.brands.size() != seq.items.size())
    throw std::invalid_argument("embed_sequence: mask length differs from sequence length");
  if (!any_valid(seq.mask)) {
    for (int id : seq.items)
      if (id != 0) throw std::invalid_argument("embed_sequence: masked position holds non-pad id");
    return t.constant(Matrix(seq.length(), static_cast<std::size_t>(dim)));
  }
  Var rows = item_rows(t, seq.items, seq.brands);
  return mul(rows, t.constant(row_mask(seq.mask, static_cast<std::size_t>(dim))));
}

SelfAttention SelfAttention::create(ParamStore& store, Rng& rng, const std::string& prefix, int dim,
                                    int heads, AttentionScale scale) {
  if (heads < 1 || dim % heads != 0)
    throw std::invalid_argument("SelfAttention: embedding dim " + std::to_string(dim) +
                                " not divisible by heads " + std::to_string(heads));
  SelfAttention a;
  a.heads = heads;
  a.dim = dim;
  a.scale = scale;
  const auto dh = static_cast<std::size_t>(dim / heads);
  for (int h = 0; h < heads; ++h) {
    const std::string p = prefix + ".head" + std::to_string(h);
    a.query.push_back(store.add(p + ".wq", glorot(rng, dh, dh)));
    a.key.push_back(store.add(p + ".wk", glorot(rng, dh, dh)));
    a.value.push_back(store.add(p + ".wv", glorot(rng, dh, dh)));
  }
  a.output = store.add(prefix + ".wf", glorot(rng, static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)));
  return a;
}

Var SelfAttention::forward(Tape& t, Var seq, std::span<const std::uint8_t> mask) const {
  const std::size_t T = mask.size();
  if (seq.rows() != T || seq.cols() != static_cast<std::size_t>(dim))
    throw std::invalid_argument("SelfAttention: input " + seq.value().shape_string() + " vs T=" +
                                std::to_string(T) + ", E=" + std::to_string(dim));
  if (!any_valid(mask)) return t.constant(Matrix(T, static_cast<std::size_t>(dim)));

  const auto dh = static_cast<std::size_t>(dim / heads);
  const double divisor = std::sqrt(static_cast<double>(scale == AttentionScale::seq_len ? T : dh));
  Matrix logit_mask(T, T);
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = 0; j < T; ++j)
      if (!mask[j]) logit_mask(i, j) = kMaskLogit;
  Var mask_var = t.constant(std::move(logit_mask));

  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    Var part = slice_cols(seq, static_cast<std::size_t>(h) * dh, static_cast<std::size_t>(h + 1) * dh);
    Var q = matmul(part, t.param(query[static_cast<std::size_t>(h)]));
    Var k = matmul(part, t.param(key[static_cast<std::size_t>(h)]));
    Var v = matmul(part, t.param(value[static_cast<std::size_t>(h)]));
    Var scores = add(dumn::scale(matmul_nt(q, k), 1.0 / divisor), mask_var);
    outs.push_back(matmul(softmax_rows(scores), v));
  }
  Var mixed = matmul(concat_cols(outs), t.param(output));
  return mul(mixed, t.constant(row_mask(mask, static_cast<std::size_t>(dim))));
}

TargetPooling TargetPooling::create(ParamStore& store, Rng& rng, const std::string& prefix,
                                    std::size_t context_width, int dim) {
  TargetPooling p;
  p.weight = store.add(prefix + ".wc", glorot(rng, context_width + static_cast<std::size_t>(dim), 1));
  return p;
}

TargetPooling::Result TargetPooling::forward(Tape& t, Var seq_out, Var e_user, Var e_item,
                                             std::span<const std::uint8_t> mask) const {
  const std::size_t T = mask.size();
  if (seq_out.rows() != T) throw std::invalid_argument("TargetPooling: sequence rows differ from mask length");
  if (!any_valid(mask)) return {t.constant(Matrix(1, seq_out.cols())), Var{}, true};
  Var context = repeat_rows(concat_cols({e_user, e_item}), T);
  Var scores = relu(matmul(concat_cols({context, seq_out}), t.param(weight)));  // T×1
  Matrix logit_mask(1, T);
  for (std::size_t j = 0; j < T; ++j)
    if (!mask[j]) logit_mask[j] = kMaskLogit;
  Var weights = softmax_rows(add(transpose(scores), t.constant(std::move(logit_mask))));
  return {matmul(weights, seq_out), weights, false};
}

std::vector<double> orthogonal_project(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("orthogonal_project: dims " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  std::vector<double> out(a.size(), 0.0);
  const double bb = dot(b, b);
  if (std::sqrt(bb) < kDegenerateNorm) return out;
  const double coef = dot(a, b) / bb;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = coef * b[i];
  return out;
}

Purified purify(std::span<const double> implicit, std::span<const double> explicit_) {
  Purified p;
  p.removed = orthogonal_project(implicit, explicit_);
  p.kept.resize(implicit.size());
  for (std::size_t i = 0; i < implicit.size(); ++i) p.kept[i] = implicit[i] - p.removed[i];
  return p;
}

PurifiedVars purify(Tape& t, Var implicit, Var explicit_) {
  if (!implicit.value().same_shape(explicit_.value()))
    throw std::invalid_argument("purify: shape mismatch " + implicit.value().shape_string() + " vs " +
                                explicit_.value().shape_string());
  if (norm(explicit_.value().values()) < kDegenerateNorm) {
    return {implicit, t.constant(Matrix(implicit.rows(), implicit.cols()))};
  }
  Var coef = divide(dot(implicit, explicit_), dot(explicit_, explicit_));
  Var removed = scale_by(coef, explicit_);
  return {sub(implicit, removed), removed};
}

}  // namespace dumn
