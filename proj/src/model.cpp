#include "dumn/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace dumn {

Feedback triplet_partner(Feedback f) {
  switch (f) {
    case Feedback::click: return Feedback::unclick;
    case Feedback::unclick: return Feedback::click;
    case Feedback::like: return Feedback::dislike;
    case Feedback::dislike: return Feedback::like;
  }
  throw std::logic_error("triplet_partner: unknown feedback");
}

namespace {

std::string channel_name(Feedback f, bool merged) { return merged ? std::string("merged") : std::string(to_string(f)); }

}  // namespace

Model::Model(const TrainConfig& config, const Vocab& vocab) : config_(config), vocab_(vocab) {
  config_.validate();
  Rng rng(derive_seed(config_.seed, 0x1417));
  const int E = config_.embed_dim;
  const int Z = config_.slot_dim;
  tables_ = EmbeddingTables::create(store_, rng, vocab_, E, config_.init_scale);

  switch (config_.feedback) {
    case FeedbackMode::all: channels_.assign(kAllFeedback.begin(), kAllFeedback.end()); break;
    case FeedbackMode::implicit_only: channels_ = {Feedback::click, Feedback::unclick}; break;
    case FeedbackMode::merged_sequence: channels_ = {Feedback::click}; break;
  }
  const std::size_t context = tables_.user_width() + tables_.item_width();
  for (Feedback f : channels_) {
    const std::string name = channel_name(f, merged());
    attention_.push_back(SelfAttention::create(store_, rng, "att." + name, E, config_.heads, config_.attention_scale));
    pooling_.push_back(TargetPooling::create(store_, rng, "pool." + name, context, E));
  }

  std::size_t bank_count = 0;
  if (config_.umn == UmnMode::four) bank_count = channels_.size();
  if (config_.umn == UmnMode::one) bank_count = 1;
  const std::size_t controller_input = static_cast<std::size_t>(E) + tables_.user_width();
  for (std::size_t b = 0; b < bank_count; ++b) {
    const std::string name = config_.umn == UmnMode::one ? "shared" : channel_name(channels_[b], merged());
    controllers_.push_back(
        MemoryController::create(store_, rng, "mem." + name, controller_input, config_.memory_hidden, Z));
    if (Z != E) anchor_proj_.push_back(store_.add("mem." + name + ".anchor", glorot(rng, Z, E)));
    memory_.push_back(MemoryBank::random(rng, config_.slots, Z));
  }

  std::size_t cross_width = 0;
  for (Feedback f : channels_) {
    fusion_.push_back(Fusion::create(store_, rng, "fuse." + channel_name(f, merged()), config_.fusion, E, Z,
                                     tables_.item_width()));
    cross_width += fusion_.back().width();
  }
  head_ = PredictionHead::create(store_, rng, "head", tables_.user_width() + tables_.item_width() + cross_width,
                                 config_.head_hidden);
}

int Model::bank_of(std::size_t k) const {
  if (memory_.empty()) return -1;
  return memory_.size() == 1 ? 0 : static_cast<int>(k);
}

std::span<const HistoryEvent> Model::pool(const Sample& s, const UserHistory& h, Feedback type) const {
  auto events = h.before(type, s.timestamp);
  const auto cap = static_cast<std::size_t>(config_.mining_pool);
  if (events.size() > cap) events = events.subspan(events.size() - cap);
  return events;
}

bool Model::has_triplet(const Sample& s, const UserHistory& h, std::size_t k) const {
  if (config_.triplet == TripletMode::off || memory_.empty() || merged()) return false;
  const Feedback f = channels_[k];
  return !pool(s, h, f).empty() && !pool(s, h, triplet_partner(f)).empty();
}

Matrix Model::candidate_rows(std::span<const HistoryEvent> events) const {
  const Matrix& items = store_[tables_.items].value;
  Matrix rows(events.size(), items.cols());
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto item = items.row(static_cast<std::size_t>(events[i].item));
    std::copy(item.begin(), item.end(), rows.row(i).begin());
  }
  return rows;
}

std::optional<Var> Model::triplet_term(Tape& t, const Sample& s, const UserHistory& h, std::size_t k, Var anchor,
                                       std::uint64_t mining_seed) const {
  if (!has_triplet(s, h, k)) return std::nullopt;
  const auto positives = pool(s, h, channels_[k]);
  const auto negatives = pool(s, h, triplet_partner(channels_[k]));
  Rng rng(derive_seed(mining_seed, k));
  const auto choice = mine_triplet(anchor.value().values(), candidate_rows(positives), candidate_rows(negatives),
                                   config_.triplet, rng);
  const HistoryEvent& p = positives[choice->positive];
  const HistoryEvent& n = negatives[choice->negative];
  Var sp = t.gather_rows(tables_.items, std::span<const int>(&p.item, 1));
  Var sn = t.gather_rows(tables_.items, std::span<const int>(&n.item, 1));
  return triplet(anchor, sp, sn, config_.margin);
}

SampleForward Model::forward(Tape& t, const Sample& s, const UserHistory& h, const ForwardOptions& options) const {
  const std::size_t K = channels_.size();
  SampleForward out;
  Var e_user = tables_.user_vector(t, s.user_id, s.user_fields);
  Var e_item = tables_.item_vector(t, s.target_item, s.target_brand);

  for (std::size_t k = 0; k < K; ++k) {
    const Sequence& seq = merged() ? s.merged : s.sequence(channels_[k]);
    Var o = attention_[k].forward(t, tables_.embed_sequence(t, seq), seq.mask);
    out.pooled.push_back(pooling_[k].forward(t, o, e_user, e_item, seq.mask).pooled);
  }

  out.purified = out.pooled;
  if (config_.fp_enabled && config_.feedback == FeedbackMode::all) {
    out.purified[index_of(Feedback::click)] =
        purify(t, out.pooled[index_of(Feedback::click)], out.pooled[index_of(Feedback::dislike)]).kept;
    out.purified[index_of(Feedback::unclick)] =
        purify(t, out.pooled[index_of(Feedback::unclick)], out.pooled[index_of(Feedback::like)]).kept;
  }

  const auto Z = static_cast<std::size_t>(config_.slot_dim);
  const bool post_write = config_.anchor == AnchorSource::post_write;
  for (std::size_t k = 0; k < K; ++k) {
    const int b = bank_of(k);
    if (b < 0) {
      out.reads.push_back(t.constant(Matrix(1, Z)));
      continue;
    }
    const MemoryController& c = controllers_[static_cast<std::size_t>(b)];
    Var input = concat_cols({out.purified[k], e_user});
    Var slots = t.constant_ref(memory_[static_cast<std::size_t>(b)].slots);
    out.reads.push_back(read_memory(t, c, input, slots).value);
    out.writes.push_back(write_memory(t, c, input, slots, post_write));
  }

  std::vector<Var> fused;
  for (std::size_t k = 0; k < K; ++k)
    fused.push_back(fusion_[k].forward(t, out.purified[k], out.reads[k], e_item, options.unit_gates));
  out.prediction = head_.forward(t, concat_cols({e_user, e_item, cross_representation(fused)}));

  out.triplets.resize(K);
  if (options.with_triplets) {
    for (std::size_t k = 0; k < K && k < out.writes.size(); ++k) {
      Var anchor = out.writes[k].anchor;
      const int b = bank_of(k);
      if (!anchor_proj_.empty()) anchor = matmul(anchor, t.param(anchor_proj_[static_cast<std::size_t>(b)]));
      out.triplets[k] = triplet_term(t, s, h, k, anchor, options.mining_seed);
    }
  }
  return out;
}

double Model::predict(const Sample& s, const UserHistory& h) const {
  Tape t(const_cast<ParamStore*>(&store_));
  ForwardOptions options;
  options.with_triplets = false;
  return forward(t, s, h, options).prediction.scalar();
}

std::vector<WriteValues> Model::write_values(const SampleForward& f) {
  auto copy = [](Var v) { return std::vector<double>(v.value().values().begin(), v.value().values().end()); };
  std::vector<WriteValues> out;
  for (const WriteResult& w : f.writes) out.push_back({copy(w.weights), copy(w.erase), copy(w.add)});
  return out;
}

void Model::commit_writes(std::span<const WriteValues> writes) {
  for (std::size_t k = 0; k < writes.size(); ++k)
    apply_write(memory_[static_cast<std::size_t>(bank_of(k))].slots, writes[k].weights, writes[k].erase,
                writes[k].add);
}

}  // namespace dumn
