#include "dumn/samples.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace dumn {

std::size_t Sequence::valid_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::span<const HistoryEvent> UserHistory::before(Feedback type, std::int64_t timestamp) const {
  const auto& events = by_type[index_of(type)];
  auto end = std::lower_bound(events.begin(), events.end(), timestamp,
                              [](const HistoryEvent& e, std::int64_t t) { return e.timestamp < t; });
  return {events.data(), static_cast<std::size_t>(end - events.begin())};
}

void Vocab::merge(const Vocab& other) {
  item_tokens = std::max(item_tokens, other.item_tokens);
  brand_ids = std::max(brand_ids, other.brand_ids);
  user_tokens = std::max(user_tokens, other.user_tokens);
  if (field_sizes.size() < other.field_sizes.size()) field_sizes.resize(other.field_sizes.size(), 1);
  for (std::size_t i = 0; i < other.field_sizes.size(); ++i)
    field_sizes[i] = std::max(field_sizes[i], other.field_sizes[i]);
}

Vocab vocab_of(std::span<const Interaction> log) {
  Vocab v;
  for (const auto& r : log) {
    v.item_tokens = std::max(v.item_tokens, item_token(r.item_id) + 1);
    v.user_tokens = std::max(v.user_tokens, user_token(r.user_id) + 1);
    v.brand_ids = std::max(v.brand_ids, static_cast<int>(r.brand_id) + 1);
    if (v.field_sizes.size() < r.user_fields.size()) v.field_sizes.resize(r.user_fields.size(), 1);
    for (std::size_t i = 0; i < r.user_fields.size(); ++i)
      v.field_sizes[i] = std::max(v.field_sizes[i], r.user_fields[i] + 1);
  }
  return v;
}

namespace {

bool is_impression(Feedback f, TargetLabel target) {
  if (target == TargetLabel::click) return f == Feedback::click || f == Feedback::unclick;
  return f == Feedback::like || f == Feedback::dislike;
}

int label_of(Feedback f, TargetLabel target) {
  return target == TargetLabel::click ? (f == Feedback::click ? 1 : 0) : (f == Feedback::dislike ? 1 : 0);
}

// Right-aligned window over events [0, end) of `events`.
template <typename Events, typename Pick>
Sequence window(const Events& events, std::size_t end, std::size_t len, Pick pick) {
  Sequence s;
  s.items.assign(len, 0);
  s.brands.assign(len, 0);
  s.mask.assign(len, 0);
  const std::size_t take = std::min(end, len);
  for (std::size_t k = 0; k < take; ++k) {
    const auto& e = pick(events[end - take + k]);
    const std::size_t pos = len - take + k;
    s.items[pos] = e.item;
    s.brands[pos] = e.brand;
    s.mask[pos] = 1;
  }
  return s;
}

}  // namespace

Dataset build_samples(std::span<const Interaction> log, int seq_len, TargetLabel target) {
  if (seq_len <= 0) throw std::invalid_argument("build_samples: T must be positive");
  const std::size_t T = static_cast<std::size_t>(seq_len);
  Dataset data;
  data.vocab = vocab_of(log);

  std::map<std::int64_t, std::vector<const Interaction*>> per_user;
  for (const auto& r : log) per_user[r.user_id].push_back(&r);

  for (auto& [user, events] : per_user) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Interaction* a, const Interaction* b) { return a->timestamp < b->timestamp; });
    UserHistory hist;
    hist.user_id = user;
    std::vector<HistoryEvent> all;
    for (const Interaction* r : events) {
      HistoryEvent e{r->timestamp, item_token(r->item_id), static_cast<int>(r->brand_id)};
      hist.by_type[index_of(r->feedback)].push_back(e);
      all.push_back(e);
    }
    const std::size_t hist_index = data.histories.size();

    // `cursor[k]` counts events of type k strictly before the current timestamp;
    // `all_cursor` likewise over every type.
    std::array<std::size_t, kFeedbackTypes> cursor{};
    std::size_t all_cursor = 0;
    std::array<std::size_t, kFeedbackTypes> seen{};
    for (std::size_t i = 0; i < events.size(); ++i) {
      const Interaction& r = *events[i];
      // Advance cursors past every event with an earlier timestamp.
      while (all_cursor < i && events[all_cursor]->timestamp < r.timestamp) ++all_cursor;
      for (std::size_t k = 0; k < kFeedbackTypes; ++k) {
        const auto& typed = hist.by_type[k];
        while (cursor[k] < seen[k] && typed[cursor[k]].timestamp < r.timestamp) ++cursor[k];
      }
      if (is_impression(r.feedback, target)) {
        Sample s;
        s.user_id = user;
        s.user_fields = r.user_fields;
        s.target_item = item_token(r.item_id);
        s.target_brand = static_cast<int>(r.brand_id);
        s.label = label_of(r.feedback, target);
        s.timestamp = r.timestamp;
        s.history = hist_index;
        auto ident = [](const HistoryEvent& e) -> const HistoryEvent& { return e; };
        for (std::size_t k = 0; k < kFeedbackTypes; ++k)
          s.sequences[k] = window(hist.by_type[k], cursor[k], T, ident);
        s.merged = window(all, all_cursor, kFeedbackTypes * T, ident);
        data.samples.push_back(std::move(s));
      }
      ++seen[index_of(r.feedback)];
    }
    data.histories.push_back(std::move(hist));
  }
  return data;
}

Split temporal_split(const Dataset& data, double test_fraction) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("temporal_split: fraction must be in [0,1)");
  Split split;
  std::size_t begin = 0;
  while (begin < data.samples.size()) {
    std::size_t end = begin;
    while (end < data.samples.size() && data.samples[end].history == data.samples[begin].history) ++end;
    const std::size_t n = end - begin;
    const std::size_t n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
    for (std::size_t i = begin; i < end; ++i) (i < end - n_test ? split.train : split.test).push_back(i);
    begin = end;
  }
  return split;
}

}  // namespace dumn
