#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dumn/data.hpp"

namespace dumn {

/// Item tokens inside samples are `item_id + 1` (and user tokens `user_id + 1`);
/// token 0 is the reserved pad.
inline int item_token(std::int64_t item_id) { return static_cast<int>(item_id + 1); }
inline int user_token(std::int64_t user_id) { return static_cast<int>(user_id + 1); }

/// Fixed-length, right-aligned history: most recent event last, pads on the left.
struct Sequence {
  std::vector<int> items;   // tokens, 0 where masked
  std::vector<int> brands;  // brand ids, 0 where masked
  std::vector<std::uint8_t> mask;

  std::size_t length() const noexcept { return items.size(); }
  std::size_t valid_count() const;
};

enum class TargetLabel : std::uint8_t { click, dislike };

struct Sample {
  std::int64_t user_id = 0;
  std::vector<int> user_fields;
  int target_item = 0;  // token
  int target_brand = 0;
  int label = 0;
  std::int64_t timestamp = 0;
  std::array<Sequence, kFeedbackTypes> sequences;  // indexed by Feedback
  Sequence merged;  // all feedback types interleaved by time, length 4T
  std::size_t history = 0;  // index into Dataset::histories

  const Sequence& sequence(Feedback f) const { return sequences[index_of(f)]; }
};

struct HistoryEvent {
  std::int64_t timestamp = 0;
  int item = 0;  // token
  int brand = 0;
};

/// Full per-user history by feedback type, timestamp-ascending.
struct UserHistory {
  std::int64_t user_id = 0;
  std::array<std::vector<HistoryEvent>, kFeedbackTypes> by_type;

  /// Events of `type` strictly before `timestamp`.
  std::span<const HistoryEvent> before(Feedback type, std::int64_t timestamp) const;
};

/// Table sizes needed to embed a log (each is max id + 1, tokens included).
struct Vocab {
  int item_tokens = 1;
  int brand_ids = 1;
  int user_tokens = 1;
  std::vector<int> field_sizes;

  void merge(const Vocab& other);
  friend bool operator==(const Vocab&, const Vocab&) = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<UserHistory> histories;
  Vocab vocab;
};

Vocab vocab_of(std::span<const Interaction> log);

/// One Sample per impression (click/unclick events for TargetLabel::click,
/// like/dislike for TargetLabel::dislike); label 1 for click (resp. dislike).
/// Each history sequence holds the T most recent strictly-earlier events of its type.
/// Samples are grouped by user (ascending id) then ordered by time.
Dataset build_samples(std::span<const Interaction> log, int seq_len, TargetLabel target);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-user temporal split: the last floor(test_fraction · n) impressions of each user
/// are test samples.
Split temporal_split(const Dataset& data, double test_fraction);

}  // namespace dumn
