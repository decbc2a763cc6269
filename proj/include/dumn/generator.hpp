#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dumn/data.hpp"

namespace dumn {

/// Synthetic feedback simulator settings.
///
/// Each user has a stable preference vector (drawn around the centroid of a
/// demographic group, so similar users share long-term taste) plus a session
/// vector redrawn every `session_length` events. Affinity of an item is
/// `(preference + session_drift · session) · attributes`. Within a session,
/// items above the user's median affinity are "high", the rest "low".
struct GenConfig {
  int n_users = 300;
  int n_items = 400;
  int n_attributes = 8;  // latent dimension of preferences and item attributes
  int n_brands = 20;
  double click_noise_rate = 0.0;   // fraction of clicks drawn from low-affinity items
  double unclick_miss_rate = 0.0;  // fraction of unclicks drawn from high-affinity items
  int interactions_per_user = 120;
  std::uint64_t seed = 1;

  int session_length = 12;
  double session_drift = 0.6;
  double user_spread = 0.6;   // spread of users around their group centroid
  double brand_spread = 0.5;  // spread of items around their brand centroid
  // Explicit feedback is drawn from this top (like) / bottom (dislike) fraction.
  double explicit_quantile = 0.25;
  // Event-type mix; normalized internally.
  double p_click = 0.35;
  double p_unclick = 0.45;
  double p_like = 0.10;
  double p_dislike = 0.10;
  int n_genders = 2;
  int n_age_buckets = 4;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
};

struct UserTruth {
  std::int64_t user_id = 0;
  std::vector<int> fields;                   // gender, age bucket (1-based)
  std::vector<double> preference;            // stable, unit norm
  std::vector<std::vector<double>> sessions; // session vectors in order
};

struct ItemTruth {
  std::int64_t item_id = 0;
  std::int64_t brand_id = 0;
  std::vector<double> attributes;  // unit norm
};

struct GroundTruth {
  std::vector<UserTruth> users;
  std::vector<ItemTruth> items;

  /// Affinity of `item` for `user` during session `session`.
  double affinity(std::size_t user, std::size_t session, std::size_t item) const;
};

struct GeneratedData {
  std::vector<Interaction> log;  // grouped by user, timestamp-ascending within user
  GroundTruth truth;
};

GeneratedData generate(const GenConfig& config);
/// Same result as generate(); single-threaded reference path.
GeneratedData generate_serial(const GenConfig& config);

/// JSONL sidecar: one {"user_id",...} line per user, then one {"item_id",...} per item.
void write_ground_truth(std::ostream& out, const GroundTruth& truth);

}  // namespace dumn
