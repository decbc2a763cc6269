#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dumn/samples.hpp"

namespace dumn {

enum class UmnMode : std::uint8_t { four, one, off };
enum class FusionMode : std::uint8_t { gate, concat, cross, ffn, attention };
enum class TripletMode : std::uint8_t { hardest, random, off };
enum class FeedbackMode : std::uint8_t { all, implicit_only, merged_sequence };
/// Self-attention score divisor: √T (sequence length) or √(E/H) (head width).
enum class AttentionScale : std::uint8_t { seq_len, head_dim };
/// Which memory content the triplet anchor summarizes.
enum class AnchorSource : std::uint8_t { pre_write, post_write };

/// Every hyper-parameter, ablation switch and seed of a run.
struct TrainConfig {
  int seq_len = 20;      // T
  int embed_dim = 16;    // E
  int heads = 2;         // H
  int slots = 32;        // m
  int slot_dim = 16;     // Z
  std::vector<int> head_hidden{64, 32};
  int memory_hidden = 32;

  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 64;
  int epochs = 3;
  std::uint64_t seed = 1;

  bool fp_enabled = true;
  UmnMode umn = UmnMode::four;
  FusionMode fusion = FusionMode::gate;
  TripletMode triplet = TripletMode::hardest;
  FeedbackMode feedback = FeedbackMode::all;
  TargetLabel target = TargetLabel::click;

  double margin = 0.2;
  double prediction_eps = 1e-7;
  AttentionScale attention_scale = AttentionScale::seq_len;
  AnchorSource anchor = AnchorSource::pre_write;
  int mining_pool = 100;  // most recent candidates per type considered when mining
  double test_fraction = 0.2;
  double init_scale = 0.1;  // std of embedding initialization
  int threads = 0;          // 0: OpenMP default
  bool record_time = false; // wall-clock seconds in metrics (makes output nondeterministic)

  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const;

  /// Sets one key from its textual value; throws on unknown key or bad value.
  void set(const std::string& key, const std::string& value);
  /// Every recognised key with its current value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
  static std::vector<std::string> keys();
};

/// Parses `key = value` lines; `#` starts a comment. Throws naming the line.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in);
TrainConfig load_config(const std::string& path);
void write_config(std::ostream& out, const TrainConfig& config);

std::string to_string(UmnMode m);
std::string to_string(FusionMode m);
std::string to_string(TripletMode m);
std::string to_string(FeedbackMode m);
std::string to_string(TargetLabel t);

}  // namespace dumn
