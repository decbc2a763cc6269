#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dumn {

enum class Feedback : std::uint8_t { click = 0, unclick = 1, like = 2, dislike = 3 };
inline constexpr std::size_t kFeedbackTypes = 4;
inline constexpr std::array<Feedback, kFeedbackTypes> kAllFeedback{
    Feedback::click, Feedback::unclick, Feedback::like, Feedback::dislike};

std::string_view to_string(Feedback f);
/// Throws std::invalid_argument("unknown feedback tag: <tag>").
Feedback parse_feedback(std::string_view tag);
inline std::size_t index_of(Feedback f) { return static_cast<std::size_t>(f); }

/// One user-item feedback event. Ids are raw (≥ 0); brand and profile fields use
/// 0 for "unknown".
struct Interaction {
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  std::int64_t timestamp = 0;
  Feedback feedback = Feedback::click;
  std::optional<int> label;
  std::int64_t brand_id = 0;
  std::vector<int> user_fields;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Reads one JSON object per line. Blank lines are skipped; unknown keys are ignored.
/// Malformed lines throw naming the 1-based line number.
std::vector<Interaction> load_jsonl(const std::string& path);
std::vector<Interaction> parse_jsonl(std::istream& in);
void write_jsonl(std::ostream& out, const std::vector<Interaction>& log);

}  // namespace dumn
