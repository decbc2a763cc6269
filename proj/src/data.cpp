#include "dumn/data.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace dumn {

std::string_view to_string(Feedback f) {
  switch (f) {
    case Feedback::click: return "click";
    case Feedback::unclick: return "unclick";
    case Feedback::like: return "like";
    case Feedback::dislike: return "dislike";
  }
  return "?";
}

Feedback parse_feedback(std::string_view tag) {
  for (Feedback f : kAllFeedback)
    if (to_string(f) == tag) return f;
  throw std::invalid_argument("unknown feedback tag: " + std::string(tag));
}

namespace {

std::int64_t required_int(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw std::invalid_argument(std::string("missing key '") + key + "'");
  if (!it->is_number_integer()) throw std::invalid_argument(std::string("key '") + key + "' is not an integer");
  return it->get<std::int64_t>();
}

Interaction parse_line(const std::string& line) {
  const nlohmann::json obj = nlohmann::json::parse(line);
  if (!obj.is_object()) throw std::invalid_argument("not a JSON object");
  Interaction r;
  r.user_id = required_int(obj, "user_id");
  r.item_id = required_int(obj, "item_id");
  r.timestamp = required_int(obj, "timestamp");
  if (r.user_id < 0 || r.item_id < 0) throw std::invalid_argument("negative id");
  auto fb = obj.find("feedback");
  if (fb == obj.end() || !fb->is_string()) throw std::invalid_argument("missing string key 'feedback'");
  r.feedback = parse_feedback(fb->get<std::string>());
  if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) r.label = it->get<int>();
  if (auto it = obj.find("brand_id"); it != obj.end()) r.brand_id = it->get<std::int64_t>();
  if (auto it = obj.find("user_fields"); it != obj.end()) r.user_fields = it->get<std::vector<int>>();
  return r;
}

}  // namespace

std::vector<Interaction> parse_jsonl(std::istream& in) {
  std::vector<Interaction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_line(line));
    } catch (const std::invalid_argument& e) {
      const std::string what = e.what();
      if (what.rfind("unknown feedback tag", 0) == 0) {
        throw std::invalid_argument("line " + std::to_string(lineno) + ": " + what);
      }
      throw std::invalid_argument("line " + std::to_string(lineno) + ": malformed record: " + what);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": malformed record: " + e.what());
    }
  }
  return out;
}

std::vector<Interaction> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_jsonl(in);
}

void write_jsonl(std::ostream& out, const std::vector<Interaction>& log) {
  for (const Interaction& r : log) {
    nlohmann::ordered_json obj;
    obj["user_id"] = r.user_id;
    obj["item_id"] = r.item_id;
    obj["timestamp"] = r.timestamp;
    obj["feedback"] = std::string(to_string(r.feedback));
    if (r.label) obj["label"] = *r.label;
    if (r.brand_id != 0) obj["brand_id"] = r.brand_id;
    if (!r.user_fields.empty()) obj["user_fields"] = r.user_fields;
    out << obj.dump() << '\n';
  }
}

}  // namespace dumn
