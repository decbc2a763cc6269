#include "dumn/config.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dumn {

namespace {

template <typename E, std::size_t N>
using Names = std::array<std::pair<E, const char*>, N>;

constexpr Names<UmnMode, 3> kUmn{{{UmnMode::four, "four"}, {UmnMode::one, "one"}, {UmnMode::off, "off"}}};
constexpr Names<FusionMode, 5> kFusion{{{FusionMode::gate, "gate"},
                                        {FusionMode::concat, "concat"},
                                        {FusionMode::cross, "cross"},
                                        {FusionMode::ffn, "ffn"},
                                        {FusionMode::attention, "attention"}}};
constexpr Names<TripletMode, 3> kTriplet{
    {{TripletMode::hardest, "hardest"}, {TripletMode::random, "random"}, {TripletMode::off, "off"}}};
constexpr Names<FeedbackMode, 3> kFeedbackMode{{{FeedbackMode::all, "all"},
                                                {FeedbackMode::implicit_only, "implicit_only"},
                                                {FeedbackMode::merged_sequence, "merged_sequence"}}};
constexpr Names<TargetLabel, 2> kTarget{{{TargetLabel::click, "click"}, {TargetLabel::dislike, "dislike"}}};
constexpr Names<AttentionScale, 2> kScale{
    {{AttentionScale::seq_len, "seq_len"}, {AttentionScale::head_dim, "head_dim"}}};
constexpr Names<AnchorSource, 2> kAnchor{
    {{AnchorSource::pre_write, "pre_write"}, {AnchorSource::post_write, "post_write"}}};

template <typename E, std::size_t N>
std::string name_of(const Names<E, N>& names, E v) {
  for (const auto& [e, n] : names)
    if (e == v) return n;
  return "?";
}

template <typename E, std::size_t N>
E parse_enum(const Names<E, N>& names, const std::string& key, const std::string& v) {
  for (const auto& [e, n] : names)
    if (v == n) return e;
  std::string allowed;
  for (const auto& [e, n] : names) allowed += std::string(allowed.empty() ? "" : "|") + n;
  throw std::invalid_argument("config: " + key + " must be one of " + allowed + ", got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("config: bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("config: " + key + " must be true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, item));
  if (out.empty()) throw std::invalid_argument("config: " + key + " needs at least one width");
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_string(UmnMode m) { return name_of(kUmn, m); }
std::string to_string(FusionMode m) { return name_of(kFusion, m); }
std::string to_string(TripletMode m) { return name_of(kTriplet, m); }
std::string to_string(FeedbackMode m) { return name_of(kFeedbackMode, m); }
std::string to_string(TargetLabel t) { return name_of(kTarget, t); }

void TrainConfig::validate() const {
  auto positive = [](long v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string("config: ") + name + " must be >= 1");
  };
  positive(seq_len, "seq_len");
  positive(embed_dim, "embed_dim");
  positive(heads, "heads");
  positive(slots, "slots");
  positive(slot_dim, "slot_dim");
  positive(memory_hidden, "memory_hidden");
  positive(batch_size, "batch_size");
  positive(epochs, "epochs");
  positive(mining_pool, "mining_pool");
  for (int w : head_hidden) positive(w, "head_hidden");
  if (embed_dim % heads != 0) throw std::invalid_argument("config: embed_dim must be divisible by heads");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("config: learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("config: Adam betas must be in [0,1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("config: adam_eps must be > 0");
  if (!(margin >= 0.0)) throw std::invalid_argument("config: margin must be >= 0");
  if (!(prediction_eps > 0.0 && prediction_eps < 0.5))
    throw std::invalid_argument("config: prediction_eps must be in (0, 0.5)");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("config: test_fraction must be in [0,1)");
  if (!(init_scale > 0.0)) throw std::invalid_argument("config: init_scale must be > 0");
  if (threads < 0) throw std::invalid_argument("config: threads must be >= 0");
}

void TrainConfig::set(const std::string& key, const std::string& v) {
  if (key == "seq_len") seq_len = parse_number<int>(key, v);
  else if (key == "embed_dim") embed_dim = parse_number<int>(key, v);
  else if (key == "heads") heads = parse_number<int>(key, v);
  else if (key == "slots") slots = parse_number<int>(key, v);
  else if (key == "slot_dim") slot_dim = parse_number<int>(key, v);
  else if (key == "head_hidden") head_hidden = parse_int_list(key, v);
  else if (key == "memory_hidden") memory_hidden = parse_number<int>(key, v);
  else if (key == "learning_rate") learning_rate = parse_number<double>(key, v);
  else if (key == "beta1") beta1 = parse_number<double>(key, v);
  else if (key == "beta2") beta2 = parse_number<double>(key, v);
  else if (key == "adam_eps") adam_eps = parse_number<double>(key, v);
  else if (key == "batch_size") batch_size = parse_number<int>(key, v);
  else if (key == "epochs") epochs = parse_number<int>(key, v);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, v);
  else if (key == "fp_enabled") fp_enabled = parse_bool(key, v);
  else if (key == "umn") umn = parse_enum(kUmn, key, v);
  else if (key == "fusion") fusion = parse_enum(kFusion, key, v);
  else if (key == "triplet") triplet = parse_enum(kTriplet, key, v);
  else if (key == "feedback") feedback = parse_enum(kFeedbackMode, key, v);
  else if (key == "target") target = parse_enum(kTarget, key, v);
  else if (key == "margin") margin = parse_number<double>(key, v);
  else if (key == "prediction_eps") prediction_eps = parse_number<double>(key, v);
  else if (key == "attention_scale") attention_scale = parse_enum(kScale, key, v);
  else if (key == "anchor") anchor = parse_enum(kAnchor, key, v);
  else if (key == "mining_pool") mining_pool = parse_number<int>(key, v);
  else if (key == "test_fraction") test_fraction = parse_number<double>(key, v);
  else if (key == "init_scale") init_scale = parse_number<double>(key, v);
  else if (key == "threads") threads = parse_number<int>(key, v);
  else if (key == "record_time") record_time = parse_bool(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_pairs() const {
  std::string widths;
  for (int w : head_hidden) widths += (widths.empty() ? "" : ",") + std::to_string(w);
  return {
      {"seq_len", std::to_string(seq_len)},
      {"embed_dim", std::to_string(embed_dim)},
      {"heads", std::to_string(heads)},
      {"slots", std::to_string(slots)},
      {"slot_dim", std::to_string(slot_dim)},
      {"head_hidden", widths},
      {"memory_hidden", std::to_string(memory_hidden)},
      {"learning_rate", fmt_double(learning_rate)},
      {"beta1", fmt_double(beta1)},
      {"beta2", fmt_double(beta2)},
      {"adam_eps", fmt_double(adam_eps)},
      {"batch_size", std::to_string(batch_size)},
      {"epochs", std::to_string(epochs)},
      {"seed", std::to_string(seed)},
      {"fp_enabled", fp_enabled ? "true" : "false"},
      {"umn", to_string(umn)},
      {"fusion", to_string(fusion)},
      {"triplet", to_string(triplet)},
      {"feedback", to_string(feedback)},
      {"target", to_string(target)},
      {"margin", fmt_double(margin)},
      {"prediction_eps", fmt_double(prediction_eps)},
      {"attention_scale", name_of(kScale, attention_scale)},
      {"anchor", name_of(kAnchor, anchor)},
      {"mining_pool", std::to_string(mining_pool)},
      {"test_fraction", fmt_double(test_fraction)},
      {"init_scale", fmt_double(init_scale)},
      {"threads", std::to_string(threads)},
      {"record_time", record_time ? "true" : "false"},
  };
}

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> out;
  for (auto& [k, v] : TrainConfig{}.to_pairs()) out.push_back(k);
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  TrainConfig c;
  for (const auto& [k, v] : parse_key_values(in)) c.set(k, v);
  return c;
}

void write_config(std::ostream& out, const TrainConfig& config) {
  for (const auto& [k, v] : config.to_pairs()) out << k << " = " << v << '\n';
}

}  // namespace dumn
