#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "dumn/generator.hpp"
#include "dumn/samples.hpp"

using namespace dumn;

namespace {

std::string log_bytes(const GeneratedData& d) {
  std::ostringstream os;
  write_jsonl(os, d.log);
  write_ground_truth(os, d.truth);
  return os.str();
}

Interaction ev(std::int64_t user, std::int64_t item, std::int64_t ts, Feedback f) {
  Interaction r;
  r.user_id = user;
  r.item_id = item;
  r.timestamp = ts;
  r.feedback = f;
  r.brand_id = 1 + item % 3;
  return r;
}

}  // namespace

TEST(Jsonl, EmptyInputGivesEmptyLog) {
  std::istringstream in("");
  EXPECT_TRUE(parse_jsonl(in).empty());
}

TEST(Jsonl, ParsesLikeAndIgnoresUnknownKeys) {
  std::istringstream in(R"({"user_id":3,"item_id":7,"timestamp":12,"feedback":"like","extra":"x"})" "\n");
  const auto log = parse_jsonl(in);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].feedback, Feedback::like);
  EXPECT_EQ(log[0].user_id, 3);
  EXPECT_EQ(log[0].item_id, 7);
  EXPECT_EQ(log[0].timestamp, 12);
  EXPECT_FALSE(log[0].label.has_value());
}

TEST(Jsonl, UnknownTagIsRejectedByName) {
  std::istringstream in("{\"user_id\":1,\"item_id\":2,\"timestamp\":3,\"feedback\":\"click\"}\n"
                        "{\"user_id\":1,\"item_id\":2,\"timestamp\":4,\"feedback\":\"purchase\"}\n");
  try {
    parse_jsonl(in);
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("unknown feedback tag"), std::string::npos);
    EXPECT_NE(msg.find("purchase"), std::string::npos);
    EXPECT_NE(msg.find("line 2"), std::string::npos);
  }
}

TEST(Jsonl, MalformedLineNamesLineNumber) {
  std::istringstream in("{\"user_id\":1,\"item_id\":2,\"timestamp\":3,\"feedback\":\"click\"}\n\n{not json\n");
  try {
    parse_jsonl(in);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Jsonl, WriteThenParsePreservesRecords) {
  GenConfig c;
  c.n_users = 5;
  c.n_items = 30;
  c.interactions_per_user = 17;
  const auto d = generate(c);
  std::stringstream ss;
  write_jsonl(ss, d.log);
  EXPECT_EQ(parse_jsonl(ss), d.log);
}

TEST(Generator, RejectsEmptyVocabularies) {
  GenConfig c;
  c.n_items = 0;
  EXPECT_THROW(generate(c), std::invalid_argument);
  c = GenConfig{};
  c.n_users = 0;
  EXPECT_THROW(generate(c), std::invalid_argument);
  c = GenConfig{};
  c.click_noise_rate = 1.5;
  EXPECT_THROW(generate(c), std::invalid_argument);
}

TEST(Generator, SameSeedSameBytes) {
  GenConfig c;
  c.n_users = 20;
  c.n_items = 50;
  c.click_noise_rate = 0.3;
  EXPECT_EQ(log_bytes(generate(c)), log_bytes(generate(c)));
  GenConfig other = c;
  other.seed = 2;
  EXPECT_NE(log_bytes(generate(c)), log_bytes(generate(other)));
}

TEST(Generator, ParallelMatchesSerialReference) {
  GenConfig c;
  c.n_users = 64;
  c.n_items = 80;
  c.click_noise_rate = 0.2;
  EXPECT_EQ(log_bytes(generate(c)), log_bytes(generate_serial(c)));
}

// Frozen from a reference run of the generator (n_users=2, n_items=10, seed=7).
TEST(Generator, GoldenCountsSmallConfig) {
  GenConfig c;
  c.n_users = 2;
  c.n_items = 10;
  c.n_brands = 3;
  c.interactions_per_user = 40;
  c.seed = 7;
  const auto d = generate(c);
  std::array<int, 4> counts{};
  for (const auto& r : d.log) ++counts[index_of(r.feedback)];
  const std::array<int, 4> golden{23, 33, 14, 10};
  EXPECT_EQ(counts, golden);
  EXPECT_EQ(d.log.size(), 80u);
}

double median_affinity(const GroundTruth& t, std::size_t user, std::size_t session) {
  std::vector<double> a;
  for (std::size_t i = 0; i < t.items.size(); ++i) a.push_back(t.affinity(user, session, i));
  std::sort(a.begin(), a.end());
  const std::size_t n = a.size();
  return n % 2 ? a[n / 2] : 0.5 * (a[n / 2 - 1] + a[n / 2]);
}

TEST(Generator, NoiselessClicksAreAboveMedianAndSeparateFromUnclicks) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    GenConfig c;
    c.n_users = 6;
    c.n_items = 25;
    c.interactions_per_user = 60;
    c.seed = seed;
    const auto d = generate(c);
    for (const auto& r : d.log) {
      const auto u = static_cast<std::size_t>(r.user_id);
      const auto s = static_cast<std::size_t>(r.timestamp) / static_cast<std::size_t>(c.session_length);
      const double a = d.truth.affinity(u, s, static_cast<std::size_t>(r.item_id));
      const double med = median_affinity(d.truth, u, s);
      if (r.feedback == Feedback::click || r.feedback == Feedback::like) EXPECT_GT(a, med);
      if (r.feedback == Feedback::unclick || r.feedback == Feedback::dislike) EXPECT_LE(a, med);
    }
  }
}

TEST(Generator, NoiseRateIsPlanted) {
  GenConfig c;
  c.n_users = 100;
  c.n_items = 60;
  c.click_noise_rate = 0.3;
  const auto d = generate(c);
  int clicks = 0, noisy = 0;
  for (const auto& r : d.log) {
    if (r.feedback != Feedback::click) continue;
    const auto u = static_cast<std::size_t>(r.user_id);
    const auto s = static_cast<std::size_t>(r.timestamp) / static_cast<std::size_t>(c.session_length);
    ++clicks;
    if (d.truth.affinity(u, s, static_cast<std::size_t>(r.item_id)) <= median_affinity(d.truth, u, s)) ++noisy;
  }
  EXPECT_NEAR(static_cast<double>(noisy) / clicks, 0.3, 0.03);
}

TEST(Samples, RejectsNonPositiveLength) {
  std::vector<Interaction> log{ev(0, 1, 0, Feedback::click)};
  EXPECT_THROW(build_samples(log, 0, TargetLabel::click), std::invalid_argument);
}

TEST(Samples, PaddingIsLeftAndRecentIsLast) {
  std::vector<Interaction> log{ev(0, 4, 1, Feedback::click), ev(0, 5, 2, Feedback::click),
                               ev(0, 6, 3, Feedback::click), ev(0, 9, 4, Feedback::unclick)};
  const auto d = build_samples(log, 5, TargetLabel::click);
  ASSERT_EQ(d.samples.size(), 4u);
  const Sample& s = d.samples.back();
  EXPECT_EQ(s.label, 0);
  const Sequence& clicks = s.sequence(Feedback::click);
  EXPECT_EQ(clicks.mask, (std::vector<std::uint8_t>{0, 0, 1, 1, 1}));
  EXPECT_EQ(clicks.items, (std::vector<int>{0, 0, 5, 6, 7}));
  EXPECT_EQ(s.sequence(Feedback::unclick).valid_count(), 0u);
}

// Hand-written 10-event log for two users with a timestamp tie.
TEST(Samples, CountsMatchHandEnumeration) {
  std::vector<Interaction> log{
      ev(0, 1, 10, Feedback::click),   ev(0, 2, 11, Feedback::unclick), ev(0, 3, 12, Feedback::like),
      ev(0, 4, 13, Feedback::dislike), ev(0, 5, 14, Feedback::click),   ev(0, 6, 14, Feedback::unclick),
      ev(1, 7, 1, Feedback::like),     ev(1, 8, 2, Feedback::unclick),  ev(1, 9, 3, Feedback::dislike),
      ev(1, 1, 4, Feedback::click)};
  const auto click = build_samples(log, 3, TargetLabel::click);
  // user 0: clicks at 10, 14; unclicks at 11, 14. user 1: unclick at 2, click at 4.
  ASSERT_EQ(click.samples.size(), 6u);
  EXPECT_EQ(std::count_if(click.samples.begin(), click.samples.end(), [](const Sample& s) { return s.label == 1; }), 3);
  // The two events at t=14 see neither each other nor themselves.
  const Sample& c14 = click.samples[2];
  const Sample& u14 = click.samples[3];
  EXPECT_EQ(c14.timestamp, 14);
  EXPECT_EQ(u14.timestamp, 14);
  EXPECT_EQ(c14.sequence(Feedback::click).valid_count(), 1u);
  EXPECT_EQ(u14.sequence(Feedback::click).valid_count(), 1u);
  EXPECT_EQ(u14.sequence(Feedback::unclick).valid_count(), 1u);
  EXPECT_EQ(c14.merged.valid_count(), 4u);

  const auto dislike = build_samples(log, 3, TargetLabel::dislike);
  // user 0: like@12, dislike@13; user 1: like@1, dislike@3.
  ASSERT_EQ(dislike.samples.size(), 4u);
  EXPECT_EQ(std::count_if(dislike.samples.begin(), dislike.samples.end(), [](const Sample& s) { return s.label == 1; }), 2);
  ASSERT_EQ(dislike.histories.size(), 2u);
  EXPECT_EQ(dislike.histories[0].before(Feedback::click, 14).size(), 1u);
}

TEST(Samples, HistoryStrictlyPrecedesTarget) {
  GenConfig c;
  c.n_users = 10;
  c.n_items = 40;
  const auto g = generate(c);
  for (TargetLabel target : {TargetLabel::click, TargetLabel::dislike}) {
    const auto d = build_samples(g.log, 6, target);
    std::map<std::pair<std::int64_t, int>, std::vector<std::int64_t>> times;  // (user, token) -> timestamps
    for (const auto& r : g.log) times[{r.user_id, item_token(r.item_id)}].push_back(r.timestamp);
    for (const auto& s : d.samples) {
      for (const Sequence* seq : {&s.sequences[0], &s.sequences[1], &s.sequences[2], &s.sequences[3], &s.merged}) {
        for (std::size_t p = 0; p < seq->length(); ++p) {
          if (!seq->mask[p]) {
            EXPECT_EQ(seq->items[p], 0);
            continue;
          }
          const auto& ts = times[{s.user_id, seq->items[p]}];
          EXPECT_LT(*std::min_element(ts.begin(), ts.end()), s.timestamp);
        }
      }
      for (Feedback f : kAllFeedback)
        for (const auto& e : d.histories[s.history].before(f, s.timestamp)) EXPECT_LT(e.timestamp, s.timestamp);
    }
  }
}

TEST(Samples, TemporalSplitHoldsOutLastFifthPerUser) {
  std::vector<Interaction> log;
  for (int t = 0; t < 10; ++t) log.push_back(ev(0, t, t, t % 2 ? Feedback::click : Feedback::unclick));
  for (int t = 0; t < 4; ++t) log.push_back(ev(1, t, t, Feedback::click));
  const auto d = build_samples(log, 2, TargetLabel::click);
  const auto split = temporal_split(d, 0.2);
  EXPECT_EQ(split.test, (std::vector<std::size_t>{8, 9}));
  EXPECT_EQ(split.train.size(), 12u);
}
