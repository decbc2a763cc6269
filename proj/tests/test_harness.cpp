#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dumn/generator.hpp"
#include "dumn/harness.hpp"

using namespace dumn;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.seq_len = 5;
  c.embed_dim = 4;
  c.heads = 2;
  c.slots = 4;
  c.slot_dim = 4;
  c.memory_hidden = 6;
  c.head_hidden = {6};
  c.batch_size = 16;
  c.epochs = 1;
  return c;
}

DataSource tiny_source() {
  return [](std::uint64_t seed, const TrainConfig& c) {
    GenConfig g;
    g.n_users = 8;
    g.n_items = 30;
    g.n_brands = 4;
    g.interactions_per_user = 40;
    g.seed = seed;
    return build_samples(generate(g).log, c.seq_len, c.target);
  };
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char ch : s) n += ch == '\n';
  return n;
}

}  // namespace

TEST(Config, ParsesKeyValueLinesWithComments) {
  std::istringstream in("# header\n\nslots = 6   # trailing\n  fusion=cross\nhead_hidden = 8,4\n");
  const auto pairs = parse_key_values(in);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0], (std::pair<std::string, std::string>{"slots", "6"}));
  EXPECT_EQ(pairs[1], (std::pair<std::string, std::string>{"fusion", "cross"}));
  EXPECT_EQ(pairs[2].second, "8,4");
  std::istringstream bad("slots 6\n");
  EXPECT_THROW(parse_key_values(bad), std::invalid_argument);
}

TEST(Config, WrittenConfigLoadsBackUnchanged) {
  TrainConfig c = small_config();
  c.fusion = FusionMode::attention;
  c.learning_rate = 0.0025;
  const auto path = std::filesystem::temp_directory_path() / "dumn_roundtrip.cfg";
  {
    std::ofstream out(path);
    write_config(out, c);
  }
  EXPECT_EQ(load_config(path.string()).to_pairs(), c.to_pairs());
  std::filesystem::remove(path);
}

TEST(Config, UnknownKeyAndBadValueThrow) {
  TrainConfig c;
  EXPECT_THROW(c.set("slotz", "4"), std::invalid_argument);
  EXPECT_THROW(c.set("slots", "four"), std::invalid_argument);
  c.slots = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Ablation, VariantTableIsCompleteAndUnique) {
  const auto variants = ablation_variants();
  EXPECT_EQ(variants.size(), 12u);
  std::set<std::string> names;
  for (const Variant& v : variants) names.insert(v.name);
  EXPECT_EQ(names.size(), variants.size());
  EXPECT_TRUE(variants.front().overrides.empty());
  EXPECT_THROW(find_variant("nope"), std::invalid_argument);
}

TEST(Ablation, VariantsChangeOnlyTheirSwitch) {
  const TrainConfig base = small_config();
  const TrainConfig off = apply_variant(base, find_variant("umn_off"));
  EXPECT_EQ(off.umn, UmnMode::off);
  auto a = base.to_pairs(), b = off.to_pairs();
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differing += a[i].second != b[i].second;
  EXPECT_EQ(differing, 1u);
  EXPECT_EQ(apply_variant(base, find_variant("fp_off")).fp_enabled, false);
  EXPECT_EQ(apply_variant(base, find_variant("triplet_random")).triplet, TripletMode::random);
  EXPECT_EQ(apply_variant(base, find_variant("merged_sequence")).feedback, FeedbackMode::merged_sequence);
}

TEST(Ablation, OneSeedSuiteGivesOneRowPerVariant) {
  const std::vector<std::uint64_t> seeds{4};
  const auto variants = ablation_variants();
  const auto results = run_ablation(small_config(), tiny_source(), seeds, variants);
  ASSERT_EQ(results.size(), variants.size());
  for (const VariantResult& r : results) {
    ASSERT_EQ(r.aucs.size(), 1u);
    EXPECT_GE(r.mean(), 0.0);
    EXPECT_LE(r.mean(), 1.0);
  }
  std::ostringstream csv;
  write_ablation_csv(csv, results, seeds);
  EXPECT_EQ(csv.str().rfind("variant,mean_auc,seed_4\n", 0), 0u);
  EXPECT_EQ(count_lines(csv.str()), variants.size() + 1);
}

TEST(Ablation, MemoryOffVariantReadsZeroThroughout) {
  const TrainConfig c = apply_variant(small_config(), find_variant("umn_off"));
  const Dataset d = tiny_source()(1, c);
  Model m(c, d.vocab);
  Trainer tr(m);
  tr.fit(d, temporal_split(d, c.test_fraction));
  for (std::size_t i = 0; i < d.samples.size(); i += 7) {
    Tape t(&m.params());
    const auto f = m.forward(t, d.samples[i], d.histories[d.samples[i].history]);
    for (const Var& r : f.reads) EXPECT_EQ(r.value(), Matrix(1, 4));
  }
}

TEST(Sweep, GridHasOneRowPerPairAndIsDeterministic) {
  const std::vector<int> m{2, 4}, z{2, 4};
  const std::vector<std::uint64_t> seeds{2};
  const auto first = run_sweep(small_config(), tiny_source(), m, z, seeds);
  const auto second = run_sweep(small_config(), tiny_source(), m, z, seeds);
  ASSERT_EQ(first.size(), 4u);
  EXPECT_EQ(first[1].slots, 2);
  EXPECT_EQ(first[1].slot_dim, 4);
  std::ostringstream a, b;
  write_sweep_csv(a, first);
  write_sweep_csv(b, second);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("m,z,mean_auc\n", 0), 0u);
  EXPECT_THROW(run_sweep(small_config(), tiny_source(), std::vector<int>{}, z, seeds), std::invalid_argument);
}

TEST(Sweep, TinyGridMatchesFrozenReference) {
  const std::vector<int> m{2, 8}, z{2, 8};
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto rows = run_sweep(small_config(), tiny_source(), m, z, seeds);
  // recorded from a reference run; the optimum on this grid is m = 2, Z = 8
  const double frozen[] = {0.56809027777777776, 0.63381944444444449, 0.57090277777777776, 0.60496527777777787};
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_NEAR(rows[i].mean_auc, frozen[i], 1e-12) << i;
  const auto best = std::max_element(rows.begin(), rows.end(),
                                     [](const SweepRow& a, const SweepRow& b) { return a.mean_auc < b.mean_auc; });
  EXPECT_EQ(best->slots, 2);
  EXPECT_EQ(best->slot_dim, 8);
}

TEST(Embeddings, OneLinePerCoordinate) {
  const TrainConfig c = small_config();
  const Dataset d = tiny_source()(3, c);
  const Model m(c, d.vocab);
  const std::vector<std::size_t> indices{0, 5, 9};
  std::ostringstream out;
  write_embeddings_csv(out, m, d, indices);
  // per sample: 4 channels × (f, f_o, r) × 4 coordinates
  EXPECT_EQ(count_lines(out.str()), 1 + 3 * 4 * 3 * 4);
  EXPECT_EQ(out.str().rfind("sample,user_id,label,channel,vector,dim,value\n", 0), 0u);
}

TEST(Training, LossMovingAverageTrendsDownOverFirstSteps) {
  const TrainConfig c;
  const Dataset d = build_samples(generate(GenConfig{}).log, c.seq_len, c.target);
  const Split split = temporal_split(d, c.test_fraction);
  Model m(c, d.vocab);
  Trainer tr(m);
  std::vector<std::size_t> order = split.train;
  Rng rng(derive_seed(c.seed, 0x5eed, 1));
  rng.shuffle(order.begin(), order.end());
  const auto B = static_cast<std::size_t>(c.batch_size);
  std::vector<double> loss;
  for (std::size_t step = 0; step < 500; ++step) {
    const std::size_t begin = (step * B) % (order.size() - B);
    const BatchResult r = tr.step(d, std::span<const std::size_t>(order).subspan(begin, B));
    loss.push_back(r.l1 + r.l2);
  }
  std::vector<double> ma;
  double window = 0.0;
  for (std::size_t i = 0; i < loss.size(); ++i) {
    window += loss[i];
    if (i >= 50) window -= loss[i - 50];
    if (i >= 49) ma.push_back(window / 50.0);
  }
  // least-squares slope of the moving average against step
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    mx += static_cast<double>(i);
    my += ma[i];
  }
  mx /= static_cast<double>(ma.size());
  my /= static_cast<double>(ma.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    sxy += (static_cast<double>(i) - mx) * (ma[i] - my);
    sxx += (static_cast<double>(i) - mx) * (static_cast<double>(i) - mx);
  }
  EXPECT_LE(sxy / sxx, 0.0) << "moving average from " << ma.front() << " to " << ma.back();
  EXPECT_LE(ma.back(), ma.front());
}
