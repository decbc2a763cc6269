#include "dumn/harness.hpp"

#include <numeric>
#include <ostream>
#include <stdexcept>

namespace dumn {

std::vector<Variant> ablation_variants() {
  return {
      {"full", {}},
      {"fp_off", {{"fp_enabled", "false"}}},
      {"umn_off", {{"umn", "off"}}},
      {"umn_one", {{"umn", "one"}}},
      {"fusion_concat", {{"fusion", "concat"}}},
      {"fusion_cross", {{"fusion", "cross"}}},
      {"fusion_ffn", {{"fusion", "ffn"}}},
      {"fusion_attention", {{"fusion", "attention"}}},
      {"triplet_random", {{"triplet", "random"}}},
      {"triplet_off", {{"triplet", "off"}}},
      {"implicit_only", {{"feedback", "implicit_only"}}},
      {"merged_sequence", {{"feedback", "merged_sequence"}}},
  };
}

Variant find_variant(const std::string& name) {
  std::string known;
  for (const Variant& v : ablation_variants()) {
    if (v.name == name) return v;
    known += (known.empty() ? "" : ", ") + v.name;
  }
  throw std::invalid_argument("unknown variant '" + name + "' (known: " + known + ")");
}

TrainConfig apply_variant(const TrainConfig& base, const Variant& v) {
  TrainConfig c = base;
  for (const auto& [key, value] : v.overrides) c.set(key, value);
  c.validate();
  return c;
}

double train_and_score(const TrainConfig& config, const Dataset& data) {
  const Split split = temporal_split(data, config.test_fraction);
  if (split.test.empty()) throw std::invalid_argument("train_and_score: empty test split");
  Model model(config, data.vocab);
  Trainer trainer(model);
  const auto rows = trainer.fit(data, split);
  return rows.back().auc;
}

double VariantResult::mean() const {
  if (aucs.empty()) return 0.0;
  return std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(aucs.size());
}

std::vector<VariantResult> run_ablation(const TrainConfig& base, const DataSource& source,
                                        std::span<const std::uint64_t> seeds, std::span<const Variant> variants) {
  if (seeds.empty()) throw std::invalid_argument("run_ablation: no seeds");
  std::vector<VariantResult> out;
  for (const Variant& v : variants) out.push_back({v.name, {}});
  for (std::uint64_t seed : seeds) {
    TrainConfig seeded = base;
    seeded.seed = seed;
    const Dataset data = source(seed, seeded);
    for (std::size_t i = 0; i < variants.size(); ++i)
      out[i].aucs.push_back(train_and_score(apply_variant(seeded, variants[i]), data));
  }
  return out;
}

void write_ablation_csv(std::ostream& out, std::span<const VariantResult> results,
                        std::span<const std::uint64_t> seeds) {
  out.precision(17);
  out << "variant,mean_auc";
  for (std::uint64_t s : seeds) out << ",seed_" << s;
  out << '\n';
  for (const VariantResult& r : results) {
    out << r.name << ',' << r.mean();
    for (double a : r.aucs) out << ',' << a;
    out << '\n';
  }
}

std::vector<SweepRow> run_sweep(const TrainConfig& base, const DataSource& source, std::span<const int> slots,
                                std::span<const int> slot_dims, std::span<const std::uint64_t> seeds) {
  if (slots.empty() || slot_dims.empty()) throw std::invalid_argument("run_sweep: empty m or Z list");
  if (seeds.empty()) throw std::invalid_argument("run_sweep: no seeds");
  std::vector<SweepRow> rows;
  for (int m : slots)
    for (int z : slot_dims) rows.push_back({m, z, 0.0});
  for (std::uint64_t seed : seeds) {
    TrainConfig seeded = base;
    seeded.seed = seed;
    const Dataset data = source(seed, seeded);
    for (SweepRow& row : rows) {
      TrainConfig c = seeded;
      c.slots = row.slots;
      c.slot_dim = row.slot_dim;
      c.validate();
      row.mean_auc += train_and_score(c, data) / static_cast<double>(seeds.size());
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out.precision(17);
  out << "m,z,mean_auc\n";
  for (const SweepRow& r : rows) out << r.slots << ',' << r.slot_dim << ',' << r.mean_auc << '\n';
}

void write_embeddings_csv(std::ostream& out, const Model& model, const Dataset& data,
                          std::span<const std::size_t> indices) {
  out.precision(17);
  out << "sample,user_id,label,channel,vector,dim,value\n";
  ParamStore& store = const_cast<ParamStore&>(model.params());
  ForwardOptions options;
  options.with_triplets = false;
  for (std::size_t i : indices) {
    const Sample& s = data.samples.at(i);
    Tape t(&store);
    const SampleForward f = model.forward(t, s, data.histories[s.history], options);
    for (std::size_t k = 0; k < model.channels().size(); ++k) {
      const std::string channel = model.merged() ? "merged" : std::string(to_string(model.channels()[k]));
      const std::pair<const char*, const Var*> vectors[] = {
          {"f", &f.pooled[k]}, {"f_o", &f.purified[k]}, {"r", &f.reads[k]}};
      for (const auto& [name, v] : vectors) {
        const auto values = v->value().values();
        for (std::size_t d = 0; d < values.size(); ++d)
          out << i << ',' << s.user_id << ',' << s.label << ',' << channel << ',' << name << ',' << d << ','
              << values[d] << '\n';
      }
    }
  }
}

}  // namespace dumn
