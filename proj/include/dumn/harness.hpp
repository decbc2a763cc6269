#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dumn/trainer.hpp"

namespace dumn {

/// Supplies the dataset for one seed. File-backed sources ignore the seed; synthetic
/// sources regenerate the log from it.
using DataSource = std::function<Dataset(std::uint64_t seed, const TrainConfig& config)>;

/// A named set of config overrides applied on top of the base config.
struct Variant {
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;
};

/// full, fp_off, umn_off, umn_one, the four alternative fusions, triplet random/off,
/// implicit_only and merged_sequence.
std::vector<Variant> ablation_variants();
/// Looks a variant up by name; throws std::invalid_argument listing the known names.
Variant find_variant(const std::string& name);
TrainConfig apply_variant(const TrainConfig& base, const Variant& v);

/// Final-epoch test AUC after training a fresh model on `data`.
double train_and_score(const TrainConfig& config, const Dataset& data);

struct VariantResult {
  std::string name;
  std::vector<double> aucs;  // one per seed, in seed order
  double mean() const;
};

/// Trains every variant once per seed. Seed s sets config.seed and is passed to `source`.
std::vector<VariantResult> run_ablation(const TrainConfig& base, const DataSource& source,
                                        std::span<const std::uint64_t> seeds, std::span<const Variant> variants);
/// Header `variant,mean_auc,<one column per seed>`.
void write_ablation_csv(std::ostream& out, std::span<const VariantResult> results,
                        std::span<const std::uint64_t> seeds);

struct SweepRow {
  int slots = 0;
  int slot_dim = 0;
  double mean_auc = 0.0;
};

/// Mean test AUC over `seeds` for every (m, Z) pair, m outermost.
std::vector<SweepRow> run_sweep(const TrainConfig& base, const DataSource& source, std::span<const int> slots,
                                std::span<const int> slot_dims, std::span<const std::uint64_t> seeds);
/// Header `m,z,mean_auc`.
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

/// Long-format dump of f_k, f_k after denoising and r_k for each sample in `indices`.
/// Header `sample,user_id,label,channel,vector,dim,value`.
void write_embeddings_csv(std::ostream& out, const Model& model, const Dataset& data,
                          std::span<const std::size_t> indices);

}  // namespace dumn
