// Command-line front end: generate, train, eval, ablate, sweep, dump-embeddings.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dumn/checkpoint.hpp"
#include "dumn/generator.hpp"
#include "dumn/harness.hpp"

using namespace dumn;

namespace {

// Every TrainConfig key becomes `--<key>`; values set on the command line win over the file.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key = value config file");
    for (const std::string& key : TrainConfig::keys()) cmd->add_option("--" + key, values[key], "config: " + key);
  }

  TrainConfig resolve() const {
    TrainConfig c = file.empty() ? TrainConfig{} : load_config(file);
    for (const auto& [key, value] : values)
      if (!value.empty()) c.set(key, value);
    c.validate();
    return c;
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

Dataset read_dataset(const std::string& path, const TrainConfig& c) {
  const auto log = load_jsonl(path);
  if (log.empty()) throw std::invalid_argument("dataset " + path + " is empty");
  return build_samples(log, c.seq_len, c.target);
}

std::vector<std::size_t> pick(const Dataset& d, const Split& split, const std::string& which) {
  if (which == "test") return split.test;
  if (which == "train") return split.train;
  if (which == "all") {
    std::vector<std::size_t> all(d.samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  throw std::invalid_argument("unknown split '" + which + "' (expected train, test or all)");
}

std::vector<std::uint64_t> default_seeds(std::vector<std::uint64_t> seeds) {
  if (seeds.empty()) seeds = {1};
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DUMN click-through-rate model: synthetic data, training and ablations"};
  app.require_subcommand(1);

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic interaction log and its ground truth");
  GenConfig gen;
  std::string gen_out, truth_out;
  gen_cmd->add_option("--out", gen_out, "interaction log (JSONL)")->required();
  gen_cmd->add_option("--truth", truth_out, "ground-truth sidecar (JSONL)");
  gen_cmd->add_option("--users", gen.n_users);
  gen_cmd->add_option("--items", gen.n_items);
  gen_cmd->add_option("--attributes", gen.n_attributes);
  gen_cmd->add_option("--brands", gen.n_brands);
  gen_cmd->add_option("--interactions", gen.interactions_per_user, "events per user");
  gen_cmd->add_option("--click-noise", gen.click_noise_rate);
  gen_cmd->add_option("--unclick-miss", gen.unclick_miss_rate);
  gen_cmd->add_option("--session-length", gen.session_length);
  gen_cmd->add_option("--session-drift", gen.session_drift);
  gen_cmd->add_option("--seed", gen.seed);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model; writes a checkpoint and a metrics CSV");
  ConfigFlags train_cfg;
  std::string train_data, train_ckpt, train_metrics;
  train_cmd->add_option("--data", train_data, "interaction log (JSONL)")->required();
  train_cmd->add_option("--checkpoint", train_ckpt, "checkpoint to write")->required();
  train_cmd->add_option("--metrics", train_metrics, "metrics CSV to write")->required();
  train_cfg.attach(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a split with a checkpoint; prints AUC");
  std::string eval_data, eval_ckpt, eval_out, eval_split = "test";
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
  eval_cmd->add_option("--split", eval_split, "train, test or all");
  eval_cmd->add_option("--out", eval_out, "per-sample scores CSV");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "train every ablation variant over seeds; mean AUC CSV");
  ConfigFlags ablate_cfg;
  std::string ablate_data, ablate_out;
  std::vector<std::uint64_t> ablate_seeds;
  std::vector<std::string> ablate_variants;
  ablate_cmd->add_option("--data", ablate_data)->required();
  ablate_cmd->add_option("--out", ablate_out)->required();
  ablate_cmd->add_option("--seeds", ablate_seeds)->delimiter(',');
  ablate_cmd->add_option("--variants", ablate_variants, "subset of variants")->delimiter(',');
  ablate_cfg.attach(ablate_cmd);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "grid over slot count m and slot width Z");
  ConfigFlags sweep_cfg;
  std::string sweep_data, sweep_out;
  std::vector<int> sweep_m, sweep_z;
  std::vector<std::uint64_t> sweep_seeds;
  sweep_cmd->add_option("--data", sweep_data)->required();
  sweep_cmd->add_option("--out", sweep_out)->required();
  sweep_cmd->add_option("--m", sweep_m, "slot counts")->delimiter(',')->required();
  sweep_cmd->add_option("--z", sweep_z, "slot widths")->delimiter(',')->required();
  sweep_cmd->add_option("--seeds", sweep_seeds)->delimiter(',');
  sweep_cfg.attach(sweep_cmd);

  // dump-embeddings
  auto* dump_cmd = app.add_subcommand("dump-embeddings", "CSV of f, denoised f and memory reads per sample");
  std::string dump_data, dump_ckpt, dump_out, dump_split = "test";
  std::size_t dump_limit = 0;
  dump_cmd->add_option("--data", dump_data)->required();
  dump_cmd->add_option("--checkpoint", dump_ckpt)->required();
  dump_cmd->add_option("--out", dump_out)->required();
  dump_cmd->add_option("--split", dump_split, "train, test or all");
  dump_cmd->add_option("--limit", dump_limit, "first N samples only (0: all)");

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << app.help();
    return code;
  }

  try {
    if (*gen_cmd) {
      const GeneratedData data = generate(gen);
      auto out = open_out(gen_out);
      write_jsonl(out, data.log);
      if (!truth_out.empty()) {
        auto truth = open_out(truth_out);
        write_ground_truth(truth, data.truth);
      }
      std::cout << "wrote " << data.log.size() << " interactions to " << gen_out << '\n';
    } else if (*train_cmd) {
      const TrainConfig c = train_cfg.resolve();
      apply_thread_setting(c.threads);
      const Dataset d = read_dataset(train_data, c);
      Model model(c, d.vocab);
      Trainer trainer(model);
      const auto rows = trainer.fit(d, temporal_split(d, c.test_fraction));
      auto metrics = open_out(train_metrics);
      metrics << format_metrics(rows);
      save_checkpoint(train_ckpt, model, trainer.adam());
      std::cout << "final test auc " << rows.back().auc << '\n';
    } else if (*eval_cmd) {
      const Checkpoint ck = load_checkpoint(eval_ckpt);
      const TrainConfig& c = ck.model.config();
      apply_thread_setting(c.threads);
      const Dataset d = read_dataset(eval_data, c);
      if (!(d.vocab == ck.model.vocab()))
        std::cerr << "warning: dataset vocabulary differs from the checkpoint's; unseen ids fail\n";
      const auto indices = pick(d, temporal_split(d, c.test_fraction), eval_split);
      const Evaluation e = evaluate(ck.model, d, indices, true);
      std::cout.precision(17);
      std::cout << "auc " << e.auc << "\nlogloss " << e.l1 << '\n';
      if (!eval_out.empty()) {
        auto out = open_out(eval_out);
        out.precision(17);
        out << "sample,user_id,label,score\n";
        for (std::size_t i = 0; i < indices.size(); ++i)
          out << indices[i] << ',' << d.samples[indices[i]].user_id << ',' << e.labels[i] << ',' << e.scores[i] << '\n';
      }
    } else if (*ablate_cmd) {
      const TrainConfig c = ablate_cfg.resolve();
      apply_thread_setting(c.threads);
      std::vector<Variant> variants;
      if (ablate_variants.empty()) variants = ablation_variants();
      for (const std::string& name : ablate_variants) variants.push_back(find_variant(name));
      const auto seeds = default_seeds(ablate_seeds);
      const auto log = load_jsonl(ablate_data);
      const DataSource source = [&](std::uint64_t, const TrainConfig& cfg) {
        return build_samples(log, cfg.seq_len, cfg.target);
      };
      const auto results = run_ablation(c, source, seeds, variants);
      auto out = open_out(ablate_out);
      write_ablation_csv(out, results, seeds);
      write_ablation_csv(std::cout, results, seeds);
    } else if (*sweep_cmd) {
      const TrainConfig c = sweep_cfg.resolve();
      apply_thread_setting(c.threads);
      const auto seeds = default_seeds(sweep_seeds);
      const auto log = load_jsonl(sweep_data);
      const DataSource source = [&](std::uint64_t, const TrainConfig& cfg) {
        return build_samples(log, cfg.seq_len, cfg.target);
      };
      const auto rows = run_sweep(c, source, sweep_m, sweep_z, seeds);
      auto out = open_out(sweep_out);
      write_sweep_csv(out, rows);
      write_sweep_csv(std::cout, rows);
    } else if (*dump_cmd) {
      const Checkpoint ck = load_checkpoint(dump_ckpt);
      const TrainConfig& c = ck.model.config();
      const Dataset d = read_dataset(dump_data, c);
      auto indices = pick(d, temporal_split(d, c.test_fraction), dump_split);
      if (dump_limit > 0 && indices.size() > dump_limit) indices.resize(dump_limit);
      auto out = open_out(dump_out);
      write_embeddings_csv(out, ck.model, d, indices);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
