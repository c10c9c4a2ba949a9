// Command-line front end: dataset preparation, training, evaluation,
// benchmarking and embedding export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mixsgcl/mixsgcl.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct CommandContext {
  mixsgcl::RunConfig cfg;
  std::string config_path;
  std::map<std::string, std::string> overrides;  // flag values, applied after the file
};

void add_config_flag(CLI::App* cmd, CommandContext& ctx) {
  cmd->add_option("--config", ctx.config_path, "flat key=value config file");
}

CLI::Option* add_kv(CLI::App* cmd, CommandContext& ctx, const std::string& flag,
                    const std::string& key, const std::string& desc) {
  return cmd->add_option_function<std::string>(
      flag, [&ctx, key](const std::string& v) { ctx.overrides[key] = v; }, desc);
}

void add_train_flags(CLI::App* cmd, CommandContext& ctx) {
  add_kv(cmd, ctx, "--model", "model", "bpr | sslrec | sgcl | mixsgcl");
  add_kv(cmd, ctx, "--tau", "tau", "contrastive temperature");
  add_kv(cmd, ctx, "--lambda", "lambda", "CL weight (sslrec)");
  add_kv(cmd, ctx, "--view-mode", "view_mode", "identity | noise (sslrec)");
  add_kv(cmd, ctx, "--noise-eps", "noise_eps", "noise view scale (sslrec)");
  add_kv(cmd, ctx, "--exclude-self-pair", "exclude_self_pair", "drop anchor self terms (ablation)");
  add_kv(cmd, ctx, "--n-mix", "n_mix", "mixup rounds per batch");
  add_kv(cmd, ctx, "--beta-max", "beta_max", "edge mixup ratio upper bound");
  add_kv(cmd, ctx, "--alpha-per-node", "alpha_per_node", "per-node simplex weights (ablation)");
  add_kv(cmd, ctx, "--mixup-joint-batch", "mixup_joint_batch",
         "single enlarged contrastive batch (ablation)");
  add_kv(cmd, ctx, "--batch-size", "batch_size", "training batch size");
  add_kv(cmd, ctx, "--embedding-dim", "embedding_dim", "embedding dimension");
  add_kv(cmd, ctx, "--layers", "layers", "graph convolution layers");
  add_kv(cmd, ctx, "--learning-rate", "learning_rate", "Adam learning rate");
  add_kv(cmd, ctx, "--max-epochs", "max_epochs", "epoch limit");
  add_kv(cmd, ctx, "--patience", "patience", "early stopping patience");
  add_kv(cmd, ctx, "--eval-k", "eval_k", "validation metric cutoff K");
  add_kv(cmd, ctx, "--seed", "seed", "training seed");
  add_kv(cmd, ctx, "--refresh", "refresh", "propagation refresh: auto | epoch | batch");
  add_kv(cmd, ctx, "--eval-user-sample", "eval_user_sample",
         "validation users sampled per epoch (0 = all)");
  add_kv(cmd, ctx, "--precision", "precision", "f64 | f32");
  add_kv(cmd, ctx, "--threads", "threads", "pinned thread count");
}

void add_split_flags(CLI::App* cmd, CommandContext& ctx) {
  add_kv(cmd, ctx, "--k-core", "k_core", "k-core filtering threshold");
  add_kv(cmd, ctx, "--ratio-train", "ratio_train", "train split fraction");
  add_kv(cmd, ctx, "--ratio-valid", "ratio_valid", "validation split fraction");
  add_kv(cmd, ctx, "--ratio-test", "ratio_test", "test split fraction");
  add_kv(cmd, ctx, "--split-seed", "split_seed", "split shuffle seed");
  add_kv(cmd, ctx, "--train-keep-ratio", "train_keep_ratio",
         "fraction of train edges kept (sparse-supervision runs)");
  add_kv(cmd, ctx, "--delimiter", "delimiter", "tab | comma | space | semicolon | char");
}

// File first, then flags; all problems reported together.
void finalize_config(CommandContext& ctx) {
  std::vector<std::string> errors;
  if (!ctx.config_path.empty()) {
    errors = ctx.cfg.load_file(mixsgcl::resolve_data_path(ctx.config_path));
  }
  for (const auto& [key, value] : ctx.overrides) {
    try {
      ctx.cfg.set(key, value);
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
  }
  for (const auto& e : ctx.cfg.validate()) errors.push_back(e);
  if (!errors.empty()) {
    std::string msg = "configuration errors:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw std::runtime_error(msg);
  }
}

void write_json_file(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

int pin_threads(int requested) {
  Eigen::setNbThreads(requested);
  return Eigen::nbThreads();
}

int cmd_prepare(CommandContext& ctx, const std::string& input, const std::string& out,
                std::string stats_out) {
  finalize_config(ctx);
  const fs::path in_path = mixsgcl::resolve_data_path(input);
  mixsgcl::LoadFormat format{ctx.cfg.delimiter_char()};
  mixsgcl::RawInteractions raw = mixsgcl::load_interactions(in_path, format);
  raw = mixsgcl::apply_k_core(raw, ctx.cfg.k_core);
  if (raw.records.empty()) {
    throw std::runtime_error("k-core filtering removed every interaction (k=" +
                             std::to_string(ctx.cfg.k_core) + "); dataset too sparse");
  }
  const mixsgcl::InteractionDataset ds = mixsgcl::build_dataset(raw, ctx.cfg.split);
  ds.save_cache(out);
  if (stats_out.empty()) stats_out = out + ".stats.json";
  write_json_file(stats_out, ds.stats_json());
  std::cout << ds.stats_json().dump(2) << "\n";
  return 0;
}

template <class Real>
int run_train(const CommandContext& ctx, const mixsgcl::InteractionDataset& ds,
              const std::string& out_dir) {
  const auto result = mixsgcl::fit<Real>(ds, ctx.cfg.train);
  ordered_json extra;
  extra["precision"] = ctx.cfg.precision;
  extra["threads"] = ctx.cfg.threads;
  mixsgcl::save_checkpoint(out_dir, ctx.cfg.train, result.state, result.history, extra);
  const auto& h = result.history;
  std::cout << "trained " << mixsgcl::to_string(ctx.cfg.train.model) << ": " << h.epochs.size()
            << " epochs (" << h.stop_reason << "), best epoch " << h.best_epoch << " valid ndcg@"
            << ctx.cfg.train.eval_k << " = " << h.best_metric << "\n";
  std::cout << "checkpoint written to " << out_dir << "\n";
  return 0;
}

int cmd_train(CommandContext& ctx, const std::string& cache, const std::string& out_dir,
              bool dry_run) {
  finalize_config(ctx);
  if (dry_run) {
    std::cout << ctx.cfg.echo().dump(2) << "\n";
    return 0;
  }
  pin_threads(ctx.cfg.threads);
  mixsgcl::InteractionDataset ds =
      mixsgcl::InteractionDataset::load_cache(mixsgcl::resolve_data_path(cache));
  if (ctx.cfg.split.train_keep_ratio < 1.0) {
    mixsgcl::apply_train_keep_ratio(ds, ctx.cfg.split.train_keep_ratio, ctx.cfg.split.seed);
  }
  if (ctx.cfg.precision == "f32") return run_train<float>(ctx, ds, out_dir);
  return run_train<double>(ctx, ds, out_dir);
}

int cmd_evaluate(CommandContext& ctx, const std::string& checkpoint, const std::string& cache,
                 const std::string& split, std::vector<int> ks, const std::string& out) {
  finalize_config(ctx);
  if (split != "valid" && split != "test") {
    throw std::runtime_error("--split must be valid or test");
  }
  if (ks.empty()) ks = {20, 50};
  const mixsgcl::LoadedCheckpoint ck = mixsgcl::load_checkpoint(checkpoint);
  const mixsgcl::InteractionDataset ds =
      mixsgcl::InteractionDataset::load_cache(mixsgcl::resolve_data_path(cache));
  if (ck.combined.rows() != ds.n_nodes()) {
    throw std::runtime_error("checkpoint embeddings do not match the dataset cache (" +
                             std::to_string(ck.combined.rows()) + " rows vs " +
                             std::to_string(ds.n_nodes()) + " nodes)");
  }
  const auto report = mixsgcl::evaluate(
      ck.combined, ds, split == "valid" ? mixsgcl::Split::Valid : mixsgcl::Split::Test, ks);
  ordered_json j = report.to_json();
  j["split"] = split;
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) write_json_file(out, j);
  return 0;
}

template <class Real>
void bench_model(const CommandContext& ctx, const mixsgcl::InteractionDataset& ds,
                 mixsgcl::ModelKind model, int epochs, std::ostream& csv) {
  mixsgcl::TrainConfig cfg = ctx.cfg.train;
  cfg.model = model;
  cfg.max_epochs = epochs;
  cfg.patience = epochs + 1;  // benchmark runs a fixed epoch count
  const auto result = mixsgcl::fit<Real>(ds, cfg);
  double total = 0.0;
  for (const auto& e : result.history.epochs) {
    total += e.train_seconds;
    csv << mixsgcl::to_string(model) << "," << e.epoch << "," << e.train_seconds << "," << e.loss
        << "," << e.valid_recall << "," << e.valid_ndcg << "\n";
  }
  const auto& last = result.history.epochs.back();
  csv << mixsgcl::to_string(model) << ",total," << total << "," << last.loss << ","
      << last.valid_recall << "," << last.valid_ndcg << "\n";
}

int cmd_bench(CommandContext& ctx, const std::string& cache, const std::string& models_csv,
              int epochs, const std::string& out) {
  finalize_config(ctx);
  const int threads = pin_threads(ctx.cfg.threads);
  mixsgcl::InteractionDataset ds =
      mixsgcl::InteractionDataset::load_cache(mixsgcl::resolve_data_path(cache));
  if (ctx.cfg.split.train_keep_ratio < 1.0) {
    mixsgcl::apply_train_keep_ratio(ds, ctx.cfg.split.train_keep_ratio, ctx.cfg.split.seed);
  }

  std::vector<mixsgcl::ModelKind> models;
  std::stringstream ss(models_csv);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (!name.empty()) models.push_back(mixsgcl::model_kind_from_string(name));
  }
  if (models.empty()) throw std::runtime_error("--models lists no models");

  std::ostringstream csv;
  csv << "# threads=" << threads << " precision=" << ctx.cfg.precision
      << " batch_size=" << ctx.cfg.train.batch_size << " layers=" << ctx.cfg.train.layers << "\n";
  csv << "model,epoch,wall_seconds,loss,recall@" << ctx.cfg.train.eval_k << ",ndcg@"
      << ctx.cfg.train.eval_k << "\n";
  for (const auto model : models) {
    if (ctx.cfg.precision == "f32") {
      bench_model<float>(ctx, ds, model, epochs, csv);
    } else {
      bench_model<double>(ctx, ds, model, epochs, csv);
    }
  }
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream f(out);
    f << csv.str();
    if (!f) throw std::runtime_error("cannot write " + out);
    std::cout << "bench results written to " << out << "\n";
  }
  return 0;
}

int cmd_export(const std::string& checkpoint, const std::string& cache, const std::string& out,
               std::string tokens_out) {
  const mixsgcl::LoadedCheckpoint ck = mixsgcl::load_checkpoint(checkpoint);
  const mixsgcl::InteractionDataset ds =
      mixsgcl::InteractionDataset::load_cache(mixsgcl::resolve_data_path(cache));
  if (ck.combined.rows() != ds.n_nodes()) {
    throw std::runtime_error("checkpoint embeddings do not match the dataset cache");
  }
  mixsgcl::write_embedding_file(out, ck.combined);
  if (tokens_out.empty()) tokens_out = out + ".tokens.json";
  ordered_json tokens;
  auto& users = tokens["users"] = ordered_json::object();
  for (std::int64_t u = 0; u < ds.n_users; ++u) {
    users[ds.user_tokens[static_cast<std::size_t>(u)]] = u;
  }
  auto& items = tokens["items"] = ordered_json::object();
  for (std::int64_t i = 0; i < ds.n_items; ++i) {
    items[ds.item_tokens[static_cast<std::size_t>(i)]] = ds.n_users + i;
  }
  write_json_file(tokens_out, tokens);
  std::cout << "embeddings written to " << out << ", token index to " << tokens_out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph collaborative filtering with supervised contrastive training"};
  app.require_subcommand(1);

  CommandContext prep_ctx, train_ctx, eval_ctx, bench_ctx;

  auto* prepare = app.add_subcommand("prepare", "build a dataset cache from raw interactions");
  std::string prep_input, prep_out, prep_stats;
  prepare->add_option("--input", prep_input, "delimited interaction file")->required();
  prepare->add_option("--out", prep_out, "cache file to write")->required();
  prepare->add_option("--stats-out", prep_stats, "stats JSON path (default: <out>.stats.json)");
  add_config_flag(prepare, prep_ctx);
  add_split_flags(prepare, prep_ctx);

  auto* train = app.add_subcommand("train", "train a model on a prepared cache");
  std::string train_cache, train_out = "checkpoint";
  bool dry_run = false;
  train->add_option("--cache", train_cache, "dataset cache")->required();
  train->add_option("--out", train_out, "checkpoint directory");
  train->add_flag("--dry-run", dry_run, "echo the effective config and exit");
  add_config_flag(train, train_ctx);
  add_train_flags(train, train_ctx);
  add_kv(train, train_ctx, "--train-keep-ratio", "train_keep_ratio",
         "fraction of train edges kept (sparse-supervision runs)");
  add_kv(train, train_ctx, "--split-seed", "split_seed", "seed for the train-keep subsample");

  auto* evaluate = app.add_subcommand("evaluate", "full-ranking metrics for a checkpoint");
  std::string eval_ckpt, eval_cache, eval_split = "test", eval_out;
  std::vector<int> eval_ks;
  evaluate->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
  evaluate->add_option("--cache", eval_cache, "dataset cache")->required();
  evaluate->add_option("--split", eval_split, "valid | test");
  evaluate->add_option("--ks", eval_ks, "cutoff list (default 20 50)");
  evaluate->add_option("--out", eval_out, "write the report JSON here as well");
  add_config_flag(evaluate, eval_ctx);

  auto* bench = app.add_subcommand("bench", "per-epoch timing comparison across models");
  std::string bench_cache, bench_models = "bpr,sgcl,mixsgcl", bench_out;
  int bench_epochs = 5;
  bench->add_option("--cache", bench_cache, "dataset cache")->required();
  bench->add_option("--models", bench_models, "comma-separated model list");
  bench->add_option("--epochs", bench_epochs, "epochs per model");
  bench->add_option("--out", bench_out, "CSV output path (default: stdout)");
  add_config_flag(bench, bench_ctx);
  add_train_flags(bench, bench_ctx);

  auto* exp = app.add_subcommand("export-embeddings", "write embeddings + token index");
  std::string exp_ckpt, exp_cache, exp_out, exp_tokens;
  exp->add_option("--checkpoint", exp_ckpt, "checkpoint directory")->required();
  exp->add_option("--cache", exp_cache, "dataset cache")->required();
  exp->add_option("--out", exp_out, "embedding file to write")->required();
  exp->add_option("--tokens-out", exp_tokens, "token index JSON (default: <out>.tokens.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) return cmd_prepare(prep_ctx, prep_input, prep_out, prep_stats);
    if (train->parsed()) return cmd_train(train_ctx, train_cache, train_out, dry_run);
    if (evaluate->parsed()) {
      return cmd_evaluate(eval_ctx, eval_ckpt, eval_cache, eval_split, eval_ks, eval_out);
    }
    if (bench->parsed()) {
      return cmd_bench(bench_ctx, bench_cache, bench_models, bench_epochs, bench_out);
    }
    if (exp->parsed()) return cmd_export(exp_ckpt, exp_cache, exp_out, exp_tokens);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
