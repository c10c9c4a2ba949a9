#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsgcl/augmentation.hpp"
#include "mixsgcl/dataset.hpp"
#include "mixsgcl/evaluator.hpp"
#include "mixsgcl/objectives.hpp"
#include "mixsgcl/propagation.hpp"

namespace mixsgcl {

enum class ModelKind { Bpr, SslRec, Sgcl, MixSgcl };
enum class RefreshPolicy { Auto, PerEpoch, PerBatch };

inline std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::Bpr: return "bpr";
    case ModelKind::SslRec: return "sslrec";
    case ModelKind::Sgcl: return "sgcl";
    case ModelKind::MixSgcl: return "mixsgcl";
  }
  return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "bpr") return ModelKind::Bpr;
  if (s == "sslrec") return ModelKind::SslRec;
  if (s == "sgcl") return ModelKind::Sgcl;
  if (s == "mixsgcl") return ModelKind::MixSgcl;
  throw std::invalid_argument("unknown model: " + s + " (expected bpr|sslrec|sgcl|mixsgcl)");
}

inline std::string to_string(RefreshPolicy p) {
  switch (p) {
    case RefreshPolicy::Auto: return "auto";
    case RefreshPolicy::PerEpoch: return "epoch";
    case RefreshPolicy::PerBatch: return "batch";
  }
  return "?";
}

inline RefreshPolicy refresh_policy_from_string(const std::string& s) {
  if (s == "auto") return RefreshPolicy::Auto;
  if (s == "epoch") return RefreshPolicy::PerEpoch;
  if (s == "batch") return RefreshPolicy::PerBatch;
  throw std::invalid_argument("unknown refresh policy: " + s + " (expected auto|epoch|batch)");
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Sparse Adam: only the listed rows carry gradient and get moment/parameter
// updates; the step counter advances once per call either way.
template <class Real>
void adam_step(EmbeddingState<Real>& state, const MatrixX<Real>& grads,
               std::span<const std::int32_t> rows, const AdamConfig& cfg) {
  ++state.adam_steps;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.adam_steps));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.adam_steps));
  const Real b1 = static_cast<Real>(cfg.beta1);
  const Real b2 = static_cast<Real>(cfg.beta2);
  const Real lr = static_cast<Real>(cfg.learning_rate);
  const Real eps = static_cast<Real>(cfg.epsilon);
  const Real ibc1 = static_cast<Real>(1.0 / bc1);
  const Real ibc2 = static_cast<Real>(1.0 / bc2);
  for (std::int32_t r : rows) {
    if (!grads.row(r).allFinite()) {
      throw std::runtime_error("adam_step: non-finite gradient at row " + std::to_string(r));
    }
    auto m = state.adam_m.row(r);
    auto v = state.adam_v.row(r);
    const auto g = grads.row(r);
    m = b1 * m + (Real(1) - b1) * g;
    v = b2 * v + (Real(1) - b2) * g.cwiseProduct(g);
    state.base.row(r) -=
        lr * (m * ibc1).cwiseQuotient(((v * ibc2).cwiseSqrt().array() + eps).matrix());
  }
}

struct TrainBatch {
  std::vector<std::int32_t> users;  // user indices
  std::vector<std::int32_t> items;  // positive item indices (local)
};

// One epoch of batches: a seeded shuffle of all train edges consumed in
// consecutive chunks, last partial chunk kept.
inline std::vector<TrainBatch> make_epoch_batches(const InteractionDataset& ds,
                                                  std::int64_t batch_size, Rng& rng) {
  if (ds.train_edges.empty()) throw std::invalid_argument("make_epoch_batches: no train edges");
  if (batch_size < 1) throw std::invalid_argument("make_epoch_batches: batch_size must be >= 1");
  std::vector<std::uint32_t> order(ds.train_edges.size());
  std::iota(order.begin(), order.end(), 0u);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<TrainBatch> batches;
  batches.reserve((order.size() + batch_size - 1) / static_cast<std::size_t>(batch_size));
  for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min(static_cast<std::size_t>(batch_size), order.size() - at);
    TrainBatch b;
    b.users.reserve(n);
    b.items.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
      const Edge& e = ds.train_edges[order[at + t]];
      b.users.push_back(e.user);
      b.items.push_back(e.item);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

// Uniform rejection sampling of one negative item per positive pair.
inline std::vector<std::int32_t> sample_negatives(const InteractionDataset& ds,
                                                  const TrainBatch& batch, Rng& rng) {
  std::vector<std::int32_t> negs;
  negs.reserve(batch.users.size());
  for (std::size_t t = 0; t < batch.users.size(); ++t) {
    const auto& owned = ds.train_items_by_user[static_cast<std::size_t>(batch.users[t])];
    if (static_cast<std::int64_t>(owned.size()) >= ds.n_items) {
      throw std::runtime_error("sample_negatives: user " + std::to_string(batch.users[t]) +
                               " interacts with every item");
    }
    std::int32_t candidate;
    do {
      candidate = static_cast<std::int32_t>(uniform_int(rng, 0, ds.n_items - 1));
    } while (std::binary_search(owned.begin(), owned.end(), candidate));
    negs.push_back(candidate);
  }
  return negs;
}

struct TrainConfig {
  ModelKind model = ModelKind::MixSgcl;
  LossConfig loss;
  MixupConfig mixup;
  std::int64_t batch_size = 1024;
  int embedding_dim = 64;
  int layers = 3;
  double learning_rate = 1e-3;
  int max_epochs = 300;
  int patience = 10;
  int eval_k = 20;  // early stopping watches validation NDCG at this K
  std::uint64_t seed = 2024;
  RefreshPolicy refresh = RefreshPolicy::Auto;
  std::int64_t eval_user_sample = 0;  // 0 = evaluate every validation user
  std::vector<double> layer_weights;  // empty = uniform 1/(layers+1)

  RefreshPolicy resolved_refresh() const {
    if (refresh != RefreshPolicy::Auto) return refresh;
    // The contrastive models propagate once per epoch; the sampled baselines
    // refresh per batch like standard LightGCN-style training loops.
    return (model == ModelKind::Sgcl || model == ModelKind::MixSgcl) ? RefreshPolicy::PerEpoch
                                                                     : RefreshPolicy::PerBatch;
  }

  std::vector<std::string> validate() const {
    std::vector<std::string> errors;
    if (batch_size < 1) errors.push_back("batch_size must be >= 1");
    if (embedding_dim < 1) errors.push_back("embedding_dim must be >= 1");
    if (layers < 0) errors.push_back("layers must be >= 0");
    if (!(learning_rate > 0.0)) errors.push_back("learning_rate must be > 0");
    if (max_epochs < 1) errors.push_back("max_epochs must be >= 1");
    if (patience < 1) errors.push_back("patience must be >= 1");
    if (eval_k < 1) errors.push_back("eval_k must be >= 1");
    if (!(loss.tau > 0.0)) errors.push_back("tau must be > 0");
    if (loss.lambda < 0.0) errors.push_back("lambda must be >= 0");
    if (loss.noise_eps < 0.0) errors.push_back("noise_eps must be >= 0");
    if (mixup.n_mix < 0) errors.push_back("n_mix must be >= 0");
    if (!(mixup.beta_max > 0.0) || mixup.beta_max > 0.5) {
      errors.push_back("beta_max must be in (0, 0.5]");
    }
    if (eval_user_sample < 0) errors.push_back("eval_user_sample must be >= 0");
    if (!layer_weights.empty()) {
      if (static_cast<int>(layer_weights.size()) != layers + 1) {
        errors.push_back("layer_weights must have layers+1 entries");
      } else {
        double sum = 0.0;
        for (double w : layer_weights) sum += w;
        if (std::abs(sum - 1.0) > 1e-9) errors.push_back("layer_weights must sum to 1");
      }
    }
    return errors;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["model"] = to_string(model);
    j["tau"] = loss.tau;
    j["lambda"] = loss.lambda;
    j["view_mode"] = loss.view_mode == ViewMode::Identity ? "identity" : "noise";
    j["noise_eps"] = loss.noise_eps;
    j["exclude_self_pair"] = loss.exclude_self_pair;
    j["n_mix"] = mixup.n_mix;
    j["beta_max"] = mixup.beta_max;
    j["alpha_per_node"] = mixup.alpha_per_node;
    j["mixup_joint_batch"] = mixup.joint_batch;
    j["batch_size"] = batch_size;
    j["embedding_dim"] = embedding_dim;
    j["layers"] = layers;
    j["learning_rate"] = learning_rate;
    j["max_epochs"] = max_epochs;
    j["patience"] = patience;
    j["eval_k"] = eval_k;
    j["seed"] = seed;
    j["refresh"] = to_string(resolved_refresh());
    j["eval_user_sample"] = eval_user_sample;
    j["layer_weights"] = layer_weights;
    return j;
  }
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double valid_recall = 0.0;
  double valid_ndcg = 0.0;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_metric = 0.0;
  std::string stop_reason;
  std::int64_t train_propagations = 0;   // propagations consumed by training batches
  std::int64_t negative_sample_calls = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["best_epoch"] = best_epoch;
    j["best_metric"] = best_metric;
    j["stop_reason"] = stop_reason;
    j["train_propagations"] = train_propagations;
    j["negative_sample_calls"] = negative_sample_calls;
    auto& rows = j["epochs"] = nlohmann::ordered_json::array();
    for (const auto& e : epochs) {
      rows.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"valid_recall", e.valid_recall},
                      {"valid_ndcg", e.valid_ndcg},
                      {"train_seconds", e.train_seconds},
                      {"eval_seconds", e.eval_seconds}});
    }
    return j;
  }
};

template <class Real>
struct FitResult {
  EmbeddingState<Real> state;  // best-epoch base + combined embeddings
  TrainHistory history;
};

namespace detail {

template <class Real>
MatrixX<Real> gather_rows(const MatrixX<Real>& m, const std::vector<std::int32_t>& rows) {
  MatrixX<Real> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  }
  return out;
}

}  // namespace detail

template <class Real>
FitResult<Real> fit(const InteractionDataset& ds, const TrainConfig& cfg) {
  if (const auto errors = cfg.validate(); !errors.empty()) {
    std::string msg = "invalid train config:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
  }
  if (ds.valid_edges.empty()) throw std::invalid_argument("fit: validation split is empty");

  using Clock = std::chrono::steady_clock;
  const auto adj = build_normalized_adjacency<Real>(ds);
  EmbeddingState<Real> state = init_embeddings<Real>(ds.n_nodes(), cfg.embedding_dim, cfg.seed);
  if (cfg.layer_weights.empty()) {
    state.layer_weights = uniform_layer_weights<Real>(cfg.layers);
  } else {
    state.layer_weights.resize(cfg.layers + 1);
    for (int k = 0; k <= cfg.layers; ++k) {
      state.layer_weights[k] = static_cast<Real>(cfg.layer_weights[static_cast<std::size_t>(k)]);
    }
  }

  Rng batch_rng = make_rng(cfg.seed + 1);
  Rng neg_rng = make_rng(cfg.seed + 2);
  Rng mix_rng = make_rng(cfg.seed + 3);
  Rng noise_rng = make_rng(cfg.seed + 4);
  Rng eval_rng = make_rng(cfg.seed + 5);

  // Fixed validation user subset (optional) so per-epoch metrics are comparable.
  std::vector<std::int32_t> valid_subset;
  const std::vector<std::int32_t>* subset_ptr = nullptr;
  if (cfg.eval_user_sample > 0) {
    const auto by_user = split_items_by_user(ds, Split::Valid);
    for (std::int32_t u = 0; u < ds.n_users; ++u) {
      if (!by_user[static_cast<std::size_t>(u)].empty()) valid_subset.push_back(u);
    }
    if (cfg.eval_user_sample < static_cast<std::int64_t>(valid_subset.size())) {
      std::shuffle(valid_subset.begin(), valid_subset.end(), eval_rng);
      valid_subset.resize(static_cast<std::size_t>(cfg.eval_user_sample));
      std::sort(valid_subset.begin(), valid_subset.end());
    }
    subset_ptr = &valid_subset;
  }

  const bool per_batch_refresh = cfg.resolved_refresh() == RefreshPolicy::PerBatch;
  const AdamConfig adam{cfg.learning_rate};
  const bool mix_enabled = cfg.model == ModelKind::MixSgcl;
  MixupConfig mix_cfg = cfg.mixup;
  if (!mix_enabled) mix_cfg.n_mix = 0;

  TrainHistory history;
  MatrixX<Real> grad_combined = MatrixX<Real>::Zero(ds.n_nodes(), cfg.embedding_dim);
  LayerScatter<Real> layer_scatter(static_cast<std::size_t>(cfg.layers) + 1);
  std::vector<std::int32_t> touched;
  MatrixX<Real> best_base, best_combined;
  int bad_epochs = 0;

  auto refresh = [&] {
    propagate(adj, state, cfg.layers);
    state.combined = combine_layers(state.layers, state.layer_weights);
  };

  auto run_batch = [&](const TrainBatch& batch) -> double {
    const auto b = static_cast<Eigen::Index>(batch.users.size());
    std::vector<std::int32_t> unodes = batch.users;
    std::vector<std::int32_t> inodes(batch.items.size());
    for (std::size_t t = 0; t < batch.items.size(); ++t) {
      inodes[t] = static_cast<std::int32_t>(ds.n_users + batch.items[t]);
    }

    grad_combined.setZero();
    for (auto& blocks : layer_scatter) blocks.clear();
    double value = 0.0;

    if (cfg.model == ModelKind::Sgcl || cfg.model == ModelKind::MixSgcl) {
      const MatrixX<Real> u0 = detail::gather_rows(state.combined, unodes);
      const MatrixX<Real> v0 = detail::gather_rows(state.combined, inodes);
      const AugmentedBatch<Real> aug =
          augment_batch(u0, v0, state.layers, unodes, inodes, mix_cfg, mix_rng);
      const RowNormalized<Real> nu = normalize_rows(aug.user_rows);
      const RowNormalized<Real> nv = normalize_rows(aug.item_rows);

      MatrixX<Real> gu(nu.rows.rows(), nu.rows.cols());
      MatrixX<Real> gv(nv.rows.rows(), nv.rows.cols());
      if (mix_cfg.joint_batch || aug.segments() == 1) {
        // One shared denominator across originals and virtual pairs.
        const LossOutput<Real> out =
            sgcl_loss(nu.rows, nv.rows, cfg.loss.tau, cfg.loss.exclude_self_pair);
        value = out.value;
        gu = out.grad_users;
        gv = out.grad_items;
      } else {
        // Per-round loss terms, averaged over all pairs; keeps the loss cost
        // linear in the number of augmentation rounds.
        const Eigen::Index nseg = aug.segments();
        const Real seg_scale = static_cast<Real>(1.0 / static_cast<double>(nseg));
        for (Eigen::Index seg = 0; seg < nseg; ++seg) {
          const LossOutput<Real> out =
              sgcl_loss<Real>(nu.rows.middleRows(seg * b, b), nv.rows.middleRows(seg * b, b),
                              cfg.loss.tau, cfg.loss.exclude_self_pair);
          value += out.value / static_cast<double>(nseg);
          gu.middleRows(seg * b, b) = seg_scale * out.grad_users;
          gv.middleRows(seg * b, b) = seg_scale * out.grad_items;
        }
      }

      const MatrixX<Real> gu_raw = normalize_rows_backward(nu, gu);
      const MatrixX<Real> gv_raw = normalize_rows_backward(nv, gv);
      augment_backward(aug, gu_raw, gv_raw, unodes, inodes, grad_combined, layer_scatter);
    } else {
      const std::vector<std::int32_t> negs = sample_negatives(ds, batch, neg_rng);
      ++history.negative_sample_calls;
      std::vector<std::int32_t> nnodes(negs.size());
      for (std::size_t t = 0; t < negs.size(); ++t) {
        nnodes[t] = static_cast<std::int32_t>(ds.n_users + negs[t]);
      }
      const MatrixX<Real> u0 = detail::gather_rows(state.combined, unodes);
      const MatrixX<Real> vp = detail::gather_rows(state.combined, inodes);
      const MatrixX<Real> vn = detail::gather_rows(state.combined, nnodes);
      const LossOutput<Real> out = cfg.model == ModelKind::Bpr
                                       ? bpr_loss(u0, vp, vn)
                                       : sslrec_loss(u0, vp, vn, cfg.loss, noise_rng);
      value = out.value;
      for (Eigen::Index t = 0; t < b; ++t) {
        grad_combined.row(unodes[static_cast<std::size_t>(t)]) += out.grad_users.row(t);
        grad_combined.row(inodes[static_cast<std::size_t>(t)]) += out.grad_items.row(t);
        grad_combined.row(nnodes[static_cast<std::size_t>(t)]) += out.grad_neg_items.row(t);
      }
    }
    if (!std::isfinite(value)) {
      throw std::runtime_error("fit: non-finite loss (training diverged)");
    }

    const MatrixX<Real> grad_base =
        propagation_backward(adj, grad_combined, state.layer_weights, &layer_scatter);
    if (!grad_base.allFinite()) {
      throw std::runtime_error("fit: non-finite gradient (training diverged)");
    }
    touched.clear();
    for (std::int64_t r = 0; r < ds.n_nodes(); ++r) {
      if (grad_base.row(r).squaredNorm() > Real(0)) {
        touched.push_back(static_cast<std::int32_t>(r));
      }
    }
    adam_step(state, grad_base, touched, adam);
    return value;
  };

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    if (!per_batch_refresh) {
      refresh();
      ++history.train_propagations;
    }
    const auto batches = make_epoch_batches(ds, cfg.batch_size, batch_rng);
    double epoch_loss = 0.0;
    std::int64_t pairs = 0;
    for (const TrainBatch& batch : batches) {
      if (per_batch_refresh) {
        refresh();
        ++history.train_propagations;
      }
      const double value = run_batch(batch);
      epoch_loss += value * static_cast<double>(batch.users.size());
      pairs += static_cast<std::int64_t>(batch.users.size());
    }
    epoch_loss /= static_cast<double>(pairs);
    const auto t1 = Clock::now();

    refresh();  // evaluation view of the post-epoch state
    const MetricsReport report =
        evaluate(state.combined, ds, Split::Valid, {cfg.eval_k}, subset_ptr);
    const auto t2 = Clock::now();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = epoch_loss;
    rec.valid_recall = report.recall_at(cfg.eval_k);
    rec.valid_ndcg = report.ndcg_at(cfg.eval_k);
    rec.train_seconds = std::chrono::duration<double>(t1 - t0).count();
    rec.eval_seconds = std::chrono::duration<double>(t2 - t1).count();
    history.epochs.push_back(rec);

    if (history.best_epoch == 0 || rec.valid_ndcg > history.best_metric) {
      history.best_epoch = epoch;
      history.best_metric = rec.valid_ndcg;
      best_base = state.base;
      best_combined = state.combined;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= cfg.patience) {
        history.stop_reason = "early_stop";
        break;
      }
    }
  }
  if (history.stop_reason.empty()) history.stop_reason = "max_epochs";

  FitResult<Real> result;
  result.state = std::move(state);
  result.state.base = std::move(best_base);
  result.state.combined = std::move(best_combined);
  result.state.layers.clear();
  result.history = std::move(history);
  return result;
}

// --- checkpoint --------------------------------------------------------------
// A checkpoint directory holds config.json, embeddings.bin (the combined
// final embeddings in the export format) and history.json.

template <class Real>
void save_checkpoint(const std::filesystem::path& dir, const TrainConfig& cfg,
                     const EmbeddingState<Real>& state, const TrainHistory& history,
                     const nlohmann::ordered_json& extra_config = {}) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json config = cfg.to_json();
  for (auto it = extra_config.begin(); it != extra_config.end(); ++it) {
    config[it.key()] = it.value();
  }
  std::ofstream cfg_out(dir / "config.json");
  cfg_out << config.dump(2) << "\n";
  write_embedding_file(dir / "embeddings.bin", state.combined);
  std::ofstream hist_out(dir / "history.json");
  hist_out << history.to_json().dump(2) << "\n";
  if (!cfg_out || !hist_out) {
    throw std::runtime_error("failed writing checkpoint to " + dir.string());
  }
}

struct LoadedCheckpoint {
  nlohmann::json config;
  MatrixX<double> combined;
  nlohmann::json history;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  LoadedCheckpoint ck;
  std::ifstream cfg_in(dir / "config.json");
  if (!cfg_in) throw std::runtime_error("checkpoint missing config.json: " + dir.string());
  try {
    cfg_in >> ck.config;
  } catch (const std::exception& e) {
    throw std::runtime_error("checkpoint config.json is malformed: " + std::string(e.what()));
  }
  ck.combined = read_embedding_file<double>(dir / "embeddings.bin");
  std::ifstream hist_in(dir / "history.json");
  if (hist_in) {
    try {
      hist_in >> ck.history;
    } catch (const std::exception& e) {
      throw std::runtime_error("checkpoint history.json is malformed: " + std::string(e.what()));
    }
  }
  return ck;
}

}  // namespace mixsgcl
