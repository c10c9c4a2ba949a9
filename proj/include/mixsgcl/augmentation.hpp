#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mixsgcl/linalg.hpp"
#include "mixsgcl/propagation.hpp"
#include "mixsgcl/rng.hpp"

namespace mixsgcl {

struct MixupConfig {
  int n_mix = 1;               // augmentation rounds per batch
  double beta_max = 0.5;       // edge mixup ratio drawn from U(0, beta_max]
  std::uint64_t seed = 7;
  bool alpha_per_node = false; // draw a simplex vector per node instead of per round
  bool joint_batch = false;    // feed originals + virtual pairs through one shared denominator
};

// Uniform draws normalized onto the simplex; resamples the measure-zero
// all-zeros draw.
template <class Real>
VectorX<Real> sample_simplex_weights(int k_plus_1, Rng& rng) {
  if (k_plus_1 < 1) throw std::invalid_argument("sample_simplex_weights: need >= 1 component");
  VectorX<Real> w(k_plus_1);
  double sum = 0.0;
  while (sum == 0.0) {
    for (int k = 0; k < k_plus_1; ++k) {
      const double x = uniform_real(rng);
      w[k] = static_cast<Real>(x);
      sum += x;
    }
  }
  w /= static_cast<Real>(sum);
  return w;
}

template <class Real>
struct NodeMixupRows {
  MatrixX<Real> users;
  MatrixX<Real> items;
};

// Virtual nodes from a simplex-weighted recombination of per-layer
// representations: u_hat = sum_k alpha_k E^k[node].
template <class Real>
NodeMixupRows<Real> node_mixup(const std::vector<MatrixX<Real>>& layers,
                               const std::vector<std::int32_t>& user_nodes,
                               const std::vector<std::int32_t>& item_nodes,
                               const VectorX<Real>& alpha) {
  if (static_cast<std::size_t>(alpha.size()) != layers.size()) {
    throw std::invalid_argument("node_mixup: alpha length != layer count");
  }
  const auto n_nodes = layers[0].rows();
  auto mix = [&](const std::vector<std::int32_t>& nodes) {
    MatrixX<Real> out(static_cast<Eigen::Index>(nodes.size()), layers[0].cols());
    for (std::size_t r = 0; r < nodes.size(); ++r) {
      if (nodes[r] < 0 || nodes[r] >= n_nodes) {
        throw std::out_of_range("node_mixup: node index out of range");
      }
      out.row(static_cast<Eigen::Index>(r)) = alpha[0] * layers[0].row(nodes[r]);
      for (std::size_t k = 1; k < layers.size(); ++k) {
        out.row(static_cast<Eigen::Index>(r)) += alpha[static_cast<Eigen::Index>(k)] * layers[k].row(nodes[r]);
      }
    }
    return out;
  };
  return {mix(user_nodes), mix(item_nodes)};
}

// Virtual pair on the edge between an interacting user and item:
//   u_bar = (1-beta) u + beta v,  v_bar = beta u + (1-beta) v.
template <class Real>
void edge_mixup(const MatrixX<Real>& users, const MatrixX<Real>& items, const VectorX<Real>& betas,
                MatrixX<Real>& users_bar, MatrixX<Real>& items_bar) {
  if (items.rows() != users.rows() || betas.size() != users.rows()) {
    throw std::invalid_argument("edge_mixup: rows are not aligned");
  }
  users_bar.resizeLike(users);
  items_bar.resizeLike(items);
  for (Eigen::Index t = 0; t < users.rows(); ++t) {
    const Real b = betas[t];
    if (!(b >= Real(0)) || b > Real(0.5)) {
      throw std::invalid_argument("edge_mixup: beta outside [0, 0.5]");
    }
    users_bar.row(t) = (Real(1) - b) * users.row(t) + b * items.row(t);
    items_bar.row(t) = b * users.row(t) + (Real(1) - b) * items.row(t);
  }
}

template <class Real>
struct MixupRound {
  VectorX<Real> alpha;         // shared simplex weights (empty when per-node)
  MatrixX<Real> alpha_users;   // per-node weights, rows aligned with the batch
  MatrixX<Real> alpha_items;
  VectorX<Real> betas;         // one edge-mixup ratio per pair
};

// Row layout per side: B originals, then per round B node-mixup rows followed
// by B edge-mixup rows; (1 + 2 n_mix) B rows in total.
template <class Real>
struct AugmentedBatch {
  MatrixX<Real> user_rows;
  MatrixX<Real> item_rows;
  std::vector<MixupRound<Real>> rounds;
  Eigen::Index original_batch = 0;

  Eigen::Index segments() const { return 1 + 2 * static_cast<Eigen::Index>(rounds.size()); }
};

template <class Real>
AugmentedBatch<Real> augment_batch(const MatrixX<Real>& users, const MatrixX<Real>& items,
                                   const std::vector<MatrixX<Real>>& layers,
                                   const std::vector<std::int32_t>& user_nodes,
                                   const std::vector<std::int32_t>& item_nodes,
                                   const MixupConfig& cfg, Rng& rng) {
  const Eigen::Index b = users.rows();
  if (b == 0) throw std::invalid_argument("augment_batch: empty batch");
  if (cfg.n_mix < 0) throw std::invalid_argument("augment_batch: n_mix must be >= 0");

  AugmentedBatch<Real> out;
  out.original_batch = b;
  out.user_rows.resize(b * (1 + 2 * cfg.n_mix), users.cols());
  out.item_rows.resize(b * (1 + 2 * cfg.n_mix), items.cols());
  out.user_rows.topRows(b) = users;
  out.item_rows.topRows(b) = items;

  const int k_plus_1 = static_cast<int>(layers.size());
  for (int r = 0; r < cfg.n_mix; ++r) {
    MixupRound<Real> round;
    NodeMixupRows<Real> mixed;
    if (cfg.alpha_per_node) {
      round.alpha_users.resize(b, k_plus_1);
      round.alpha_items.resize(b, k_plus_1);
      mixed.users.resize(b, users.cols());
      mixed.items.resize(b, items.cols());
      for (Eigen::Index t = 0; t < b; ++t) {
        const VectorX<Real> au = sample_simplex_weights<Real>(k_plus_1, rng);
        const VectorX<Real> ai = sample_simplex_weights<Real>(k_plus_1, rng);
        round.alpha_users.row(t) = au.transpose();
        round.alpha_items.row(t) = ai.transpose();
        mixed.users.row(t).setZero();
        mixed.items.row(t).setZero();
        for (int k = 0; k < k_plus_1; ++k) {
          mixed.users.row(t) += au[k] * layers[static_cast<std::size_t>(k)].row(user_nodes[static_cast<std::size_t>(t)]);
          mixed.items.row(t) += ai[k] * layers[static_cast<std::size_t>(k)].row(item_nodes[static_cast<std::size_t>(t)]);
        }
      }
    } else {
      round.alpha = sample_simplex_weights<Real>(k_plus_1, rng);
      mixed = node_mixup(layers, user_nodes, item_nodes, round.alpha);
    }

    round.betas.resize(b);
    for (Eigen::Index t = 0; t < b; ++t) {
      round.betas[t] = static_cast<Real>(uniform_real(rng, 0.0, cfg.beta_max));
    }
    MatrixX<Real> users_bar, items_bar;
    edge_mixup(users, items, round.betas, users_bar, items_bar);

    const Eigen::Index nmix_at = b * (1 + 2 * r);
    out.user_rows.middleRows(nmix_at, b) = mixed.users;
    out.item_rows.middleRows(nmix_at, b) = mixed.items;
    out.user_rows.middleRows(nmix_at + b, b) = users_bar;
    out.item_rows.middleRows(nmix_at + b, b) = items_bar;
    out.rounds.push_back(std::move(round));
  }
  return out;
}

// Exact adjoint of augment_batch. Original and edge-mixup rows pull back to
// the combined final embeddings (grad_combined); node-mixup rows pull back to
// the individual layers via the per-layer scatter consumed by
// propagation_backward.
template <class Real>
void augment_backward(const AugmentedBatch<Real>& aug, const MatrixX<Real>& grad_user_rows,
                      const MatrixX<Real>& grad_item_rows,
                      const std::vector<std::int32_t>& user_nodes,
                      const std::vector<std::int32_t>& item_nodes, MatrixX<Real>& grad_combined,
                      LayerScatter<Real>& layer_scatter) {
  const Eigen::Index b = aug.original_batch;
  if (grad_user_rows.rows() != aug.user_rows.rows() ||
      grad_item_rows.rows() != aug.item_rows.rows()) {
    throw std::invalid_argument("augment_backward: gradient shape mismatch");
  }

  for (Eigen::Index t = 0; t < b; ++t) {
    grad_combined.row(user_nodes[static_cast<std::size_t>(t)]) += grad_user_rows.row(t);
    grad_combined.row(item_nodes[static_cast<std::size_t>(t)]) += grad_item_rows.row(t);
  }

  for (std::size_t r = 0; r < aug.rounds.size(); ++r) {
    const MixupRound<Real>& round = aug.rounds[r];
    const Eigen::Index nmix_at = b * (1 + 2 * static_cast<Eigen::Index>(r));
    const Eigen::Index emix_at = nmix_at + b;

    const auto g_users = grad_user_rows.middleRows(nmix_at, b);
    const auto g_items = grad_item_rows.middleRows(nmix_at, b);
    for (std::size_t k = 0; k < layer_scatter.size(); ++k) {
      ScatterBlock<Real> bu, bi;
      bu.nodes = user_nodes;
      bi.nodes = item_nodes;
      if (round.alpha.size() > 0) {
        bu.rows = round.alpha[static_cast<Eigen::Index>(k)] * g_users;
        bi.rows = round.alpha[static_cast<Eigen::Index>(k)] * g_items;
      } else {
        bu.rows = g_users.array().colwise() * round.alpha_users.col(static_cast<Eigen::Index>(k)).array();
        bi.rows = g_items.array().colwise() * round.alpha_items.col(static_cast<Eigen::Index>(k)).array();
      }
      layer_scatter[k].push_back(std::move(bu));
      layer_scatter[k].push_back(std::move(bi));
    }

    for (Eigen::Index t = 0; t < b; ++t) {
      const Real beta = round.betas[t];
      const auto gu = grad_user_rows.row(emix_at + t);
      const auto gi = grad_item_rows.row(emix_at + t);
      grad_combined.row(user_nodes[static_cast<std::size_t>(t)]) += (Real(1) - beta) * gu + beta * gi;
      grad_combined.row(item_nodes[static_cast<std::size_t>(t)]) += beta * gu + (Real(1) - beta) * gi;
    }
  }
}

}  // namespace mixsgcl
