#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsgcl/dataset.hpp"
#include "mixsgcl/linalg.hpp"

namespace mixsgcl {

enum class Split { Valid, Test };

struct EmbeddingDiagnostics {
  double centroid_distance = 0.0;   // |mean(users) - mean(items)| on normalized rows
  double mean_alignment = 0.0;      // mean u.v over test edges, normalized embeddings
  double mean_user_user_cos = 0.0;
  double mean_item_item_cos = 0.0;
};

struct MetricsAtK {
  int k = 0;
  double recall = 0.0;
  double ndcg = 0.0;
};

struct MetricsReport {
  std::vector<MetricsAtK> at;
  std::int64_t n_evaluated_users = 0;
  EmbeddingDiagnostics diagnostics;

  double recall_at(int k) const {
    for (const auto& m : at) {
      if (m.k == k) return m.recall;
    }
    throw std::out_of_range("MetricsReport: K not evaluated");
  }
  double ndcg_at(int k) const {
    for (const auto& m : at) {
      if (m.k == k) return m.ndcg;
    }
    throw std::out_of_range("MetricsReport: K not evaluated");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    for (const auto& m : at) {
      j["recall@" + std::to_string(m.k)] = m.recall;
      j["ndcg@" + std::to_string(m.k)] = m.ndcg;
    }
    j["n_evaluated_users"] = n_evaluated_users;
    j["diagnostics"] = {{"centroid_distance", diagnostics.centroid_distance},
                        {"mean_alignment", diagnostics.mean_alignment},
                        {"mean_user_user_cos", diagnostics.mean_user_user_cos},
                        {"mean_item_item_cos", diagnostics.mean_item_item_cos}};
    return j;
  }
};

// Top-K items for one user by unnormalized dot-product score over all items,
// with the user's train items masked out and ties broken by ascending index.
template <class Real>
std::vector<std::int32_t> rank_items(const MatrixX<Real>& combined, std::int64_t n_users,
                                     std::int32_t user,
                                     const std::vector<std::int32_t>& train_items_sorted, int k) {
  const auto n_items = combined.rows() - n_users;
  VectorX<Real> scores = combined.bottomRows(n_items) * combined.row(user).transpose();
  for (std::int32_t i : train_items_sorted) {
    scores[i] = -std::numeric_limits<Real>::infinity();
  }
  const auto top = static_cast<Eigen::Index>(std::min<std::int64_t>(k, n_items));
  std::vector<std::int32_t> idx(static_cast<std::size_t>(n_items));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + top, idx.end(),
                    [&scores](std::int32_t a, std::int32_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  idx.resize(static_cast<std::size_t>(top));
  return idx;
}

inline double recall_at_k(const std::vector<std::int32_t>& topk,
                          const std::vector<std::int32_t>& relevant_sorted, int k) {
  if (relevant_sorted.empty()) throw std::invalid_argument("recall_at_k: empty relevant set");
  const auto depth = std::min<std::size_t>(static_cast<std::size_t>(k), topk.size());
  std::int64_t hits = 0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), topk[r])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant_sorted.size());
}

inline double ndcg_at_k(const std::vector<std::int32_t>& topk,
                        const std::vector<std::int32_t>& relevant_sorted, int k) {
  if (relevant_sorted.empty()) throw std::invalid_argument("ndcg_at_k: empty relevant set");
  const auto depth = std::min<std::size_t>(static_cast<std::size_t>(k), topk.size());
  double dcg = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), topk[r])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  const auto ideal = std::min<std::size_t>(static_cast<std::size_t>(k), relevant_sorted.size());
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

// Held-out items per user for a split, sorted ascending.
inline std::vector<std::vector<std::int32_t>> split_items_by_user(const InteractionDataset& ds,
                                                                  Split split) {
  const auto& edges = split == Split::Valid ? ds.valid_edges : ds.test_edges;
  std::vector<std::vector<std::int32_t>> by_user(static_cast<std::size_t>(ds.n_users));
  for (const Edge& e : edges) by_user[static_cast<std::size_t>(e.user)].push_back(e.item);
  for (auto& v : by_user) std::sort(v.begin(), v.end());
  return by_user;
}

template <class Real>
EmbeddingDiagnostics embedding_shift(const MatrixX<Real>& combined, const InteractionDataset& ds) {
  EmbeddingDiagnostics d;
  const RowNormalized<Real> norm = normalize_rows(combined);
  const auto n_users = ds.n_users;
  const auto n_items = ds.n_items;

  Eigen::RowVectorXd user_sum = Eigen::RowVectorXd::Zero(combined.cols());
  Eigen::RowVectorXd item_sum = Eigen::RowVectorXd::Zero(combined.cols());
  for (std::int64_t u = 0; u < n_users; ++u) user_sum += norm.rows.row(u).template cast<double>();
  for (std::int64_t i = 0; i < n_items; ++i) {
    item_sum += norm.rows.row(n_users + i).template cast<double>();
  }
  d.centroid_distance = (user_sum / static_cast<double>(n_users) -
                         item_sum / static_cast<double>(n_items))
                            .norm();

  // Mean pairwise cosine of unit rows via |sum|^2 = n + sum_{i != j} cos_ij.
  if (n_users > 1) {
    d.mean_user_user_cos = (user_sum.squaredNorm() - static_cast<double>(n_users)) /
                           (static_cast<double>(n_users) * static_cast<double>(n_users - 1));
  }
  if (n_items > 1) {
    d.mean_item_item_cos = (item_sum.squaredNorm() - static_cast<double>(n_items)) /
                           (static_cast<double>(n_items) * static_cast<double>(n_items - 1));
  }

  if (!ds.test_edges.empty()) {
    double align = 0.0;
    for (const Edge& e : ds.test_edges) {
      align += static_cast<double>(norm.rows.row(e.user).dot(norm.rows.row(n_users + e.item)));
    }
    d.mean_alignment = align / static_cast<double>(ds.test_edges.size());
  }
  return d;
}

// Full-ranking evaluation averaged uniformly over users with at least one
// held-out item in the split. `user_subset` (optional, sorted) restricts the
// averaged users, e.g. for sampled validation during training.
template <class Real>
MetricsReport evaluate(const MatrixX<Real>& combined, const InteractionDataset& ds, Split split,
                       const std::vector<int>& ks,
                       const std::vector<std::int32_t>* user_subset = nullptr) {
  if (ks.empty()) throw std::invalid_argument("evaluate: no K values");
  const auto& edges = split == Split::Valid ? ds.valid_edges : ds.test_edges;
  if (edges.empty()) throw std::invalid_argument("evaluate: empty split");

  const auto by_user = split_items_by_user(ds, split);
  const int max_k = *std::max_element(ks.begin(), ks.end());

  MetricsReport report;
  report.at.reserve(ks.size());
  for (int k : ks) report.at.push_back({k, 0.0, 0.0});

  auto eval_user = [&](std::int32_t u) {
    const auto& relevant = by_user[static_cast<std::size_t>(u)];
    if (relevant.empty()) return false;
    const auto topk = rank_items(combined, ds.n_users, u,
                                 ds.train_items_by_user[static_cast<std::size_t>(u)], max_k);
    for (auto& m : report.at) {
      m.recall += recall_at_k(topk, relevant, m.k);
      m.ndcg += ndcg_at_k(topk, relevant, m.k);
    }
    return true;
  };

  if (user_subset) {
    for (std::int32_t u : *user_subset) {
      if (eval_user(u)) ++report.n_evaluated_users;
    }
  } else {
    for (std::int32_t u = 0; u < ds.n_users; ++u) {
      if (eval_user(u)) ++report.n_evaluated_users;
    }
  }
  if (report.n_evaluated_users == 0) {
    throw std::runtime_error("evaluate: no user has held-out items in this split");
  }
  for (auto& m : report.at) {
    m.recall /= static_cast<double>(report.n_evaluated_users);
    m.ndcg /= static_cast<double>(report.n_evaluated_users);
  }
  report.diagnostics = embedding_shift(combined, ds);
  return report;
}

}  // namespace mixsgcl
