#pragma once

// Independent reference implementations the test suites check against. These
// deliberately use the most literal formulation available (dense matrices,
// double loops, full sorts) and stay separate from the library code paths.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mixsgcl/dataset.hpp"
#include "mixsgcl/linalg.hpp"

namespace oracles {

inline Eigen::MatrixXd dense_normalized_adjacency(const mixsgcl::InteractionDataset& ds) {
  const auto n = ds.n_nodes();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : ds.train_edges) {
    a(e.user, ds.n_users + e.item) = 1.0;
    a(ds.n_users + e.item, e.user) = 1.0;
  }
  Eigen::VectorXd deg = a.rowwise().sum();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (a(i, j) != 0.0) out(i, j) = 1.0 / std::sqrt(deg(i) * deg(j));
    }
  }
  return out;
}

inline std::vector<Eigen::MatrixXd> dense_propagate(const Eigen::MatrixXd& a,
                                                    const Eigen::MatrixXd& e0, int k_layers) {
  std::vector<Eigen::MatrixXd> layers{e0};
  for (int k = 0; k < k_layers; ++k) layers.push_back(a * layers.back());
  return layers;
}

inline double naive_bpr(const Eigen::MatrixXd& u, const Eigen::MatrixXd& vp,
                        const Eigen::MatrixXd& vn) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < u.rows(); ++t) {
    const double s = u.row(t).dot(vp.row(t)) - u.row(t).dot(vn.row(t));
    total += -std::log(1.0 / (1.0 + std::exp(-s)));
  }
  return total / static_cast<double>(u.rows());
}

inline double naive_infonce(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tau) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double den = 0.0;
    for (Eigen::Index k = 0; k < a.rows(); ++k) den += std::exp(a.row(i).dot(b.row(k)) / tau);
    total += -std::log(std::exp(a.row(i).dot(b.row(i)) / tau) / den);
  }
  return total;
}

inline double naive_sgcl(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, double tau) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < u.rows(); ++t) {
    const double num = std::exp(u.row(t).dot(v.row(t)) / tau);
    double den = 0.0;
    for (Eigen::Index s = 0; s < u.rows(); ++s) {
      den += std::exp(u.row(t).dot(u.row(s)) / tau) + std::exp(v.row(t).dot(v.row(s)) / tau);
    }
    total += -std::log(num / den);
  }
  return total / static_cast<double>(u.rows());
}

// Central finite differences of a scalar function of a matrix argument.
template <class F>
Eigen::MatrixXd central_differences(F&& f, Eigen::MatrixXd x, double h = 1e-4) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double saved = x(i, j);
      x(i, j) = saved + h;
      const double fp = f(x);
      x(i, j) = saved - h;
      const double fm = f(x);
      x(i, j) = saved;
      g(i, j) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double denom = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / denom;
}

// Full-sort ranking reference: highest score first, ascending index on ties,
// masked entries never returned.
inline std::vector<std::int32_t> brute_force_topk(const std::vector<double>& scores,
                                                  const std::vector<bool>& masked, int k) {
  std::vector<std::int32_t> idx;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!masked[i]) idx.push_back(static_cast<std::int32_t>(i));
  }
  std::stable_sort(idx.begin(), idx.end(), [&scores](std::int32_t a, std::int32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  if (static_cast<int>(idx.size()) > k) idx.resize(static_cast<std::size_t>(k));
  return idx;
}

inline double brute_recall(const std::vector<std::int32_t>& topk,
                           const std::vector<std::int32_t>& relevant, int k) {
  std::int64_t hits = 0;
  for (std::size_t r = 0; r < std::min<std::size_t>(topk.size(), static_cast<std::size_t>(k)); ++r) {
    if (std::find(relevant.begin(), relevant.end(), topk[r]) != relevant.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

inline double brute_ndcg(const std::vector<std::int32_t>& topk,
                         const std::vector<std::int32_t>& relevant, int k) {
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min<std::size_t>(topk.size(), static_cast<std::size_t>(k)); ++r) {
    if (std::find(relevant.begin(), relevant.end(), topk[r]) != relevant.end()) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min<std::size_t>(static_cast<std::size_t>(k), relevant.size());
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

}  // namespace oracles
