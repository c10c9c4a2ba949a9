#pragma once

#include <cmath>
#include <stdexcept>

#include "mixsgcl/linalg.hpp"
#include "mixsgcl/rng.hpp"

namespace mixsgcl {

enum class LossKind { Bpr, SslRec, Sgcl };
enum class ViewMode { Identity, Noise };

struct LossConfig {
  LossKind kind = LossKind::Sgcl;
  double tau = 0.2;            // contrastive temperature
  double lambda = 0.2;         // CL weight (SslRec only)
  ViewMode view_mode = ViewMode::Identity;
  double noise_eps = 0.1;      // Noise view perturbation scale on the unit sphere
  bool exclude_self_pair = false;  // ablation: drop the anchor pair's own denominator terms
};

template <class Real>
struct LossOutput {
  double value = 0.0;
  MatrixX<Real> grad_users;      // w.r.t. the user-side input rows
  MatrixX<Real> grad_items;      // w.r.t. the item-side (or second-view) rows
  MatrixX<Real> grad_neg_items;  // only for BPR-family losses
};

namespace detail {

inline double log_sigmoid_neg(double s) {
  // -log(sigmoid(s)), numerically stable for both signs.
  return s >= 0.0 ? std::log1p(std::exp(-s)) : -s + std::log1p(std::exp(s));
}

}  // namespace detail

// Pairwise ranking loss: mean over rows of -log sigmoid(u.v+ - u.v-).
template <class Real>
LossOutput<Real> bpr_loss(const MatrixX<Real>& users, const MatrixX<Real>& pos_items,
                          const MatrixX<Real>& neg_items) {
  const Eigen::Index b = users.rows();
  if (pos_items.rows() != b || neg_items.rows() != b) {
    throw std::invalid_argument("bpr_loss: row counts differ");
  }
  if (b == 0) throw std::invalid_argument("bpr_loss: empty batch");

  LossOutput<Real> out;
  out.grad_users.resizeLike(users);
  out.grad_items.resizeLike(pos_items);
  out.grad_neg_items.resizeLike(neg_items);
  double total = 0.0;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index t = 0; t < b; ++t) {
    const double s = static_cast<double>(users.row(t).dot(pos_items.row(t)) -
                                         users.row(t).dot(neg_items.row(t)));
    total += detail::log_sigmoid_neg(s);
    // d/ds of -log sigmoid(s) = -sigmoid(-s)
    const Real coef = static_cast<Real>(-inv_b / (1.0 + std::exp(s)));
    out.grad_users.row(t) = coef * (pos_items.row(t) - neg_items.row(t));
    out.grad_items.row(t) = coef * users.row(t);
    out.grad_neg_items.row(t) = -coef * users.row(t);
  }
  out.value = total * inv_b;
  return out;
}

// One side of the two-view InfoNCE objective, summed over the batch:
//   sum_i -log( exp(a_i.b_i/tau) / sum_k exp(a_i.b_k/tau) ).
// Inputs are expected row-aligned and L2-normalized by the caller.
template <class Real>
LossOutput<Real> infonce_gcl_loss(const MatrixX<Real>& view1, const MatrixX<Real>& view2,
                                  double tau) {
  const Eigen::Index b = view1.rows();
  if (view2.rows() != b || view2.cols() != view1.cols()) {
    throw std::invalid_argument("infonce_gcl_loss: views are not row-aligned");
  }
  if (b == 0) throw std::invalid_argument("infonce_gcl_loss: empty batch");
  if (!(tau > 0.0)) throw std::invalid_argument("infonce_gcl_loss: tau must be positive");

  const Real inv_tau = static_cast<Real>(1.0 / tau);
  MatrixX<Real> sim = (view1 * view2.transpose()) * inv_tau;  // b x b
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    auto row = sim.row(i);
    const Real m = row.maxCoeff();
    const double lse =
        static_cast<double>(m) + std::log(static_cast<double>((row.array() - m).exp().sum()));
    total += lse - static_cast<double>(row(i));
    // Row becomes the softmax weights for the gradient pass.
    row = (row.array() - static_cast<Real>(lse)).exp();
  }

  LossOutput<Real> out;
  out.value = total;
  out.grad_users = (sim * view2 - view2) * inv_tau;
  out.grad_items = (sim.transpose() * view1 - view1) * inv_tau;
  return out;
}

// Supervised graph contrastive loss over a batch of positive (user, item)
// pairs, mean-reduced:
//   -log[ exp(u_t.v_t/tau) / sum_t' ( exp(u_t.u_t'/tau) + exp(v_t.v_t'/tau) ) ]
// Rows are expected L2-normalized. No negative sampling is involved: every
// other in-batch user and item acts as a contrast term.
template <class Real>
LossOutput<Real> sgcl_loss(const MatrixX<Real>& users, const MatrixX<Real>& items, double tau,
                           bool exclude_self_pair = false) {
  const Eigen::Index b = users.rows();
  if (items.rows() != b || items.cols() != users.cols()) {
    throw std::invalid_argument("sgcl_loss: user/item rows are not aligned");
  }
  if (b == 0) throw std::invalid_argument("sgcl_loss: empty batch");
  if (b == 1 && exclude_self_pair) {
    throw std::invalid_argument("sgcl_loss: empty denominator (batch of 1 with self-pair excluded)");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("sgcl_loss: tau must be positive");

  const Real inv_tau = static_cast<Real>(1.0 / tau);
  MatrixX<Real> sim_u = (users * users.transpose()) * inv_tau;  // b x b
  MatrixX<Real> sim_v = (items * items.transpose()) * inv_tau;
  const Real neg_inf = -std::numeric_limits<Real>::infinity();
  if (exclude_self_pair) {
    sim_u.diagonal().setConstant(neg_inf);
    sim_v.diagonal().setConstant(neg_inf);
  }

  double total = 0.0;
  for (Eigen::Index t = 0; t < b; ++t) {
    auto row_u = sim_u.row(t);
    auto row_v = sim_v.row(t);
    const Real m = std::max(row_u.maxCoeff(), row_v.maxCoeff());
    const double sum_exp = static_cast<double>((row_u.array() - m).exp().sum()) +
                           static_cast<double>((row_v.array() - m).exp().sum());
    const double lse = static_cast<double>(m) + std::log(sum_exp);
    const double pos = static_cast<double>(users.row(t).dot(items.row(t))) / tau;
    total += lse - pos;
    // Rows become the denominator softmax weights w^u, w^v.
    row_u = (row_u.array() - static_cast<Real>(lse)).exp();
    row_v = (row_v.array() - static_cast<Real>(lse)).exp();
  }

  const Real scale = static_cast<Real>(1.0 / static_cast<double>(b)) * inv_tau;
  LossOutput<Real> out;
  out.value = total / static_cast<double>(b);
  // d/du_r: -v_r plus denominator terms (W + W^T) u; the anchor's own pair
  // contributes twice, which (W + W^T) produces on the diagonal.
  MatrixX<Real> w = sim_u + sim_u.transpose();
  out.grad_users = (w * users - items) * scale;
  w = sim_v + sim_v.transpose();
  out.grad_items = (w * items - users) * scale;
  return out;
}

// Multi-task objective: BPR on raw inputs plus lambda-weighted user-side and
// item-side InfoNCE on L2-normalized views. Identity views reuse the
// normalized embeddings; Noise views add a seeded uniform perturbation of
// scale eps on the unit sphere and re-normalize. Gradients are reported
// w.r.t. the raw inputs.
template <class Real>
LossOutput<Real> sslrec_loss(const MatrixX<Real>& users, const MatrixX<Real>& pos_items,
                             const MatrixX<Real>& neg_items, const LossConfig& cfg, Rng& rng) {
  LossOutput<Real> out = bpr_loss(users, pos_items, neg_items);
  if (cfg.lambda == 0.0) return out;
  if (!(cfg.lambda > 0.0)) throw std::invalid_argument("sslrec_loss: lambda must be >= 0");

  auto side = [&](const MatrixX<Real>& raw, MatrixX<Real>& grad_accum) {
    const RowNormalized<Real> base = normalize_rows(raw);
    double value;
    MatrixX<Real> grad_base_rows;
    if (cfg.view_mode == ViewMode::Identity) {
      const LossOutput<Real> nce = infonce_gcl_loss(base.rows, base.rows, cfg.tau);
      value = nce.value;
      grad_base_rows = nce.grad_users + nce.grad_items;
    } else {
      MatrixX<Real> noisy1 = base.rows;
      MatrixX<Real> noisy2 = base.rows;
      for (Eigen::Index r = 0; r < base.rows.rows(); ++r) {
        for (Eigen::Index c = 0; c < base.rows.cols(); ++c) {
          noisy1(r, c) += static_cast<Real>(uniform_real(rng, -cfg.noise_eps, cfg.noise_eps));
        }
      }
      for (Eigen::Index r = 0; r < base.rows.rows(); ++r) {
        for (Eigen::Index c = 0; c < base.rows.cols(); ++c) {
          noisy2(r, c) += static_cast<Real>(uniform_real(rng, -cfg.noise_eps, cfg.noise_eps));
        }
      }
      const RowNormalized<Real> v1 = normalize_rows(noisy1);
      const RowNormalized<Real> v2 = normalize_rows(noisy2);
      const LossOutput<Real> nce = infonce_gcl_loss(v1.rows, v2.rows, cfg.tau);
      value = nce.value;
      grad_base_rows =
          normalize_rows_backward(v1, nce.grad_users) + normalize_rows_backward(v2, nce.grad_items);
    }
    grad_accum += static_cast<Real>(cfg.lambda) * normalize_rows_backward(base, grad_base_rows);
    return value;
  };

  out.value += cfg.lambda * side(users, out.grad_users);
  out.value += cfg.lambda * side(pos_items, out.grad_items);
  return out;
}

}  // namespace mixsgcl
