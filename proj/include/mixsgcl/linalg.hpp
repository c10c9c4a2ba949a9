#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace mixsgcl {

// Row-major matrices throughout: embedding rows are gathered, scattered and
// normalized row-wise, and the sparse operator kernels stream rows.
template <class Real>
using MatrixX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Real>
using VectorX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

template <class Real>
struct RowNormalized {
  MatrixX<Real> rows;    // unit rows (zero rows stay zero)
  VectorX<Real> norms;   // pre-normalization L2 norms
};

template <class Real>
RowNormalized<Real> normalize_rows(const MatrixX<Real>& m) {
  RowNormalized<Real> out;
  out.rows.resizeLike(m);
  out.norms.resize(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Real n = m.row(r).norm();
    out.norms[r] = n;
    if (n > Real(0)) {
      out.rows.row(r) = m.row(r) / n;
    } else {
      out.rows.row(r).setZero();
    }
  }
  return out;
}

// Adjoint of y = x / |x|:  dx = (g - (g.y) y) / |x|.
template <class Real>
MatrixX<Real> normalize_rows_backward(const RowNormalized<Real>& n,
                                      const MatrixX<Real>& grad) {
  if (grad.rows() != n.rows.rows() || grad.cols() != n.rows.cols()) {
    throw std::invalid_argument("normalize_rows_backward: shape mismatch");
  }
  MatrixX<Real> out(grad.rows(), grad.cols());
  for (Eigen::Index r = 0; r < grad.rows(); ++r) {
    if (n.norms[r] > Real(0)) {
      const Real proj = grad.row(r).dot(n.rows.row(r));
      out.row(r) = (grad.row(r) - proj * n.rows.row(r)) / n.norms[r];
    } else {
      out.row(r).setZero();
    }
  }
  return out;
}

}  // namespace mixsgcl
