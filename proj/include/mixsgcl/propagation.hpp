#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "mixsgcl/dataset.hpp"
#include "mixsgcl/linalg.hpp"
#include "mixsgcl/rng.hpp"

namespace mixsgcl {

// Symmetric-normalized bipartite operator over the joint user+item node set,
// row-compressed. Entry (i, j) = 1/sqrt(d_i * d_j) for each train edge.
// Users occupy rows [0, n_users), items rows [n_users, n_nodes).
template <class Real>
struct NormalizedAdjacency {
  std::int64_t n_nodes = 0;
  std::vector<std::int64_t> row_offsets;  // size n_nodes + 1
  std::vector<std::int32_t> cols;
  std::vector<Real> values;
  std::vector<std::int64_t> degrees;      // train degree per node

  std::int64_t nnz() const { return static_cast<std::int64_t>(cols.size()); }

  void multiply_into(const MatrixX<Real>& x, MatrixX<Real>& y) const {
    if (x.rows() != n_nodes) throw std::invalid_argument("adjacency multiply: row mismatch");
    y.resize(n_nodes, x.cols());
    for (std::int64_t i = 0; i < n_nodes; ++i) {
      auto row = y.row(i);
      row.setZero();
      for (std::int64_t e = row_offsets[i]; e < row_offsets[i + 1]; ++e) {
        row += values[e] * x.row(cols[e]);
      }
    }
  }

  MatrixX<Real> multiply(const MatrixX<Real>& x) const {
    MatrixX<Real> y;
    multiply_into(x, y);
    return y;
  }
};

template <class Real>
NormalizedAdjacency<Real> build_normalized_adjacency(const InteractionDataset& ds) {
  if (ds.train_edges.empty()) {
    throw std::invalid_argument("build_normalized_adjacency: dataset has no train edges");
  }
  NormalizedAdjacency<Real> adj;
  adj.n_nodes = ds.n_nodes();
  adj.degrees.assign(static_cast<std::size_t>(adj.n_nodes), 0);
  for (const Edge& e : ds.train_edges) {
    ++adj.degrees[static_cast<std::size_t>(e.user)];
    ++adj.degrees[static_cast<std::size_t>(ds.n_users + e.item)];
  }

  // Item -> user lists; iterating users in ascending order keeps them sorted.
  std::vector<std::vector<std::int32_t>> users_by_item(static_cast<std::size_t>(ds.n_items));
  for (std::int32_t u = 0; u < ds.n_users; ++u) {
    for (std::int32_t i : ds.train_items_by_user[static_cast<std::size_t>(u)]) {
      users_by_item[static_cast<std::size_t>(i)].push_back(u);
    }
  }

  adj.row_offsets.assign(static_cast<std::size_t>(adj.n_nodes) + 1, 0);
  for (std::int64_t node = 0; node < adj.n_nodes; ++node) {
    const std::int64_t deg = node < ds.n_users
                                 ? static_cast<std::int64_t>(ds.train_items_by_user[node].size())
                                 : static_cast<std::int64_t>(users_by_item[node - ds.n_users].size());
    adj.row_offsets[node + 1] = adj.row_offsets[node] + deg;
  }
  adj.cols.resize(static_cast<std::size_t>(adj.row_offsets.back()));
  adj.values.resize(adj.cols.size());

  auto norm = [&adj](std::int64_t a, std::int64_t b) {
    return static_cast<Real>(1.0 / std::sqrt(static_cast<double>(adj.degrees[a]) *
                                             static_cast<double>(adj.degrees[b])));
  };
  for (std::int32_t u = 0; u < ds.n_users; ++u) {
    std::int64_t e = adj.row_offsets[u];
    for (std::int32_t i : ds.train_items_by_user[static_cast<std::size_t>(u)]) {
      const std::int64_t item_node = ds.n_users + i;
      adj.cols[e] = static_cast<std::int32_t>(item_node);
      adj.values[e] = norm(u, item_node);
      ++e;
    }
  }
  for (std::int64_t i = 0; i < ds.n_items; ++i) {
    const std::int64_t item_node = ds.n_users + i;
    std::int64_t e = adj.row_offsets[item_node];
    for (std::int32_t u : users_by_item[static_cast<std::size_t>(i)]) {
      adj.cols[e] = u;
      adj.values[e] = norm(u, item_node);
      ++e;
    }
  }
  return adj;
}

template <class Real>
struct EmbeddingState {
  MatrixX<Real> base;                   // E^0, trained parameters
  std::vector<MatrixX<Real>> layers;    // E^0..E^K from the last propagation
  MatrixX<Real> combined;               // layer-weighted final embeddings
  VectorX<Real> layer_weights;          // alpha, size K+1
  MatrixX<Real> adam_m, adam_v;
  std::int64_t adam_steps = 0;
};

template <class Real>
VectorX<Real> uniform_layer_weights(int n_layers) {
  VectorX<Real> w(n_layers + 1);
  w.setConstant(static_cast<Real>(1.0 / (n_layers + 1)));
  return w;
}

// Base embeddings ~ Normal(0, 0.1^2), drawn in double then cast, so a seed
// identifies the same embedding table in both precisions.
template <class Real>
EmbeddingState<Real> init_embeddings(std::int64_t n_nodes, int dim, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("embedding dim must be >= 1");
  EmbeddingState<Real> s;
  s.base.resize(n_nodes, dim);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  for (std::int64_t i = 0; i < n_nodes; ++i) {
    for (int c = 0; c < dim; ++c) s.base(i, c) = static_cast<Real>(normal(rng));
  }
  s.adam_m = MatrixX<Real>::Zero(n_nodes, dim);
  s.adam_v = MatrixX<Real>::Zero(n_nodes, dim);
  return s;
}

// E^{k+1} = A_hat * E^k for k = 0..K-1; stores all K+1 layer matrices.
template <class Real>
void propagate(const NormalizedAdjacency<Real>& adj, EmbeddingState<Real>& state, int n_layers) {
  if (n_layers < 0) throw std::invalid_argument("layer count must be >= 0");
  state.layers.resize(static_cast<std::size_t>(n_layers) + 1);
  state.layers[0] = state.base;
  for (int k = 0; k < n_layers; ++k) {
    adj.multiply_into(state.layers[static_cast<std::size_t>(k)],
                      state.layers[static_cast<std::size_t>(k) + 1]);
  }
  for (const auto& layer : state.layers) {
    if (!layer.allFinite()) {
      throw std::runtime_error("propagate: non-finite embedding values (diverged upstream)");
    }
  }
}

template <class Real>
MatrixX<Real> combine_layers(const std::vector<MatrixX<Real>>& layers, const VectorX<Real>& weights) {
  if (static_cast<std::size_t>(weights.size()) != layers.size()) {
    throw std::invalid_argument("combine_layers: weight count != layer count");
  }
  if (std::abs(static_cast<double>(weights.sum()) - 1.0) > 1e-9) {
    throw std::invalid_argument("combine_layers: weights must sum to 1");
  }
  MatrixX<Real> out = weights[0] * layers[0];
  for (std::size_t k = 1; k < layers.size(); ++k) out += weights[k] * layers[k];
  return out;
}

// Sparse row-gradient contributions targeted at a single layer.
template <class Real>
struct ScatterBlock {
  std::vector<std::int32_t> nodes;
  MatrixX<Real> rows;  // one row per node entry
};

template <class Real>
using LayerScatter = std::vector<std::vector<ScatterBlock<Real>>>;  // [layer] -> blocks

// Gradient of the combined output (plus optional per-layer contributions)
// pulled back to the base embeddings. A_hat is symmetric, so the adjoint of
// k-step propagation is k more propagation steps; evaluated as a reverse
// Horner scheme: X = G_K, then X = A_hat X + G_k for k = K-1..0 with
// G_k = alpha_k * grad_combined + scatter_k.
template <class Real>
MatrixX<Real> propagation_backward(const NormalizedAdjacency<Real>& adj,
                                   const MatrixX<Real>& grad_combined,
                                   const VectorX<Real>& weights,
                                   const LayerScatter<Real>* scatter = nullptr) {
  if (grad_combined.rows() != adj.n_nodes) {
    throw std::invalid_argument("propagation_backward: shape mismatch");
  }
  const auto n_layers = static_cast<int>(weights.size()) - 1;
  if (scatter && static_cast<int>(scatter->size()) != n_layers + 1) {
    throw std::invalid_argument("propagation_backward: scatter layer count mismatch");
  }
  auto apply_scatter = [&](MatrixX<Real>& x, int k) {
    if (!scatter) return;
    for (const auto& block : (*scatter)[static_cast<std::size_t>(k)]) {
      for (std::size_t r = 0; r < block.nodes.size(); ++r) {
        x.row(block.nodes[r]) += block.rows.row(static_cast<Eigen::Index>(r));
      }
    }
  };

  MatrixX<Real> x = weights[n_layers] * grad_combined;
  apply_scatter(x, n_layers);
  MatrixX<Real> tmp;
  for (int k = n_layers - 1; k >= 0; --k) {
    adj.multiply_into(x, tmp);
    x.swap(tmp);
    x += weights[k] * grad_combined;
    apply_scatter(x, k);
  }
  return x;
}

// --- embedding export -------------------------------------------------------
// Little-endian f32 rows prefixed by (n_nodes, d); consumed by external
// visualization together with the token index JSON.

template <class Real>
void write_embedding_file(const std::filesystem::path& path, const MatrixX<Real>& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write embedding file: " + path.string());
  detail::write_u32(os, static_cast<std::uint32_t>(m.rows()));
  detail::write_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float v = static_cast<float>(m(i, c));
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      detail::write_u32(os, bits);
    }
  }
  if (!os) throw std::runtime_error("failed writing embedding file: " + path.string());
}

template <class Real>
MatrixX<Real> read_embedding_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open embedding file: " + path.string());
  const std::uint32_t rows = detail::read_u32(is);
  const std::uint32_t cols = detail::read_u32(is);
  MatrixX<Real> m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const std::uint32_t bits = detail::read_u32(is);
      float v;
      std::memcpy(&v, &bits, sizeof(v));
      m(i, c) = static_cast<Real>(v);
    }
  }
  return m;
}

}  // namespace mixsgcl
