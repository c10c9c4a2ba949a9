#pragma once

// Seeded synthetic interaction generators shared by the unit and acceptance
// suites. Users and items live in blocks; within a block each user has a
// latent position and prefers nearby items, which gives the embeddings a
// learnable collaborative structure beyond block membership.

#include <cmath>
#include <string>
#include <unordered_set>
#include <vector>

#include "mixsgcl/dataset.hpp"
#include "mixsgcl/rng.hpp"

namespace synthetic {

struct BlockedSpec {
  std::int64_t n_users = 200;
  std::int64_t n_items = 200;
  int n_blocks = 2;
  int min_degree = 8;
  double extra_degree_mean = 4.0;  // exponential tail on top of min_degree
  double locality = 0.12;          // preference bandwidth within a block
  double cross_block_noise = 0.0;  // probability of a uniformly random item
  std::uint64_t seed = 1;
};

inline mixsgcl::RawInteractions make_blocked_raw(const BlockedSpec& spec) {
  mixsgcl::Rng rng = mixsgcl::make_rng(spec.seed);
  mixsgcl::RawInteractions raw;

  const auto users_per_block = spec.n_users / spec.n_blocks;
  const auto items_per_block = spec.n_items / spec.n_blocks;
  std::exponential_distribution<double> extra(1.0 / std::max(spec.extra_degree_mean, 1e-9));

  for (std::int64_t u = 0; u < spec.n_users; ++u) {
    const auto block = std::min<std::int64_t>(u / users_per_block, spec.n_blocks - 1);
    const auto item_lo = block * items_per_block;
    const auto item_hi =
        block == spec.n_blocks - 1 ? spec.n_items : (block + 1) * items_per_block;
    const double pos = mixsgcl::uniform_real(rng);

    int degree = spec.min_degree;
    if (spec.extra_degree_mean > 0.0) degree += static_cast<int>(extra(rng));
    degree = std::min<int>(degree, static_cast<int>(item_hi - item_lo));

    std::unordered_set<std::int64_t> chosen;
    int guard = 0;
    while (static_cast<int>(chosen.size()) < degree && guard < degree * 200) {
      ++guard;
      std::int64_t item;
      if (spec.cross_block_noise > 0.0 &&
          mixsgcl::uniform_real(rng) < spec.cross_block_noise) {
        item = mixsgcl::uniform_int(rng, 0, spec.n_items - 1);
      } else {
        // Gaussian preference around the user's latent position.
        const double q = pos + spec.locality * std::normal_distribution<double>(0.0, 1.0)(rng);
        const double clamped = std::min(std::max(q, 0.0), 1.0 - 1e-12);
        item = item_lo + static_cast<std::int64_t>(clamped * static_cast<double>(item_hi - item_lo));
      }
      chosen.insert(item);
    }
    // Deterministic record order: sort the chosen set.
    std::vector<std::int64_t> items(chosen.begin(), chosen.end());
    std::sort(items.begin(), items.end());
    for (std::int64_t i : items) {
      raw.records.push_back({"u" + std::to_string(u), "i" + std::to_string(i), std::nullopt});
    }
  }
  return raw;
}

inline mixsgcl::InteractionDataset make_blocked_dataset(const BlockedSpec& spec,
                                                        std::uint64_t split_seed = 11) {
  mixsgcl::SplitConfig split;
  split.seed = split_seed;
  return mixsgcl::build_dataset(make_blocked_raw(spec), split);
}

// The two-cluster dataset used by the end-to-end checks: all edges stay
// inside their block.
inline mixsgcl::InteractionDataset make_two_block_dataset(std::uint64_t seed = 1) {
  BlockedSpec spec;
  spec.n_users = 200;
  spec.n_items = 200;
  spec.n_blocks = 2;
  spec.min_degree = 10;
  spec.extra_degree_mean = 4.0;
  spec.locality = 0.10;
  spec.cross_block_noise = 0.0;
  spec.seed = seed;
  return make_blocked_dataset(spec);
}

// Interaction file at the scale of the smallest reference dataset:
// ~22k users, ~12k items, ~200k interactions, long-tailed degrees.
inline mixsgcl::RawInteractions make_reference_scale_raw(std::uint64_t seed = 5) {
  BlockedSpec spec;
  spec.n_users = 22364;
  spec.n_items = 12102;
  spec.n_blocks = 40;
  spec.min_degree = 6;
  spec.extra_degree_mean = 3.0;
  spec.locality = 0.07;
  spec.cross_block_noise = 0.08;
  spec.seed = seed;
  return make_blocked_raw(spec);
}

// Uniform random bipartite graph; no structure, used by oracle tests.
inline mixsgcl::InteractionDataset make_random_dataset(std::int64_t n_users, std::int64_t n_items,
                                                       std::int64_t n_edges, std::uint64_t seed,
                                                       mixsgcl::SplitConfig split = {}) {
  mixsgcl::Rng rng = mixsgcl::make_rng(seed);
  mixsgcl::RawInteractions raw;
  std::unordered_set<std::int64_t> seen;
  while (static_cast<std::int64_t>(raw.records.size()) < n_edges) {
    const std::int64_t u = mixsgcl::uniform_int(rng, 0, n_users - 1);
    const std::int64_t i = mixsgcl::uniform_int(rng, 0, n_items - 1);
    if (seen.insert(u * n_items + i).second) {
      raw.records.push_back({"u" + std::to_string(u), "i" + std::to_string(i), std::nullopt});
    }
  }
  return mixsgcl::build_dataset(raw, split);
}

}  // namespace synthetic
