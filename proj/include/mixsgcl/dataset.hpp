#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsgcl/rng.hpp"

namespace mixsgcl {

struct RawInteraction {
  std::string user;
  std::string item;
  std::optional<std::int64_t> timestamp;  // parsed when present, never used downstream
};

struct RawInteractions {
  std::vector<RawInteraction> records;  // deduplicated, first-seen order
};

struct LoadFormat {
  char delimiter = '\t';
};

struct SplitConfig {
  std::array<double, 3> ratios{0.8, 0.1, 0.1};  // train / valid / test
  std::uint64_t seed = 2024;
  double train_keep_ratio = 1.0;  // in (0, 1]; < 1 drops a seeded subset of train edges

  void validate() const {
    for (double r : ratios) {
      if (!(r > 0.0)) throw std::invalid_argument("split ratios must be strictly positive");
    }
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("split ratios must sum to 1");
    }
    if (!(train_keep_ratio > 0.0) || train_keep_ratio > 1.0) {
      throw std::invalid_argument("train_keep_ratio must be in (0, 1]");
    }
  }
};

struct Edge {
  std::int32_t user = 0;
  std::int32_t item = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

class InteractionDataset {
 public:
  std::int64_t n_users = 0;
  std::int64_t n_items = 0;
  std::vector<std::string> user_tokens;  // index -> original token
  std::vector<std::string> item_tokens;
  std::unordered_map<std::string, std::int32_t> user_map;
  std::unordered_map<std::string, std::int32_t> item_map;
  std::vector<Edge> train_edges;
  std::vector<Edge> valid_edges;
  std::vector<Edge> test_edges;
  std::vector<std::vector<std::int32_t>> train_items_by_user;  // sorted ascending

  std::int64_t n_nodes() const { return n_users + n_items; }
  std::int64_t n_interactions() const {
    return static_cast<std::int64_t>(train_edges.size() + valid_edges.size() + test_edges.size());
  }

  bool user_has_train_item(std::int32_t user, std::int32_t item) const {
    const auto& items = train_items_by_user[static_cast<std::size_t>(user)];
    return std::binary_search(items.begin(), items.end(), item);
  }

  // Percentage of absent user-item cells, e.g. 99.9267 for Beauty.
  double sparsity_percent() const {
    const double cells = static_cast<double>(n_users) * static_cast<double>(n_items);
    if (cells == 0.0) return 0.0;
    return (1.0 - static_cast<double>(n_interactions()) / cells) * 100.0;
  }

  nlohmann::ordered_json stats_json() const {
    nlohmann::ordered_json j;
    j["n_users"] = n_users;
    j["n_items"] = n_items;
    j["n_interactions"] = n_interactions();
    j["sparsity_percent"] = sparsity_percent();
    j["train_edges"] = train_edges.size();
    j["valid_edges"] = valid_edges.size();
    j["test_edges"] = test_edges.size();
    return j;
  }

  void save_cache(const std::filesystem::path& path) const;
  static InteractionDataset load_cache(const std::filesystem::path& path);

  void rebuild_train_adjacency() {
    train_items_by_user.assign(static_cast<std::size_t>(n_users), {});
    for (const Edge& e : train_edges) {
      train_items_by_user[static_cast<std::size_t>(e.user)].push_back(e.item);
    }
    for (auto& items : train_items_by_user) std::sort(items.begin(), items.end());
  }
};

namespace detail {

inline std::string interaction_key(const std::string& user, const std::string& item) {
  std::string key;
  key.reserve(user.size() + item.size() + 1);
  key += user;
  key += '\x1f';
  key += item;
  return key;
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  write_u32(os, static_cast<std::uint32_t>(v));
  write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("dataset cache: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& is) {
  const std::uint64_t lo = read_u32(is);
  const std::uint64_t hi = read_u32(is);
  return lo | (hi << 32);
}

inline void write_token(std::ostream& os, const std::string& t) {
  write_u32(os, static_cast<std::uint32_t>(t.size()));
  os.write(t.data(), static_cast<std::streamsize>(t.size()));
}

inline std::string read_token(std::istream& is) {
  const std::uint32_t len = read_u32(is);
  std::string t(len, '\0');
  is.read(t.data(), len);
  if (!is) throw std::runtime_error("dataset cache: truncated token table");
  return t;
}

constexpr std::uint32_t kCacheMagic = 0x4347534du;  // "MSGC"
constexpr std::uint32_t kCacheVersion = 1;

}  // namespace detail

inline RawInteractions load_interactions(const std::filesystem::path& path,
                                         const LoadFormat& format = {}) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open interaction file: " + path.string());
  }
  RawInteractions out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, format.delimiter)) fields.push_back(field);
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
      throw std::runtime_error("malformed interaction line " + std::to_string(line_no) + " in " +
                               path.string());
    }
    std::optional<std::int64_t> ts;
    if (fields.size() >= 3 && !fields[2].empty()) {
      try {
        ts = std::stoll(fields[2]);
      } catch (const std::exception&) {
        ts = std::nullopt;
      }
    }
    if (seen.insert(detail::interaction_key(fields[0], fields[1])).second) {
      out.records.push_back({fields[0], fields[1], ts});
    }
  }
  if (out.records.empty()) {
    throw std::runtime_error("interaction file has no records: " + path.string());
  }
  return out;
}

// Iteratively removes users and items of degree < k until a fixed point.
// The result may be empty; callers that need a non-empty graph check for it.
inline RawInteractions apply_k_core(const RawInteractions& raw, int k) {
  if (k < 1) throw std::invalid_argument("k-core requires k >= 1");
  std::vector<const RawInteraction*> alive;
  alive.reserve(raw.records.size());
  for (const auto& r : raw.records) alive.push_back(&r);

  bool changed = true;
  while (changed && !alive.empty()) {
    std::unordered_map<std::string, int> user_deg;
    std::unordered_map<std::string, int> item_deg;
    for (const auto* r : alive) {
      ++user_deg[r->user];
      ++item_deg[r->item];
    }
    std::vector<const RawInteraction*> next;
    next.reserve(alive.size());
    for (const auto* r : alive) {
      if (user_deg[r->user] >= k && item_deg[r->item] >= k) next.push_back(r);
    }
    changed = next.size() != alive.size();
    alive = std::move(next);
  }

  RawInteractions out;
  out.records.reserve(alive.size());
  for (const auto* r : alive) out.records.push_back(*r);
  return out;
}

inline InteractionDataset build_dataset(const RawInteractions& raw, const SplitConfig& cfg) {
  cfg.validate();
  if (raw.records.empty()) {
    throw std::invalid_argument("build_dataset: no interactions (too sparse for chosen k-core?)");
  }

  InteractionDataset ds;
  std::vector<Edge> edges;
  edges.reserve(raw.records.size());
  for (const auto& r : raw.records) {
    auto [uit, uinserted] = ds.user_map.try_emplace(r.user, static_cast<std::int32_t>(ds.user_tokens.size()));
    if (uinserted) ds.user_tokens.push_back(r.user);
    auto [iit, iinserted] = ds.item_map.try_emplace(r.item, static_cast<std::int32_t>(ds.item_tokens.size()));
    if (iinserted) ds.item_tokens.push_back(r.item);
    edges.push_back({uit->second, iit->second});
  }
  ds.n_users = static_cast<std::int64_t>(ds.user_tokens.size());
  ds.n_items = static_cast<std::int64_t>(ds.item_tokens.size());

  Rng rng = make_rng(cfg.seed);
  std::shuffle(edges.begin(), edges.end(), rng);

  const auto n = static_cast<std::int64_t>(edges.size());
  const auto n_train = static_cast<std::int64_t>(std::llround(cfg.ratios[0] * static_cast<double>(n)));
  const auto n_train_valid =
      static_cast<std::int64_t>(std::llround((cfg.ratios[0] + cfg.ratios[1]) * static_cast<double>(n)));
  const std::int64_t n_valid = n_train_valid - n_train;
  const std::int64_t n_test = n - n_train_valid;
  if (n_train <= 0 || n_valid <= 0 || n_test <= 0) {
    throw std::runtime_error("build_dataset: a split received zero edges (dataset too small)");
  }

  std::int64_t n_train_kept = n_train;
  if (cfg.train_keep_ratio < 1.0) {
    // The edge order is already a seeded shuffle, so the kept prefix is a
    // seeded random subset of the train split.
    n_train_kept =
        static_cast<std::int64_t>(std::llround(cfg.train_keep_ratio * static_cast<double>(n_train)));
    if (n_train_kept <= 0) {
      throw std::runtime_error("build_dataset: train_keep_ratio removed every train edge");
    }
  }

  ds.train_edges.assign(edges.begin(), edges.begin() + n_train_kept);
  ds.valid_edges.assign(edges.begin() + n_train, edges.begin() + n_train_valid);
  ds.test_edges.assign(edges.begin() + n_train_valid, edges.end());
  ds.rebuild_train_adjacency();
  return ds;
}

// Keeps a seeded random fraction of the train edges (first-seen order
// preserved); validation and test splits are untouched. Used for the
// sparse-supervision experiments on an already-prepared cache.
inline void apply_train_keep_ratio(InteractionDataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0) || ratio > 1.0) {
    throw std::invalid_argument("train_keep_ratio must be in (0, 1]");
  }
  if (ratio == 1.0) return;
  const auto n = static_cast<std::int64_t>(ds.train_edges.size());
  const auto keep = static_cast<std::int64_t>(std::llround(ratio * static_cast<double>(n)));
  if (keep <= 0) throw std::runtime_error("train_keep_ratio removed every train edge");
  std::vector<std::uint32_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  Rng rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> kept(static_cast<std::size_t>(n), false);
  for (std::int64_t i = 0; i < keep; ++i) kept[order[static_cast<std::size_t>(i)]] = true;
  std::vector<Edge> next;
  next.reserve(static_cast<std::size_t>(keep));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i]) next.push_back(ds.train_edges[i]);
  }
  ds.train_edges = std::move(next);
  ds.rebuild_train_adjacency();
}

inline void InteractionDataset::save_cache(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write dataset cache: " + path.string());
  detail::write_u32(os, detail::kCacheMagic);
  detail::write_u32(os, detail::kCacheVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(n_users));
  detail::write_u32(os, static_cast<std::uint32_t>(n_items));
  detail::write_u64(os, train_edges.size());
  detail::write_u64(os, valid_edges.size());
  detail::write_u64(os, test_edges.size());
  auto write_edges = [&os](const std::vector<Edge>& es) {
    for (const Edge& e : es) {
      detail::write_u32(os, static_cast<std::uint32_t>(e.user));
      detail::write_u32(os, static_cast<std::uint32_t>(e.item));
    }
  };
  write_edges(train_edges);
  write_edges(valid_edges);
  write_edges(test_edges);
  // Token table trails the documented layout so evaluate/export can map
  // rows back to raw identifiers.
  for (const auto& t : user_tokens) detail::write_token(os, t);
  for (const auto& t : item_tokens) detail::write_token(os, t);
  if (!os) throw std::runtime_error("failed writing dataset cache: " + path.string());
}

inline InteractionDataset InteractionDataset::load_cache(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open dataset cache: " + path.string());
  if (detail::read_u32(is) != detail::kCacheMagic) {
    throw std::runtime_error("not a dataset cache file: " + path.string());
  }
  if (detail::read_u32(is) != detail::kCacheVersion) {
    throw std::runtime_error("unsupported dataset cache version: " + path.string());
  }
  InteractionDataset ds;
  ds.n_users = detail::read_u32(is);
  ds.n_items = detail::read_u32(is);
  const std::uint64_t n_train = detail::read_u64(is);
  const std::uint64_t n_valid = detail::read_u64(is);
  const std::uint64_t n_test = detail::read_u64(is);
  auto read_edges = [&is, &ds](std::uint64_t count, std::vector<Edge>& out) {
    out.resize(count);
    for (auto& e : out) {
      e.user = static_cast<std::int32_t>(detail::read_u32(is));
      e.item = static_cast<std::int32_t>(detail::read_u32(is));
      if (e.user >= ds.n_users || e.item >= ds.n_items) {
        throw std::runtime_error("dataset cache: edge index out of range");
      }
    }
  };
  read_edges(n_train, ds.train_edges);
  read_edges(n_valid, ds.valid_edges);
  read_edges(n_test, ds.test_edges);
  ds.user_tokens.reserve(static_cast<std::size_t>(ds.n_users));
  for (std::int64_t i = 0; i < ds.n_users; ++i) {
    ds.user_tokens.push_back(detail::read_token(is));
    ds.user_map.emplace(ds.user_tokens.back(), static_cast<std::int32_t>(i));
  }
  for (std::int64_t i = 0; i < ds.n_items; ++i) {
    ds.item_tokens.push_back(detail::read_token(is));
    ds.item_map.emplace(ds.item_tokens.back(), static_cast<std::int32_t>(i));
  }
  ds.rebuild_train_adjacency();
  return ds;
}

}  // namespace mixsgcl
