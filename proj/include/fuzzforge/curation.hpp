#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "fuzzforge/dataset_io.hpp"
#include "fuzzforge/error.hpp"
#include "fuzzforge/raster.hpp"
#include "fuzzforge/rng.hpp"

namespace fuzzforge {

struct embedding {
  std::vector<double> vector;
  std::string image_name;
  bool zero_variance = false;
};

inline constexpr int embed_side = 32;

/// Default stand-in embedding: grayscale, bilinear resize to 32x32, mean removed,
/// L2-normalized. Constant images map to the zero vector and are flagged.
inline embedding embed(const raster& image, std::string image_name = {}) {
  if (image.empty()) throw error(errc::invalid_argument, "cannot embed an empty image");
  const int W = image.width(), H = image.height();
  std::vector<double> gray(static_cast<std::size_t>(W) * H);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const rgba p = image.at(x, y);
      gray[static_cast<std::size_t>(y) * W + x] = 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
    }
  auto g = [&](int x, int y) {
    return gray[static_cast<std::size_t>(std::clamp(y, 0, H - 1)) * W + std::clamp(x, 0, W - 1)];
  };

  embedding e;
  e.image_name = std::move(image_name);
  e.vector.resize(embed_side * embed_side);
  for (int j = 0; j < embed_side; ++j) {
    const double sy = (j + 0.5) * H / embed_side - 0.5;
    const int y0 = static_cast<int>(std::floor(sy));
    const double fy = sy - y0;
    for (int i = 0; i < embed_side; ++i) {
      const double sx = (i + 0.5) * W / embed_side - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const double fx = sx - x0;
      e.vector[static_cast<std::size_t>(j) * embed_side + i] =
          (g(x0, y0) * (1 - fx) + g(x0 + 1, y0) * fx) * (1 - fy) +
          (g(x0, y0 + 1) * (1 - fx) + g(x0 + 1, y0 + 1) * fx) * fy;
    }
  }
  const double mean = std::accumulate(e.vector.begin(), e.vector.end(), 0.0) / e.vector.size();
  double sq = 0;
  for (double& v : e.vector) {
    v -= mean;
    sq += v * v;
  }
  const double n = std::sqrt(sq);
  if (n < 1e-9) {
    std::fill(e.vector.begin(), e.vector.end(), 0.0);
    e.zero_variance = true;
  } else {
    for (double& v : e.vector) v /= n;
  }
  return e;
}

inline double distance(const embedding& a, const embedding& b) {
  if (a.vector.size() != b.vector.size())
    throw error(errc::dimension_mismatch, "embeddings differ in dimension");
  double s = 0;
  for (std::size_t i = 0; i < a.vector.size(); ++i) {
    const double d = a.vector[i] - b.vector[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Greedy scan in input order: an item is kept iff it is farther than tau from
/// every item kept before it.
inline std::vector<std::size_t> dedup(const std::vector<embedding>& items, double tau) {
  if (!(tau >= 0)) throw error(errc::invalid_argument, "tau must be >= 0");
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < items.size(); ++i) {
    bool keep = true;
    for (std::size_t k : kept)
      if (distance(items[i], items[k]) <= tau) {
        keep = false;
        break;
      }
    if (keep) kept.push_back(i);
  }
  return kept;
}

enum class diversity_rule { farthest_point, mean_distance };

/// Selection order of k items. Farthest-point sampling starts from the item with
/// the largest mean distance to all others, then repeatedly adds the item whose
/// nearest selected neighbour is farthest. Ties go to the lowest index.
inline std::vector<std::size_t> select_diverse(const std::vector<embedding>& items, std::size_t k,
                                               diversity_rule rule = diversity_rule::farthest_point) {
  const std::size_t n = items.size();
  if (k > n) throw error(errc::k_too_large, "k = " + std::to_string(k) + " exceeds population " + std::to_string(n));
  if (k == 0) return {};
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist[i * n + j] = dist[j * n + i] = distance(items[i], items[j]);

  std::vector<double> mean(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) mean[i] += dist[i * n + j];
    if (n > 1) mean[i] /= static_cast<double>(n - 1);
  }

  std::vector<std::size_t> order;
  if (rule == diversity_rule::mean_distance) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
    order.resize(k);
    return order;
  }

  std::size_t first = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (mean[i] > mean[first]) first = i;
  order.push_back(first);
  std::vector<bool> taken(n, false);
  taken[first] = true;
  std::vector<double> min_dist(n);
  for (std::size_t i = 0; i < n; ++i) min_dist[i] = dist[i * n + first];
  while (order.size() < k) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!taken[i] && (best == n || min_dist[i] > min_dist[best])) best = i;
    order.push_back(best);
    taken[best] = true;
    for (std::size_t i = 0; i < n; ++i) min_dist[i] = std::min(min_dist[i], dist[i * n + best]);
  }
  return order;
}

struct split_spec {
  double train = 0.714;
  double val = 0.143;
  double test = 0.143;
  std::uint64_t seed = 0;

  void validate() const {
    if (train < 0 || val < 0 || test < 0) throw error(errc::invalid_argument, "split ratios must be >= 0");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw error(errc::invalid_argument, "split ratios must sum to 1");
  }
};

/// Partition sizes: floor(ratio * n) each, with the remainder added to train.
inline std::tuple<std::size_t, std::size_t, std::size_t> split_sizes(std::size_t n, const split_spec& spec) {
  spec.validate();
  // The small epsilon keeps exact products such as 0.1 * 10 from flooring down.
  auto part = [n](double r) { return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9)); };
  std::size_t train = part(spec.train), val = part(spec.val), test = part(spec.test);
  while (train + val + test > n) {
    // Only reachable through the epsilon; take the excess back from train first.
    if (train > 0) --train; else if (val > 0) --val; else --test;
  }
  train += n - (train + val + test);
  return {train, val, test};
}

/// Fisher-Yates permutation of 0..n-1 driven by `rng`.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, rng_stream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  return idx;
}

struct split_result {
  dataset_manifest train, val, test;
};

inline split_result split(const dataset_manifest& manifest, const split_spec& spec) {
  const auto [n_train, n_val, n_test] = split_sizes(manifest.records.size(), spec);
  rng_stream rng(spec.seed);
  const auto order = shuffled_indices(manifest.records.size(), rng);
  split_result out;
  auto init = [&](dataset_manifest& m, split_kind kind) {
    m.origin = manifest.origin;
    m.prov = manifest.prov;
    m.split = kind;
  };
  init(out.train, split_kind::train);
  init(out.val, split_kind::val);
  init(out.test, split_kind::test);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& r = manifest.records[order[i]];
    if (i < n_train)
      out.train.records.push_back(r);
    else if (i < n_train + n_val)
      out.val.records.push_back(r);
    else
      out.test.records.push_back(r);
  }
  (void)n_test;
  return out;
}

// Embedding cache: JSON array of {"image": name, "vector": [...]}, order preserved.

inline std::string embeddings_json(const std::vector<embedding>& items) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : items) arr.push_back({{"image", e.image_name}, {"vector", e.vector}});
  return arr.dump() + "\n";
}

inline void write_embeddings(const std::vector<embedding>& items, const std::filesystem::path& path) {
  detail::write_text(path, embeddings_json(items));
}

inline std::vector<embedding> read_embeddings(const std::filesystem::path& path) {
  const auto j = detail::parse_json(detail::read_text(path), path.string());
  std::vector<embedding> out;
  try {
    for (const auto& item : j) {
      embedding e;
      e.image_name = item.at("image").get<std::string>();
      e.vector = item.at("vector").get<std::vector<double>>();
      if (!out.empty() && out.front().vector.size() != e.vector.size())
        throw error(errc::dimension_mismatch, path.string() + ": embeddings differ in dimension");
      e.zero_variance = std::all_of(e.vector.begin(), e.vector.end(), [](double v) { return v == 0.0; });
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::parse_error, path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace fuzzforge
