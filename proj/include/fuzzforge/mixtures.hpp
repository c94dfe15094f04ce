#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fuzzforge/curation.hpp"
#include "fuzzforge/dataset_io.hpp"
#include "fuzzforge/error.hpp"
#include "fuzzforge/rng.hpp"

namespace fuzzforge {

class mixture_spec {
 public:
  mixture_spec(int n_real, int n_synth, std::uint64_t seed) : n_real_(n_real), n_synth_(n_synth), seed_(seed) {
    if (n_real < 0 || n_synth < 0) throw error(errc::invalid_argument, "mixture counts must be >= 0");
  }

  /// Parses the "R{m}_S{n}" naming used for training mixtures.
  static mixture_spec parse(const std::string& name, std::uint64_t seed) {
    int m = -1, n = -1;
    char tail = 0;
    if (std::sscanf(name.c_str(), "R%d_S%d%c", &m, &n, &tail) != 2)
      throw error(errc::invalid_argument, "mixture name must look like R500_S500, got '" + name + "'");
    return mixture_spec(m, n, seed);
  }

  int n_real() const noexcept { return n_real_; }
  int n_synth() const noexcept { return n_synth_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::string name() const { return "R" + std::to_string(n_real_) + "_S" + std::to_string(n_synth_); }

 private:
  int n_real_, n_synth_;
  std::uint64_t seed_;
};

namespace detail {

inline std::vector<annotation_record> sample_without_replacement(const std::vector<annotation_record>& pool,
                                                                 std::size_t n, rng_stream& rng) {
  const auto order = shuffled_indices(pool.size(), rng);
  std::vector<annotation_record> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[order[i]]);
  return out;
}

}  // namespace detail

/// n_real records from the real pool plus n_synth from the synthetic pool,
/// drawn without replacement and shuffled together, all driven by spec.seed().
inline dataset_manifest build_mixture(const dataset_manifest& real_pool, const dataset_manifest& synth_pool,
                                      const mixture_spec& spec) {
  const auto n_real = static_cast<std::size_t>(spec.n_real());
  const auto n_synth = static_cast<std::size_t>(spec.n_synth());
  if (real_pool.records.size() < n_real)
    throw error(errc::pool_too_small, spec.name() + ": real pool has " + std::to_string(real_pool.records.size()));
  if (synth_pool.records.size() < n_synth)
    throw error(errc::pool_too_small,
                spec.name() + ": synthetic pool has " + std::to_string(synth_pool.records.size()));
  std::set<std::string> real_names;
  for (const auto& r : real_pool.records) real_names.insert(r.image_name);
  for (const auto& r : synth_pool.records)
    if (real_names.count(r.image_name))
      throw error(errc::invalid_argument, "pools share image name " + r.image_name);

  rng_stream real_rng(spec.seed(), 1), synth_rng(spec.seed(), 2), mix_rng(spec.seed(), 3);
  auto real = detail::sample_without_replacement(real_pool.records, n_real, real_rng);
  auto synth = detail::sample_without_replacement(synth_pool.records, n_synth, synth_rng);
  for (auto& r : real) r.origin = data_origin::real;
  for (auto& r : synth) r.origin = data_origin::synthetic;

  std::vector<annotation_record> all = std::move(real);
  all.insert(all.end(), std::make_move_iterator(synth.begin()), std::make_move_iterator(synth.end()));
  dataset_manifest out;
  for (std::size_t i : shuffled_indices(all.size(), mix_rng)) out.records.push_back(all[i]);
  out.origin = n_real && n_synth ? data_origin::mixed : (n_real ? data_origin::real : data_origin::synthetic);
  out.split = split_kind::train;
  out.prov.master_seed = spec.seed();
  out.prov.method = synth_pool.prov.method;
  out.prov.config_digest = synth_pool.prov.config_digest;
  out.prov.mixture = mixture_info{spec.name(), spec.n_real(), spec.n_synth(), spec.seed()};
  return out;
}

/// Training-set counts of the three strategies: real only, real+synthetic at a
/// constant 1000, synthetic only.
inline std::vector<std::pair<int, int>> strategy_counts() {
  return {{250, 0},   {500, 0},   {750, 0},   {1000, 0},  // strategy 1
          {750, 250}, {500, 500}, {250, 750},             // strategy 2
          {0, 250},   {0, 500},   {0, 750},   {0, 1000}};  // strategy 3
}

inline int strategy_of(const mixture_spec& spec) {
  if (spec.n_synth() == 0) return 1;
  if (spec.n_real() == 0) return 3;
  return 2;
}

struct suite_entry {
  mixture_spec spec;
  dataset_manifest manifest;
};

inline std::vector<suite_entry> strategy_suite(const dataset_manifest& real_pool, const dataset_manifest& synth_pool,
                                               const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw error(errc::invalid_argument, "strategy suite needs at least one seed");
  std::vector<suite_entry> out;
  for (std::uint64_t seed : seeds)
    for (auto [m, n] : strategy_counts()) {
      mixture_spec spec(m, n, seed);
      out.push_back({spec, build_mixture(real_pool, synth_pool, spec)});
    }
  return out;
}

struct budget_params {
  double c_real = 0, c_synth = 0, c_total = 0;
  double t_real = 0, t_synth = 0, t_total = 0;
};

/// For n_real = 0, step, 2*step, ... the largest n_synth (capped at n_synth_max)
/// with n_real*c_real + n_synth*c_synth <= c_total and the same for time.
inline std::vector<std::pair<long long, long long>> budget_frontier(const budget_params& p, long long step,
                                                                    long long n_synth_max) {
  if (step < 1) throw error(errc::invalid_argument, "step must be >= 1");
  if (n_synth_max < 0) throw error(errc::invalid_argument, "n_synth_max must be >= 0");
  for (double v : {p.c_real, p.c_synth, p.c_total, p.t_real, p.t_synth, p.t_total})
    if (!(v >= 0) || !std::isfinite(v)) throw error(errc::invalid_argument, "budget parameters must be finite and >= 0");

  // Largest n with n*unit <= remaining, or the cap when the unit is free.
  auto max_units = [](double remaining, double unit, long long cap) {
    if (unit == 0) return cap;
    long long n = static_cast<long long>(std::floor(remaining / unit));
    while (n > 0 && n * unit > remaining) --n;
    while ((n + 1) * unit <= remaining) ++n;
    return std::min(n, cap);
  };

  std::vector<std::pair<long long, long long>> out;
  const long long real_cap = std::min(max_units(p.c_total, p.c_real, n_synth_max),
                                      max_units(p.t_total, p.t_real, n_synth_max));
  for (long long n_real = 0; n_real <= real_cap; n_real += step) {
    const double c_left = p.c_total - n_real * p.c_real;
    const double t_left = p.t_total - n_real * p.t_real;
    if (c_left < 0 || t_left < 0) break;
    const long long n_synth = std::min(max_units(c_left, p.c_synth, n_synth_max), max_units(t_left, p.t_synth, n_synth_max));
    out.emplace_back(n_real, n_synth);
  }
  if (out.empty()) throw error(errc::infeasible_budget, "no (n_real, n_synth) pair fits the budget");
  return out;
}

}  // namespace fuzzforge
