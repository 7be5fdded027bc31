#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hshseg/codes.hpp"
#include "hshseg/error.hpp"
#include "hshseg/random.hpp"

namespace hshseg {

using ItemId = std::uint64_t;
using HashKey = std::uint64_t;

template <typename Scalar>
using CodeStore = std::map<ItemId, ImageCode<Scalar>>;

template <typename Scalar>
struct DimBounds {
  Scalar min = 0;
  Scalar max = 0;
  [[nodiscard]] Scalar width() const { return max - min; }
  friend bool operator==(const DimBounds&, const DimBounds&) = default;
};

/// Axis-parallel stump: bit is 1 iff x[dim_index] <= threshold.
/// dim_index is zero-based.
template <typename Scalar>
struct StumpHash {
  std::size_t dim_index = 0;
  Scalar threshold = 0;

  template <typename Derived>
  [[nodiscard]] bool operator()(const Eigen::MatrixBase<Derived>& x) const {
    return x(static_cast<Eigen::Index>(dim_index)) <= threshold;
  }
  friend bool operator==(const StumpHash&, const StumpHash&) = default;
};

/// k stumps forming a k-bit key over codes of dimension `dim`.
template <typename Scalar>
struct CompositeHash {
  std::size_t dim = 0;
  std::vector<StumpHash<Scalar>> stumps;
  friend bool operator==(const CompositeHash&, const CompositeHash&) = default;
};

/// Radius query: accept candidates with distance <= (1 + epsilon) * radius.
struct QueryParams {
  double radius = 0.0;
  double epsilon = 0.0;
};

template <typename Scalar>
struct Neighbor {
  ItemId id = 0;
  Scalar distance = 0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Monte Carlo estimate of the (p1, p2, r, R) sensitivity of the stump family.
struct FamilySensitivity {
  double p1 = 0.0;
  double p2 = 0.0;
  double r = 0.0;
  double R = 0.0;
  std::size_t near_pairs = 0;
  std::size_t far_pairs = 0;
};

struct BucketStats {
  std::vector<std::size_t> buckets_per_table;
  /// bucket size -> number of buckets with that size, over all tables.
  std::map<std::size_t, std::size_t> occupancy;
  std::size_t largest_bucket = 0;
  double mean_bucket = 0.0;
};

/// Packs the stump bits of `g` into a key; stump i lands on bit k - 1 - i so
/// the key printed as a k-digit binary string reads h1 h2 ... hk.
template <typename Scalar, typename Derived>
HashKey key(const CompositeHash<Scalar>& g,
            const Eigen::MatrixBase<Derived>& x) {
  if (static_cast<std::size_t>(x.size()) != g.dim) {
    throw DimensionMismatch("code of dimension " + std::to_string(x.size()) +
                            " hashed by a function over dimension " +
                            std::to_string(g.dim));
  }
  HashKey out = 0;
  for (const auto& h : g.stumps) out = (out << 1) | (h(x) ? 1u : 0u);
  return out;
}

/// Per-dimension [min, max] over a non-empty store of equal-length codes.
/// Throws EmptyDataset or MixedDimensions.
template <typename Scalar>
std::vector<DimBounds<Scalar>> compute_bounds(const CodeStore<Scalar>& codes) {
  if (codes.empty()) throw EmptyDataset("cannot fit an index on no codes");
  const Eigen::Index dim = codes.begin()->second.size();
  if (dim == 0) throw MixedDimensions("codes must have positive dimension");
  ImageCode<Scalar> lo = codes.begin()->second;
  ImageCode<Scalar> hi = lo;
  for (const auto& [id, c] : codes) {
    if (c.size() != dim) {
      throw MixedDimensions("code " + std::to_string(id) + " has dimension " +
                            std::to_string(c.size()) + ", expected " +
                            std::to_string(dim));
    }
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  std::vector<DimBounds<Scalar>> bounds(static_cast<std::size_t>(dim));
  for (Eigen::Index d = 0; d < dim; ++d) {
    bounds[static_cast<std::size_t>(d)] = {lo(d), hi(d)};
  }
  return bounds;
}

/// Draws one stump: a uniform dimension, then a uniform threshold within
/// that dimension's bounds.
template <typename Scalar>
StumpHash<Scalar> draw_stump(Rng& rng,
                             std::span<const DimBounds<Scalar>> bounds) {
  const std::size_t d = rng.uniform_index(bounds.size());
  const auto& b = bounds[d];
  auto v = static_cast<Scalar>(rng.uniform(static_cast<double>(b.min),
                                           static_cast<double>(b.max)));
  v = std::clamp(v, b.min, b.max);
  return {d, v};
}

template <typename Scalar>
CompositeHash<Scalar> draw_composite(Rng& rng,
                                     std::span<const DimBounds<Scalar>> bounds,
                                     int bits) {
  CompositeHash<Scalar> g{bounds.size(), {}};
  g.stumps.reserve(static_cast<std::size_t>(bits));
  for (int i = 0; i < bits; ++i) g.stumps.push_back(draw_stump(rng, bounds));
  return g;
}

/// Exact nearest neighbour by linear scan, ties by ascending id.
/// Throws EmptyDataset or DimensionMismatch.
template <typename Scalar, typename Derived>
Neighbor<Scalar> brute_force_nn(const CodeStore<Scalar>& codes,
                                const Eigen::MatrixBase<Derived>& q) {
  if (codes.empty()) throw EmptyDataset("nearest neighbour of an empty store");
  Neighbor<Scalar> best{0, std::numeric_limits<Scalar>::infinity()};
  bool found = false;
  for (const auto& [id, c] : codes) {
    const Scalar d = l1_distance(c, q);
    if (!found || d < best.distance) best = {id, d};
    found = true;
  }
  return best;
}

/// Probability that a single stump drawn from `bounds` gives x and y the
/// same bit: the mean over dimensions of 1 - |x_d - y_d| / width_d, with
/// values clamped to the bounds and zero-width dimensions contributing 1.
template <typename Scalar, typename DerivedX, typename DerivedY>
double stump_collision_probability(const Eigen::MatrixBase<DerivedX>& x,
                                   const Eigen::MatrixBase<DerivedY>& y,
                                   std::span<const DimBounds<Scalar>> bounds) {
  if (x.size() != y.size() ||
      static_cast<std::size_t>(x.size()) != bounds.size()) {
    throw DimensionMismatch("collision probability needs equal dimensions");
  }
  double total = 0.0;
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    const auto lo = static_cast<double>(bounds[d].min);
    const auto hi = static_cast<double>(bounds[d].max);
    const double width = hi - lo;
    if (!(width > 0.0)) {
      total += 1.0;
      continue;
    }
    const auto i = static_cast<Eigen::Index>(d);
    const double a = std::clamp(static_cast<double>(x(i)), lo, hi);
    const double b = std::clamp(static_cast<double>(y(i)), lo, hi);
    total += 1.0 - std::abs(a - b) / width;
  }
  return total / static_cast<double>(bounds.size());
}

/// Fraction of `trials` freshly drawn stumps that agree on x and y.
template <typename Scalar, typename DerivedX, typename DerivedY>
double empirical_collision_rate(const Eigen::MatrixBase<DerivedX>& x,
                                const Eigen::MatrixBase<DerivedY>& y,
                                std::span<const DimBounds<Scalar>> bounds,
                                std::size_t trials, Rng& rng) {
  std::size_t agree = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto h = draw_stump(rng, bounds);
    agree += h(x) == h(y) ? 1 : 0;
  }
  return static_cast<double>(agree) / static_cast<double>(trials);
}

/// Monte Carlo (p1, p2) of the single-stump family: p1 is the collision rate
/// over pairs at L1 distance <= r, p2 over pairs at distance >= R.
template <typename Scalar>
FamilySensitivity estimate_sensitivity(
    std::span<const std::pair<ImageCode<Scalar>, ImageCode<Scalar>>> pairs,
    std::span<const DimBounds<Scalar>> bounds, double r, double R,
    std::size_t trials, Rng& rng) {
  FamilySensitivity out{0.0, 0.0, r, R, 0, 0};
  double near_sum = 0.0, far_sum = 0.0;
  for (const auto& [x, y] : pairs) {
    const double d = static_cast<double>(l1_distance(x, y));
    if (d <= r) {
      near_sum += empirical_collision_rate(x, y, bounds, trials, rng);
      ++out.near_pairs;
    } else if (d >= R) {
      far_sum += empirical_collision_rate(x, y, bounds, trials, rng);
      ++out.far_pairs;
    }
  }
  if (out.near_pairs) out.p1 = near_sum / static_cast<double>(out.near_pairs);
  if (out.far_pairs) out.p2 = far_sum / static_cast<double>(out.far_pairs);
  return out;
}

/// L1 locality-sensitive hash index: l tables, each keyed by k stumps.
///
/// Table j draws its stumps from the sub-stream substream_seed(seed, j), so
/// an index with l tables is a prefix of one with more tables, and a k-bit
/// table's key is a prefix of the same table's key with more bits.
/// Immutable after construction; concurrent queries are safe.
template <typename Scalar>
class LshIndex {
 public:
  using Code = ImageCode<Scalar>;
  using Table = std::unordered_map<HashKey, std::vector<ItemId>>;

  static constexpr int kMaxBits = 64;

  /// Throws EmptyDataset, MixedDimensions or InvalidArgument.
  static LshIndex fit(const CodeStore<Scalar>& codes, int bits, int tables,
                      std::uint64_t seed) {
    check_shape(bits, tables);
    LshIndex index;
    index.bounds_ = compute_bounds(codes);
    index.seed_ = seed;
    for (int j = 0; j < tables; ++j) {
      Rng rng(substream_seed(seed, static_cast<std::uint64_t>(j)));
      index.functions_.push_back(draw_composite<Scalar>(
          rng, std::span<const DimBounds<Scalar>>(index.bounds_), bits));
    }
    index.populate(codes);
    return index;
  }

  /// Index with caller-supplied hash functions, bypassing the random draw.
  static LshIndex with_functions(const CodeStore<Scalar>& codes,
                                 std::vector<CompositeHash<Scalar>> functions,
                                 std::uint64_t seed = 0) {
    if (functions.empty()) throw InvalidArgument("need at least one table");
    const auto bits = static_cast<int>(functions.front().stumps.size());
    check_shape(bits, static_cast<int>(functions.size()));
    LshIndex index;
    index.bounds_ = compute_bounds(codes);
    for (const auto& g : functions) {
      if (static_cast<int>(g.stumps.size()) != bits) {
        throw InvalidArgument("all tables need the same number of bits");
      }
      if (g.dim != index.bounds_.size()) {
        throw DimensionMismatch("hash function dimension differs from codes");
      }
      for (const auto& h : g.stumps) {
        if (h.dim_index >= g.dim) {
          throw InvalidArgument("stump dimension index out of range");
        }
      }
    }
    index.seed_ = seed;
    index.functions_ = std::move(functions);
    index.populate(codes);
    return index;
  }

  [[nodiscard]] int bits() const {
    return static_cast<int>(functions_.front().stumps.size());
  }
  [[nodiscard]] int tables() const { return static_cast<int>(functions_.size()); }
  [[nodiscard]] std::size_t dim() const { return bounds_.size(); }
  [[nodiscard]] std::size_t size() const { return codes_.size(); }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const std::vector<DimBounds<Scalar>>& bounds() const {
    return bounds_;
  }
  [[nodiscard]] const std::vector<CompositeHash<Scalar>>& functions() const {
    return functions_;
  }
  [[nodiscard]] const Table& table(int j) const {
    return tables_.at(static_cast<std::size_t>(j));
  }
  [[nodiscard]] const CodeStore<Scalar>& codes() const { return codes_; }

  /// Union of the query's bucket in every table, ascending.
  template <typename Derived>
  [[nodiscard]] std::vector<ItemId> candidates(
      const Eigen::MatrixBase<Derived>& q) const {
    check_query(q);
    std::vector<ItemId> out;
    for (std::size_t j = 0; j < tables_.size(); ++j) {
      const auto it = tables_[j].find(key(functions_[j], q));
      if (it != tables_[j].end()) {
        out.insert(out.end(), it->second.begin(), it->second.end());
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Candidates within (1 + epsilon) * radius, ascending by (distance, id).
  /// Throws EmptyCandidates when no bucket matches.
  template <typename Derived>
  [[nodiscard]] std::vector<Neighbor<Scalar>> query_radius(
      const Eigen::MatrixBase<Derived>& q, const QueryParams& p) const {
    if (p.radius < 0.0 || p.epsilon < 0.0) {
      throw InvalidArgument("radius and epsilon must be non-negative");
    }
    const auto ids = candidates(q);
    if (ids.empty()) throw EmptyCandidates();
    const double limit = (1.0 + p.epsilon) * p.radius;
    std::vector<Neighbor<Scalar>> out;
    for (ItemId id : ids) {
      const Scalar d = l1_distance(codes_.at(id), q);
      if (static_cast<double>(d) <= limit) out.push_back({id, d});
    }
    sort_neighbors(out);
    return out;
  }

  /// Nearest candidate, ties by ascending id. With no candidates, scans
  /// every code when `fallback` is set and throws EmptyCandidates otherwise.
  template <typename Derived>
  [[nodiscard]] Neighbor<Scalar> query_nearest(
      const Eigen::MatrixBase<Derived>& q, bool fallback) const {
    const auto ids = candidates(q);
    if (ids.empty()) {
      if (!fallback) throw EmptyCandidates();
      return brute_force_nn(codes_, q);
    }
    Neighbor<Scalar> best{ids.front(), l1_distance(codes_.at(ids.front()), q)};
    for (std::size_t i = 1; i < ids.size(); ++i) {
      const Scalar d = l1_distance(codes_.at(ids[i]), q);
      if (d < best.distance) best = {ids[i], d};
    }
    return best;
  }

  /// Every candidate ranked by (distance, id); all codes when there are no
  /// candidates and `fallback` is set.
  template <typename Derived>
  [[nodiscard]] std::vector<Neighbor<Scalar>> ranked(
      const Eigen::MatrixBase<Derived>& q, bool fallback) const {
    auto ids = candidates(q);
    if (ids.empty()) {
      if (!fallback) throw EmptyCandidates();
      for (const auto& [id, c] : codes_) ids.push_back(id);
    }
    std::vector<Neighbor<Scalar>> out;
    out.reserve(ids.size());
    for (ItemId id : ids) out.push_back({id, l1_distance(codes_.at(id), q)});
    sort_neighbors(out);
    return out;
  }

  [[nodiscard]] BucketStats bucket_stats() const {
    BucketStats s;
    std::size_t buckets = 0, items = 0;
    for (const Table& t : tables_) {
      s.buckets_per_table.push_back(t.size());
      for (const auto& [k, ids] : t) {
        ++s.occupancy[ids.size()];
        s.largest_bucket = std::max(s.largest_bucket, ids.size());
        ++buckets;
        items += ids.size();
      }
    }
    s.mean_bucket = buckets ? static_cast<double>(items) / buckets : 0.0;
    return s;
  }

  /// Versioned little-endian archive:
  ///   magic "HSHLSHIX", u32 version, u32 sizeof(Scalar), u64 seed,
  ///   u32 bits, u32 tables, u64 dim, dim x (min, max),
  ///   tables x bits x (u64 dim_index, threshold),
  ///   u64 count, count x (u64 id, dim values),
  ///   per table: u64 buckets, buckets x (u64 key, u64 n, n x u64 id)
  ///   with buckets sorted by key.
  void save(std::ostream& out) const {
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, sizeof(Scalar));
    put<std::uint64_t>(out, seed_);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(bits()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tables()));
    put<std::uint64_t>(out, dim());
    for (const auto& b : bounds_) {
      put_scalar(out, b.min);
      put_scalar(out, b.max);
    }
    for (const auto& g : functions_) {
      for (const auto& h : g.stumps) {
        put<std::uint64_t>(out, h.dim_index);
        put_scalar(out, h.threshold);
      }
    }
    put<std::uint64_t>(out, codes_.size());
    for (const auto& [id, c] : codes_) {
      put<std::uint64_t>(out, id);
      for (Eigen::Index d = 0; d < c.size(); ++d) put_scalar(out, c(d));
    }
    for (const Table& t : tables_) {
      std::vector<HashKey> keys;
      keys.reserve(t.size());
      for (const auto& [k, ids] : t) keys.push_back(k);
      std::sort(keys.begin(), keys.end());
      put<std::uint64_t>(out, keys.size());
      for (HashKey k : keys) {
        const auto& ids = t.at(k);
        put<std::uint64_t>(out, k);
        put<std::uint64_t>(out, ids.size());
        for (ItemId id : ids) put<std::uint64_t>(out, id);
      }
    }
    if (!out) throw Error("failed to write LSH index");
  }

  /// Reads an archive written by save(). Throws ParseError.
  static LshIndex load(std::istream& in) {
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
      throw ParseError("not an LSH index archive");
    }
    if (get<std::uint32_t>(in) != kVersion) {
      throw ParseError("unsupported LSH index archive version");
    }
    if (get<std::uint32_t>(in) != sizeof(Scalar)) {
      throw ParseError("LSH index archive scalar type differs");
    }
    LshIndex index;
    index.seed_ = get<std::uint64_t>(in);
    const auto bits = static_cast<int>(get<std::uint32_t>(in));
    const auto tables = static_cast<int>(get<std::uint32_t>(in));
    check_shape(bits, tables);
    const auto dim = get<std::uint64_t>(in);
    if (dim == 0 || dim > (std::uint64_t{1} << 32)) {
      throw ParseError("implausible code dimension in archive");
    }
    index.bounds_.resize(dim);
    for (auto& b : index.bounds_) {
      b.min = get_scalar(in);
      b.max = get_scalar(in);
    }
    for (int j = 0; j < tables; ++j) {
      CompositeHash<Scalar> g{dim, {}};
      for (int i = 0; i < bits; ++i) {
        const auto d = get<std::uint64_t>(in);
        if (d >= dim) throw ParseError("stump dimension out of range");
        g.stumps.push_back({d, get_scalar(in)});
      }
      index.functions_.push_back(std::move(g));
    }
    const auto count = get<std::uint64_t>(in);
    for (std::uint64_t n = 0; n < count; ++n) {
      const auto id = get<std::uint64_t>(in);
      Code c(static_cast<Eigen::Index>(dim));
      for (std::uint64_t d = 0; d < dim; ++d) {
        c(static_cast<Eigen::Index>(d)) = get_scalar(in);
      }
      index.codes_.emplace(id, std::move(c));
    }
    index.tables_.resize(static_cast<std::size_t>(tables));
    for (auto& t : index.tables_) {
      const auto buckets = get<std::uint64_t>(in);
      for (std::uint64_t b = 0; b < buckets; ++b) {
        const auto k = get<std::uint64_t>(in);
        const auto n = get<std::uint64_t>(in);
        if (n > count) throw ParseError("bucket larger than the code store");
        auto& ids = t[k];
        for (std::uint64_t i = 0; i < n; ++i) {
          const auto id = get<std::uint64_t>(in);
          if (!index.codes_.contains(id)) {
            throw ParseError("bucket references an unknown id");
          }
          ids.push_back(id);
        }
      }
    }
    return index;
  }

 private:
  static constexpr char kMagic[8] = {'H', 'S', 'H', 'L', 'S', 'H', 'I', 'X'};
  static constexpr std::uint32_t kVersion = 1;

  LshIndex() = default;

  static void check_shape(int bits, int tables) {
    if (bits < 1 || bits > kMaxBits) {
      throw InvalidArgument("bits per key must be in [1, 64]");
    }
    if (tables < 1) throw InvalidArgument("table count must be >= 1");
  }

  template <typename Derived>
  void check_query(const Eigen::MatrixBase<Derived>& q) const {
    if (static_cast<std::size_t>(q.size()) != dim()) {
      throw DimensionMismatch("query dimension " + std::to_string(q.size()) +
                              " differs from index dimension " +
                              std::to_string(dim()));
    }
  }

  static void sort_neighbors(std::vector<Neighbor<Scalar>>& v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    });
  }

  void populate(const CodeStore<Scalar>& codes) {
    codes_ = codes;
    tables_.assign(functions_.size(), Table{});
    for (std::size_t j = 0; j < functions_.size(); ++j) {
      for (const auto& [id, c] : codes_) {
        tables_[j][key(functions_[j], c)].push_back(id);
      }
    }
  }

  using Bits = std::conditional_t<sizeof(Scalar) == 8, std::uint64_t,
                                  std::uint32_t>;

  template <typename T>
  static void put(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
  }
  template <typename T>
  static T get(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw ParseError("truncated LSH index archive");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(buf[i]) << (8 * i));
    }
    return v;
  }
  static void put_scalar(std::ostream& out, Scalar v) {
    put<Bits>(out, std::bit_cast<Bits>(v));
  }
  static Scalar get_scalar(std::istream& in) {
    return std::bit_cast<Scalar>(get<Bits>(in));
  }

  std::uint64_t seed_ = 0;
  std::vector<DimBounds<Scalar>> bounds_;
  std::vector<CompositeHash<Scalar>> functions_;
  std::vector<Table> tables_;
  CodeStore<Scalar> codes_;
};

}  // namespace hshseg
