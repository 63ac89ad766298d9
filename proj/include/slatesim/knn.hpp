// Exact k-nearest-neighbor lookup over candidate action features.
#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "slatesim/environment.hpp"
#include "slatesim/types.hpp"

namespace slatesim {

/// Candidate ids with their feature columns, queried by squared L2
/// distance. Exact search; candidate sets are small (at most 60).
struct KnnIndex {
  std::vector<ActionId> ids;  // ascending
  Mat points;                 // feature_dim x ids.size()
};

inline KnnIndex make_knn_index(const EnvironmentSpec& env,
                               const std::vector<ActionId>& candidates) {
  KnnIndex index;
  index.ids = candidates;
  index.points.resize(env.feature_dim, static_cast<long>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    check_action(env, candidates[i]);
    index.points.col(static_cast<long>(i)) = env.features.col(candidates[i]);
  }
  return index;
}

/// The min(k, |points|) ids closest to proto, nearest first, ties broken
/// by ascending id.
inline std::vector<ActionId> knn_query(const KnnIndex& index, const Vec& proto, long k) {
  if (index.ids.empty()) throw std::domain_error("knn_query on an empty index");
  if (k < 1) throw std::invalid_argument("knn_query: k must be at least 1");
  if (proto.size() != index.points.rows())
    throw std::invalid_argument("knn_query: proto dimension mismatch");

  const long n = static_cast<long>(index.ids.size());
  const Vec dist = (index.points.colwise() - proto).colwise().squaredNorm().transpose();

  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return index.ids[a] < index.ids[b];
  });

  const long take = std::min(k, n);
  std::vector<ActionId> out(take);
  for (long i = 0; i < take; ++i) out[i] = index.ids[order[i]];
  return out;
}

}  // namespace slatesim
