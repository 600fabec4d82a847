#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tws/matrix.hpp"

namespace tws {

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
};

/// Result of k-means on the rows of a matrix. Cluster labels are canonical:
/// cluster 0 holds row 0, cluster 1 holds the first row not in cluster 0,
/// and so on. Centroids are the member means and `inertia` is the sum of
/// squared distances from each row to its centroid (the CSE).
struct ClusterModel {
  std::size_t k = 0;
  Matrix centroids;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// k-means++ seeding, Lloyd iterations to an assignment fixed point (or
/// max_iterations), best inertia over `restarts`. An empty cluster is
/// re-seeded at the row farthest from its centroid. Deterministic in `seed`
/// and independent of the worker count.
ClusterModel kmeans(const Matrix& X, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

/// Lloyd iterations from explicit starting centroids.
ClusterModel kmeans_from(const Matrix& X, Matrix initial_centroids, const KMeansOptions& options = {});

/// Sum of squared distances from each row to the centroid of its label.
double inertia(const Matrix& X, std::span<const std::size_t> labels, const Matrix& centroids);

/// Mean silhouette with pairwise Euclidean distances: a = mean distance to
/// the other members of the own cluster, b = smallest mean distance to
/// another cluster; singleton members score 0, a = b = 0 scores 0.
/// Throws Error(undefined) with fewer than two distinct labels.
double silhouette(const Matrix& X, std::span<const std::size_t> labels);

/// Same, but a and b are distances to cluster centroids.
double centroid_silhouette(const Matrix& X, std::span<const std::size_t> labels);

struct SelectionRow {
  std::size_t k = 0;
  double silhouette = 0.0;
  double inertia = 0.0;
};

struct SelectionReport {
  std::vector<SelectionRow> rows;
  std::size_t recommended_k_silhouette = 0;
  /// argmax over interior k of inertia(k-1) - 2 inertia(k) + inertia(k+1).
  std::size_t recommended_k_elbow = 0;
  std::vector<ClusterModel> models;
};

enum class SilhouetteMode { pairwise, centroid };

/// Fits every k in [k_min, k_max] (which must lie within [2, rows - 1]).
/// Each k after the first also tries a warm start from the previous
/// centroids plus the worst-fit row, so inertia never increases with k.
SelectionReport select_k(const Matrix& X, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                         const KMeansOptions& options = {},
                         SilhouetteMode mode = SilhouetteMode::pairwise);

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

void write_assignments_csv(std::ostream& out, std::span<const std::string> zones,
                           std::span<const std::size_t> assignments);
void write_centroids_csv(std::ostream& out, const Matrix& centroids);
void write_selection_csv(std::ostream& out, const SelectionReport& report);

}  // namespace tws
