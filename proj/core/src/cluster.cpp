#include "tws/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tws/csv.hpp"
#include "tws/error.hpp"
#include "tws/parallel.hpp"
#include "tws/random.hpp"

namespace tws {
namespace {

constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

void assign_rows(const Matrix& X, const Matrix& centroids, std::vector<std::size_t>& labels,
                 std::vector<double>& dist) {
  parallel_for(X.rows(), [&](std::size_t i) {
    const auto x = X.row(i);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
      const double d = squared_distance(x, centroids.row(c));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    labels[i] = best;
    dist[i] = best_d;
  });
}

/// Member means; returns per-cluster sizes. Empty clusters keep their centroid.
std::vector<std::size_t> update_means(const Matrix& X, std::span<const std::size_t> labels,
                                      Matrix& centroids) {
  const std::size_t k = centroids.rows();
  std::vector<std::size_t> sizes(k, 0);
  Matrix sums(k, X.cols(), 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    auto s = sums.row(labels[i]);
    const auto x = X.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) s[j] += x[j];
    ++sizes[labels[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] == 0) continue;
    auto dst = centroids.row(c);
    const auto s = sums.row(c);
    const double inv = static_cast<double>(sizes[c]);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = s[j] / inv;
  }
  return sizes;
}

/// Moves each empty cluster's centroid onto the row currently farthest from
/// its own centroid (each row used at most once).
bool reseed_empty(const Matrix& X, std::span<const std::size_t> sizes, std::vector<double>& dist,
                  Matrix& centroids) {
  bool any = false;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] != 0) continue;
    std::size_t far = 0;
    for (std::size_t i = 1; i < dist.size(); ++i) {
      if (dist[i] > dist[far]) far = i;
    }
    std::copy(X.row(far).begin(), X.row(far).end(), centroids.row(c).begin());
    dist[far] = -1.0;
    any = true;
  }
  return any;
}

ClusterModel lloyd(const Matrix& X, Matrix centroids, const KMeansOptions& options) {
  const std::size_t n = X.rows();
  ClusterModel model;
  model.k = centroids.rows();
  std::vector<std::size_t> labels(n, kUnassigned), next(n);
  std::vector<double> dist(n);

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    assign_rows(X, centroids, next, dist);
    model.iterations = iter + 1;
    if (next == labels) {
      model.converged = true;
      break;
    }
    labels.swap(next);
    const auto sizes = update_means(X, labels, centroids);
    reseed_empty(X, sizes, dist, centroids);
  }
  if (!model.converged) {
    // Iteration cap: make the centroids the means of the final labels.
    update_means(X, labels, centroids);
  }

  // Canonical relabelling by first member.
  std::vector<std::size_t> remap(model.k, kUnassigned);
  std::size_t next_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (remap[labels[i]] == kUnassigned) remap[labels[i]] = next_label++;
  }
  for (std::size_t c = 0; c < model.k; ++c) {
    if (remap[c] == kUnassigned) remap[c] = next_label++;
  }
  model.centroids = Matrix(model.k, X.cols());
  for (std::size_t c = 0; c < model.k; ++c) {
    std::copy(centroids.row(c).begin(), centroids.row(c).end(), model.centroids.row(remap[c]).begin());
  }
  model.assignments.resize(n);
  for (std::size_t i = 0; i < n; ++i) model.assignments[i] = remap[labels[i]];
  model.inertia = inertia(X, model.assignments, model.centroids);
  return model;
}

Matrix kmeans_pp(const Matrix& X, std::size_t k, Rng& rng) {
  const std::size_t n = X.rows();
  Matrix centroids(k, X.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = uniform_index(rng, n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double d : d2) total += d;
      if (total > 0.0) {
        double target = uniform01(rng) * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          target -= d2[i];
          if (target < 0.0 && d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
        while (d2[pick] == 0.0 && pick > 0) --pick;
      } else {
        pick = uniform_index(rng, n);
      }
    }
    std::copy(X.row(pick).begin(), X.row(pick).end(), centroids.row(c).begin());
    const auto center = centroids.row(c);
    parallel_for(n, [&](std::size_t i) { d2[i] = std::min(d2[i], squared_distance(X.row(i), center)); });
  }
  return centroids;
}

void check_input(const Matrix& X, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::usage, "k must be at least 1");
  if (k > X.rows()) {
    throw Error(ErrorCode::usage, "k = " + std::to_string(k) + " exceeds the number of rows (" +
                                      std::to_string(X.rows()) + ")");
  }
}

std::size_t distinct_labels(std::span<const std::size_t> labels) {
  std::vector<std::size_t> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

}  // namespace

double inertia(const Matrix& X, std::span<const std::size_t> labels, const Matrix& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) total += squared_distance(X.row(i), centroids.row(labels[i]));
  return total;
}

ClusterModel kmeans_from(const Matrix& X, Matrix initial_centroids, const KMeansOptions& options) {
  check_input(X, initial_centroids.rows());
  if (initial_centroids.cols() != X.cols()) throw Error(ErrorCode::usage, "centroid dimension mismatch");
  return lloyd(X, std::move(initial_centroids), options);
}

ClusterModel kmeans(const Matrix& X, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  check_input(X, k);
  ClusterModel best;
  const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng = make_rng(seed, {k, r});
    ClusterModel m = lloyd(X, kmeans_pp(X, k, rng), options);
    if (r == 0 || m.inertia < best.inertia) best = std::move(m);
  }
  best.seed = seed;
  return best;
}

double silhouette(const Matrix& X, std::span<const std::size_t> labels) {
  if (labels.size() != X.rows()) throw Error(ErrorCode::usage, "label count does not match rows");
  if (distinct_labels(labels) < 2) {
    throw Error(ErrorCode::undefined, "silhouette needs at least two clusters");
  }
  std::map<std::size_t, std::size_t> index;
  for (auto l : labels) index.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [label, slot] : index) slot = next++;
  std::vector<std::size_t> slot(labels.size()), sizes(index.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    slot[i] = index[labels[i]];
    ++sizes[slot[i]];
  }

  std::vector<double> s(X.rows(), 0.0);
  parallel_for(X.rows(), [&](std::size_t i) {
    if (sizes[slot[i]] == 1) return;
    std::vector<double> sums(sizes.size(), 0.0);
    for (std::size_t j = 0; j < X.rows(); ++j) {
      if (j == i) continue;
      sums[slot[j]] += std::sqrt(squared_distance(X.row(i), X.row(j)));
    }
    const double a = sums[slot[i]] / static_cast<double>(sizes[slot[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      if (c != slot[i]) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double m = std::max(a, b);
    s[i] = m > 0.0 ? (b - a) / m : 0.0;
  });
  double total = 0.0;
  for (double v : s) total += v;
  return total / static_cast<double>(X.rows());
}

double centroid_silhouette(const Matrix& X, std::span<const std::size_t> labels) {
  if (labels.size() != X.rows()) throw Error(ErrorCode::usage, "label count does not match rows");
  if (distinct_labels(labels) < 2) {
    throw Error(ErrorCode::undefined, "silhouette needs at least two clusters");
  }
  const std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
  Matrix centroids(k, X.cols());
  const auto sizes = update_means(X, labels, centroids);
  double total = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double a = std::sqrt(squared_distance(X.row(i), centroids.row(labels[i])));
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == labels[i] || sizes[c] == 0) continue;
      b = std::min(b, std::sqrt(squared_distance(X.row(i), centroids.row(c))));
    }
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(X.rows());
}

SelectionReport select_k(const Matrix& X, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                         const KMeansOptions& options, SilhouetteMode mode) {
  if (k_min < 2 || k_max < k_min || X.rows() < 1 || k_max + 1 > X.rows()) {
    throw Error(ErrorCode::usage, "k range " + std::to_string(k_min) + ".." + std::to_string(k_max) +
                                      " must lie within [2, rows - 1] (rows = " +
                                      std::to_string(X.rows()) + ")");
  }
  SelectionReport report;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    ClusterModel model = kmeans(X, k, seed, options);
    if (!report.models.empty()) {
      const ClusterModel& prev = report.models.back();
      Matrix init(k, X.cols());
      for (std::size_t c = 0; c + 1 < k; ++c) {
        std::copy(prev.centroids.row(c).begin(), prev.centroids.row(c).end(), init.row(c).begin());
      }
      std::size_t worst = 0;
      double worst_d = -1.0;
      for (std::size_t i = 0; i < X.rows(); ++i) {
        const double d = squared_distance(X.row(i), prev.centroids.row(prev.assignments[i]));
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      std::copy(X.row(worst).begin(), X.row(worst).end(), init.row(k - 1).begin());
      ClusterModel warm = lloyd(X, std::move(init), options);
      if (warm.inertia < model.inertia) model = std::move(warm);
      model.seed = seed;
    }
    const double sil = distinct_labels(model.assignments) < 2
                           ? 0.0
                           : (mode == SilhouetteMode::pairwise ? silhouette(X, model.assignments)
                                                               : centroid_silhouette(X, model.assignments));
    report.rows.push_back({k, sil, model.inertia});
    report.models.push_back(std::move(model));
  }

  const auto& rows = report.rows;
  std::size_t best_sil = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].silhouette > rows[best_sil].silhouette) best_sil = i;
  }
  report.recommended_k_silhouette = rows[best_sil].k;
  report.recommended_k_elbow = rows.front().k;
  double best_d2 = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    const double d2 = rows[i - 1].inertia - 2.0 * rows[i].inertia + rows[i + 1].inertia;
    if (d2 > best_d2) {
      best_d2 = d2;
      report.recommended_k_elbow = rows[i].k;
    }
  }
  return report;
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::usage, "label vectors differ in length");
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double n) { return n * (n - 1.0) / 2.0; };
  double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, n] : joint) sum_joint += c2(n);
  for (const auto& [key, n] : ra) sum_a += c2(n);
  for (const auto& [key, n] : rb) sum_b += c2(n);
  const double total = c2(static_cast<double>(a.size()));
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_joint - expected) / (max_index - expected);
}

void write_assignments_csv(std::ostream& out, std::span<const std::string> zones,
                           std::span<const std::size_t> assignments) {
  csv::Writer w(out);
  w.row({"zone_id", "cluster"});
  for (std::size_t i = 0; i < zones.size(); ++i) {
    w.field(zones[i]).field(assignments[i]);
    w.end_row();
  }
}

void write_centroids_csv(std::ostream& out, const Matrix& centroids) {
  csv::Writer w(out);
  w.field("cluster");
  for (std::size_t j = 0; j < centroids.cols(); ++j) w.field("T_" + std::to_string(j));
  w.end_row();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    w.field(c);
    for (double v : centroids.row(c)) w.field(v);
    w.end_row();
  }
}

void write_selection_csv(std::ostream& out, const SelectionReport& report) {
  csv::Writer w(out);
  w.row({"k", "silhouette", "inertia"});
  for (const auto& r : report.rows) {
    w.field(r.k).field(r.silhouette).field(r.inertia);
    w.end_row();
  }
}

}  // namespace tws
