#include "tws/regress.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <Eigen/Dense>

#include "tws/csv.hpp"
#include "tws/error.hpp"
#include "tws/parallel.hpp"
#include "tws/random.hpp"

namespace tws {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMinRows = 10;

std::string format_value(double v) { return csv::format_double(v); }

// ---------------------------------------------------------------------------
// Tree construction

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, std::span<const double> y, ModelFamily family, const TreeParams& params,
              std::uint64_t seed)
      : X_(X), y_(y), family_(family), params_(params),
        max_features_(params.features_per_split(X.cols())), rng_(seed), features_(X.cols()) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  RegressionTree build(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    std::vector<RegressionTree::Node> nodes;
    struct Task {
      std::uint32_t node;
      std::size_t lo, hi, depth;
    };
    std::vector<Task> stack;
    nodes.emplace_back();
    stack.push_back({0, 0, rows_.size(), 0});
    while (!stack.empty()) {
      const Task task = stack.back();
      stack.pop_back();

      double sum = 0.0, sum_sq = 0.0;
      for (std::size_t i = task.lo; i < task.hi; ++i) {
        const double v = y_[rows_[i]];
        sum += v;
        sum_sq += v * v;
      }
      const std::size_t n = task.hi - task.lo;
      nodes[task.node].value = sum / static_cast<double>(n);

      const bool depth_limited = params_.max_depth != 0 && task.depth >= params_.max_depth;
      const bool too_small = n < 2 * params_.min_leaf || n < 2;
      const double sse = sum_sq - sum * sum / static_cast<double>(n);
      if (depth_limited || too_small || sse <= 1e-14 * std::max(1.0, sum_sq)) continue;

      const auto split = find_split(task.lo, task.hi, sum);
      if (!split) continue;

      const auto mid_it = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(task.lo),
                                         rows_.begin() + static_cast<std::ptrdiff_t>(task.hi),
                                         [&](std::size_t r) { return X_(r, split->feature) <= split->threshold; });
      const std::size_t mid = static_cast<std::size_t>(mid_it - rows_.begin());
      if (mid == task.lo || mid == task.hi) continue;

      const auto left = static_cast<std::uint32_t>(nodes.size());
      nodes.emplace_back();
      const auto right = static_cast<std::uint32_t>(nodes.size());
      nodes.emplace_back();
      auto& node = nodes[task.node];
      node.feature = static_cast<std::int32_t>(split->feature);
      node.threshold = split->threshold;
      node.left = left;
      node.right = right;
      stack.push_back({right, mid, task.hi, task.depth + 1});
      stack.push_back({left, task.lo, mid, task.depth + 1});
    }
    return RegressionTree(std::move(nodes));
  }

 private:
  struct SplitChoice {
    std::size_t feature;
    double threshold;
  };

  // Draws candidate features without replacement until max_features_
  // non-constant ones have been examined (or all features are exhausted).
  std::optional<SplitChoice> find_split(std::size_t lo, std::size_t hi, double node_sum) {
    const std::size_t d = features_.size();
    const std::size_t n = hi - lo;
    std::optional<SplitChoice> best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t examined = 0;
    for (std::size_t j = 0; j < d && examined < max_features_; ++j) {
      std::swap(features_[j], features_[j + uniform_index(rng_, d - j)]);
      const std::size_t f = features_[j];

      if (family_ == ModelFamily::random_forest) {
        pairs_.clear();
        for (std::size_t i = lo; i < hi; ++i) pairs_.emplace_back(X_(rows_[i], f), y_[rows_[i]]);
        std::sort(pairs_.begin(), pairs_.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (pairs_.front().first == pairs_.back().first) continue;
        ++examined;
        double left_sum = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
          left_sum += pairs_[i - 1].second;
          if (i < params_.min_leaf || n - i < params_.min_leaf) continue;
          if (pairs_[i - 1].first == pairs_[i].first) continue;
          const double nl = static_cast<double>(i), nr = static_cast<double>(n - i);
          const double right_sum = node_sum - left_sum;
          const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
          if (score > best_score) {
            double thr = 0.5 * (pairs_[i - 1].first + pairs_[i].first);
            if (thr >= pairs_[i].first) thr = pairs_[i - 1].first;
            best_score = score;
            best = SplitChoice{f, thr};
          }
        }
      } else {
        double lo_v = std::numeric_limits<double>::infinity();
        double hi_v = -std::numeric_limits<double>::infinity();
        for (std::size_t i = lo; i < hi; ++i) {
          const double v = X_(rows_[i], f);
          lo_v = std::min(lo_v, v);
          hi_v = std::max(hi_v, v);
        }
        if (lo_v == hi_v) continue;
        ++examined;
        double thr = lo_v + uniform01(rng_) * (hi_v - lo_v);
        if (thr >= hi_v) thr = lo_v;
        double left_sum = 0.0;
        std::size_t left_n = 0;
        for (std::size_t i = lo; i < hi; ++i) {
          if (X_(rows_[i], f) <= thr) {
            left_sum += y_[rows_[i]];
            ++left_n;
          }
        }
        if (left_n < params_.min_leaf || n - left_n < params_.min_leaf) continue;
        const double nl = static_cast<double>(left_n), nr = static_cast<double>(n - left_n);
        const double right_sum = node_sum - left_sum;
        const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
        if (score > best_score) {
          best_score = score;
          best = SplitChoice{f, thr};
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  std::span<const double> y_;
  ModelFamily family_;
  TreeParams params_;
  std::size_t max_features_;
  Rng rng_;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> rows_;
  std::vector<std::pair<double, double>> pairs_;
};

// ---------------------------------------------------------------------------
// Shared split/selection protocol

struct Protocol {
  std::vector<std::size_t> train, val, test;  // dataset row indices
  std::vector<double> y_true;                  // full target column
  std::vector<double> y_visible;               // test rows hidden
  double train_mean = 0.0;
};

Protocol prepare(const Dataset& data, const std::string& target) {
  auto it = data.targets.find(target);
  if (it == data.targets.end()) throw Error(ErrorCode::usage, "unknown target '" + target + "'");
  const auto rows = data.rows_with(target);
  if (rows.size() < kMinRows) {
    throw Error(ErrorCode::usage, "target '" + target + "' has only " + std::to_string(rows.size()) +
                                      " usable rows");
  }
  const double first = it->second[rows.front()];
  if (std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return it->second[r] == first; })) {
    throw Error(ErrorCode::undefined, "zero-variance target '" + target + "': R^2 is undefined");
  }

  Protocol p;
  const Split split = make_split(rows.size(), data.split_seed);
  for (auto i : split.train) p.train.push_back(rows[i]);
  for (auto i : split.val) p.val.push_back(rows[i]);
  for (auto i : split.test) p.test.push_back(rows[i]);
  p.y_true = it->second;
  p.y_visible = it->second;
  for (auto r : p.test) p.y_visible[r] = kNaN;
  double s = 0.0;
  for (auto r : p.train) s += p.y_true[r];
  p.train_mean = s / static_cast<double>(p.train.size());
  return p;
}

template <class Model>
double score_rows(const Model& model, const Matrix& X, std::span<const double> y,
                  std::span<const std::size_t> rows, double train_mean) {
  std::vector<double> truth, pred;
  truth.reserve(rows.size());
  pred.reserve(rows.size());
  for (auto r : rows) {
    truth.push_back(y[r]);
    pred.push_back(model.predict(X.row(r)));
  }
  return r_squared(truth, pred, train_mean);
}

// Runs the grid on train/validation only, then scores the winner on test.
template <class Model, class Candidate, class FitFn, class DescribeFn>
ModelReport run_grid(const Dataset& data, const std::string& target, ModelFamily family,
                     const std::vector<Candidate>& candidates, std::uint64_t seed, FitFn fit,
                     DescribeFn describe) {
  if (candidates.empty()) throw Error(ErrorCode::usage, "hyperparameter grid is empty");
  const Protocol p = prepare(data, target);

  ModelReport report;
  report.target = target;
  report.family = family;
  report.n_train = p.train.size();
  report.n_val = p.val.size();
  report.n_test = p.test.size();
  report.split_seed = data.split_seed;
  report.seed = seed;

  std::optional<Model> best;
  for (const auto& c : candidates) {
    Model model = fit(data.features, p.y_visible, p.train, c);
    GridResult g{describe(c), score_rows(model, data.features, p.y_visible, p.train, p.train_mean),
                 score_rows(model, data.features, p.y_visible, p.val, p.train_mean)};
    if (!best || g.r2_val > report.r2_val) {
      best = std::move(model);
      report.hyperparameters = g.hyperparameters;
      report.r2_train = g.r2_train;
      report.r2_val = g.r2_val;
    }
    report.grid.push_back(std::move(g));
  }
  report.r2_test = score_rows(*best, data.features, p.y_true, p.test, p.train_mean);
  return report;
}

}  // namespace

// ---------------------------------------------------------------------------
// Data

TargetTable read_targets_csv(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row) || row.size() < 2) {
    throw Error(ErrorCode::validation, "targets CSV needs a header with zone_id and at least one target");
  }
  TargetTable t;
  t.names.assign(row.begin() + 1, row.end());
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != t.names.size() + 1) {
      throw Error(ErrorCode::validation, "targets CSV line " + std::to_string(reader.line()) +
                                             ": wrong field count");
    }
    std::vector<double> values(t.names.size(), kNaN);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const std::string& cell = row[i + 1];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec == std::errc{} && ptr == cell.data() + cell.size() && !cell.empty() && std::isfinite(v)) {
        values[i] = v;
      }
    }
    if (!t.by_zone.emplace(row[0], std::move(values)).second) {
      throw Error(ErrorCode::validation, "targets CSV: duplicate zone '" + row[0] + "'");
    }
  }
  return t;
}

std::vector<std::size_t> Dataset::rows_with(const std::string& target) const {
  std::vector<std::size_t> rows;
  const auto& values = targets.at(target);
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (!std::isnan(values[r])) rows.push_back(r);
  }
  return rows;
}

Dataset join_targets(const FeatureTable& features, const TargetTable& targets, std::uint64_t split_seed) {
  Dataset d;
  d.split_seed = split_seed;
  d.feature_names = features.columns;
  d.features = Matrix(0, features.columns.size());
  for (const auto& name : targets.names) d.targets[name];
  for (std::size_t r = 0; r < features.zones.size(); ++r) {
    auto it = targets.by_zone.find(features.zones[r]);
    if (it == targets.by_zone.end()) continue;
    d.zones.push_back(features.zones[r]);
    d.features.append_row(features.values.row(r));
    for (std::size_t t = 0; t < targets.names.size(); ++t) {
      d.targets[targets.names[t]].push_back(it->second[t]);
    }
  }
  if (d.zones.empty()) throw Error(ErrorCode::usage, "no zone overlaps between features and targets");
  for (const auto& [name, values] : d.targets) {
    d.missing[name] = static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }));
  }
  return d;
}

Dataset join_targets(std::span<const Signature> signatures, const TargetTable& targets,
                     std::uint64_t split_seed) {
  FeatureTable table;
  for (const auto& s : signatures) {
    if (!s.valid) continue;
    if (table.columns.empty()) {
      for (std::size_t i = 0; i < s.T.size(); ++i) table.columns.push_back("T_" + std::to_string(i));
      table.values = Matrix(0, s.T.size());
    }
    table.zones.push_back(s.zone_id);
    table.values.append_row(s.T);
  }
  return join_targets(table, targets, split_seed);
}

Split make_split(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, {0x5b117});
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
  const auto n_train = static_cast<std::size_t>(std::lround(0.6 * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(n))));
  Split s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

double r_squared(std::span<const double> y_true, std::span<const double> y_pred, double y_train_mean) {
  if (y_true.size() != y_pred.size() || y_true.size() < 2) {
    throw Error(ErrorCode::usage, "r_squared needs two equal-length vectors of at least 2 values");
  }
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double r = y_true[i] - y_pred[i];
    const double t = y_true[i] - y_train_mean;
    ss_res += r * r;
    ss_tot += t * t;
  }
  if (ss_tot == 0.0) throw Error(ErrorCode::undefined, "R^2 undefined: zero total sum of squares");
  return 1.0 - ss_res / ss_tot;
}

// ---------------------------------------------------------------------------
// Models

std::string_view to_string(ModelFamily family) noexcept {
  switch (family) {
    case ModelFamily::extra_trees: return "extra_trees";
    case ModelFamily::random_forest: return "random_forest";
    case ModelFamily::ridge_baseline: return "ridge_baseline";
  }
  return "unknown";
}

ModelFamily parse_model_family(std::string_view name) {
  if (name == "extra_trees" || name == "et") return ModelFamily::extra_trees;
  if (name == "random_forest" || name == "rf") return ModelFamily::random_forest;
  if (name == "ridge_baseline" || name == "ridge") return ModelFamily::ridge_baseline;
  throw Error(ErrorCode::config, "unknown model family '" + std::string(name) + "'");
}

std::string_view to_string(FeatureRule rule) noexcept {
  switch (rule) {
    case FeatureRule::sqrt: return "sqrt";
    case FeatureRule::third: return "third";
    case FeatureRule::all: return "all";
  }
  return "unknown";
}

std::size_t TreeParams::features_per_split(std::size_t d) const noexcept {
  std::size_t m = d;
  switch (features) {
    case FeatureRule::sqrt: m = static_cast<std::size_t>(std::sqrt(static_cast<double>(d))); break;
    case FeatureRule::third: m = d / 3; break;
    case FeatureRule::all: m = d; break;
  }
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(d, 1));
}

std::map<std::string, std::string> TreeParams::describe() const {
  return {{"n_trees", std::to_string(n_trees)},
          {"max_depth", max_depth == 0 ? "none" : std::to_string(max_depth)},
          {"min_leaf", std::to_string(min_leaf)},
          {"features_per_split", std::string(to_string(features))}};
}

std::vector<TreeParams> TreeGrid::expand() const {
  std::vector<TreeParams> out;
  for (auto t : n_trees)
    for (auto depth : max_depth)
      for (auto leaf : min_leaf)
        for (auto f : features) out.push_back({t, depth, leaf, f});
  return out;
}

double RegressionTree::predict(std::span<const double> x) const {
  std::uint32_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& n = nodes_[i];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[i].value;
}

std::size_t RegressionTree::depth() const {
  std::size_t deepest = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes_[i].feature >= 0) {
      stack.push_back({nodes_[i].left, d + 1});
      stack.push_back({nodes_[i].right, d + 1});
    }
  }
  return deepest;
}

TreeEnsemble TreeEnsemble::fit(const Matrix& X, std::span<const double> y, std::span<const std::size_t> rows,
                               ModelFamily family, const TreeParams& params, std::uint64_t seed) {
  if (family == ModelFamily::ridge_baseline) throw Error(ErrorCode::usage, "ridge is not a tree family");
  if (rows.empty()) throw Error(ErrorCode::usage, "cannot fit a tree on zero rows");
  if (params.n_trees == 0 || params.min_leaf == 0) throw Error(ErrorCode::usage, "n_trees and min_leaf must be positive");
  for (auto r : rows) {
    if (std::isnan(y[r])) throw Error(ErrorCode::usage, "training rows contain a missing target");
  }
  TreeEnsemble ensemble;
  ensemble.trees_.resize(params.n_trees);
  parallel_for(params.n_trees, [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(seed, {t});
    TreeBuilder builder(X, y, family, params, tree_seed);
    std::vector<std::size_t> sample;
    if (family == ModelFamily::random_forest) {
      Rng boot = make_rng(tree_seed, {0xb007});
      sample.resize(rows.size());
      for (auto& s : sample) s = rows[uniform_index(boot, rows.size())];
    } else {
      sample.assign(rows.begin(), rows.end());
    }
    ensemble.trees_[t] = builder.build(std::move(sample));
  });
  return ensemble;
}

double TreeEnsemble::predict(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(x);
  return s / static_cast<double>(trees_.size());
}

double TreeEnsemble::predict_tree(std::size_t tree, std::span<const double> x) const {
  return trees_.at(tree).predict(x);
}

RidgeModel RidgeModel::fit(const Matrix& X, std::span<const double> y, std::span<const std::size_t> rows,
                           double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::usage, "ridge lambda must be positive");
  if (rows.empty()) throw Error(ErrorCode::usage, "cannot fit ridge on zero rows");
  const std::size_t n = rows.size(), d = X.cols();
  RidgeModel m;
  m.mean_.assign(d, 0.0);
  m.scale_.assign(d, 1.0);
  for (auto r : rows)
    for (std::size_t j = 0; j < d; ++j) m.mean_[j] += X(r, j);
  for (auto& v : m.mean_) v /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (auto r : rows)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = X(r, j) - m.mean_[j];
      var[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    m.scale_[j] = sd > 0.0 ? 1.0 / sd : 0.0;
  }

  Eigen::MatrixXd Z(n, d);
  Eigen::VectorXd t(n);
  double y_mean = 0.0;
  for (auto r : rows) {
    if (std::isnan(y[r])) throw Error(ErrorCode::usage, "training rows contain a missing target");
    y_mean += y[r];
  }
  y_mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) Z(i, j) = (X(rows[i], j) - m.mean_[j]) * m.scale_[j];
    t(i) = y[rows[i]] - y_mean;
  }

  Eigen::VectorXd w;
  if (d <= n) {
    Eigen::MatrixXd A = Z.transpose() * Z;
    A.diagonal().array() += lambda;
    w = A.llt().solve(Z.transpose() * t);
  } else {
    Eigen::MatrixXd K = Z * Z.transpose();
    K.diagonal().array() += lambda;
    w = Z.transpose() * K.llt().solve(t);
  }
  m.weights_.assign(w.data(), w.data() + w.size());
  m.intercept_ = y_mean;
  return m;
}

double RidgeModel::predict(std::span<const double> x) const {
  double s = intercept_;
  for (std::size_t j = 0; j < weights_.size(); ++j) s += weights_[j] * (x[j] - mean_[j]) * scale_[j];
  return s;
}

// ---------------------------------------------------------------------------
// Grid search

ModelReport fit_tree_ensemble(const Dataset& data, const std::string& target, ModelFamily family,
                              const TreeGrid& grid, std::uint64_t seed) {
  if (family == ModelFamily::ridge_baseline) {
    throw Error(ErrorCode::usage, "fit_tree_ensemble needs extra_trees or random_forest");
  }
  return run_grid<TreeEnsemble>(
      data, target, family, grid.expand(), seed,
      [&](const Matrix& X, std::span<const double> y, std::span<const std::size_t> rows, const TreeParams& p) {
        return TreeEnsemble::fit(X, y, rows, family, p, seed);
      },
      [](const TreeParams& p) { return p.describe(); });
}

ModelReport fit_baseline(const Dataset& data, const std::string& target, std::span<const double> lambdas,
                         std::uint64_t seed) {
  const std::vector<double> grid(lambdas.begin(), lambdas.end());
  return run_grid<RidgeModel>(
      data, target, ModelFamily::ridge_baseline, grid, seed,
      [](const Matrix& X, std::span<const double> y, std::span<const std::size_t> rows, double lambda) {
        return RidgeModel::fit(X, y, rows, lambda);
      },
      [](double lambda) { return std::map<std::string, std::string>{{"lambda", format_value(lambda)}}; });
}

void write_model_table_csv(std::ostream& out, std::span<const ModelReport> reports) {
  std::map<std::string, const ModelReport*> best;
  for (const auto& r : reports) {
    auto& slot = best[r.target];
    if (!slot || r.r2_val > slot->r2_val) slot = &r;
  }
  csv::Writer w(out);
  w.row({"feature", "R2", "best_model"});
  for (const auto& [target, r] : best) {
    w.field(target).field(r->r2_test).field(to_string(r->family));
    w.end_row();
  }
}

nlohmann::json model_reports_json(std::span<const ModelReport> reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& g : r.grid) {
      grid.push_back({{"hyperparameters", g.hyperparameters}, {"r2_train", g.r2_train}, {"r2_val", g.r2_val}});
    }
    arr.push_back({{"target", r.target},
                   {"model_family", std::string(to_string(r.family))},
                   {"hyperparameters", r.hyperparameters},
                   {"r2_train", r.r2_train},
                   {"r2_val", r.r2_val},
                   {"r2_test", r.r2_test},
                   {"n_train", r.n_train},
                   {"n_val", r.n_val},
                   {"n_test", r.n_test},
                   {"split_seed", r.split_seed},
                   {"seed", r.seed},
                   {"grid", grid}});
  }
  return arr;
}

}  // namespace tws
