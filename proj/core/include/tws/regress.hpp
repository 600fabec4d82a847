#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tws/matrix.hpp"
#include "tws/signature.hpp"

namespace tws {

// -- data ---------------------------------------------------------------------

/// Target table keyed by zone; missing or non-numeric cells are NaN.
struct TargetTable {
  std::vector<std::string> names;
  std::map<std::string, std::vector<double>> by_zone;  // values in `names` order
};

/// Header row required; first column is zone_id.
TargetTable read_targets_csv(std::istream& in);

struct Dataset {
  std::vector<std::string> zones;
  std::vector<std::string> feature_names;
  Matrix features;                                    // zones x d
  std::map<std::string, std::vector<double>> targets;  // NaN marks a missing value
  std::map<std::string, std::size_t> missing;          // per-target drop counts
  std::uint64_t split_seed = 0;

  /// Row indices with a value for `target`, in zone order.
  std::vector<std::size_t> rows_with(const std::string& target) const;
};

/// Inner join of feature rows and targets on zone id. Throws Error(usage)
/// when no zone overlaps.
Dataset join_targets(const FeatureTable& features, const TargetTable& targets,
                     std::uint64_t split_seed = 0);
/// Joins the valid signatures only.
Dataset join_targets(std::span<const Signature> signatures, const TargetTable& targets,
                     std::uint64_t split_seed = 0);

/// Disjoint, exhaustive positions into a list of n rows: round(0.6 n) train,
/// round(0.2 n) validation, the rest test. Reproducible from the seed.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

Split make_split(std::size_t n, std::uint64_t seed);

/// 1 - sum (y - yhat)^2 / sum (y - ybar_train)^2. Throws Error(undefined) on
/// a zero denominator and Error(usage) on length mismatch or n < 2.
double r_squared(std::span<const double> y_true, std::span<const double> y_pred, double y_train_mean);

// -- models -------------------------------------------------------------------

enum class ModelFamily { extra_trees, random_forest, ridge_baseline };

std::string_view to_string(ModelFamily family) noexcept;
ModelFamily parse_model_family(std::string_view name);

enum class FeatureRule { sqrt, third, all };

std::string_view to_string(FeatureRule rule) noexcept;

struct TreeParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_leaf = 1;
  FeatureRule features = FeatureRule::sqrt;

  std::size_t features_per_split(std::size_t d) const noexcept;
  std::map<std::string, std::string> describe() const;
};

struct TreeGrid {
  std::vector<std::size_t> n_trees{100, 300};
  std::vector<std::size_t> max_depth{0, 8, 16};
  std::vector<std::size_t> min_leaf{1, 5};
  std::vector<FeatureRule> features{FeatureRule::sqrt, FeatureRule::third};

  std::vector<TreeParams> expand() const;
};

inline const std::vector<double> kRidgeLambdas{1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};

/// CART regression tree (variance-reduction splits).
class RegressionTree {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // x[feature] <= threshold goes left
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double value = 0.0;
  };

  RegressionTree() = default;
  explicit RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const;
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t depth() const;

 private:
  std::vector<Node> nodes_;
};

/// Random forest: bootstrap rows, best threshold among a random feature
/// subset per split. Extra trees: all rows, one uniform random threshold per
/// candidate feature. Each tree draws from its own stream derived from
/// (seed, tree index), so the fit does not depend on the worker count.
class TreeEnsemble {
 public:
  static TreeEnsemble fit(const Matrix& X, std::span<const double> y, std::span<const std::size_t> rows,
                          ModelFamily family, const TreeParams& params, std::uint64_t seed);

  /// Mean of the individual tree predictions.
  double predict(std::span<const double> x) const;
  double predict_tree(std::size_t tree, std::span<const double> x) const;
  std::size_t size() const noexcept { return trees_.size(); }
  const RegressionTree& tree(std::size_t i) const { return trees_.at(i); }

 private:
  std::vector<RegressionTree> trees_;
};

/// L2-regularized least squares on standardized features with an
/// unpenalized intercept, solved through the normal equations (or their
/// dual form when d > n).
class RidgeModel {
 public:
  static RidgeModel fit(const Matrix& X, std::span<const double> y, std::span<const std::size_t> rows,
                        double lambda);
  double predict(std::span<const double> x) const;

 private:
  std::vector<double> mean_, scale_, weights_;
  double intercept_ = 0.0;
};

// -- grid search --------------------------------------------------------------

struct GridResult {
  std::map<std::string, std::string> hyperparameters;
  double r2_train = 0.0;
  double r2_val = 0.0;
};

struct ModelReport {
  std::string target;
  ModelFamily family = ModelFamily::extra_trees;
  std::map<std::string, std::string> hyperparameters;
  double r2_train = 0.0;
  double r2_val = 0.0;
  double r2_test = 0.0;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  std::uint64_t split_seed = 0;
  std::uint64_t seed = 0;
  std::vector<GridResult> grid;  // in evaluation order
};

/// Fits every grid point on the training rows, keeps the one with the best
/// validation R^2 (first on ties), and reports it on the test rows. Test
/// targets are hidden (NaN) while the grid is evaluated.
/// Throws Error(undefined) for a zero-variance target.
ModelReport fit_tree_ensemble(const Dataset& data, const std::string& target, ModelFamily family,
                              const TreeGrid& grid, std::uint64_t seed);

ModelReport fit_baseline(const Dataset& data, const std::string& target,
                         std::span<const double> lambdas, std::uint64_t seed);

/// feature,R2,best_model: one row per target, the family with the best
/// validation R^2, reporting its test R^2.
void write_model_table_csv(std::ostream& out, std::span<const ModelReport> reports);
nlohmann::json model_reports_json(std::span<const ModelReport> reports);

}  // namespace tws
