#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bscen/mean_function.hpp"
#include "bscen/random.hpp"

namespace bscen {

enum class MoveType : int { grow = 0, prune = 1, change = 2, swap = 3 };

// Tree-shape prior: a node at depth d splits with probability alpha/(1+d)^beta.
struct TreePrior {
  double alpha = 0.95;
  double beta = 2.0;
  std::array<double, 4> move_probs{0.25, 0.25, 0.40, 0.10};  // grow, prune, change, swap

  void validate() const;
};

double depth_split_prob(int depth, const TreePrior& prior);

// Gaussian leaf prior N(0, variance).
struct LeafPrior {
  double variance = 1.0;

  // sd = (max - min) / (2 k sqrt(S)) so that the sum of S leaves puts its
  // central mass (k sds either side of zero) across the observed range.
  static LeafPrior calibrate(double y_min, double y_max, int trees, double k = 1.96);
  double sd() const;
};

// Split ranges per predictor, frozen at construction. Predictors without
// spread cannot be split on.
struct SplitRanges {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> splittable;

  static SplitRanges from_design(const Eigen::MatrixXd& X);
  double width(int var) const { return hi[static_cast<std::size_t>(var)] - lo[static_cast<std::size_t>(var)]; }
};

// Binary regression tree. Observations with x[var] < threshold go left, ties
// and larger values go right.
class DecisionTree {
 public:
  struct Node {
    int parent = -1;
    int left = -1;
    int right = -1;
    int var = -1;
    double threshold = 0.0;
    double value = 0.0;
    int depth = 0;

    bool leaf() const { return left < 0; }
  };

  explicit DecisionTree(double leaf_value = 0.0);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(nodes_.size()); }

  template <typename Vec>
  int leaf_index(const Vec& x) const {
    int i = 0;
    while (!nodes_[static_cast<std::size_t>(i)].leaf()) {
      const Node& nd = nodes_[static_cast<std::size_t>(i)];
      i = x[nd.var] < nd.threshold ? nd.left : nd.right;
    }
    return i;
  }

  template <typename Vec>
  double predict(const Vec& x) const {
    return nodes_[static_cast<std::size_t>(leaf_index(x))].value;
  }

  std::vector<int> leaves() const;
  std::vector<int> interior() const;
  // Interior nodes whose children are both leaves.
  std::vector<int> prunable() const;
  // (parent, child) pairs where both are interior.
  std::vector<std::pair<int, int>> swappable() const;
  int max_depth() const;

  // Splits leaf `i`; both children start with the leaf's value.
  void grow(int i, int var, double threshold);
  // Collapses interior node `i` whose children are leaves.
  void prune(int i);

  // Rebuilds from (left, right, var, threshold, value) records, root first.
  static DecisionTree from_records(const std::vector<std::array<double, 5>>& records);
  std::vector<std::array<double, 5>> to_records() const;

  friend bool operator==(const DecisionTree& a, const DecisionTree& b);

 private:
  void remove_node(int i);
  std::vector<Node> nodes_;
};

double tree_log_prior(const DecisionTree& tree, const TreePrior& prior, const SplitRanges& ranges);

// Log marginal likelihood of residuals with every leaf value integrated out
// under the leaf prior and per-observation variances. nullopt when a leaf is
// empty.
std::optional<double> tree_marginal_loglik(const DecisionTree& tree, const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& residuals, const Eigen::VectorXd& variances,
                                           const LeafPrior& leaf_prior);

struct TreeProposal {
  DecisionTree candidate;
  double log_proposal_ratio = 0.0;  // log q(old | new) - log q(new | old)
  MoveType move = MoveType::grow;
  bool noop = false;  // no legal move exists
};

// Draws a move type among the moves legal for `tree` (renormalized
// move_probs) and applies it.
TreeProposal propose_tree_move(const DecisionTree& tree, const TreePrior& prior, const SplitRanges& ranges, Rng& rng);

// One Metropolis-Hastings step on the tree structure; returns true on accept.
bool mh_tree_step(DecisionTree& tree, const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                  const Eigen::VectorXd& variances, const TreePrior& prior, const LeafPrior& leaf_prior,
                  const SplitRanges& ranges, Rng& rng, MoveType* move = nullptr);

// Conjugate draw of each leaf value given its residuals.
void sample_leaves(DecisionTree& tree, const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                   const Eigen::VectorXd& variances, const LeafPrior& leaf_prior, Rng& rng);

// Sum-of-trees for one equation plus fitted values at the training rows.
struct Forest {
  std::vector<DecisionTree> trees;
  std::vector<Eigen::VectorXd> tree_fit;  // per tree, length T
  Eigen::VectorXd fit;                    // sum of tree_fit

  static Forest stumps(int trees, Eigen::Index T);
  void refresh(const Eigen::MatrixXd& X);
  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int size() const { return static_cast<int>(trees.size()); }
};

// target minus the fit of every tree except tree s.
Eigen::VectorXd partial_residuals(int s, const Eigen::VectorXd& target, const Forest& forest);

struct ForestSweepStats {
  std::array<long, 4> proposed{};
  std::array<long, 4> accepted{};

  double acceptance_rate() const;
  ForestSweepStats& operator+=(const ForestSweepStats& other);
};

// Backfitting pass over all trees of one equation.
void update_forest(Forest& forest, const Eigen::MatrixXd& X, const Eigen::VectorXd& target,
                   const Eigen::VectorXd& variances, const TreePrior& prior, const LeafPrior& leaf_prior,
                   const SplitRanges& ranges, Rng& rng, ForestSweepStats& stats);

Eigen::VectorXd forest_predict(const std::vector<Forest>& forests, const Eigen::Ref<const Eigen::VectorXd>& x);

// Immutable copy of the trees of every equation.
class ForestMean final : public MeanFunction {
 public:
  ForestMean(const std::vector<Forest>& forests, Eigen::Index k);

  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  Eigen::Index n() const override { return static_cast<Eigen::Index>(trees_.size()); }
  Eigen::Index k() const override { return k_; }

 private:
  std::vector<std::vector<DecisionTree>> trees_;
  Eigen::Index k_;
};

}  // namespace bscen
