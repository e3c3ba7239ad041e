#include "bscen/bart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bscen/errors.hpp"

namespace bscen {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int leaf_of_row(const DecisionTree& tree, const Eigen::MatrixXd& X, Eigen::Index t) {
  int i = 0;
  while (!tree.node(i).leaf()) {
    const auto& nd = tree.node(i);
    i = X(t, nd.var) < nd.threshold ? nd.left : nd.right;
  }
  return i;
}

std::vector<int> assign_rows(const DecisionTree& tree, const Eigen::MatrixXd& X) {
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index t = 0; t < X.rows(); ++t) out[static_cast<std::size_t>(t)] = leaf_of_row(tree, X, t);
  return out;
}

struct LeafStats {
  double precision_sum = 0.0;  // sum 1/v
  double weighted_sum = 0.0;   // sum r/v
  long count = 0;
};

std::vector<LeafStats> leaf_stats(const DecisionTree& tree, const std::vector<int>& rows, const Eigen::VectorXd& r,
                                  const Eigen::VectorXd& v) {
  std::vector<LeafStats> st(static_cast<std::size_t>(tree.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    auto& s = st[static_cast<std::size_t>(rows[t])];
    const double w = 1.0 / v[static_cast<Eigen::Index>(t)];
    s.precision_sum += w;
    s.weighted_sum += w * r[static_cast<Eigen::Index>(t)];
    ++s.count;
  }
  return st;
}

std::array<bool, 4> legal_moves(const DecisionTree& tree, const SplitRanges& ranges) {
  const bool can_split = !ranges.splittable.empty();
  const bool has_interior = tree.size() > 1;
  return {can_split, has_interior, has_interior && can_split, !tree.swappable().empty()};
}

double move_log_prob(const DecisionTree& tree, const TreePrior& prior, const SplitRanges& ranges, MoveType move) {
  const auto legal = legal_moves(tree, ranges);
  double total = 0.0;
  for (int m = 0; m < 4; ++m)
    if (legal[static_cast<std::size_t>(m)]) total += prior.move_probs[static_cast<std::size_t>(m)];
  const auto idx = static_cast<std::size_t>(move);
  if (!legal[idx] || total <= 0.0) return kNegInf;
  return std::log(prior.move_probs[idx] / total);
}

int uniform_index(std::size_t count, Rng& rng) {
  const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(count));
  return static_cast<int>(std::min(i, count - 1));
}

}  // namespace

void TreePrior::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("tree prior: alpha must lie in (0, 1)");
  if (!(beta > 0.0)) throw InputError("tree prior: beta must be positive");
  double sum = 0.0;
  for (double p : move_probs) {
    if (p < 0.0) throw InputError("tree prior: move probabilities must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InputError("tree prior: move probabilities must sum to 1");
}

double depth_split_prob(int depth, const TreePrior& prior) {
  if (depth < 0) throw InputError("depth must be non-negative");
  return prior.alpha / std::pow(1.0 + depth, prior.beta);
}

LeafPrior LeafPrior::calibrate(double y_min, double y_max, int trees, double k) {
  if (trees < 1) throw InputError("leaf prior: tree count must be positive");
  if (!(y_max > y_min)) throw InputError("leaf prior: series has no spread");
  const double sd = (y_max - y_min) / (2.0 * k * std::sqrt(static_cast<double>(trees)));
  return LeafPrior{sd * sd};
}

double LeafPrior::sd() const { return std::sqrt(variance); }

SplitRanges SplitRanges::from_design(const Eigen::MatrixXd& X) {
  SplitRanges r;
  const auto k = static_cast<std::size_t>(X.cols());
  r.lo.assign(k, 0.0);
  r.hi.assign(k, 0.0);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (X.rows() == 0) continue;
    r.lo[static_cast<std::size_t>(j)] = X.col(j).minCoeff();
    r.hi[static_cast<std::size_t>(j)] = X.col(j).maxCoeff();
    if (r.hi[static_cast<std::size_t>(j)] > r.lo[static_cast<std::size_t>(j)]) r.splittable.push_back(static_cast<int>(j));
  }
  return r;
}

DecisionTree::DecisionTree(double leaf_value) {
  Node root;
  root.value = leaf_value;
  nodes_.push_back(root);
}

std::vector<int> DecisionTree::leaves() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (node(i).leaf()) out.push_back(i);
  return out;
}

std::vector<int> DecisionTree::interior() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (!node(i).leaf()) out.push_back(i);
  return out;
}

std::vector<int> DecisionTree::prunable() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    const Node& nd = node(i);
    if (!nd.leaf() && node(nd.left).leaf() && node(nd.right).leaf()) out.push_back(i);
  }
  return out;
}

std::vector<std::pair<int, int>> DecisionTree::swappable() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < size(); ++i) {
    const Node& nd = node(i);
    if (nd.leaf()) continue;
    if (!node(nd.left).leaf()) out.emplace_back(i, nd.left);
    if (!node(nd.right).leaf()) out.emplace_back(i, nd.right);
  }
  return out;
}

int DecisionTree::max_depth() const {
  int d = 0;
  for (const Node& nd : nodes_) d = std::max(d, nd.depth);
  return d;
}

void DecisionTree::grow(int i, int var, double threshold) {
  if (!node(i).leaf()) throw InputError("grow: node is not a leaf");
  Node child;
  child.parent = i;
  child.depth = node(i).depth + 1;
  child.value = node(i).value;
  const int l = size();
  nodes_.push_back(child);
  nodes_.push_back(child);
  Node& nd = node(i);
  nd.left = l;
  nd.right = l + 1;
  nd.var = var;
  nd.threshold = threshold;
}

void DecisionTree::prune(int i) {
  const Node nd = node(i);
  if (nd.leaf() || !node(nd.left).leaf() || !node(nd.right).leaf()) {
    throw InputError("prune: node must have two leaf children");
  }
  node(i).value = 0.5 * (node(nd.left).value + node(nd.right).value);
  node(i).left = node(i).right = node(i).var = -1;
  node(i).threshold = 0.0;
  remove_node(std::max(nd.left, nd.right));
  remove_node(std::min(nd.left, nd.right));
}

void DecisionTree::remove_node(int i) {
  nodes_.erase(nodes_.begin() + i);
  auto fix = [i](int& ref) {
    if (ref > i) --ref;
  };
  for (Node& nd : nodes_) {
    fix(nd.parent);
    fix(nd.left);
    fix(nd.right);
  }
}

DecisionTree DecisionTree::from_records(const std::vector<std::array<double, 5>>& records) {
  if (records.empty()) throw InputError("tree record list is empty");
  DecisionTree tree;
  tree.nodes_.assign(records.size(), Node{});
  const int count = static_cast<int>(records.size());
  for (int i = 0; i < count; ++i) {
    const auto& rec = records[static_cast<std::size_t>(i)];
    Node& nd = tree.nodes_[static_cast<std::size_t>(i)];
    nd.left = static_cast<int>(rec[0]);
    nd.right = static_cast<int>(rec[1]);
    nd.var = static_cast<int>(rec[2]);
    nd.threshold = rec[3];
    nd.value = rec[4];
    if ((nd.left < 0) != (nd.right < 0) || nd.left >= count || nd.right >= count) {
      throw InputError("tree record " + std::to_string(i) + " has invalid children");
    }
  }
  std::vector<int> stack{0};
  std::vector<bool> seen(records.size(), false);
  seen[0] = true;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const Node nd = tree.node(i);
    if (nd.leaf()) continue;
    for (int c : {nd.left, nd.right}) {
      if (seen[static_cast<std::size_t>(c)]) throw InputError("tree records do not form a tree");
      seen[static_cast<std::size_t>(c)] = true;
      tree.node(c).parent = i;
      tree.node(c).depth = nd.depth + 1;
      stack.push_back(c);
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw InputError("tree records contain orphan nodes");
  return tree;
}

std::vector<std::array<double, 5>> DecisionTree::to_records() const {
  std::vector<std::array<double, 5>> out;
  out.reserve(nodes_.size());
  for (const Node& nd : nodes_) {
    out.push_back({static_cast<double>(nd.left), static_cast<double>(nd.right), static_cast<double>(nd.var),
                   nd.threshold, nd.value});
  }
  return out;
}

bool operator==(const DecisionTree& a, const DecisionTree& b) { return a.to_records() == b.to_records(); }

double tree_log_prior(const DecisionTree& tree, const TreePrior& prior, const SplitRanges& ranges) {
  const double log_k = std::log(static_cast<double>(ranges.splittable.size()));
  double lp = 0.0;
  for (const auto& nd : tree.nodes()) {
    const double split = depth_split_prob(nd.depth, prior);
    if (nd.leaf()) {
      lp += std::log1p(-split);
    } else {
      const double w = ranges.width(nd.var);
      if (!(w > 0.0)) return kNegInf;
      lp += std::log(split) - log_k - std::log(w);
    }
  }
  return lp;
}

std::optional<double> tree_marginal_loglik(const DecisionTree& tree, const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& residuals, const Eigen::VectorXd& variances,
                                           const LeafPrior& leaf_prior) {
  if (X.rows() != residuals.size() || X.rows() != variances.size()) {
    throw InputError("tree likelihood: design, residuals and variances disagree in length");
  }
  const auto rows = assign_rows(tree, X);
  const auto st = leaf_stats(tree, rows, residuals, variances);

  double ll = -0.5 * (variances.array() * 2.0 * std::numbers::pi).log().sum() -
              0.5 * (residuals.array().square() / variances.array()).sum();
  const double s2 = leaf_prior.variance;
  for (int i = 0; i < tree.size(); ++i) {
    if (!tree.node(i).leaf()) continue;
    const auto& s = st[static_cast<std::size_t>(i)];
    if (s.count == 0) return std::nullopt;
    const double P = 1.0 / s2 + s.precision_sum;
    ll += -0.5 * std::log(s2 * P) + 0.5 * s.weighted_sum * s.weighted_sum / P;
  }
  return ll;
}

TreeProposal propose_tree_move(const DecisionTree& tree, const TreePrior& prior, const SplitRanges& ranges, Rng& rng) {
  const auto legal = legal_moves(tree, ranges);
  std::array<double, 4> probs{};
  double total = 0.0;
  for (std::size_t m = 0; m < 4; ++m) {
    probs[m] = legal[m] ? prior.move_probs[m] : 0.0;
    total += probs[m];
  }
  TreeProposal out{tree, 0.0, MoveType::grow};
  if (total <= 0.0) {
    out.noop = true;
    return out;
  }
  for (double& p : probs) p /= total;
  out.move = static_cast<MoveType>(rng.categorical(std::span<const double>(probs)));

  const double log_k = std::log(static_cast<double>(ranges.splittable.size()));
  DecisionTree& cand = out.candidate;
  switch (out.move) {
    case MoveType::grow: {
      const auto leaves = tree.leaves();
      const int leaf = leaves[static_cast<std::size_t>(uniform_index(leaves.size(), rng))];
      const int var = ranges.splittable[static_cast<std::size_t>(uniform_index(ranges.splittable.size(), rng))];
      const double w = ranges.width(var);
      const double thr = ranges.lo[static_cast<std::size_t>(var)] + w * rng.uniform();
      cand.grow(leaf, var, thr);
      const double fwd = move_log_prob(tree, prior, ranges, MoveType::grow) -
                         std::log(static_cast<double>(leaves.size())) - log_k - std::log(w);
      const double rev = move_log_prob(cand, prior, ranges, MoveType::prune) -
                         std::log(static_cast<double>(cand.prunable().size()));
      out.log_proposal_ratio = rev - fwd;
      break;
    }
    case MoveType::prune: {
      const auto nog = tree.prunable();
      const int i = nog[static_cast<std::size_t>(uniform_index(nog.size(), rng))];
      const double w = ranges.width(tree.node(i).var);
      cand.prune(i);
      const double fwd = move_log_prob(tree, prior, ranges, MoveType::prune) - std::log(static_cast<double>(nog.size()));
      const double rev = move_log_prob(cand, prior, ranges, MoveType::grow) -
                         std::log(static_cast<double>(cand.leaves().size())) - log_k - std::log(w);
      out.log_proposal_ratio = rev - fwd;
      break;
    }
    case MoveType::change: {
      const auto inner = tree.interior();
      const int i = inner[static_cast<std::size_t>(uniform_index(inner.size(), rng))];
      const int old_var = tree.node(i).var;
      const int var = ranges.splittable[static_cast<std::size_t>(uniform_index(ranges.splittable.size(), rng))];
      const double w = ranges.width(var);
      cand.node(i).var = var;
      cand.node(i).threshold = ranges.lo[static_cast<std::size_t>(var)] + w * rng.uniform();
      const double fwd = move_log_prob(tree, prior, ranges, MoveType::change) - std::log(w);
      const double rev = move_log_prob(cand, prior, ranges, MoveType::change) - std::log(ranges.width(old_var));
      out.log_proposal_ratio = rev - fwd;
      break;
    }
    case MoveType::swap: {
      const auto pairs = tree.swappable();
      const auto [a, b] = pairs[static_cast<std::size_t>(uniform_index(pairs.size(), rng))];
      std::swap(cand.node(a).var, cand.node(b).var);
      std::swap(cand.node(a).threshold, cand.node(b).threshold);
      out.log_proposal_ratio = 0.0;
      break;
    }
  }
  return out;
}

bool mh_tree_step(DecisionTree& tree, const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                  const Eigen::VectorXd& variances, const TreePrior& prior, const LeafPrior& leaf_prior,
                  const SplitRanges& ranges, Rng& rng, MoveType* move) {
  TreeProposal prop = propose_tree_move(tree, prior, ranges, rng);
  if (move) *move = prop.move;
  if (prop.noop) return false;
  const auto ml_new = tree_marginal_loglik(prop.candidate, X, residuals, variances, leaf_prior);
  if (!ml_new) return false;
  const auto ml_old = tree_marginal_loglik(tree, X, residuals, variances, leaf_prior);
  const double log_accept = tree_log_prior(prop.candidate, prior, ranges) - tree_log_prior(tree, prior, ranges) +
                            *ml_new - ml_old.value_or(kNegInf) + prop.log_proposal_ratio;
  if (std::log(rng.uniform()) < log_accept) {
    tree = std::move(prop.candidate);
    return true;
  }
  return false;
}

void sample_leaves(DecisionTree& tree, const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                   const Eigen::VectorXd& variances, const LeafPrior& leaf_prior, Rng& rng) {
  const auto rows = assign_rows(tree, X);
  const auto st = leaf_stats(tree, rows, residuals, variances);
  for (int i = 0; i < tree.size(); ++i) {
    if (!tree.node(i).leaf()) continue;
    const auto& s = st[static_cast<std::size_t>(i)];
    const double P = 1.0 / leaf_prior.variance + s.precision_sum;
    tree.node(i).value = s.weighted_sum / P + rng.normal() / std::sqrt(P);
  }
}

Forest Forest::stumps(int trees, Eigen::Index T) {
  Forest f;
  f.trees.assign(static_cast<std::size_t>(trees), DecisionTree(0.0));
  f.tree_fit.assign(static_cast<std::size_t>(trees), Eigen::VectorXd::Zero(T));
  f.fit = Eigen::VectorXd::Zero(T);
  return f;
}

void Forest::refresh(const Eigen::MatrixXd& X) {
  fit = Eigen::VectorXd::Zero(X.rows());
  tree_fit.resize(trees.size());
  for (std::size_t s = 0; s < trees.size(); ++s) {
    Eigen::VectorXd& f = tree_fit[s];
    f.resize(X.rows());
    for (Eigen::Index t = 0; t < X.rows(); ++t) f[t] = trees[s].node(leaf_of_row(trees[s], X, t)).value;
    fit += f;
  }
}

double Forest::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  double out = 0.0;
  for (const auto& tree : trees) out += tree.predict(x);
  return out;
}

Eigen::VectorXd partial_residuals(int s, const Eigen::VectorXd& target, const Forest& forest) {
  return target - (forest.fit - forest.tree_fit[static_cast<std::size_t>(s)]);
}

double ForestSweepStats::acceptance_rate() const {
  long p = 0;
  long a = 0;
  for (std::size_t m = 0; m < 4; ++m) {
    p += proposed[m];
    a += accepted[m];
  }
  return p > 0 ? static_cast<double>(a) / static_cast<double>(p) : 0.0;
}

ForestSweepStats& ForestSweepStats::operator+=(const ForestSweepStats& other) {
  for (std::size_t m = 0; m < 4; ++m) {
    proposed[m] += other.proposed[m];
    accepted[m] += other.accepted[m];
  }
  return *this;
}

void update_forest(Forest& forest, const Eigen::MatrixXd& X, const Eigen::VectorXd& target,
                   const Eigen::VectorXd& variances, const TreePrior& prior, const LeafPrior& leaf_prior,
                   const SplitRanges& ranges, Rng& rng, ForestSweepStats& stats) {
  if (forest.fit.size() != X.rows()) forest.refresh(X);
  for (int s = 0; s < forest.size(); ++s) {
    const auto su = static_cast<std::size_t>(s);
    const Eigen::VectorXd r = partial_residuals(s, target, forest);
    MoveType move = MoveType::grow;
    const bool accepted = mh_tree_step(forest.trees[su], X, r, variances, prior, leaf_prior, ranges, rng, &move);
    ++stats.proposed[static_cast<std::size_t>(move)];
    if (accepted) ++stats.accepted[static_cast<std::size_t>(move)];
    sample_leaves(forest.trees[su], X, r, variances, leaf_prior, rng);

    Eigen::VectorXd& f = forest.tree_fit[su];
    const auto& tree = forest.trees[su];
    for (Eigen::Index t = 0; t < X.rows(); ++t) {
      const double v = tree.node(leaf_of_row(tree, X, t)).value;
      forest.fit[t] += v - f[t];
      f[t] = v;
    }
  }
}

Eigen::VectorXd forest_predict(const std::vector<Forest>& forests, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(forests.size()));
  for (std::size_t i = 0; i < forests.size(); ++i) out[static_cast<Eigen::Index>(i)] = forests[i].predict(x);
  return out;
}

ForestMean::ForestMean(const std::vector<Forest>& forests, Eigen::Index k) : k_(k) {
  trees_.reserve(forests.size());
  for (const auto& f : forests) trees_.push_back(f.trees);
}

Eigen::VectorXd ForestMean::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != k_) throw InputError("forest: x has length " + std::to_string(x.size()) + ", expected " + std::to_string(k_));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(trees_.size()));
  for (std::size_t i = 0; i < trees_.size(); ++i)
    for (const auto& tree : trees_[i]) out[static_cast<Eigen::Index>(i)] += tree.predict(x);
  return out;
}

}  // namespace bscen
