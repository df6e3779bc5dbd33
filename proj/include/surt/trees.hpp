#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "surt/data.hpp"
#include "surt/rng.hpp"

namespace surt {

// Continuous rules send x[var] <= cut to the left child; categorical rules
// send level codes whose bit is set in mask to the left child (64 levels max).
struct SplitRule {
  int var = -1;
  bool categorical = false;
  double cut = 0.0;
  std::uint64_t mask = 0;
};

struct TreeNode {
  int parent = -1;
  int left = -1;  // leaf when < 0
  int right = -1;
  bool active = true;
  SplitRule rule;
  double mu = 0.0;
};

// Binary regression tree over slot-stable node ids. Freed slots are recycled,
// so listings are in canonical preorder rather than id order.
class Tree {
 public:
  Tree();

  int root() const { return 0; }
  bool is_leaf(int id) const { return nodes_[id].left < 0; }
  const TreeNode& node(int id) const { return nodes_[id]; }
  int storage_size() const { return static_cast<int>(nodes_.size()); }
  int node_count() const;
  int depth(int id) const;

  std::vector<int> leaves() const;
  std::vector<int> internals() const;
  // Internal nodes whose children are both leaves.
  std::vector<int> nog_nodes() const;
  std::vector<int> leaves_under(int id) const;

  double mu(int id) const { return nodes_[id].mu; }
  void set_mu(int id, double v) { nodes_[id].mu = v; }
  void set_rule(int id, const SplitRule& rule) { nodes_[id].rule = rule; }
  // Leaf values indexed by node id, sized to storage_size().
  void copy_mu(std::vector<double>& out) const;

  // Splits a leaf; returns the new (left, right) ids. prune() reverses a
  // grow at a no-grandchildren node; the ids the next grow hands out repeat,
  // so a rejected prune can restore the exact prior state.
  std::pair<int, int> grow(int leaf, const SplitRule& rule);
  void prune(int nog);

  int route_from(int start, const std::vector<std::vector<double>>& x,
                 int row) const;
  int route(const std::vector<std::vector<double>>& x, int row) const {
    return route_from(0, x, row);
  }
  double evaluate(const std::vector<std::vector<double>>& x, int row) const {
    return nodes_[route(x, row)].mu;
  }

  // Adds one count per internal node to per_var[rule.var].
  void count_splits(std::vector<int>& per_var) const;

  // Structure-and-rule fingerprint (leaf values excluded).
  std::string signature() const;

  void serialize(std::vector<unsigned char>& out) const;
  static Tree deserialize(const std::vector<unsigned char>& in, std::size_t& off);

 private:
  int alloc_node(int parent);

  std::vector<TreeNode> nodes_;
  std::vector<int> free_;
};

bool rule_sends_left(const SplitRule& rule,
                     const std::vector<std::vector<double>>& x, int row);

// Log marginal likelihood of one leaf's rows with the leaf value integrated
// out: n rows with residual sum w and residual square sum s, error variance v,
// leaf prior variance smu2.
double leaf_log_marginal(double n, double w, double s, double v, double smu2);
// The terms of leaf_log_marginal that change when a fixed row set is
// re-partitioned; the rest cancels in every move ratio.
double leaf_collapse_term(double n, double w, double v, double smu2);

// Sum of leaf_log_marginal over the tree's leaves.
double tree_log_marginal(const Tree& tree, const std::vector<int>& leaf_of_row,
                         const std::vector<double>& c, double v, double smu2);

// Draws a split rule for the given rows: a covariate uniform over those with
// a valid split here, then a uniform valid cut. Continuous cuts are the
// node-local distinct values less the maximum. Categorical splits order the
// present levels by the mean of c (ties by level code) and cut one of the
// gaps. Empty when no covariate admits a split. The same draw serves as the
// rule prior and the proposal, so rule probabilities cancel in move ratios.
std::optional<SplitRule> draw_split_rule(Rng& rng,
                                         const std::vector<std::vector<double>>& x,
                                         const std::vector<ColumnKind>& kinds,
                                         const std::vector<int>& rows,
                                         const std::vector<double>& c);

struct TreeMovePrior {
  double alpha = 0.95;
  double beta = 2.0;
  double leaf_sd = 0.1;
  double p_grow = 0.25;
  double p_prune = 0.25;
  double p_change = 0.5;
};

// A prediction design that mirrors the training tree: its assignments are
// re-routed whenever a structural move is accepted.
struct FollowerDesign {
  const std::vector<std::vector<double>>* x = nullptr;
  std::vector<int>* leaf_of_row = nullptr;
};

enum class TreeMoveType { Grow, Prune, Change };

struct TreeMoveResult {
  TreeMoveType type = TreeMoveType::Grow;
  bool accepted = false;
};

// One Metropolis-Hastings structure move. c holds the partial residuals less
// the conditional offsets, v the conditional error variance. A stump always
// proposes grow; otherwise the move type follows the configured
// probabilities. Change redraws the rule of a uniformly chosen internal node
// and rejects outright if re-routing empties a leaf under it.
TreeMoveResult propose_tree_move(Tree& tree,
                                 const std::vector<std::vector<double>>& x,
                                 const std::vector<ColumnKind>& kinds,
                                 std::vector<int>& leaf_of_row,
                                 const std::vector<double>& c, double v,
                                 const TreeMovePrior& prior, Rng& rng,
                                 const std::vector<FollowerDesign>& followers = {});

// Conjugate update of every leaf value given assignments and c.
void redraw_leaf_values(Tree& tree, const std::vector<int>& leaf_of_row,
                        const std::vector<double>& c, double v, double smu2,
                        Rng& rng);

}  // namespace surt
