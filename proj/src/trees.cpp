#include "surt/trees.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "surt/errors.hpp"

namespace surt {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

template <typename T>
void write_pod(std::vector<unsigned char>& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T read_pod(const std::vector<unsigned char>& in, std::size_t& off) {
  if (off + sizeof(T) > in.size())
    fail(ErrorCode::ParseError, "truncated tree record");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

Tree::Tree() { nodes_.push_back(TreeNode{}); }

int Tree::node_count() const {
  return static_cast<int>(nodes_.size() - free_.size());
}

int Tree::depth(int id) const {
  int d = 0;
  while (nodes_[id].parent >= 0) {
    id = nodes_[id].parent;
    ++d;
  }
  return d;
}

namespace {

template <typename F>
void preorder(const std::vector<TreeNode>& nodes, int start, F&& visit) {
  std::vector<int> stack = {start};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    visit(id);
    if (nodes[id].left >= 0) {
      stack.push_back(nodes[id].right);
      stack.push_back(nodes[id].left);
    }
  }
}

}  // namespace

std::vector<int> Tree::leaves() const {
  std::vector<int> out;
  preorder(nodes_, 0, [&](int id) {
    if (nodes_[id].left < 0) out.push_back(id);
  });
  return out;
}

std::vector<int> Tree::internals() const {
  std::vector<int> out;
  preorder(nodes_, 0, [&](int id) {
    if (nodes_[id].left >= 0) out.push_back(id);
  });
  return out;
}

std::vector<int> Tree::nog_nodes() const {
  std::vector<int> out;
  preorder(nodes_, 0, [&](int id) {
    const TreeNode& nd = nodes_[id];
    if (nd.left >= 0 && nodes_[nd.left].left < 0 && nodes_[nd.right].left < 0)
      out.push_back(id);
  });
  return out;
}

std::vector<int> Tree::leaves_under(int id) const {
  std::vector<int> out;
  preorder(nodes_, id, [&](int nid) {
    if (nodes_[nid].left < 0) out.push_back(nid);
  });
  return out;
}

void Tree::copy_mu(std::vector<double>& out) const {
  out.assign(nodes_.size(), 0.0);
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].active) out[i] = nodes_[i].mu;
}

int Tree::alloc_node(int parent) {
  int id;
  if (!free_.empty()) {
    id = free_.back();
    free_.pop_back();
    nodes_[id] = TreeNode{};
  } else {
    id = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
  }
  nodes_[id].parent = parent;
  return id;
}

std::pair<int, int> Tree::grow(int leaf, const SplitRule& rule) {
  if (!is_leaf(leaf)) fail(ErrorCode::InvalidArgument, "grow needs a leaf");
  const int l = alloc_node(leaf);
  const int r = alloc_node(leaf);
  // Children start at the parent's value so the tree's fitted function is
  // unchanged until the next leaf redraw.
  nodes_[l].mu = nodes_[leaf].mu;
  nodes_[r].mu = nodes_[leaf].mu;
  nodes_[leaf].left = l;
  nodes_[leaf].right = r;
  nodes_[leaf].rule = rule;
  return {l, r};
}

void Tree::prune(int nog) {
  const TreeNode& nd = nodes_[nog];
  if (nd.left < 0 || nodes_[nd.left].left >= 0 || nodes_[nd.right].left >= 0)
    fail(ErrorCode::InvalidArgument, "prune needs two leaf children");
  // Freed right-then-left so the next grow reallocates the same ids; the
  // node's mu field is left alone so a rejected grow restores state exactly.
  nodes_[nd.left].active = false;
  nodes_[nd.right].active = false;
  free_.push_back(nd.right);
  free_.push_back(nd.left);
  nodes_[nog].left = -1;
  nodes_[nog].right = -1;
}

bool rule_sends_left(const SplitRule& rule,
                     const std::vector<std::vector<double>>& x, int row) {
  const double val = x[rule.var][row];
  if (!rule.categorical) return val <= rule.cut;
  const int level = static_cast<int>(val);
  return (rule.mask >> level) & 1u;
}

int Tree::route_from(int start, const std::vector<std::vector<double>>& x,
                     int row) const {
  int id = start;
  while (nodes_[id].left >= 0)
    id = rule_sends_left(nodes_[id].rule, x, row) ? nodes_[id].left
                                                  : nodes_[id].right;
  return id;
}

void Tree::count_splits(std::vector<int>& per_var) const {
  preorder(nodes_, 0, [&](int id) {
    if (nodes_[id].left >= 0) ++per_var[nodes_[id].rule.var];
  });
}

namespace {

void signature_rec(const std::vector<TreeNode>& nodes, int id,
                   std::string& out) {
  const TreeNode& nd = nodes[id];
  if (nd.left < 0) {
    out += 'L';
    return;
  }
  char buf[64];
  if (nd.rule.categorical) {
    std::snprintf(buf, sizeof(buf), "(v%dm%llu", nd.rule.var,
                  static_cast<unsigned long long>(nd.rule.mask));
  } else {
    std::snprintf(buf, sizeof(buf), "(v%dc%.17g", nd.rule.var, nd.rule.cut);
  }
  out += buf;
  signature_rec(nodes, nd.left, out);
  signature_rec(nodes, nd.right, out);
  out += ')';
}

}  // namespace

std::string Tree::signature() const {
  std::string out;
  signature_rec(nodes_, 0, out);
  return out;
}

namespace {

void serialize_rec(const std::vector<TreeNode>& nodes, int id,
                   std::vector<unsigned char>& out) {
  const TreeNode& nd = nodes[id];
  if (nd.left < 0) {
    write_pod<std::uint8_t>(out, 0);
    write_pod<double>(out, nd.mu);
    return;
  }
  write_pod<std::uint8_t>(out, nd.rule.categorical ? 2 : 1);
  write_pod<std::int32_t>(out, nd.rule.var);
  if (nd.rule.categorical) {
    write_pod<std::uint64_t>(out, nd.rule.mask);
  } else {
    write_pod<double>(out, nd.rule.cut);
  }
  serialize_rec(nodes, nd.left, out);
  serialize_rec(nodes, nd.right, out);
}

void deserialize_rec(Tree& t, int id, const std::vector<unsigned char>& in,
                     std::size_t& off) {
  const auto tag = read_pod<std::uint8_t>(in, off);
  if (tag == 0) {
    t.set_mu(id, read_pod<double>(in, off));
    return;
  }
  if (tag != 1 && tag != 2) fail(ErrorCode::ParseError, "bad tree node tag");
  SplitRule rule;
  rule.var = read_pod<std::int32_t>(in, off);
  rule.categorical = tag == 2;
  if (rule.categorical) {
    rule.mask = read_pod<std::uint64_t>(in, off);
  } else {
    rule.cut = read_pod<double>(in, off);
  }
  const auto [l, r] = t.grow(id, rule);
  deserialize_rec(t, l, in, off);
  deserialize_rec(t, r, in, off);
}

}  // namespace

void Tree::serialize(std::vector<unsigned char>& out) const {
  serialize_rec(nodes_, 0, out);
}

Tree Tree::deserialize(const std::vector<unsigned char>& in, std::size_t& off) {
  Tree t;
  deserialize_rec(t, 0, in, off);
  return t;
}

double leaf_log_marginal(double n, double w, double s, double v, double smu2) {
  const double denom = v + n * smu2;
  return -0.5 * n * std::log(kTwoPi * v) + 0.5 * std::log(v / denom) -
         s / (2.0 * v) + smu2 * w * w / (2.0 * v * denom);
}

double leaf_collapse_term(double n, double w, double v, double smu2) {
  const double denom = v + n * smu2;
  return 0.5 * std::log(v / denom) + smu2 * w * w / (2.0 * v * denom);
}

double tree_log_marginal(const Tree& tree, const std::vector<int>& leaf_of_row,
                         const std::vector<double>& c, double v, double smu2) {
  std::vector<double> n(tree.storage_size(), 0.0), w(n), s(n);
  for (std::size_t i = 0; i < leaf_of_row.size(); ++i) {
    const int leaf = leaf_of_row[i];
    n[leaf] += 1.0;
    w[leaf] += c[i];
    s[leaf] += c[i] * c[i];
  }
  double total = 0.0;
  for (int leaf : tree.leaves())
    total += leaf_log_marginal(n[leaf], w[leaf], s[leaf], v, smu2);
  return total;
}

namespace {

// Splittable means at least two distinct values (or level codes) here.
bool column_splittable(const std::vector<double>& col,
                       const std::vector<int>& rows) {
  const double first = col[rows[0]];
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (col[rows[i]] != first) return true;
  return false;
}

bool leaf_growable(const std::vector<std::vector<double>>& x,
                   const std::vector<int>& rows) {
  if (rows.size() < 2) return false;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (column_splittable(x[k], rows)) return true;
  return false;
}

std::vector<std::vector<int>> bucket_rows(const Tree& tree,
                                          const std::vector<int>& leaf_of_row) {
  std::vector<std::vector<int>> buckets(tree.storage_size());
  for (std::size_t i = 0; i < leaf_of_row.size(); ++i)
    buckets[leaf_of_row[i]].push_back(static_cast<int>(i));
  return buckets;
}

double split_prob(int depth, const TreeMovePrior& prior) {
  return prior.alpha * std::pow(1.0 + depth, -prior.beta);
}

double grow_prob(const Tree& tree, const TreeMovePrior& prior) {
  return tree.node_count() == 1 ? 1.0 : prior.p_grow;
}

}  // namespace

std::optional<SplitRule> draw_split_rule(Rng& rng,
                                         const std::vector<std::vector<double>>& x,
                                         const std::vector<ColumnKind>& kinds,
                                         const std::vector<int>& rows,
                                         const std::vector<double>& c) {
  if (rows.size() < 2) return std::nullopt;
  std::vector<int> valid;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (column_splittable(x[k], rows))
      valid.push_back(static_cast<int>(k));
  if (valid.empty()) return std::nullopt;
  const int k = valid[rng.uniform_int(static_cast<int>(valid.size()))];

  SplitRule rule;
  rule.var = k;
  if (kinds[k] == ColumnKind::Continuous) {
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (int row : rows) vals.push_back(x[k][row]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    rule.cut = vals[rng.uniform_int(static_cast<int>(vals.size()) - 1)];
    return rule;
  }

  rule.categorical = true;
  double sum[64];
  int cnt[64];
  std::memset(sum, 0, sizeof(sum));
  std::memset(cnt, 0, sizeof(cnt));
  for (int row : rows) {
    const int level = static_cast<int>(x[k][row]);
    if (level < 0 || level >= 64)
      fail(ErrorCode::InvalidArgument,
           "categorical splits support at most 64 levels");
    sum[level] += c[row];
    ++cnt[level];
  }
  std::vector<std::pair<double, int>> ordered;
  for (int lv = 0; lv < 64; ++lv)
    if (cnt[lv] > 0) ordered.push_back({sum[lv] / cnt[lv], lv});
  std::sort(ordered.begin(), ordered.end());
  const int gap = rng.uniform_int(static_cast<int>(ordered.size()) - 1);
  for (int g = 0; g <= gap; ++g) rule.mask |= std::uint64_t{1} << ordered[g].second;
  return rule;
}

TreeMoveResult propose_tree_move(Tree& tree,
                                 const std::vector<std::vector<double>>& x,
                                 const std::vector<ColumnKind>& kinds,
                                 std::vector<int>& leaf_of_row,
                                 const std::vector<double>& c, double v,
                                 const TreeMovePrior& prior, Rng& rng,
                                 const std::vector<FollowerDesign>& followers) {
  const double pg = grow_prob(tree, prior);
  const double pp = tree.node_count() == 1 ? 0.0 : prior.p_prune;
  const double u_move = rng.uniform();
  TreeMoveResult res;
  res.type = u_move < pg ? TreeMoveType::Grow
             : u_move < pg + pp ? TreeMoveType::Prune
                                : TreeMoveType::Change;
  const double smu2 = prior.leaf_sd * prior.leaf_sd;
  const auto buckets = bucket_rows(tree, leaf_of_row);

  if (res.type == TreeMoveType::Grow) {
    std::vector<int> growable;
    for (int leaf : tree.leaves())
      if (leaf_growable(x, buckets[leaf])) growable.push_back(leaf);
    if (growable.empty()) return res;
    const int eta = growable[rng.uniform_int(static_cast<int>(growable.size()))];
    const auto rule = draw_split_rule(rng, x, kinds, buckets[eta], c);
    double nl = 0.0, wl = 0.0, nr = 0.0, wr = 0.0;
    for (int row : buckets[eta]) {
      if (rule_sends_left(*rule, x, row)) {
        nl += 1.0;
        wl += c[row];
      } else {
        nr += 1.0;
        wr += c[row];
      }
    }
    const double p_eta = split_prob(tree.depth(eta), prior);
    const double p_child = split_prob(tree.depth(eta) + 1, prior);
    const double log_ml = leaf_collapse_term(nl, wl, v, smu2) +
                          leaf_collapse_term(nr, wr, v, smu2) -
                          leaf_collapse_term(nl + nr, wl + wr, v, smu2);
    const auto [l, r] = tree.grow(eta, *rule);
    const double w_star = static_cast<double>(tree.nog_nodes().size());
    const double log_alpha =
        std::log(p_eta) + 2.0 * std::log(1.0 - p_child) -
        std::log(1.0 - p_eta) + log_ml + std::log(prior.p_prune) -
        std::log(pg) + std::log(static_cast<double>(growable.size())) -
        std::log(w_star);
    if (std::log(rng.uniform_pos()) < log_alpha) {
      res.accepted = true;
      for (int row : buckets[eta])
        leaf_of_row[row] = rule_sends_left(*rule, x, row) ? l : r;
      for (const auto& f : followers) {
        auto& assign = *f.leaf_of_row;
        for (std::size_t i = 0; i < assign.size(); ++i)
          if (assign[i] == eta)
            assign[i] = rule_sends_left(*rule, *f.x, static_cast<int>(i)) ? l : r;
      }
    } else {
      tree.prune(eta);
    }
    return res;
  }

  if (res.type == TreeMoveType::Prune) {
    const auto nogs = tree.nog_nodes();
    if (nogs.empty()) return res;
    const int eta = nogs[rng.uniform_int(static_cast<int>(nogs.size()))];
    const int l = tree.node(eta).left;
    const int r = tree.node(eta).right;
    const double nl = static_cast<double>(buckets[l].size());
    const double nr = static_cast<double>(buckets[r].size());
    double wl = 0.0, wr = 0.0;
    for (int row : buckets[l]) wl += c[row];
    for (int row : buckets[r]) wr += c[row];
    const double p_eta = split_prob(tree.depth(eta), prior);
    const double p_child = split_prob(tree.depth(eta) + 1, prior);
    const double log_ml = leaf_collapse_term(nl + nr, wl + wr, v, smu2) -
                          leaf_collapse_term(nl, wl, v, smu2) -
                          leaf_collapse_term(nr, wr, v, smu2);
    const SplitRule old_rule = tree.node(eta).rule;
    const double mu_l = tree.mu(l), mu_r = tree.mu(r);
    tree.prune(eta);
    std::vector<int> merged = buckets[l];
    merged.insert(merged.end(), buckets[r].begin(), buckets[r].end());
    double b_star = 0.0;
    for (int leaf : tree.leaves())
      if (leaf_growable(x, leaf == eta ? merged : buckets[leaf]))
        b_star += 1.0;
    const double log_alpha =
        -(std::log(p_eta) + 2.0 * std::log(1.0 - p_child) -
          std::log(1.0 - p_eta)) +
        log_ml + std::log(grow_prob(tree, prior)) - std::log(pp) +
        std::log(static_cast<double>(nogs.size())) - std::log(b_star);
    if (std::log(rng.uniform_pos()) < log_alpha) {
      res.accepted = true;
      for (int row : merged) leaf_of_row[row] = eta;
      for (const auto& f : followers) {
        auto& assign = *f.leaf_of_row;
        for (int& a : assign)
          if (a == l || a == r) a = eta;
      }
    } else {
      const auto [l2, r2] = tree.grow(eta, old_rule);
      tree.set_mu(l2, mu_l);
      tree.set_mu(r2, mu_r);
    }
    return res;
  }

  const auto internals = tree.internals();
  if (internals.empty()) return res;
  const int eta = internals[rng.uniform_int(static_cast<int>(internals.size()))];
  const auto under = tree.leaves_under(eta);
  std::vector<char> is_under(tree.storage_size(), 0);
  for (int leaf : under) is_under[leaf] = 1;
  std::vector<int> node_rows;
  for (int leaf : under)
    node_rows.insert(node_rows.end(), buckets[leaf].begin(), buckets[leaf].end());
  const auto rule = draw_split_rule(rng, x, kinds, node_rows, c);
  if (!rule) return res;
  const SplitRule old_rule = tree.node(eta).rule;
  tree.set_rule(eta, *rule);
  std::vector<double> n_new(tree.storage_size(), 0.0), w_new(n_new);
  std::vector<int> routed(node_rows.size());
  for (std::size_t idx = 0; idx < node_rows.size(); ++idx) {
    const int leaf = tree.route_from(eta, x, node_rows[idx]);
    routed[idx] = leaf;
    n_new[leaf] += 1.0;
    w_new[leaf] += c[node_rows[idx]];
  }
  for (int leaf : under) {
    if (n_new[leaf] == 0.0) {
      tree.set_rule(eta, old_rule);
      return res;
    }
  }
  double log_ml = 0.0;
  for (int leaf : under) {
    double w_old = 0.0;
    for (int row : buckets[leaf]) w_old += c[row];
    log_ml += leaf_collapse_term(n_new[leaf], w_new[leaf], v, smu2) -
              leaf_collapse_term(static_cast<double>(buckets[leaf].size()),
                                 w_old, v, smu2);
  }
  if (std::log(rng.uniform_pos()) < log_ml) {
    res.accepted = true;
    for (std::size_t idx = 0; idx < node_rows.size(); ++idx)
      leaf_of_row[node_rows[idx]] = routed[idx];
    for (const auto& f : followers) {
      auto& assign = *f.leaf_of_row;
      for (std::size_t i = 0; i < assign.size(); ++i)
        if (is_under[assign[i]])
          assign[i] = tree.route_from(eta, *f.x, static_cast<int>(i));
    }
  } else {
    tree.set_rule(eta, old_rule);
  }
  return res;
}

void redraw_leaf_values(Tree& tree, const std::vector<int>& leaf_of_row,
                        const std::vector<double>& c, double v, double smu2,
                        Rng& rng) {
  std::vector<double> n(tree.storage_size(), 0.0), w(n);
  for (std::size_t i = 0; i < leaf_of_row.size(); ++i) {
    n[leaf_of_row[i]] += 1.0;
    w[leaf_of_row[i]] += c[i];
  }
  for (int leaf : tree.leaves()) {
    const double denom = v + n[leaf] * smu2;
    const double mean = smu2 * w[leaf] / denom;
    const double var = v * smu2 / denom;
    tree.set_mu(leaf, rng.normal(mean, std::sqrt(var)));
  }
}

}  // namespace surt
