#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "support/stats_oracles.hpp"
#include "surt/errors.hpp"
#include "surt/trees.hpp"

using namespace surt;

namespace {

SplitRule cont_rule(int var, double cut) {
  SplitRule r;
  r.var = var;
  r.cut = cut;
  return r;
}

SplitRule cat_rule(int var, std::uint64_t mask) {
  SplitRule r;
  r.var = var;
  r.categorical = true;
  r.mask = mask;
  return r;
}

// Depth-two example: x <= 0.5 gives 0.2; otherwise x <= 0.7 gives 0.4, else 0.6.
Tree worked_tree() {
  Tree t;
  auto [l, r] = t.grow(0, cont_rule(0, 0.5));
  t.set_mu(l, 0.2);
  auto [rl, rr] = t.grow(r, cont_rule(0, 0.7));
  t.set_mu(rl, 0.4);
  t.set_mu(rr, 0.6);
  return t;
}

// Log marginal likelihood of one leaf by quadrature over the leaf value.
double leaf_ml_quadrature(const std::vector<double>& cs, double v, double smu2) {
  auto logf = [&](double mu) {
    double lf = -0.5 * std::log(2.0 * M_PI * smu2) - mu * mu / (2.0 * smu2);
    for (double cv : cs)
      lf += -0.5 * std::log(2.0 * M_PI * v) -
            (cv - mu) * (cv - mu) / (2.0 * v);
    return lf;
  };
  return oracle::log_integral_simpson(logf, -12.0, 12.0, 4000);
}

}  // namespace

TEST_CASE("routing follows split rules") {
  const Tree t = worked_tree();
  const std::vector<std::vector<double>> x = {{0.2, 0.55, 0.75, 0.5, 0.7}};
  CHECK(t.evaluate(x, 0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(t.evaluate(x, 1) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(t.evaluate(x, 2) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(t.evaluate(x, 3) == doctest::Approx(0.2).epsilon(1e-15));  // boundary left
  CHECK(t.evaluate(x, 4) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("categorical rules route by level bit") {
  Tree t;
  auto [l, r] = t.grow(0, cat_rule(0, (1u << 0) | (1u << 2)));
  t.set_mu(l, -1.0);
  t.set_mu(r, 1.0);
  const std::vector<std::vector<double>> x = {{0.0, 1.0, 2.0, 3.0}};
  CHECK(t.evaluate(x, 0) == -1.0);
  CHECK(t.evaluate(x, 1) == 1.0);
  CHECK(t.evaluate(x, 2) == -1.0);
  CHECK(t.evaluate(x, 3) == 1.0);
}

TEST_CASE("listings are preorder and ids are reused after prune") {
  Tree t;
  auto [a, b] = t.grow(0, cont_rule(0, 0.5));
  CHECK(a == 1);
  CHECK(b == 2);
  auto [c, d] = t.grow(b, cont_rule(0, 0.7));
  CHECK(c == 3);
  CHECK(d == 4);
  CHECK(t.node_count() == 5);
  CHECK(t.leaves() == std::vector<int>{1, 3, 4});
  CHECK(t.internals() == std::vector<int>{0, 2});
  CHECK(t.nog_nodes() == std::vector<int>{2});
  CHECK(t.leaves_under(2) == std::vector<int>{3, 4});
  CHECK(t.depth(0) == 0);
  CHECK(t.depth(2) == 1);
  CHECK(t.depth(4) == 2);

  t.prune(2);
  CHECK(t.node_count() == 3);
  CHECK(t.leaves() == std::vector<int>{1, 2});
  auto [c2, d2] = t.grow(2, cont_rule(0, 0.7));
  CHECK(c2 == 3);
  CHECK(d2 == 4);
  CHECK_THROWS_AS(t.prune(0), Error);  // root has grandchildren
  CHECK_THROWS_AS(t.grow(0, cont_rule(0, 0.1)), Error);
}

TEST_CASE("single-leaf marginal likelihood matches the collapsed normal") {
  // One observation c = 2 with v = 1 under a unit-variance leaf prior
  // collapses to N(2; 0, 2).
  const double got = leaf_log_marginal(1.0, 2.0, 4.0, 1.0, 1.0);
  const double want = -0.5 * std::log(4.0 * M_PI) - 1.0;
  CHECK(got == doctest::Approx(want).epsilon(1e-14));
  CHECK(got == doctest::Approx(leaf_ml_quadrature({2.0}, 1.0, 1.0)).epsilon(1e-9));
}

TEST_CASE("tree marginal likelihood matches per-leaf quadrature") {
  Tree t;
  auto [l, r] = t.grow(0, cont_rule(0, 0.3));
  t.grow(r, cont_rule(0, 0.6));
  (void)l;
  const std::vector<std::vector<double>> x = {
      {0.1, 0.25, 0.3, 0.45, 0.55, 0.7, 0.8, 0.95}};
  const std::vector<double> c = {0.3, -0.6, 0.2, 1.1, -0.4, 0.9, 0.05, -1.2};
  const double v = 0.7, smu2 = 0.2;
  std::vector<int> leaf_of_row(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    leaf_of_row[i] = t.route(x, static_cast<int>(i));
  const double got = tree_log_marginal(t, leaf_of_row, c, v, smu2);
  const double want = leaf_ml_quadrature({0.3, -0.6, 0.2}, v, smu2) +
                      leaf_ml_quadrature({1.1, -0.4}, v, smu2) +
                      leaf_ml_quadrature({0.9, 0.05, -1.2}, v, smu2);
  CHECK(got == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("collapse terms reproduce full marginal ratios on a partition") {
  // The dropped terms depend only on the pooled rows, so they cancel between
  // a split and its parent.
  const std::vector<double> c = {0.2, -1.0, 0.7, 1.5, -0.3};
  const double v = 0.9, smu2 = 0.3;
  auto stats = [&](int lo, int hi) {
    double n = 0, w = 0, s = 0;
    for (int i = lo; i < hi; ++i) {
      n += 1;
      w += c[i];
      s += c[i] * c[i];
    }
    return std::array<double, 3>{n, w, s};
  };
  const auto all = stats(0, 5), left = stats(0, 2), right = stats(2, 5);
  const double full_ratio =
      leaf_log_marginal(left[0], left[1], left[2], v, smu2) +
      leaf_log_marginal(right[0], right[1], right[2], v, smu2) -
      leaf_log_marginal(all[0], all[1], all[2], v, smu2);
  const double collapse_ratio = leaf_collapse_term(left[0], left[1], v, smu2) +
                                leaf_collapse_term(right[0], right[1], v, smu2) -
                                leaf_collapse_term(all[0], all[1], v, smu2);
  CHECK(full_ratio == doctest::Approx(collapse_ratio).epsilon(1e-12));
}

TEST_CASE("continuous rule draws cover the distinct cuts short of the max") {
  const std::vector<std::vector<double>> x = {{0.3, 0.1, 0.2, 0.3}};
  const std::vector<ColumnKind> kinds = {ColumnKind::Continuous};
  const std::vector<int> rows = {0, 1, 2, 3};
  const std::vector<double> c = {0, 0, 0, 0};
  std::set<double> cuts;
  for (int seed = 0; seed < 120; ++seed) {
    Rng rng(seed);
    const auto rule = draw_split_rule(rng, x, kinds, rows, c);
    REQUIRE(rule.has_value());
    CHECK_FALSE(rule->categorical);
    cuts.insert(rule->cut);
  }
  CHECK(cuts == std::set<double>{0.1, 0.2});

  Rng rng(5);
  const std::vector<std::vector<double>> flat = {{0.4, 0.4, 0.4}};
  CHECK_FALSE(draw_split_rule(rng, flat, kinds, {0, 1, 2}, c).has_value());
  CHECK_FALSE(draw_split_rule(rng, x, kinds, {0}, c).has_value());
}

TEST_CASE("categorical rule draws order levels by residual mean") {
  const std::vector<std::vector<double>> x = {{0, 0, 1, 1, 2, 2}};
  const std::vector<ColumnKind> kinds = {ColumnKind::Categorical};
  const std::vector<int> rows = {0, 1, 2, 3, 4, 5};
  // Level means: 3.0, 1.0, 2.0 -> ordered levels 1, 2, 0.
  const std::vector<double> c = {3.0, 3.0, 1.0, 1.0, 2.0, 2.0};
  std::set<std::uint64_t> masks;
  for (int seed = 0; seed < 120; ++seed) {
    Rng rng(seed);
    const auto rule = draw_split_rule(rng, x, kinds, rows, c);
    REQUIRE(rule.has_value());
    CHECK(rule->categorical);
    masks.insert(rule->mask);
  }
  CHECK(masks == std::set<std::uint64_t>{1u << 1, (1u << 1) | (1u << 2)});

  // Equal means fall back to level order.
  const std::vector<double> tied = {1.0, 1.0, 1.0, 1.0, 5.0, 5.0};
  masks.clear();
  for (int seed = 0; seed < 120; ++seed) {
    Rng rng(seed);
    masks.insert(draw_split_rule(rng, x, kinds, rows, tied)->mask);
  }
  CHECK(masks == std::set<std::uint64_t>{1u << 0, (1u << 0) | (1u << 1)});
}

TEST_CASE("leaf redraws have the conjugate posterior moments") {
  Tree t;
  const std::vector<int> leaf_of_row = {0};
  const std::vector<double> c = {2.0};
  Rng rng(404);
  const int n_draws = 50000;
  std::vector<double> draws(n_draws);
  for (int i = 0; i < n_draws; ++i) {
    redraw_leaf_values(t, leaf_of_row, c, 1.0, 1.0, rng);
    draws[i] = t.mu(0);
  }
  CHECK(oracle::mean(draws) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(oracle::variance(draws) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("serialization round trips structure and leaf values") {
  Rng rng(77);
  const std::vector<std::vector<double>> x = {
      {0.1, 0.9, 0.4, 0.6, 0.2, 0.8, 0.3, 0.7},
      {0, 1, 2, 3, 0, 1, 2, 3}};
  const std::vector<ColumnKind> kinds = {ColumnKind::Continuous,
                                         ColumnKind::Categorical};
  std::vector<double> c(8);
  for (auto& v : c) v = rng.normal();

  for (int round = 0; round < 20; ++round) {
    Tree t;
    std::vector<int> rows = {0, 1, 2, 3, 4, 5, 6, 7};
    // A few random grows at random leaves.
    for (int g = 0; g < 3; ++g) {
      const auto leaves = t.leaves();
      const int leaf = leaves[rng.uniform_int(static_cast<int>(leaves.size()))];
      std::vector<int> here;
      for (int i = 0; i < 8; ++i)
        if (t.route(x, i) == leaf) here.push_back(i);
      if (here.size() < 2) continue;
      const auto rule = draw_split_rule(rng, x, kinds, here, c);
      if (!rule) continue;
      t.grow(leaf, *rule);
    }
    for (int leaf : t.leaves()) t.set_mu(leaf, rng.normal());

    std::vector<unsigned char> blob;
    t.serialize(blob);
    std::size_t off = 0;
    const Tree back = Tree::deserialize(blob, off);
    CHECK(off == blob.size());
    CHECK(back.signature() == t.signature());
    for (int i = 0; i < 8; ++i) CHECK(back.evaluate(x, i) == t.evaluate(x, i));
  }

  std::vector<unsigned char> truncated = {1, 0, 0};
  std::size_t off = 0;
  CHECK_THROWS_AS(Tree::deserialize(truncated, off), Error);
}

TEST_CASE("split counts tally internal nodes per covariate") {
  Tree t;
  auto [l, r] = t.grow(0, cont_rule(0, 0.5));
  (void)l;
  auto [rl, rr] = t.grow(r, cont_rule(1, 0.2));
  (void)rr;
  t.grow(rl, cont_rule(1, 0.1));
  std::vector<int> counts(3, 0);
  t.count_splits(counts);
  CHECK(counts == std::vector<int>{1, 2, 0});
}

namespace {

// Exhaustive target distribution for the three-row, one-covariate problem.
// Reachable states: the stump, two one-split trees, and two two-split trees
// that induce the same partition of the rows.
std::map<std::string, double> three_row_target(
    const std::vector<std::string>& sig, const std::vector<double>& c,
    double v, double smu2, double alpha, double beta) {
  const double p0 = alpha;
  const double p1 = alpha * std::pow(2.0, -beta);
  const double p2 = alpha * std::pow(3.0, -beta);
  const double ml_s = leaf_ml_quadrature({c[0], c[1], c[2]}, v, smu2);
  const double ml_a =
      leaf_ml_quadrature({c[0]}, v, smu2) + leaf_ml_quadrature({c[1], c[2]}, v, smu2);
  const double ml_b =
      leaf_ml_quadrature({c[0], c[1]}, v, smu2) + leaf_ml_quadrature({c[2]}, v, smu2);
  const double ml_full = leaf_ml_quadrature({c[0]}, v, smu2) +
                         leaf_ml_quadrature({c[1]}, v, smu2) +
                         leaf_ml_quadrature({c[2]}, v, smu2);
  std::map<std::string, double> pi;
  pi[sig[0]] = (1.0 - p0) * std::exp(ml_s);
  // Root rule probability 1/2 (two candidate cuts), child rules forced.
  pi[sig[1]] = p0 * 0.5 * (1.0 - p1) * (1.0 - p1) * std::exp(ml_a);
  pi[sig[2]] = p0 * 0.5 * (1.0 - p1) * (1.0 - p1) * std::exp(ml_b);
  const double two_split =
      p0 * 0.5 * (1.0 - p1) * p1 * (1.0 - p2) * (1.0 - p2) * std::exp(ml_full);
  pi[sig[3]] = two_split;
  pi[sig[4]] = two_split;
  double z = 0.0;
  for (const auto& kv : pi) z += kv.second;
  for (auto& kv : pi) kv.second /= z;
  return pi;
}

void run_equilibrium_check(const std::vector<std::vector<double>>& x,
                           const std::vector<ColumnKind>& kinds,
                           const std::vector<std::string>& sig,
                           std::uint64_t seed) {
  const std::vector<double> c = {-0.5, 0.0, 0.75};
  const double v = 1.0, smu2 = 1.0;
  TreeMovePrior prior;
  prior.alpha = 0.95;
  prior.beta = 2.0;
  prior.leaf_sd = 1.0;
  const auto pi = three_row_target(sig, c, v, smu2, prior.alpha, prior.beta);

  Tree tree;
  std::vector<int> leaf_of_row = {0, 0, 0};
  Rng rng(seed);
  std::map<std::string, long> tally;
  const int n_iter = 400000;
  for (int it = 0; it < n_iter; ++it) {
    propose_tree_move(tree, x, kinds, leaf_of_row, c, v, prior, rng);
    ++tally[tree.signature()];
  }
  for (const auto& kv : tally) {
    INFO("state ", kv.first);
    REQUIRE(pi.count(kv.first) == 1);  // nothing outside the reachable set
  }
  for (const auto& kv : pi) {
    const double freq =
        tally.count(kv.first) ? tally[kv.first] / double(n_iter) : 0.0;
    INFO("state ", kv.first, " target ", kv.second, " observed ", freq);
    CHECK(std::fabs(freq - kv.second) < 0.012);
  }
  // Assignments stay consistent with routing throughout.
  for (int i = 0; i < 3; ++i) CHECK(leaf_of_row[i] == tree.route(x, i));
}

}  // namespace

TEST_CASE("move chain reaches the enumerated equilibrium (continuous)") {
  const std::vector<std::vector<double>> x = {{0.25, 0.5, 0.75}};
  run_equilibrium_check(
      x, {ColumnKind::Continuous},
      {"L", "(v0c0.25LL)", "(v0c0.5LL)", "(v0c0.25L(v0c0.5LL))",
       "(v0c0.5(v0c0.25LL)L)"},
      91);
}

TEST_CASE("move chain reaches the enumerated equilibrium (categorical)") {
  // Level residual means increase with the level code, so the induced
  // orderings and masks mirror the continuous case exactly.
  const std::vector<std::vector<double>> x = {{0, 1, 2}};
  run_equilibrium_check(
      x, {ColumnKind::Categorical},
      {"L", "(v0m1LL)", "(v0m3LL)", "(v0m1L(v0m2LL))", "(v0m3(v0m1LL)L)"},
      92);
}

TEST_CASE("long move runs keep assignments, occupancy, and followers exact") {
  Rng data_rng(2718);
  const int n = 50;
  std::vector<std::vector<double>> x(3, std::vector<double>(n));
  std::vector<std::vector<double>> x_eval(3, std::vector<double>(17));
  for (int i = 0; i < n; ++i) {
    x[0][i] = data_rng.uniform();
    x[1][i] = data_rng.normal();
    x[2][i] = data_rng.uniform_int(4);
  }
  for (int i = 0; i < 17; ++i) {
    x_eval[0][i] = data_rng.uniform();
    x_eval[1][i] = data_rng.normal();
    x_eval[2][i] = data_rng.uniform_int(4);
  }
  const std::vector<ColumnKind> kinds = {
      ColumnKind::Continuous, ColumnKind::Continuous, ColumnKind::Categorical};
  std::vector<double> c(n);
  for (auto& v : c) v = data_rng.normal();

  Tree tree;
  std::vector<int> leaf_of_row(n, 0);
  std::vector<int> eval_assign(17, 0);
  std::vector<FollowerDesign> followers = {{&x_eval, &eval_assign}};
  TreeMovePrior prior;
  prior.leaf_sd = 0.2;
  Rng rng(314159);
  int accepted[3] = {0, 0, 0};
  for (int it = 0; it < 5000; ++it) {
    const auto res = propose_tree_move(tree, x, kinds, leaf_of_row, c, 1.0,
                                       prior, rng, followers);
    if (res.accepted) ++accepted[static_cast<int>(res.type)];
    redraw_leaf_values(tree, leaf_of_row, c, 1.0,
                       prior.leaf_sd * prior.leaf_sd, rng);
    if (it % 100 == 99) {
      std::vector<int> occupancy(tree.storage_size(), 0);
      for (int i = 0; i < n; ++i) {
        CHECK(leaf_of_row[i] == tree.route(x, i));
        ++occupancy[leaf_of_row[i]];
      }
      const auto leaves = tree.leaves();
      for (int leaf : leaves) CHECK(occupancy[leaf] >= 1);
      CHECK(tree.node_count() == 2 * static_cast<int>(leaves.size()) - 1);
      for (int i = 0; i < 17; ++i) CHECK(eval_assign[i] == tree.route(x_eval, i));
    }
  }
  CHECK(accepted[0] > 0);
  CHECK(accepted[1] > 0);
  CHECK(accepted[2] > 0);
}
