#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "hazardlean/error.hpp"

namespace hazardlean {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct BoostParams {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double min_leaf_hessian = 20.0;  // squared loss: a row count
  double l2 = 1.0;
  int max_bins = 32;
  double max_leaf_step = 0.0;  // 0 = unrestricted Newton leaf values

  nlohmann::json to_json() const {
    return {{"n_trees", n_trees},       {"max_depth", max_depth},
            {"learning_rate", learning_rate}, {"min_leaf_hessian", min_leaf_hessian},
            {"l2", l2},                 {"max_bins", max_bins},
            {"max_leaf_step", max_leaf_step}};
  }
};

/** Quantile cut points per feature. bin(v) = number of cuts strictly below v. */
class FeatureBinner {
 public:
  FeatureBinner() = default;

  FeatureBinner(const RowMatrix& x, int max_bins) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto p = static_cast<std::size_t>(x.cols());
    cuts_.resize(p);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < p; ++k) {
      for (std::size_t i = 0; i < n; ++i) col[i] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      std::sort(col.begin(), col.end());
      std::vector<double> uniq;
      for (double v : col)
        if (uniq.empty() || v > uniq.back()) uniq.push_back(v);
      auto& c = cuts_[k];
      if (uniq.size() <= static_cast<std::size_t>(max_bins)) {
        for (std::size_t u = 0; u + 1 < uniq.size(); ++u) c.push_back(0.5 * (uniq[u] + uniq[u + 1]));
      } else {
        for (int b = 1; b < max_bins; ++b) {
          const double v = col[static_cast<std::size_t>(static_cast<double>(b) / max_bins * static_cast<double>(n - 1))];
          if (c.empty() || v > c.back()) c.push_back(v);
        }
        if (!c.empty() && c.back() >= uniq.back()) c.pop_back();
      }
    }
  }

  std::size_t features() const { return cuts_.size(); }
  const std::vector<double>& cuts(std::size_t k) const { return cuts_[k]; }

  std::uint8_t bin(std::size_t k, double v) const {
    const auto& c = cuts_[k];
    return static_cast<std::uint8_t>(std::lower_bound(c.begin(), c.end(), v) - c.begin());
  }

  // column-major codes: codes[k * n + i]
  std::vector<std::uint8_t> transform(const RowMatrix& x) const {
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<std::uint8_t> codes(n * cuts_.size());
    for (std::size_t k = 0; k < cuts_.size(); ++k)
      for (std::size_t i = 0; i < n; ++i)
        codes[k * n + i] = bin(k, x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
    return codes;
  }

 private:
  std::vector<std::vector<double>> cuts_;
};

struct TreeNode {
  int feature = -1;  // -1: leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

class RegressionTree {
 public:
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(at)];
      at = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& nd : nodes)
      arr.push_back({{"feature", nd.feature}, {"threshold", nd.threshold}, {"left", nd.left},
                     {"right", nd.right}, {"value", nd.value}});
    return arr;
  }
};

namespace detail {

struct HistCell {
  double g = 0.0, h = 0.0;
};

// Grows one tree on gradients/hessians with histogram splits. Leaf values are
// scaled Newton steps. row_leaf receives the final leaf of every row.
inline RegressionTree grow_tree(const FeatureBinner& binner, const std::vector<std::uint8_t>& codes,
                                std::size_t n, std::span<const double> g, std::span<const double> h,
                                const BoostParams& par, std::vector<int>& row_node) {
  const std::size_t p = binner.features();
  RegressionTree tree;
  tree.nodes.push_back({});
  row_node.assign(n, 0);

  struct Open {
    int node;
    double g, h;
  };
  double g0 = 0.0, h0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    g0 += g[i];
    h0 += h[i];
  }
  std::vector<Open> open{{0, g0, h0}};
  std::vector<int> split_bin(1, -1);

  auto leaf_value = [&](double gs, double hs) {
    double v = -gs / (hs + par.l2);
    if (par.max_leaf_step > 0.0) v = std::clamp(v, -par.max_leaf_step, par.max_leaf_step);
    return par.learning_rate * v;
  };

  for (int depth = 0; depth < par.max_depth && !open.empty(); ++depth) {
    // slot of each open node
    std::vector<int> slot(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < open.size(); ++s) slot[static_cast<std::size_t>(open[s].node)] = static_cast<int>(s);
    const std::size_t nb = 256;
    std::vector<HistCell> hist(open.size() * p * nb);
    for (std::size_t k = 0; k < p; ++k) {
      const std::uint8_t* col = &codes[k * n];
      for (std::size_t i = 0; i < n; ++i) {
        const int s = slot[static_cast<std::size_t>(row_node[i])];
        if (s < 0) continue;
        auto& c = hist[(static_cast<std::size_t>(s) * p + k) * nb + col[i]];
        c.g += g[i];
        c.h += h[i];
      }
    }
    std::vector<Open> next;
    for (std::size_t s = 0; s < open.size(); ++s) {
      const auto& op = open[s];
      const double parent = op.g * op.g / (op.h + par.l2);
      double best_gain = 1e-12;
      int best_k = -1, best_b = -1;
      double bgl = 0, bhl = 0;
      for (std::size_t k = 0; k < p; ++k) {
        const auto& cuts = binner.cuts(k);
        double gl = 0.0, hl = 0.0;
        for (std::size_t b = 0; b < cuts.size(); ++b) {
          const auto& c = hist[(s * p + k) * nb + b];
          gl += c.g;
          hl += c.h;
          const double gr = op.g - gl, hr = op.h - hl;
          if (hl < par.min_leaf_hessian || hr < par.min_leaf_hessian) continue;
          const double gain = gl * gl / (hl + par.l2) + gr * gr / (hr + par.l2) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best_k = static_cast<int>(k);
            best_b = static_cast<int>(b);
            bgl = gl;
            bhl = hl;
          }
        }
      }
      auto& node = tree.nodes[static_cast<std::size_t>(op.node)];
      if (best_k < 0) {
        node.value = leaf_value(op.g, op.h);
        continue;
      }
      node.feature = best_k;
      node.threshold = binner.cuts(static_cast<std::size_t>(best_k))[static_cast<std::size_t>(best_b)];
      const int l = static_cast<int>(tree.nodes.size());
      node.left = l;
      node.right = l + 1;
      // node reference may dangle after push_back
      split_bin[static_cast<std::size_t>(op.node)] = best_b;
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      split_bin.resize(tree.nodes.size(), -1);
      next.push_back({l, bgl, bhl});
      next.push_back({l + 1, op.g - bgl, op.h - bhl});
    }
    // route rows of split nodes
    for (std::size_t i = 0; i < n; ++i) {
      const auto& nd = tree.nodes[static_cast<std::size_t>(row_node[i])];
      if (nd.feature < 0) continue;
      const std::uint8_t c = codes[static_cast<std::size_t>(nd.feature) * n + i];
      // v <= cuts[b] iff code <= b
      row_node[i] = c <= split_bin[static_cast<std::size_t>(row_node[i])] ? nd.left : nd.right;
    }
    open = std::move(next);
  }
  for (const auto& op : open) tree.nodes[static_cast<std::size_t>(op.node)].value = leaf_value(op.g, op.h);
  return tree;
}

}  // namespace detail

/**
 * Additive tree ensemble F(x) = base + sum of trees. base is a constant
 * (squared loss) and the Poisson fit additionally takes per-row offsets.
 */
class TreeEnsemble {
 public:
  double base = 0.0;
  std::vector<RegressionTree> trees;

  double predict(std::span<const double> row) const {
    double f = base;
    for (const auto& t : trees) f += t.predict(row);
    return f;
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : trees) arr.push_back(t.to_json());
    return {{"base", base}, {"trees", arr}};
  }
};

/** Least-squares gradient boosting. */
inline TreeEnsemble boost_squared(const RowMatrix& x, std::span<const double> y, const BoostParams& par) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (y.size() != n) throw DimensionError("boost_squared: rows and response differ");
  if (n == 0) throw DimensionError("boost_squared: no rows");
  TreeEnsemble ens;
  double m = 0.0;
  for (double v : y) m += v;
  ens.base = m / static_cast<double>(n);
  const FeatureBinner binner(x, par.max_bins);
  const auto codes = binner.transform(x);
  std::vector<double> f(n, ens.base), g(n), h(n, 1.0);
  std::vector<int> row_node;
  for (int t = 0; t < par.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) g[i] = f[i] - y[i];
    auto tree = detail::grow_tree(binner, codes, n, g, h, par, row_node);
    for (std::size_t i = 0; i < n; ++i) f[i] += tree.nodes[static_cast<std::size_t>(row_node[i])].value;
    ens.trees.push_back(std::move(tree));
  }
  return ens;
}

/**
 * Poisson boosting of a log-rate with exposure: loss sum exp(eta) w - y eta,
 * eta = offset + F(x). Returns F with base 0.
 */
inline TreeEnsemble boost_poisson(const RowMatrix& x, std::span<const double> y,
                                  std::span<const double> offset, double exposure,
                                  const BoostParams& par) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (y.size() != n || offset.size() != n) throw DimensionError("boost_poisson: size mismatch");
  TreeEnsemble ens;
  const FeatureBinner binner(x, par.max_bins);
  const auto codes = binner.transform(x);
  std::vector<double> eta(offset.begin(), offset.end()), g(n), h(n);
  std::vector<int> row_node;
  for (int t = 0; t < par.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double mu = std::exp(std::min(eta[i], 30.0)) * exposure;
      g[i] = mu - y[i];
      h[i] = mu;
    }
    auto tree = detail::grow_tree(binner, codes, n, g, h, par, row_node);
    for (std::size_t i = 0; i < n; ++i) eta[i] += tree.nodes[static_cast<std::size_t>(row_node[i])].value;
    ens.trees.push_back(std::move(tree));
  }
  return ens;
}

}  // namespace hazardlean
