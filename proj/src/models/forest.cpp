#include "relapse/models/forest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "relapse/errors.hpp"
#include "relapse/nn/param_io.hpp"
#include "relapse/rng.hpp"

namespace relapse::models {

void ForestConfig::validate() const {
  if (n_trees == 0) throw UsageError("forest config: n_trees must be >= 1");
  if (min_samples_leaf == 0) throw UsageError("forest config: min_samples_leaf must be >= 1");
}

double DecisionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    if (static_cast<std::size_t>(n.feature) >= x.size()) throw ShapeError("tree predict: feature index out of range");
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].leaf_value;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

double RandomForest::predict_proba(std::span<const double> x) const {
  if (x.size() != n_features) throw ShapeError("forest predict: expected " + std::to_string(n_features) + " features");
  std::size_t votes = 0;
  for (const auto& t : trees) votes += t.predict(x) >= 0.5;
  return static_cast<double>(votes) / static_cast<double>(trees.size());
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

double gini(double pos, double n) {
  if (n <= 0.0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

class Builder {
 public:
  Builder(std::span<const std::vector<double>> x, std::span<const int> y, const ForestConfig& cfg, std::uint64_t seed)
      : x_(x), y_(y), cfg_(cfg), rng_(seed) {
    d_ = x.front().size();
    k_ = cfg.features_per_split ? std::min(cfg.features_per_split, d_)
                                : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d_)))));
  }

  int grow(std::vector<std::size_t>& idx, std::size_t depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::size_t pos = 0;
    for (std::size_t i : idx) pos += y_[i] != 0;
    const double n = static_cast<double>(idx.size());
    tree.nodes[static_cast<std::size_t>(id)].leaf_value = static_cast<double>(pos) / n;
    const bool pure = pos == 0 || pos == idx.size();
    const bool too_deep = cfg_.max_depth != 0 && depth >= cfg_.max_depth;
    if (pure || too_deep || idx.size() < 2 * cfg_.min_samples_leaf) return id;
    const Split s = best_split(idx, pos);
    if (s.feature < 0) return id;
    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) {
      (x_[i][static_cast<std::size_t>(s.feature)] <= s.threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  DecisionTree tree;

 private:
  // Features are visited in a random order; the first k are always examined and
  // the search continues past k only while no valid split has been found.
  Split best_split(const std::vector<std::size_t>& idx, std::size_t pos) {
    std::vector<std::size_t> features(d_);
    std::iota(features.begin(), features.end(), 0);
    rng_.shuffle(features);
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, int>> vals(idx.size());
    const double n = static_cast<double>(idx.size());
    for (std::size_t fi = 0; fi < d_; ++fi) {
      if (fi >= k_ && best.feature >= 0) break;
      const std::size_t f = features[fi];
      for (std::size_t j = 0; j < idx.size(); ++j) vals[j] = {x_[idx[j]][f], y_[idx[j]] != 0};
      std::sort(vals.begin(), vals.end());
      double left_pos = 0.0;
      for (std::size_t j = 0; j + 1 < vals.size(); ++j) {
        left_pos += vals[j].second;
        const std::size_t nl = j + 1, nr = vals.size() - nl;
        if (vals[j].first == vals[j + 1].first) continue;
        if (nl < cfg_.min_samples_leaf || nr < cfg_.min_samples_leaf) continue;
        const double imp = (static_cast<double>(nl) * gini(left_pos, static_cast<double>(nl)) +
                            static_cast<double>(nr) * gini(static_cast<double>(pos) - left_pos, static_cast<double>(nr))) / n;
        if (imp < best.impurity) {
          best.impurity = imp;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (vals[j].first + vals[j + 1].first);
          // Guard against the midpoint rounding onto the upper value.
          if (best.threshold >= vals[j + 1].first) best.threshold = vals[j].first;
        }
      }
    }
    return best;
  }

  std::span<const std::vector<double>> x_;
  std::span<const int> y_;
  const ForestConfig& cfg_;
  Rng rng_;
  std::size_t d_ = 0;
  std::size_t k_ = 0;
};

}  // namespace

DecisionTree build_tree(std::span<const std::vector<double>> x, std::span<const int> y,
                        std::span<const std::size_t> sample, const ForestConfig& config, std::uint64_t seed) {
  if (sample.empty()) throw std::invalid_argument("build_tree: empty sample");
  Builder b(x, y, config, seed);
  std::vector<std::size_t> idx(sample.begin(), sample.end());
  b.grow(idx, 0);
  return std::move(b.tree);
}

RandomForest train_forest(std::span<const std::vector<double>> x, std::span<const int> y, const ForestConfig& config) {
  config.validate();
  if (x.size() != y.size()) throw ShapeError("train_forest: rows/labels length mismatch");
  if (x.empty()) throw std::invalid_argument("train_forest: no training rows");
  const std::size_t d = x.front().size();
  for (const auto& r : x) {
    if (r.size() != d) throw ShapeError("train_forest: ragged feature rows");
  }
  const auto pos = static_cast<std::size_t>(std::count_if(y.begin(), y.end(), [](int v) { return v != 0; }));
  if (pos == 0 || pos == y.size()) throw std::invalid_argument("train_forest: single-class training subset");
  RandomForest forest;
  forest.n_features = d;
  forest.config = config;
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    std::vector<std::size_t> sample(x.size());
    if (config.bootstrap) {
      Rng rng(derive_seed(config.seed, {0xB007, t}));
      for (auto& s : sample) s = static_cast<std::size_t>(rng.below(x.size()));
    } else {
      std::iota(sample.begin(), sample.end(), 0);
    }
    forest.trees.push_back(build_tree(x, y, sample, config, derive_seed(config.seed, {0x7EE, t})));
  }
  return forest;
}

void write_forest(std::ostream& out, const RandomForest& forest, const std::string& normalizer_digest) {
  const auto& c = forest.config;
  out << "RPNET-FOREST v1\n";
  out << "# family: rf\n";
  out << "# config: n_trees=" << c.n_trees << " max_depth=" << c.max_depth << " min_samples_leaf=" << c.min_samples_leaf
      << " features_per_split=" << c.features_per_split << " bootstrap=" << (c.bootstrap ? 1 : 0) << "\n";
  out << "# seed: " << c.seed << "\n";
  out << "# normalizer_digest: " << normalizer_digest << "\n";
  out << "# n_features: " << forest.n_features << "\n";
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const auto& nodes = forest.trees[t].nodes;
    out << "tree " << t << " " << nodes.size() << "\n";
    for (const auto& n : nodes) {
      out << n.feature << "," << nn::format_double(n.threshold) << "," << n.left << "," << n.right << ","
          << nn::format_double(n.leaf_value) << "\n";
    }
  }
}

RandomForest read_forest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "RPNET-FOREST v1") throw DataError("forest file: bad header");
  RandomForest f;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon == std::string::npos) continue;
      const std::string key = line.substr(2, colon - 2), value = line.substr(colon + 2);
      if (key == "seed") f.config.seed = std::stoull(value);
      if (key == "n_features") f.n_features = std::stoul(value);
      continue;
    }
    std::istringstream head(line);
    std::string word;
    std::size_t index = 0, count = 0;
    if (!(head >> word >> index >> count) || word != "tree" || index != f.trees.size()) {
      throw DataError("forest file: malformed tree header '" + line + "'");
    }
    DecisionTree t;
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::getline(in, line)) throw DataError("forest file: truncated tree");
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      TreeNode n;
      if (!(row >> n.feature >> n.threshold >> n.left >> n.right >> n.leaf_value)) {
        throw DataError("forest file: malformed node row");
      }
      t.nodes.push_back(n);
    }
    f.trees.push_back(std::move(t));
  }
  f.config.n_trees = f.trees.size();
  if (f.trees.empty()) throw DataError("forest file: no trees");
  return f;
}

}  // namespace relapse::models
