// Copyright 2026 The xptrav Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "xptrav/binary_io.hpp"
#include "xptrav/memory.hpp"

namespace xptrav {

namespace {

constexpr char kMemoryMagic[5] = "TMM1";

double squared_distance(const FeatureVector& a, const FeatureVector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double squared_norm(const FeatureVector& v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) acc += v[i] * v[i];
  return acc;
}

Prediction nearest_of(const std::vector<FeatureVector>& centroids, const FeatureVector& v) {
  if (centroids.empty()) throw EmptyMemoryError();
  std::uint32_t best = 0;
  double best_d2 = squared_distance(v, centroids[0]);
  for (std::uint32_t id = 1; id < centroids.size(); ++id) {
    const double d2 = squared_distance(v, centroids[id]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = id;
    }
  }
  return {centroids[best], std::sqrt(best_d2), best};
}

}  // namespace

// ─── ClusteringFeature ──────────────────────────────────────────────────────

ClusteringFeature ClusteringFeature::of(const FeatureVector& v) {
  ClusteringFeature cf;
  cf.count = 1;
  cf.linear_sum = v;
  cf.square_sum = squared_norm(v);
  return cf;
}

ClusteringFeature& ClusteringFeature::operator+=(const ClusteringFeature& other) {
  count += other.count;
  for (std::size_t i = 0; i < kFeatureDim; ++i) linear_sum[i] += other.linear_sum[i];
  square_sum += other.square_sum;
  return *this;
}

FeatureVector ClusteringFeature::centroid() const {
  FeatureVector c;
  const auto n = static_cast<double>(count);
  for (std::size_t i = 0; i < kFeatureDim; ++i) c[i] = linear_sum[i] / n;
  return c;
}

double ClusteringFeature::radius() const {
  if (count <= 1) return 0.0;
  const auto n = static_cast<double>(count);
  const double mean_sq = square_sum / n;
  const double r2 = mean_sq - squared_norm(centroid());
  // Rounding in the running sums bounds how small a radius this formula can
  // resolve: roughly (N + dim) ulps of SS/N.
  const double floor =
      2.0 * (n + static_cast<double>(kFeatureDim)) * std::numeric_limits<double>::epsilon() * mean_sq;
  return r2 > floor ? std::sqrt(r2) : 0.0;
}

// ─── CenterSet ──────────────────────────────────────────────────────────────

Prediction CenterSet::nearest(const FeatureVector& v) const { return nearest_of(centroids_, v); }

// ─── CfTree ─────────────────────────────────────────────────────────────────

CfTree::CfTree(double threshold, int branching_factor)
    : threshold_(threshold), branching_(branching_factor) {
  if (!(threshold > 0.0) || !std::isfinite(threshold)) {
    throw std::invalid_argument("CF-tree threshold must be positive");
  }
  if (branching_factor < 2) throw std::invalid_argument("CF-tree branching factor must be >= 2");
  nodes_.push_back(Node{true, {}});
}

std::uint64_t CfTree::total_count() const {
  std::uint64_t total = 0;
  for (const auto& cf : subclusters_) total += cf.count;
  return total;
}

std::uint32_t CfTree::new_subcluster(const ClusteringFeature& cf) {
  const auto id = static_cast<std::uint32_t>(subclusters_.size());
  subclusters_.push_back(cf);
  centroids_.push_back(cf.centroid());
  return id;
}

ClusteringFeature CfTree::node_sum(int node) const {
  ClusteringFeature sum;
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  for (const Entry& e : n.entries) sum += entry_cf(n, e);
  return sum;
}

InsertOutcome CfTree::insert(const FeatureVector& v) {
  if (!v.all_finite()) throw std::invalid_argument("cannot insert a non-finite feature vector");
  InsertOutcome outcome;
  Split split{};
  if (insert_into(root_, ClusteringFeature::of(v), true, outcome, split)) {
    Node root{false, {}};
    for (int child : {split.left, split.right}) {
      Entry e;
      e.cf = node_sum(child);
      e.child = child;
      root.entries.push_back(e);
    }
    nodes_.push_back(std::move(root));
    root_ = static_cast<int>(nodes_.size()) - 1;
  }
  return outcome;
}

std::uint32_t CfTree::insert_subcluster(const ClusteringFeature& cf) {
  if (cf.count == 0) throw std::invalid_argument("cannot insert an empty clustering feature");
  if (!cf.linear_sum.all_finite() || !std::isfinite(cf.square_sum)) {
    throw std::invalid_argument("cannot insert a non-finite clustering feature");
  }
  InsertOutcome outcome;
  Split split{};
  if (insert_into(root_, cf, false, outcome, split)) {
    Node root{false, {}};
    for (int child : {split.left, split.right}) {
      Entry e;
      e.cf = node_sum(child);
      e.child = child;
      root.entries.push_back(e);
    }
    nodes_.push_back(std::move(root));
    root_ = static_cast<int>(nodes_.size()) - 1;
  }
  return outcome.id;
}

// Returns true when `node` overflowed and was split into split.left/right.
bool CfTree::insert_into(int node, const ClusteringFeature& cf, bool allow_merge,
                         InsertOutcome& outcome, Split& split) {
  const FeatureVector point = cf.centroid();
  const auto closest_entry = [&](const Node& n) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n.entries.size(); ++i) {
      const double d2 = squared_distance(point, entry_centroid(n, n.entries[i]));
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    return best;
  };

  if (nodes_[static_cast<std::size_t>(node)].leaf) {
    Node& leaf = nodes_[static_cast<std::size_t>(node)];
    if (allow_merge && !leaf.entries.empty()) {
      const std::uint32_t id = leaf.entries[closest_entry(leaf)].subcluster;
      const ClusteringFeature merged = subclusters_[id] + cf;
      if (merged.radius() <= threshold_) {
        subclusters_[id] = merged;
        centroids_[id] = merged.centroid();
        outcome = {InsertOutcome::Kind::absorbed, id};
        return false;
      }
    }
    Entry e;
    e.subcluster = new_subcluster(cf);
    outcome = {InsertOutcome::Kind::created, e.subcluster};
    leaf.entries.push_back(e);
  } else {
    const std::size_t slot = closest_entry(nodes_[static_cast<std::size_t>(node)]);
    const int child = nodes_[static_cast<std::size_t>(node)].entries[slot].child;
    Split child_split{};
    const bool child_overflowed = insert_into(child, cf, allow_merge, outcome, child_split);
    Node& inner = nodes_[static_cast<std::size_t>(node)];
    if (!child_overflowed) {
      inner.entries[slot].cf += cf;
      return false;
    }
    Entry left;
    left.child = child_split.left;
    left.cf = node_sum(child_split.left);
    Entry right;
    right.child = child_split.right;
    right.cf = node_sum(child_split.right);
    inner.entries[slot] = left;
    inner.entries.push_back(right);
  }

  if (static_cast<int>(nodes_[static_cast<std::size_t>(node)].entries.size()) <= branching_) {
    return false;
  }
  split = split_node(node);
  return true;
}

// Farthest-pair seeding: the two entries with the largest centroid distance
// seed the halves (first pair found wins ties); the rest go to the nearer
// seed, ties to the first.
CfTree::Split CfTree::split_node(int node) {
  Node old = std::move(nodes_[static_cast<std::size_t>(node)]);
  const std::size_t count = old.entries.size();
  std::vector<FeatureVector> centroids(count);
  for (std::size_t i = 0; i < count; ++i) centroids[i] = entry_centroid(old, old.entries[i]);

  std::size_t seed_a = 0;
  std::size_t seed_b = 1;
  double far = -1.0;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) {
      const double d2 = squared_distance(centroids[i], centroids[j]);
      if (d2 > far) {
        far = d2;
        seed_a = i;
        seed_b = j;
      }
    }
  }

  Node left{old.leaf, {}};
  Node right{old.leaf, {}};
  for (std::size_t i = 0; i < count; ++i) {
    if (i == seed_a) {
      left.entries.push_back(old.entries[i]);
    } else if (i == seed_b) {
      right.entries.push_back(old.entries[i]);
    } else {
      const double da = squared_distance(centroids[i], centroids[seed_a]);
      const double db = squared_distance(centroids[i], centroids[seed_b]);
      (da <= db ? left : right).entries.push_back(old.entries[i]);
    }
  }
  nodes_[static_cast<std::size_t>(node)] = std::move(left);
  nodes_.push_back(std::move(right));
  return {node, static_cast<int>(nodes_.size()) - 1};
}

Prediction CfTree::predict(const FeatureVector& v) const { return nearest_of(centroids_, v); }

std::vector<SubclusterInfo> CfTree::centers() const {
  std::vector<SubclusterInfo> out;
  out.reserve(subclusters_.size());
  for (std::uint32_t id = 0; id < subclusters_.size(); ++id) {
    out.push_back({id, centroids_[id], subclusters_[id].count, subclusters_[id].radius()});
  }
  return out;
}

int CfTree::depth() const {
  int d = 1;
  int node = root_;
  while (!nodes_[static_cast<std::size_t>(node)].leaf) {
    node = nodes_[static_cast<std::size_t>(node)].entries.front().child;
    ++d;
  }
  return d;
}

void CfTree::audit_node(int node, std::vector<std::string>& problems, std::vector<int>& seen) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  if (static_cast<int>(n.entries.size()) > branching_) {
    problems.push_back("node " + std::to_string(node) + " holds " +
                       std::to_string(n.entries.size()) + " entries");
  }
  for (const Entry& e : n.entries) {
    if (n.leaf) {
      if (e.subcluster >= subclusters_.size()) {
        problems.push_back("dangling subcluster id " + std::to_string(e.subcluster));
        continue;
      }
      ++seen[e.subcluster];
      const double r = subclusters_[e.subcluster].radius();
      if (r > threshold_ + 1e-12) {
        problems.push_back("subcluster " + std::to_string(e.subcluster) + " radius " +
                           std::to_string(r) + " exceeds threshold");
      }
      continue;
    }
    const ClusteringFeature sum = node_sum(e.child);
    const auto rel = [](double a, double b) {
      return std::abs(a - b) <= 1e-6 * std::max({1.0, std::abs(a), std::abs(b)});
    };
    bool ok = sum.count == e.cf.count && rel(sum.square_sum, e.cf.square_sum);
    for (std::size_t i = 0; i < kFeatureDim; ++i) ok = ok && rel(sum.linear_sum[i], e.cf.linear_sum[i]);
    if (!ok) problems.push_back("internal entry of node " + std::to_string(node) + " out of sync");
    audit_node(e.child, problems, seen);
  }
}

std::vector<std::string> CfTree::audit() const {
  std::vector<std::string> problems;
  std::vector<int> seen(subclusters_.size(), 0);
  audit_node(root_, problems, seen);
  for (std::size_t id = 0; id < seen.size(); ++id) {
    if (seen[id] != 1) {
      problems.push_back("subcluster " + std::to_string(id) + " referenced " +
                         std::to_string(seen[id]) + " times");
    }
  }
  // All leaves at the same depth.
  std::vector<std::pair<int, int>> stack{{root_, 1}};
  int leaf_depth = -1;
  while (!stack.empty()) {
    const auto [node, d] = stack.back();
    stack.pop_back();
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.leaf) {
      if (leaf_depth < 0) leaf_depth = d;
      if (d != leaf_depth) problems.push_back("unbalanced leaves");
      continue;
    }
    for (const Entry& e : n.entries) stack.emplace_back(e.child, d + 1);
  }
  return problems;
}

// ─── Persistence ────────────────────────────────────────────────────────────

void write_memory(std::ostream& out, const CfTree& tree) {
  binio::write_bytes(out, kMemoryMagic, 4);
  binio::write<double>(out, tree.threshold());
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(tree.branching_factor()));
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(kFeatureDim));
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(tree.subcluster_count()));
  for (std::uint32_t id = 0; id < tree.subcluster_count(); ++id) {
    const ClusteringFeature& cf = tree.subcluster(id);
    binio::write<std::uint64_t>(out, cf.count);
    binio::write_array(out, cf.linear_sum.data(), kFeatureDim);
    binio::write<double>(out, cf.square_sum);
  }
  if (!out) throw IoError("failed writing memory");
}

CfTree read_memory(std::istream& in) {
  binio::expect_magic(in, kMemoryMagic, "memory");
  const auto threshold = binio::read<double>(in, "threshold");
  const auto branching = binio::read<std::uint32_t>(in, "branching factor");
  const auto dim = binio::read<std::uint32_t>(in, "dimension");
  if (dim != kFeatureDim) {
    throw FormatError("memory dimension " + std::to_string(dim) + " does not match " +
                      std::to_string(kFeatureDim));
  }
  if (!(threshold > 0.0) || branching < 2 || branching > (1u << 20)) {
    throw FormatError("invalid memory parameters in header");
  }
  const auto count = binio::read<std::uint32_t>(in, "subcluster count");
  CfTree tree(threshold, static_cast<int>(branching));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string what = "subcluster " + std::to_string(i);
    ClusteringFeature cf;
    cf.count = binio::read<std::uint64_t>(in, what + " count");
    FeatureVector ls;
    binio::read_array(in, ls.values.data(), kFeatureDim, what + " linear sum");
    cf.linear_sum = ls;
    cf.square_sum = binio::read<double>(in, what + " square sum");
    if (cf.count == 0) throw FormatError(what + " has zero count");
    tree.insert_subcluster(cf);
  }
  return tree;
}

void save_memory(const CfTree& tree, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_memory(out, tree);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

CfTree load_memory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return read_memory(in);
}

}  // namespace xptrav
