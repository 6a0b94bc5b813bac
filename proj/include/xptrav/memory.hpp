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

#ifndef XPTRAV_MEMORY_HPP
#define XPTRAV_MEMORY_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "xptrav/encoder.hpp"

namespace xptrav {

/// BIRCH clustering feature: point count, linear sum and sum of squared norms.
struct ClusteringFeature {
  std::uint64_t count = 0;
  FeatureVector linear_sum;
  double square_sum = 0.0;

  static ClusteringFeature of(const FeatureVector& v);

  ClusteringFeature& operator+=(const ClusteringFeature& other);
  friend ClusteringFeature operator+(ClusteringFeature a, const ClusteringFeature& b) {
    a += b;
    return a;
  }

  /// LS / N. Requires count >= 1.
  FeatureVector centroid() const;
  /// RMS distance of absorbed points to the centroid. Values below the
  /// cancellation error bound of SS/N - |LS/N|^2 are reported as 0.
  double radius() const;
};

struct SubclusterInfo {
  std::uint32_t id = 0;
  FeatureVector centroid;
  std::uint64_t count = 0;
  double radius = 0.0;
};

struct Prediction {
  FeatureVector center;
  double distance = 0.0;
  std::uint32_t id = 0;
};

struct InsertOutcome {
  enum class Kind { absorbed, created };
  Kind kind = Kind::created;
  std::uint32_t id = 0;
};

/// Raised by predict() on a memory that has not absorbed anything yet.
class EmptyMemoryError : public std::runtime_error {
 public:
  EmptyMemoryError() : std::runtime_error("no experience yet: memory is empty") {}
};

/// Read-only snapshot of subcluster centroids in id order. Lookups give the
/// same answers as CfTree::predict at the time of the snapshot.
class CenterSet {
 public:
  CenterSet() = default;
  explicit CenterSet(std::vector<FeatureVector> centroids) : centroids_(std::move(centroids)) {}

  bool empty() const { return centroids_.empty(); }
  std::size_t size() const { return centroids_.size(); }
  const FeatureVector& centroid(std::uint32_t id) const { return centroids_[id]; }

  /// Exhaustive nearest centroid; ties go to the lowest id.
  Prediction nearest(const FeatureVector& v) const;

 private:
  std::vector<FeatureVector> centroids_;
};

/// CF-tree: the robot's experience memory.
///
/// Leaf entries are subclusters with radius <= threshold; every node holds at
/// most `branching_factor` entries; internal entries carry the CF sum of
/// their subtree. Subcluster ids are assigned in creation order and never
/// change. Single writer, many readers between writes.
class CfTree {
 public:
  static constexpr double kDefaultThreshold = 0.3;
  static constexpr int kDefaultBranching = 50;

  explicit CfTree(double threshold = kDefaultThreshold, int branching_factor = kDefaultBranching);

  double threshold() const { return threshold_; }
  int branching_factor() const { return branching_; }
  bool empty() const { return subclusters_.empty(); }
  std::size_t subcluster_count() const { return subclusters_.size(); }
  std::uint64_t total_count() const;

  /// Absorbs `v` into the nearest leaf subcluster when the merged radius
  /// stays within the threshold, otherwise starts a new subcluster.
  InsertOutcome insert(const FeatureVector& v);

  /// Places a whole CF as a new subcluster without attempting a merge.
  std::uint32_t insert_subcluster(const ClusteringFeature& cf);

  Prediction predict(const FeatureVector& v) const;
  std::vector<SubclusterInfo> centers() const;
  const ClusteringFeature& subcluster(std::uint32_t id) const { return subclusters_.at(id); }
  CenterSet freeze() const { return CenterSet(centroids_); }

  /// Structural invariant violations (empty when the tree is sound).
  std::vector<std::string> audit() const;
  int depth() const;

 private:
  static constexpr int kNoChild = -1;

  struct Entry {
    ClusteringFeature cf;  // subtree sum for internal entries; unused for leaves
    int child = kNoChild;
    std::uint32_t subcluster = 0;
  };
  struct Node {
    bool leaf = true;
    std::vector<Entry> entries;
  };
  struct Split {
    int left;
    int right;
  };

  const ClusteringFeature& entry_cf(const Node& node, const Entry& e) const {
    return node.leaf ? subclusters_[e.subcluster] : e.cf;
  }
  FeatureVector entry_centroid(const Node& node, const Entry& e) const {
    return node.leaf ? centroids_[e.subcluster] : e.cf.centroid();
  }
  ClusteringFeature node_sum(int node) const;
  std::uint32_t new_subcluster(const ClusteringFeature& cf);
  bool insert_into(int node, const ClusteringFeature& cf, bool allow_merge, InsertOutcome& outcome,
                   Split& split);
  Split split_node(int node);
  void audit_node(int node, std::vector<std::string>& problems, std::vector<int>& seen) const;

  double threshold_;
  int branching_;
  std::vector<Node> nodes_;
  int root_ = 0;
  std::vector<ClusteringFeature> subclusters_;  // by id
  std::vector<FeatureVector> centroids_;        // by id
};

void write_memory(std::ostream& out, const CfTree& tree);
CfTree read_memory(std::istream& in);
void save_memory(const CfTree& tree, const std::filesystem::path& path);
CfTree load_memory(const std::filesystem::path& path);

}  // namespace xptrav

#endif  // XPTRAV_MEMORY_HPP
