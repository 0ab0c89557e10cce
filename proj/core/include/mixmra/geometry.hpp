// Copyright 2026 The mixmra Authors.
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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace mixmra {

struct Location {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

double distance(const Location& a, const Location& b);

/// Axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  double diameter() const;
  /// Closed containment test.
  bool contains(const Location& s) const;
};

enum class PartitionMode { kRectangular, kVoronoi };

const char* to_string(PartitionMode mode);
PartitionMode partition_mode_from_string(const std::string& name);

struct TreeOptions {
  int levels = 0;    ///< M: number of levels beyond level 0.
  int children = 4;  ///< J: children per node.
  int knots = 16;    ///< r: knots per node.
  PartitionMode mode = PartitionMode::kRectangular;
  std::uint64_t seed = 0;  ///< Only consumed in Voronoi mode.
  /// Use the observation locations inside each finest-level node as its
  /// knots. The knot count at level M then varies per node.
  bool data_knots_at_finest = false;
};

struct Node {
  int id = 0;
  int level = 0;
  int index = 0;  ///< Position within its level, 0-based.
  int parent = -1;
  std::vector<int> children;
  /// Exact region in rectangular mode; search box in Voronoi mode.
  Rect bounds;
  std::vector<Location> knots;
  /// Voronoi mode: child ordinal owning the Voronoi polygon of each knot.
  std::vector<int> knot_group;
};

/// Recursive domain decomposition with knots per node. Nodes are stored in
/// breadth-first order, so node (m, j) has id level_offset(m) + j.
class PartitionTree {
 public:
  /// Builds the tree over `domain`. `data` is only used when
  /// `opts.data_knots_at_finest` is set.
  static PartitionTree build(const Rect& domain, const TreeOptions& opts,
                             std::span<const Location> data = {});

  const TreeOptions& options() const { return opts_; }
  const Rect& domain() const { return domain_; }
  int levels() const { return opts_.levels; }
  int children_per_node() const { return opts_.children; }
  PartitionMode mode() const { return opts_.mode; }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::span<const Node> nodes() const { return nodes_; }
  int level_offset(int level) const;
  int level_size(int level) const;
  int node_id(int level, int index) const { return level_offset(level) + index; }

  /// Grid shape used by the rectangular split (columns, rows).
  int grid_columns() const { return cols_; }
  int grid_rows() const { return rows_; }

  bool in_domain(const Location& s) const;
  /// Node ids containing `s` at levels 0..M. Throws std::out_of_range when
  /// `s` lies outside the domain.
  std::vector<int> path(const Location& s) const;
  /// Child of `parent_id` whose region contains `s`. Assumes `s` lies in
  /// the parent's region.
  int child_containing(int parent_id, const Location& s) const;
  bool contains(int node_id, const Location& s) const;

  std::size_t total_knots() const;

  nlohmann::json to_json() const;

 private:
  TreeOptions opts_;
  Rect domain_;
  int cols_ = 1;
  int rows_ = 1;
  std::vector<Node> nodes_;
  std::vector<int> offsets_;
};

/// Per-location, per-level node ids. Row i holds the path of location i.
class RegionAssignment {
 public:
  RegionAssignment() = default;
  RegionAssignment(int levels, std::vector<int> ids)
      : levels_(levels), ids_(std::move(ids)) {}

  std::size_t size() const {
    return levels_ < 0 ? 0 : ids_.size() / static_cast<std::size_t>(levels_ + 1);
  }
  int levels() const { return levels_; }
  int node(std::size_t i, int level) const {
    return ids_[i * static_cast<std::size_t>(levels_ + 1) + static_cast<std::size_t>(level)];
  }
  int leaf(std::size_t i) const { return node(i, levels_); }

 private:
  int levels_ = -1;
  std::vector<int> ids_;
};

RegionAssignment assign_regions(const PartitionTree& tree,
                                std::span<const Location> locations);

/// Splits `n` into a (columns, rows) grid with rows the largest divisor of n
/// not exceeding sqrt(n). Used for both the child split and knot placement.
std::pair<int, int> grid_shape(int n);

}  // namespace mixmra
