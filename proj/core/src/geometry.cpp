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

#include "mixmra/geometry.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "mixmra/random.hpp"

namespace mixmra {

double distance(const Location& a, const Location& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

double Rect::diameter() const { return std::hypot(width(), height()); }

bool Rect::contains(const Location& s) const {
  return s.x >= x0 && s.x <= x1 && s.y >= y0 && s.y <= y1;
}

const char* to_string(PartitionMode mode) {
  return mode == PartitionMode::kVoronoi ? "voronoi" : "rectangular";
}

PartitionMode partition_mode_from_string(const std::string& name) {
  if (name == "rectangular" || name == "grid") return PartitionMode::kRectangular;
  if (name == "voronoi") return PartitionMode::kVoronoi;
  throw std::invalid_argument("unknown partition mode '" + name + "'");
}

std::pair<int, int> grid_shape(int n) {
  int rows = 1;
  for (int d = 1; d * d <= n; ++d) {
    if (n % d == 0) rows = d;
  }
  return {n / rows, rows};
}

namespace {

constexpr int kMaxRejectionDraws = 10'000'000;

// Edge c of an even split of [lo, hi] into `parts` pieces. Neighbouring
// cells evaluate the same expression, so shared edges are bit-identical.
double split_edge(double lo, double hi, int c, int parts) {
  if (c == 0) return lo;
  if (c == parts) return hi;
  return lo + (hi - lo) * static_cast<double>(c) / static_cast<double>(parts);
}

std::vector<Location> grid_knots(const Rect& cell, int r) {
  const auto [cols, rows] = grid_shape(r);
  std::vector<Location> knots;
  knots.reserve(static_cast<std::size_t>(r));
  for (int row = 0; row < rows; ++row) {
    for (int col = 0; col < cols; ++col) {
      knots.push_back({cell.x0 + cell.width() * (col + 0.5) / cols,
                       cell.y0 + cell.height() * (row + 0.5) / rows});
    }
  }
  return knots;
}

int nearest_index(std::span<const Location> seeds, const Location& s) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const double dx = seeds[k].x - s.x;
    const double dy = seeds[k].y - s.y;
    const double d = dx * dx + dy * dy;
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace

int PartitionTree::level_offset(int level) const {
  return offsets_.at(static_cast<std::size_t>(level));
}

int PartitionTree::level_size(int level) const {
  return offsets_.at(static_cast<std::size_t>(level) + 1) - offsets_.at(static_cast<std::size_t>(level));
}

bool PartitionTree::in_domain(const Location& s) const {
  return std::isfinite(s.x) && std::isfinite(s.y) && domain_.contains(s);
}

int PartitionTree::child_containing(int parent_id, const Location& s) const {
  const Node& parent = node(parent_id);
  if (opts_.mode == PartitionMode::kVoronoi) {
    const int k = nearest_index(parent.knots, s);
    return parent.children[static_cast<std::size_t>(parent.knot_group[static_cast<std::size_t>(k)])];
  }
  // Half-open cells: a point on a shared edge belongs to the upper/right cell.
  int col = 0;
  for (int c = 1; c < cols_; ++c) {
    if (s.x >= node(parent.children[static_cast<std::size_t>(c)]).bounds.x0) col = c;
  }
  int row = 0;
  for (int rr = 1; rr < rows_; ++rr) {
    if (s.y >= node(parent.children[static_cast<std::size_t>(rr * cols_)]).bounds.y0) row = rr;
  }
  return parent.children[static_cast<std::size_t>(row * cols_ + col)];
}

std::vector<int> PartitionTree::path(const Location& s) const {
  if (!in_domain(s)) {
    throw std::out_of_range("location (" + std::to_string(s.x) + ", " +
                            std::to_string(s.y) + ") lies outside the domain");
  }
  std::vector<int> ids(static_cast<std::size_t>(opts_.levels) + 1);
  ids[0] = 0;
  for (int m = 1; m <= opts_.levels; ++m) {
    ids[static_cast<std::size_t>(m)] = child_containing(ids[static_cast<std::size_t>(m) - 1], s);
  }
  return ids;
}

bool PartitionTree::contains(int node_id, const Location& s) const {
  if (!in_domain(s)) return false;
  const Node& target = node(node_id);
  int id = 0;
  for (int m = 1; m <= target.level; ++m) id = child_containing(id, s);
  return id == node_id;
}

std::size_t PartitionTree::total_knots() const {
  std::size_t total = 0;
  for (const Node& n : nodes_) total += n.knots.size();
  return total;
}

PartitionTree PartitionTree::build(const Rect& domain, const TreeOptions& opts,
                                   std::span<const Location> data) {
  if (!(std::isfinite(domain.x0) && std::isfinite(domain.x1) && std::isfinite(domain.y0) &&
        std::isfinite(domain.y1)) ||
      !(domain.width() > 0.0) || !(domain.height() > 0.0)) {
    throw std::invalid_argument("partition domain must have positive area");
  }
  if (opts.levels < 0) throw std::invalid_argument("number of levels M must be >= 0");
  if (opts.knots < 1) throw std::invalid_argument("knots per node r must be >= 1");
  if (opts.children < 2) throw std::invalid_argument("children per node J must be >= 2");

  PartitionTree tree;
  tree.opts_ = opts;
  tree.domain_ = domain;
  if (opts.mode == PartitionMode::kRectangular) {
    const auto [cols, rows] = grid_shape(opts.children);
    if (rows == 1 && opts.children != 2) {
      throw std::invalid_argument("J = " + std::to_string(opts.children) +
                                  " admits no rectangular grid split");
    }
    tree.cols_ = cols;
    tree.rows_ = rows;
  } else if (opts.levels > 0 && opts.knots < opts.children) {
    throw std::invalid_argument("Voronoi mode needs r >= J so every child owns a polygon");
  }

  tree.offsets_.assign(static_cast<std::size_t>(opts.levels) + 2, 0);
  long long width = 1;
  for (int m = 0; m <= opts.levels; ++m) {
    tree.offsets_[static_cast<std::size_t>(m) + 1] =
        tree.offsets_[static_cast<std::size_t>(m)] + static_cast<int>(width);
    width *= opts.children;
  }
  tree.nodes_.resize(static_cast<std::size_t>(tree.offsets_.back()));

  for (int m = 0; m <= opts.levels; ++m) {
    for (int j = 0; j < tree.level_size(m); ++j) {
      Node& n = tree.nodes_[static_cast<std::size_t>(tree.node_id(m, j))];
      n.id = tree.node_id(m, j);
      n.level = m;
      n.index = j;
      n.parent = m == 0 ? -1 : tree.node_id(m - 1, j / opts.children);
      if (m < opts.levels) {
        for (int k = 0; k < opts.children; ++k) {
          n.children.push_back(tree.node_id(m + 1, j * opts.children + k));
        }
      }
    }
  }

  const bool data_knots = opts.data_knots_at_finest;
  if (opts.mode == PartitionMode::kRectangular) {
    tree.nodes_[0].bounds = domain;
    for (Node& n : tree.nodes_) {
      for (std::size_t k = 0; k < n.children.size(); ++k) {
        const int col = static_cast<int>(k) % tree.cols_;
        const int row = static_cast<int>(k) / tree.cols_;
        Rect& cb = tree.nodes_[static_cast<std::size_t>(n.children[k])].bounds;
        cb.x0 = split_edge(n.bounds.x0, n.bounds.x1, col, tree.cols_);
        cb.x1 = split_edge(n.bounds.x0, n.bounds.x1, col + 1, tree.cols_);
        cb.y0 = split_edge(n.bounds.y0, n.bounds.y1, row, tree.rows_);
        cb.y1 = split_edge(n.bounds.y0, n.bounds.y1, row + 1, tree.rows_);
      }
      if (!(data_knots && n.level == opts.levels)) n.knots = grid_knots(n.bounds, opts.knots);
    }
  } else {
    Rng rng(opts.seed);
    for (Node& n : tree.nodes_) {
      n.bounds = domain;
      if (data_knots && n.level == opts.levels) continue;
      n.knots.reserve(static_cast<std::size_t>(opts.knots));
      int draws = 0;
      while (static_cast<int>(n.knots.size()) < opts.knots) {
        if (++draws > kMaxRejectionDraws) {
          throw std::runtime_error("Voronoi knot placement failed: region too small");
        }
        const Location s{rng.uniform(domain.x0, domain.x1), rng.uniform(domain.y0, domain.y1)};
        if (tree.contains(n.id, s)) n.knots.push_back(s);
      }
      if (!n.children.empty()) {
        // The first J knots anchor the children; every knot's Voronoi polygon
        // joins the child of its nearest anchor.
        const std::span<const Location> anchors(n.knots.data(), n.children.size());
        n.knot_group.resize(n.knots.size());
        for (std::size_t k = 0; k < n.knots.size(); ++k) {
          n.knot_group[k] = k < anchors.size() ? static_cast<int>(k) : nearest_index(anchors, n.knots[k]);
        }
      }
    }
  }

  if (data_knots) {
    for (const Location& s : data) {
      const std::vector<int> p = tree.path(s);
      Node& leaf = tree.nodes_[static_cast<std::size_t>(p.back())];
      bool duplicate = false;
      for (const Location& q : leaf.knots) duplicate = duplicate || q == s;
      if (!duplicate) leaf.knots.push_back(s);
    }
  }
  return tree;
}

nlohmann::json PartitionTree::to_json() const {
  nlohmann::json doc;
  doc["levels"] = opts_.levels;
  doc["children_per_node"] = opts_.children;
  doc["knots_per_node"] = opts_.knots;
  doc["mode"] = to_string(opts_.mode);
  doc["seed"] = opts_.seed;
  doc["data_knots_at_finest"] = opts_.data_knots_at_finest;
  doc["domain"] = {domain_.x0, domain_.y0, domain_.x1, domain_.y1};
  nlohmann::json nodes = nlohmann::json::array();
  for (const Node& n : nodes_) {
    nlohmann::json jn;
    jn["id"] = n.id;
    jn["level"] = n.level;
    jn["j"] = n.index + 1;
    jn["parent"] = n.parent;
    jn["bounds"] = {n.bounds.x0, n.bounds.y0, n.bounds.x1, n.bounds.y1};
    nlohmann::json knots = nlohmann::json::array();
    for (const Location& q : n.knots) knots.push_back({q.x, q.y});
    jn["knots"] = std::move(knots);
    if (!n.knot_group.empty()) jn["knot_group"] = n.knot_group;
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  return doc;
}

RegionAssignment assign_regions(const PartitionTree& tree, std::span<const Location> locations) {
  std::vector<int> ids;
  ids.reserve(locations.size() * static_cast<std::size_t>(tree.levels() + 1));
  for (const Location& s : locations) {
    const std::vector<int> p = tree.path(s);
    ids.insert(ids.end(), p.begin(), p.end());
  }
  return RegionAssignment(tree.levels(), std::move(ids));
}

}  // namespace mixmra
