#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <vector>

#include "ovmm/bev.hpp"
#include "ovmm/errors.hpp"

namespace ovmm {

inline constexpr double kSqrt2 = 1.4142135623730951;

struct GridPath {
  std::vector<GridIndex> cells;
  double length = 0.0;  // meters

  int straight_steps = 0;
  int diagonal_steps = 0;
};

inline double octile(const GridIndex& a, const GridIndex& b) {
  const int dx = std::abs(a.x - b.x);
  const int dy = std::abs(a.y - b.y);
  return std::max(dx, dy) + (kSqrt2 - 1.0) * std::min(dx, dy);
}

namespace detail {

// Diagonal moves are forbidden when both orthogonal neighbors are occupied.
inline bool move_allowed(const Costmap& map, const GridIndex& from, int dx, int dy) {
  const GridIndex to{from.x + dx, from.y + dy};
  if (!map.in_bounds(to) || map.at(to) != kFreeCell) return false;
  if (dx != 0 && dy != 0) {
    const bool side_a = map.at({from.x + dx, from.y}) != kFreeCell;
    const bool side_b = map.at({from.x, from.y + dy}) != kFreeCell;
    if (side_a && side_b) return false;
  }
  return true;
}

}  // namespace detail

// A* on the costmap: 8-connected, unit + diagonal step costs, octile
// heuristic. Ties prefer lower heuristic, then row-major order. Returns
// nullopt when the goal is unreachable. The reported length is recomputed
// from step counts so it is independent of expansion order.
inline std::optional<GridPath> plan_path(const Costmap& map, const GridIndex& start,
                                         const GridIndex& goal) {
  if (!map.in_bounds(start) || !map.in_bounds(goal)) {
    throw InputError("plan_path: start or goal outside the costmap");
  }
  if (map.at(start) != kFreeCell || map.at(goal) != kFreeCell) {
    throw InputError("plan_path: start and goal must be free cells");
  }
  if (start == goal) {
    GridPath path;
    path.cells = {start};
    return path;
  }

  const int w = map.width();
  const auto index_of = [w](const GridIndex& c) {
    return static_cast<std::size_t>(c.y) * w + c.x;
  };
  const std::size_t n = map.size();
  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<std::int32_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);

  struct Node {
    double f;
    double h;
    std::size_t index;
    bool operator>(const Node& o) const {
      if (f != o.f) return f > o.f;
      if (h != o.h) return h > o.h;
      return index > o.index;
    }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
  g[index_of(start)] = 0.0;
  open.push({octile(start, goal), octile(start, goal), index_of(start)});

  static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

  while (!open.empty()) {
    const Node node = open.top();
    open.pop();
    if (closed[node.index]) continue;
    closed[node.index] = 1;
    const GridIndex current{static_cast<int>(node.index % w), static_cast<int>(node.index / w)};
    if (current == goal) break;
    for (int k = 0; k < 8; ++k) {
      if (!detail::move_allowed(map, current, kDx[k], kDy[k])) continue;
      const GridIndex next{current.x + kDx[k], current.y + kDy[k]};
      const std::size_t ni = index_of(next);
      if (closed[ni]) continue;
      const double step = (k < 4) ? 1.0 : kSqrt2;
      const double cand = g[node.index] + step;
      if (cand < g[ni]) {
        g[ni] = cand;
        parent[ni] = static_cast<std::int32_t>(node.index);
        const double h = octile(next, goal);
        open.push({cand + h, h, ni});
      }
    }
  }

  if (!closed[index_of(goal)]) return std::nullopt;

  GridPath path;
  std::size_t cursor = index_of(goal);
  while (true) {
    path.cells.push_back({static_cast<int>(cursor % w), static_cast<int>(cursor / w)});
    if (parent[cursor] < 0) break;
    cursor = static_cast<std::size_t>(parent[cursor]);
  }
  std::reverse(path.cells.begin(), path.cells.end());
  for (std::size_t i = 1; i < path.cells.size(); ++i) {
    const bool diagonal =
        path.cells[i].x != path.cells[i - 1].x && path.cells[i].y != path.cells[i - 1].y;
    (diagonal ? path.diagonal_steps : path.straight_steps)++;
  }
  path.length =
      (path.straight_steps + path.diagonal_steps * kSqrt2) * map.cell_size();
  return path;
}

// Plans against an immutable costmap and memoizes results; mission batches
// replay the same legs constantly. Lengths are symmetric under the movement
// rules, so pairs are canonicalized.
class PathPlanner {
public:
  explicit PathPlanner(const Costmap& map) : map_(&map) {}

  std::optional<GridPath> plan(const GridIndex& start, const GridIndex& goal) {
    const Key key = make_key(start, goal);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      it = cache_.emplace(key, plan_path(*map_, canonical_start(start, goal),
                                         canonical_goal(start, goal))).first;
    }
    if (!it->second) return std::nullopt;
    GridPath path = *it->second;
    if (!(path.cells.front() == start)) std::reverse(path.cells.begin(), path.cells.end());
    return path;
  }

  std::optional<double> plan_length(const GridIndex& start, const GridIndex& goal) {
    auto path = plan(start, goal);
    if (!path) return std::nullopt;
    return path->length;
  }

  const Costmap& map() const { return *map_; }

private:
  using Key = std::uint64_t;

  Key cell_key(const GridIndex& c) const {
    return static_cast<Key>(c.y) * static_cast<Key>(map_->width()) + static_cast<Key>(c.x);
  }
  Key make_key(const GridIndex& a, const GridIndex& b) const {
    Key ka = cell_key(a), kb = cell_key(b);
    if (ka > kb) std::swap(ka, kb);
    return ka * static_cast<Key>(map_->size()) + kb;
  }
  GridIndex canonical_start(const GridIndex& a, const GridIndex& b) const {
    return cell_key(a) <= cell_key(b) ? a : b;
  }
  GridIndex canonical_goal(const GridIndex& a, const GridIndex& b) const {
    return cell_key(a) <= cell_key(b) ? b : a;
  }

  const Costmap* map_;
  std::map<Key, std::optional<GridPath>> cache_;
};

struct RobotState {
  GridIndex cell;
};

struct NavigationResult {
  bool reached = false;
  double traveled = 0.0;
  std::vector<GridIndex> path;
};

// The robot follows the planned path exactly; local following is abstracted.
inline NavigationResult navigate(RobotState& state, const GridIndex& target,
                                 PathPlanner& planner) {
  NavigationResult result;
  auto path = planner.plan(state.cell, target);
  if (!path) return result;
  result.reached = true;
  result.traveled = path->length;
  result.path = path->cells;
  state.cell = target;
  return result;
}

}  // namespace ovmm
