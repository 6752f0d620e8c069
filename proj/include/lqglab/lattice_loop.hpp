#pragma once

#include <utility>
#include <vector>

namespace lqglab {

/// Corner (dual-lattice vertex) index: corner (a, b) sits at the lower-left
/// corner of cell (a, b).
using Corner = std::pair<int, int>;

/// Nearest-neighbour path on the dual lattice. Closed when the last corner
/// equals the first; a closed loop of k steps stores k + 1 corners.
struct LatticeLoop {
  std::vector<Corner> corners;

  bool closed() const { return corners.size() >= 2 && corners.front() == corners.back(); }
  std::size_t steps() const { return corners.empty() ? 0 : corners.size() - 1; }
};

/// Cells on either side of the unit edge between two adjacent corners.
inline std::pair<std::pair<int, int>, std::pair<int, int>> cells_beside_edge(Corner p, Corner q) {
  if (p.second == q.second) {  // horizontal edge at height b
    const int a = std::min(p.first, q.first), b = p.second;
    return {{a, b - 1}, {a, b}};
  }
  const int a = p.first, b = std::min(p.second, q.second);  // vertical edge
  return {{a - 1, b}, {a, b}};
}

}  // namespace lqglab
