#pragma once

#include <span>
#include <vector>

namespace crowdmot {

/// Minimum-cost rectangular assignment (shortest augmenting paths, O(n^2 m)).
/// `cost` is row-major rows x cols. Returns, per row, the assigned column or -1;
/// every row is assigned when rows <= cols, otherwise every column is.
std::vector<int> min_cost_assignment(std::span<const double> cost, int rows, int cols);

}  // namespace crowdmot
