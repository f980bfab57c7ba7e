#include "crowdmot/hungarian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace crowdmot {

namespace {

// Requires n <= m. Potentials u (rows), v (cols); way[] stores the augmenting path.
std::vector<int> solve_wide(std::span<const double> cost, int n, int m) {
    const double inf = std::numeric_limits<double>::infinity();
    const auto a = [&](int i, int j) { return cost[static_cast<std::size_t>(i - 1) * m + (j - 1)]; };

    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

}  // namespace

std::vector<int> min_cost_assignment(std::span<const double> cost, int rows, int cols) {
    if (rows < 0 || cols < 0 || cost.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw std::invalid_argument("min_cost_assignment: cost size does not match dimensions");
    }
    for (double c : cost) {
        if (!std::isfinite(c)) throw std::invalid_argument("min_cost_assignment: non-finite cost");
    }
    if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
    if (rows <= cols) return solve_wide(cost, rows, cols);

    std::vector<double> transposed(cost.size());
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) transposed[static_cast<std::size_t>(j) * rows + i] = cost[static_cast<std::size_t>(i) * cols + j];
    }
    const auto col_to_row = solve_wide(transposed, cols, rows);
    std::vector<int> row_to_col(rows, -1);
    for (int j = 0; j < cols; ++j) {
        if (col_to_row[j] >= 0) row_to_col[col_to_row[j]] = j;
    }
    return row_to_col;
}

}  // namespace crowdmot
