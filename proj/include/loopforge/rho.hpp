#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "timed_path.hpp"

namespace loopforge {

struct RhoResult {
    double value = 0.0;       // upper approximation of rho
    double slack = 0.0;       // certified gap to the true infimum
    double grid_spacing = 0;  // max spacing of the parameter grids
};

namespace detail {

inline double modulus_or_zero(const TimedPath& p, double dg) {
    return dg > 0 ? modulus(p, dg) : 0.0;
}

inline std::vector<double> rho_time_grid(const TimedPath& p, int grid) {
    std::vector<double> ts = p.times;
    if (p.duration > 0) {
        for (int i = 0; i < grid; ++i)
            ts.push_back(p.duration * static_cast<double>(i) / (grid - 1));
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

}  // namespace detail

/// Upper approximation of the reparametrization distance
///   rho(f,g) = inf_phi ||f - g.phi||_inf + (||phi-Id|| + ||phi^{-1}-Id||)/2
/// via a monotone-staircase DP on a grid x grid parameter lattice, both
/// endpoints pinned. For increasing bijections ||phi-Id|| = ||phi^{-1}-Id||,
/// so the penalty reduces to the max time offset along the staircase. The
/// time budget beta is swept on a grid of the same resolution; for each
/// beta the minimax spatial cost over staircases inside the band
/// {|s-u| <= beta} is a standard Frechet-style DP.
inline RhoResult rho_with_slack(const TimedPath& f, const TimedPath& g, int grid = 256) {
    if (grid < 2) throw std::invalid_argument("rho: grid must be >= 2");
    const std::vector<double> s = detail::rho_time_grid(f, grid);
    const std::vector<double> u = detail::rho_time_grid(g, grid);
    const std::size_t I = s.size(), J = u.size();
    std::vector<Vec2> fv(I), gv(J);
    for (std::size_t i = 0; i < I; ++i) fv[i] = f.at(s[i]);
    for (std::size_t j = 0; j < J; ++j) gv[j] = g.at(u[j]);

    double dg = 0.0;
    for (std::size_t i = 1; i < I; ++i) dg = std::max(dg, s[i] - s[i - 1]);
    for (std::size_t j = 1; j < J; ++j) dg = std::max(dg, u[j] - u[j - 1]);

    const double inf = std::numeric_limits<double>::infinity();
    const double beta0 = std::abs(f.duration - g.duration);
    const double beta_max = std::max(f.duration, g.duration);
    const double step = std::max(dg, 1e-15);

    std::vector<double> cost(I * J);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j) cost[i * J + j] = norm(fv[i] - gv[j]);

    std::vector<double> value(I * J);
    double best = inf;
    for (double beta = beta0;; beta += step) {
        if (beta >= best) break;  // time penalty alone already exceeds the best total
        bool any = false;
        for (std::size_t i = 0; i < I; ++i) {
            for (std::size_t j = 0; j < J; ++j) {
                double& v = value[i * J + j];
                if (std::abs(s[i] - u[j]) > beta + 1e-15) {
                    v = inf;
                    continue;
                }
                double reach;
                if (i == 0 && j == 0)
                    reach = 0.0;
                else {
                    reach = inf;
                    if (i > 0) reach = std::min(reach, value[(i - 1) * J + j]);
                    if (j > 0) reach = std::min(reach, value[i * J + j - 1]);
                    if (i > 0 && j > 0) reach = std::min(reach, value[(i - 1) * J + j - 1]);
                }
                v = std::max(reach, cost[i * J + j]);
                if (v < inf) any = true;
            }
        }
        double total = value[I * J - 1];
        if (total < inf) best = std::min(best, total + beta);
        if (!any || beta > beta_max) break;
    }

    RhoResult out;
    out.value = best;
    out.grid_spacing = dg;
    out.slack = detail::modulus_or_zero(f, dg) + detail::modulus_or_zero(g, dg) + dg;
    return out;
}

inline double rho(const TimedPath& f, const TimedPath& g, int grid = 256) {
    return rho_with_slack(f, g, grid).value;
}

}  // namespace loopforge
