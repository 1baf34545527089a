#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "gridnav/gridworld.hpp"

namespace gridnav::oracle {

/// Fixed-step ray marching; returns the first sample distance that falls in
/// an OCCUPIED cell, or +inf.
inline double march_ray(const OccupancyGrid& g, Vec2 o, Vec2 dir, double max_range, double step) {
    for (double t = 0.0; t <= max_range; t += step) {
        const Vec2 p{o.x + t * dir.x, o.y + t * dir.y};
        const double fx = (p.x - g.origin().x) / g.resolution();
        const double fy = (p.y - g.origin().y) / g.resolution();
        const int col = static_cast<int>(std::floor(fx));
        const int iy = static_cast<int>(std::floor(fy));
        if (col < 0 || iy < 0 || col >= g.width() || iy >= g.height()) return std::numeric_limits<double>::infinity();
        if (g.state(col, g.height() - 1 - iy) == CellState::Occupied) return t;
    }
    return std::numeric_limits<double>::infinity();
}

/// Exact ray/box intersection against every OCCUPIED cell; +inf on a miss.
/// Slow, but unlike marching it cannot step over a grazed corner.
inline double exact_ray(const OccupancyGrid& g, Vec2 o, Vec2 dir) {
    double best = std::numeric_limits<double>::infinity();
    const double res = g.resolution();
    for (int row = 0; row < g.height(); ++row)
        for (int col = 0; col < g.width(); ++col) {
            if (g.state(col, row) != CellState::Occupied) continue;
            const double x0 = g.origin().x + col * res, y0 = g.origin().y + (g.height() - 1 - row) * res;
            double enter = -std::numeric_limits<double>::infinity(), exit = std::numeric_limits<double>::infinity();
            bool miss = false;
            for (const auto [lo, p, d] : {std::array{x0, o.x, dir.x}, std::array{y0, o.y, dir.y}}) {
                if (d == 0.0) {
                    miss = miss || p < lo || p > lo + res;
                    continue;
                }
                const double a = (lo - p) / d, b = (lo + res - p) / d;
                enter = std::max(enter, std::min(a, b));
                exit = std::min(exit, std::max(a, b));
            }
            if (!miss && enter <= exit && exit >= 0.0) best = std::min(best, std::max(enter, 0.0));
        }
    return best;
}

/// Random box-world: a bordered grid with scattered occupied rectangles.
template <class Rng>
OccupancyGrid random_grid(Rng& rng, int w = 120, int h = 100, double res = 0.05) {
    OccupancyGrid g(w, h, res, {-1.0, 2.0}, CellState::Free);
    std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1), us(1, 12), un(3, 15);
    const int n = un(rng);
    for (int k = 0; k < n; ++k) {
        const int c0 = ux(rng), r0 = uy(rng), cw = us(rng), rh = us(rng);
        for (int r = r0; r < std::min(h, r0 + rh); ++r)
            for (int c = c0; c < std::min(w, c0 + cw); ++c) g.set_state(c, r, CellState::Occupied);
    }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (std::uniform_int_distribution<int>(0, 60)(rng) == 0 && g.state(c, r) == CellState::Free)
                g.set_state(c, r, CellState::Unknown);
    return g;
}

/// A uniformly random pose whose cell is FREE.
template <class Rng>
Pose random_free_pose(const OccupancyGrid& g, Rng& rng) {
    std::uniform_real_distribution<double> ux(g.origin().x, g.origin().x + g.width_m()),
        uy(g.origin().y, g.origin().y + g.height_m()), ua(-kPi, kPi);
    for (;;) {
        const Vec2 p{ux(rng), uy(rng)};
        const auto c = g.world_to_cell(p);
        if (c.in_bounds && g.state(c.col, c.row) == CellState::Free) return Pose(p.x, p.y, ua(rng));
    }
}

}  // namespace gridnav::oracle
