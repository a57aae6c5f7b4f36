#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "geometry.hpp"

namespace loopforge {

enum class PathKind { Continuum, Lattice };

/// Closure tolerance for continuum loops. Bridges are generated
/// endpoint-pinned, so this only absorbs rounding.
inline constexpr double kLoopClosureTol = 1e-9;

/// Planar path with explicit duration, stored as piecewise-linear samples.
/// Immutable by convention after construction. Lattice kind additionally
/// records the mesh; sample spacing is then uniform (the lattice time step).
struct TimedPath {
    double duration = 0.0;
    std::vector<double> times;   // strictly increasing, first 0, last = duration
    std::vector<Vec2> points;    // same length as times
    PathKind kind = PathKind::Continuum;
    std::int64_t mesh = 1;       // lattice kind only

    std::size_t size() const { return times.size(); }

    Vec2 front() const { return points.front(); }
    Vec2 back() const { return points.back(); }

    /// Piecewise-linear evaluation; exact at sample times.
    Vec2 at(double t) const {
        if (t < 0.0 || t > duration)
            throw std::domain_error("TimedPath::at: time out of [0, duration]");
        if (times.size() == 1) return points[0];
        auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t i = static_cast<std::size_t>(it - times.begin());
        if (i >= times.size()) return points.back();
        if (i == 0) return points.front();
        double t0 = times[i - 1], t1 = times[i];
        if (t == t0) return points[i - 1];
        double mu = (t - t0) / (t1 - t0);
        return points[i - 1] + mu * (points[i] - points[i - 1]);
    }

    /// Evaluation clamped to [0, duration]; used by d_inf where the sup
    /// ranges over all t >= 0.
    Vec2 at_clamped(double t) const { return at(std::min(std::max(t, 0.0), duration)); }

    void validate() const {
        if (times.empty()) throw std::invalid_argument("TimedPath: empty sample list");
        if (times.size() != points.size())
            throw std::invalid_argument("TimedPath: times/points size mismatch");
        if (times.front() != 0.0) throw std::invalid_argument("TimedPath: first time must be 0");
        if (times.back() != duration)
            throw std::invalid_argument("TimedPath: last time must equal duration");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw std::invalid_argument("TimedPath: times not strictly increasing");
        if (duration < 0) throw std::invalid_argument("TimedPath: negative duration");
    }

    static TimedPath constant(Vec2 p, double duration) {
        TimedPath out;
        out.duration = duration;
        if (duration == 0) {
            out.times = {0.0};
            out.points = {p};
        } else {
            out.times = {0.0, duration};
            out.points = {p, p};
        }
        return out;
    }

    static TimedPath from_samples(std::vector<double> ts, std::vector<Vec2> ps) {
        TimedPath out;
        out.duration = ts.empty() ? 0.0 : ts.back();
        out.times = std::move(ts);
        out.points = std::move(ps);
        out.validate();
        return out;
    }
};

/// A loop is a closed TimedPath: exact endpoint equality for lattice data,
/// within kLoopClosureTol otherwise.
struct Loop {
    TimedPath path;

    double duration() const { return path.duration; }

    void validate() const {
        path.validate();
        Vec2 a = path.front(), b = path.back();
        if (path.kind == PathKind::Lattice) {
            if (!(a == b)) throw std::invalid_argument("Loop: lattice endpoints differ");
        } else if (norm(a - b) > kLoopClosureTol) {
            throw std::invalid_argument("Loop: endpoints differ beyond closure tolerance");
        }
    }
};

/// A simple path: injective on [0, duration]. Injectivity is checked on the
/// sample grid (exact for lattice data).
struct SimplePath {
    TimedPath path;

    double duration() const { return path.duration; }

    void validate() const {
        path.validate();
        for (std::size_t i = 0; i < path.points.size(); ++i)
            for (std::size_t j = i + 1; j < path.points.size(); ++j)
                if (path.points[i] == path.points[j])
                    throw std::invalid_argument("SimplePath: repeated sample point");
    }
};

/// d_inf(f,g) = |t_f - t_g| + sup_t |f(t ^ t_f) - g(t ^ t_g)|, the sup
/// evaluated over the union of both sample grids plus grid midpoints.
inline double d_inf(const TimedPath& f, const TimedPath& g) {
    std::vector<double> grid;
    grid.reserve(2 * (f.size() + g.size()));
    for (double t : f.times) grid.push_back(t);
    for (double t : g.times) grid.push_back(t);
    double tmax = std::max(f.duration, g.duration);
    grid.push_back(tmax);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    std::vector<double> full = grid;
    for (std::size_t i = 1; i < grid.size(); ++i) full.push_back(0.5 * (grid[i - 1] + grid[i]));
    double sup = 0.0;
    for (double t : full) sup = std::max(sup, norm(f.at_clamped(t) - g.at_clamped(t)));
    return std::abs(f.duration - g.duration) + sup;
}

namespace detail {

/// Candidate times for exact modulus computation on a PL path: samples plus
/// samples shifted by +-delta, clipped to [0, duration].
inline std::vector<double> modulus_grid(const TimedPath& p, double delta) {
    std::vector<double> ts;
    ts.reserve(3 * p.size());
    for (double t : p.times) {
        ts.push_back(t);
        double a = t - delta, b = t + delta;
        if (a > 0 && a < p.duration) ts.push_back(a);
        if (b > 0 && b < p.duration) ts.push_back(b);
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

inline double windowed_max_deviation(const TimedPath& p, const std::vector<double>& ts,
                                     double delta) {
    std::vector<Vec2> vals(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) vals[i] = p.at(ts[i]);
    double best = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        for (std::size_t j = i + 1; j < ts.size(); ++j) {
            if (ts[j] - ts[i] > delta * (1.0 + 1e-12) + 1e-15) break;
            best = std::max(best, norm(vals[j] - vals[i]));
        }
    }
    return best;
}

}  // namespace detail

/// Continuity modulus: sup{|f(t)-f(s)| : |t-s| <= delta}. Exact for
/// piecewise-linear paths (candidates: samples and samples +- delta).
inline double modulus(const TimedPath& p, double delta) {
    if (delta <= 0) throw std::invalid_argument("modulus: delta must be positive");
    if (p.size() < 2) return 0.0;
    std::vector<double> ts = detail::modulus_grid(p, delta);
    return detail::windowed_max_deviation(p, ts, delta);
}

/// Modulus of the t_l-periodic extension. Computed on a doubled window,
/// which realizes exactly the circular-distance pairs.
inline double periodic_modulus(const Loop& l, double delta) {
    if (delta <= 0) throw std::invalid_argument("periodic_modulus: delta must be positive");
    const TimedPath& p = l.path;
    if (p.duration == 0 || p.size() < 2) return 0.0;
    TimedPath doubled;
    doubled.duration = 2 * p.duration;
    doubled.times = p.times;
    doubled.points = p.points;
    for (std::size_t i = 1; i < p.size(); ++i) {
        doubled.times.push_back(p.duration + p.times[i]);
        doubled.points.push_back(p.points[i]);
    }
    double d = std::min(delta, p.duration);
    std::vector<double> ts = detail::modulus_grid(doubled, d);
    return detail::windowed_max_deviation(doubled, ts, d);
}

/// Rerooted loop: result(t) = l((t + theta) mod t_l). Exact at samples.
inline Loop reroot(const Loop& l, double theta) {
    const TimedPath& p = l.path;
    if (theta < 0 || theta > p.duration)
        throw std::invalid_argument("reroot: theta out of [0, t_l]");
    if (theta == 0 || theta == p.duration || p.duration == 0) return l;
    TimedPath out;
    out.duration = p.duration;
    out.kind = p.kind;
    out.mesh = p.mesh;
    out.times.push_back(0.0);
    out.points.push_back(p.at(theta));
    // Samples after theta, shifted down.
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.times[i] > theta && p.times[i] < p.duration) {
            out.times.push_back(p.times[i] - theta);
            out.points.push_back(p.points[i]);
        }
    }
    // Wrap point (old loop endpoint == start point).
    out.times.push_back(p.duration - theta);
    out.points.push_back(p.points.front());
    // Samples before theta, shifted up.
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.times[i] > 0 && p.times[i] < theta) {
            out.times.push_back(p.duration - theta + p.times[i]);
            out.points.push_back(p.points[i]);
        }
    }
    out.times.push_back(p.duration);
    out.points.push_back(p.at(theta));
    out.validate();
    return Loop{std::move(out)};
}

/// Concatenation a (+) b; requires a's endpoint to equal b's start.
inline TimedPath concat(const TimedPath& a, const TimedPath& b) {
    bool match = (a.kind == PathKind::Lattice && b.kind == PathKind::Lattice)
                     ? a.back() == b.front()
                     : norm(a.back() - b.front()) <= kLoopClosureTol;
    if (!match) throw std::invalid_argument("concat: endpoint mismatch");
    if (b.duration == 0) return a;
    if (a.duration == 0) return b;
    TimedPath out;
    out.duration = a.duration + b.duration;
    out.kind = (a.kind == b.kind) ? a.kind : PathKind::Continuum;
    out.mesh = a.mesh;
    out.times = a.times;
    out.points = a.points;
    for (std::size_t i = 1; i < b.size(); ++i) {
        out.times.push_back(a.duration + b.times[i]);
        out.points.push_back(b.points[i]);
    }
    out.validate();
    return out;
}

}  // namespace loopforge
