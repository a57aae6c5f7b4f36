#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "lattice.hpp"
#include "rng.hpp"
#include "timed_path.hpp"

namespace loopforge {

struct WalkSample {
    LatticePath path;     // interior vertices plus the exit vertex (last)
    Vec2i exit_vertex{};  // outside the domain
    std::uint64_t seed = 0;
};

inline constexpr std::uint64_t kWalkStepCap = 1000000000ULL;

/// Simple random walk from the origin, stopped at the first step that lands
/// outside the domain ("exit by edge": the exit vertex is recorded).
inline WalkSample sample_srw(const LatticeDomain& dom, Rng& rng) {
    WalkSample out;
    out.seed = rng.seed();
    Vec2i v = dom.origin;
    out.path.vertices.push_back(v);
    for (std::uint64_t step = 0;; ++step) {
        if (step >= kWalkStepCap)
            throw std::runtime_error("sample_srw: step cap hit; domain mis-specified?");
        v = v + kDirections4[rng.uniform_direction4()];
        out.path.vertices.push_back(v);
        if (!dom.contains(v)) {
            out.exit_vertex = v;
            return out;
        }
    }
}

/// Loop-erased random walk: chronological erasure of an SRW trajectory.
inline WalkSample sample_lerw(const LatticeDomain& dom, Rng& rng) {
    WalkSample out = sample_srw(dom, rng);
    out.path = loop_erase(out.path);
    return out;
}

/// Massive walk: each step dies independently with probability m^2/(2n^2);
/// rejection-samples trajectories until one exits before dying.
struct KilledSample {
    WalkSample walk;
    std::uint64_t attempts = 0;
    double acceptance_rate = 0.0;
};

inline KilledSample sample_killed_conditioned(const LatticeDomain& dom, double mass, Rng& rng,
                                              std::uint64_t attempt_budget = 1000000) {
    double q = mass * mass / (2.0 * static_cast<double>(dom.mesh) * static_cast<double>(dom.mesh));
    if (q >= 1.0)
        throw std::invalid_argument("sample_killed_conditioned: death probability >= 1");
    if (q == 0.0) {
        KilledSample out;
        out.walk = sample_srw(dom, rng);
        out.attempts = 1;
        out.acceptance_rate = 1.0;
        return out;
    }
    for (std::uint64_t attempt = 1; attempt <= attempt_budget; ++attempt) {
        WalkSample ws;
        ws.seed = rng.seed();
        Vec2i v = dom.origin;
        ws.path.vertices.push_back(v);
        bool dead = false;
        for (std::uint64_t step = 0;; ++step) {
            if (step >= kWalkStepCap)
                throw std::runtime_error("sample_killed_conditioned: step cap hit");
            if (rng.uniform01() < q) {
                dead = true;
                break;
            }
            v = v + kDirections4[rng.uniform_direction4()];
            ws.path.vertices.push_back(v);
            if (!dom.contains(v)) {
                ws.exit_vertex = v;
                KilledSample out;
                out.walk = std::move(ws);
                out.attempts = attempt;
                out.acceptance_rate = 1.0 / static_cast<double>(attempt);
                return out;
            }
        }
        (void)dead;
    }
    throw std::runtime_error("sample_killed_conditioned: rejection budget exceeded (rate < " +
                             std::to_string(1.0 / static_cast<double>(attempt_budget)) + ")");
}

/// phi_n for walk-speed objects: space / n, time / (2 n^2).
inline TimedPath scale_space_time_walk(const LatticePath& p, std::int64_t n) {
    p.validate();
    if (n < 1) throw std::invalid_argument("scale_space_time_walk: mesh < 1");
    TimedPath out;
    out.kind = PathKind::Lattice;
    out.mesh = n;
    double ninv = 1.0 / static_cast<double>(n);
    double dt = 1.0 / (2.0 * static_cast<double>(n) * static_cast<double>(n));
    out.duration = static_cast<double>(p.steps()) * dt;
    for (std::size_t i = 0; i < p.vertices.size(); ++i) {
        out.times.push_back(static_cast<double>(i) * dt);
        out.points.push_back({p.vertices[i].x * ninv, p.vertices[i].y * ninv});
    }
    out.times.back() = out.duration;  // kill accumulated rounding
    return out;
}

/// phi*_n for LERW-speed objects: space / n, time / (c* n^{5/4}).
inline TimedPath scale_space_time_lerw(const LatticePath& p, std::int64_t n, double cstar) {
    p.validate();
    if (n < 1 || cstar <= 0)
        throw std::invalid_argument("scale_space_time_lerw: need n >= 1, cstar > 0");
    TimedPath out;
    out.kind = PathKind::Continuum;  // time step is not the lattice step
    double ninv = 1.0 / static_cast<double>(n);
    double dt = 1.0 / (cstar * std::pow(static_cast<double>(n), 1.25));
    out.duration = static_cast<double>(p.steps()) * dt;
    for (std::size_t i = 0; i < p.vertices.size(); ++i) {
        out.times.push_back(static_cast<double>(i) * dt);
        out.points.push_back({p.vertices[i].x * ninv, p.vertices[i].y * ninv});
    }
    out.times.back() = out.duration;
    return out;
}

/// lambda_n = (c*/2) n^{-3/4}: the pace at which the rescaled decorated walk
/// follows the rescaled LERW. Equals the ratio of the phi*_n and phi_n
/// time rates c* n^{5/4} / (2 n^2).
inline double lambda_n(std::int64_t n, double cstar) {
    return 0.5 * cstar * std::pow(static_cast<double>(n), -0.75);
}

}  // namespace loopforge
