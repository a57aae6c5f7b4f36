#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "geometry.hpp"
#include "lattice.hpp"
#include "loop_soup.hpp"
#include "timed_path.hpp"

namespace loopforge {

/// Spatial tolerance used to cluster continuum root times; clusters closer
/// than 10x this are flagged rather than silently merged.
inline constexpr double kRootTol = 1e-9;

/// First-hit data of one loop against the simple path: sigma is the
/// earliest gamma-time whose point lies on the loop, x the hit point, and
/// roots the loop times through x, normalized mod t_l.
struct HitRecord {
    std::size_t loop_index = 0;
    double sigma = 0.0;
    Vec2 x{};
    std::vector<double> roots;
    bool ambiguous = false;            // continuum: near-degenerate predicates
    bool root_cluster_warning = false; // continuum: clusters < 10x tolerance apart
};

/// A simple path plus a soup with derived per-loop first-hit records.
struct Configuration {
    SimplePath gamma;
    std::optional<LatticePath> gamma_lattice;  // integer backing, lattice kind
    LoopSoup soup;
    std::vector<HitRecord> hits;  // exactly the intersecting loops, by soup index
    double total_hit_duration = 0.0;  // t_{gamma,L}

    double gamma_duration() const { return gamma.path.duration; }
};

namespace detail {

inline void finish_configuration(Configuration& cfg) {
    std::sort(cfg.hits.begin(), cfg.hits.end(), [](const HitRecord& a, const HitRecord& b) {
        return a.sigma != b.sigma ? a.sigma < b.sigma : a.loop_index < b.loop_index;
    });
    cfg.total_hit_duration = 0.0;
    for (const HitRecord& h : cfg.hits)
        cfg.total_hit_duration += cfg.soup.loops[h.loop_index].duration();
}

using GammaIndex = std::unordered_map<Vec2i, std::size_t, Vec2iHash>;

/// First hit of a lattice loop: the smallest gamma-index among the loop's
/// vertices (gamma is simple, so each vertex has one index).
inline HitRecord lattice_hit(const LatticePath& gamma, const GammaIndex& gamma_index,
                             const LatticePath& loop, std::size_t loop_index) {
    HitRecord h;
    h.loop_index = loop_index;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    std::int64_t k = loop.steps();
    for (std::int64_t t = 0; t < k; ++t) {
        auto it = gamma_index.find(loop.vertices[static_cast<std::size_t>(t)]);
        if (it != gamma_index.end()) best = std::min(best, it->second);
    }
    if (best == std::numeric_limits<std::size_t>::max()) {
        h.sigma = -1.0;  // no intersection
        return h;
    }
    h.sigma = static_cast<double>(best);
    Vec2i x = gamma.vertices[best];
    h.x = {static_cast<double>(x.x), static_cast<double>(x.y)};
    for (std::int64_t t = 0; t < k; ++t)  // times mod t_l
        if (loop.vertices[static_cast<std::size_t>(t)] == x)
            h.roots.push_back(static_cast<double>(t));
    return h;
}

/// Continuum first hit: scan gamma's segments in order; within the first
/// intersecting segment take the smallest parameter over all loop segments.
inline HitRecord continuum_hit(const TimedPath& gamma, const TimedPath& loop,
                               std::size_t loop_index) {
    HitRecord h;
    h.loop_index = loop_index;
    h.sigma = -1.0;
    for (std::size_t i = 0; i + 1 < gamma.size(); ++i) {
        Vec2 p0 = gamma.points[i], p1 = gamma.points[i + 1];
        double best_t = std::numeric_limits<double>::infinity();
        Vec2 best_x{};
        bool ambiguous = false;
        for (std::size_t j = 0; j + 1 < loop.size(); ++j) {
            auto hit = segment_intersect(p0, p1, loop.points[j], loop.points[j + 1]);
            if (hit && hit->t < best_t) {
                best_t = hit->t;
                best_x = hit->point;
                ambiguous = hit->ambiguous;
            }
        }
        if (best_t <= 1.0) {
            h.sigma = gamma.times[i] + best_t * (gamma.times[i + 1] - gamma.times[i]);
            h.x = best_x;
            h.ambiguous = ambiguous;
            // Root times: loop passes through x where a loop segment comes
            // within the root tolerance; cluster parameter values.
            std::vector<double> raw;
            for (std::size_t j = 0; j + 1 < loop.size(); ++j) {
                Vec2 a = loop.points[j], b = loop.points[j + 1];
                if (point_segment_distance(h.x, a, b) <= kRootTol) {
                    Vec2 d = b - a;
                    double dd = norm2(d);
                    double u = dd > 0 ? std::min(1.0, std::max(0.0, dot(h.x - a, d) / dd)) : 0.0;
                    raw.push_back(loop.times[j] + u * (loop.times[j + 1] - loop.times[j]));
                }
            }
            double tl = loop.duration;
            double tol = kRootTol * std::max(1.0, tl);
            for (double& r : raw)
                if (r >= tl - tol) r = 0.0;  // times mod t_l
            std::sort(raw.begin(), raw.end());
            for (double rn : raw) {
                if (!h.roots.empty()) {
                    double gap = rn - h.roots.back();
                    if (gap <= tol) continue;  // same cluster
                    if (gap <= 10 * tol) h.root_cluster_warning = true;
                }
                h.roots.push_back(rn);
            }
            // Wraparound cluster: a root just below t_l duplicates one at 0.
            if (h.roots.size() > 1 && !h.roots.empty() && h.roots.front() == 0.0 &&
                tl - h.roots.back() <= tol)
                h.roots.pop_back();
            return h;
        }
    }
    return h;
}

}  // namespace detail

/// Builds the Configuration: first-hit records for exactly the loops whose
/// range meets gamma's range.
inline Configuration build_configuration(SimplePath gamma, LoopSoup soup,
                                         std::optional<LatticePath> gamma_lattice = {}) {
    Configuration cfg;
    cfg.gamma = std::move(gamma);
    cfg.soup = std::move(soup);
    cfg.gamma_lattice = std::move(gamma_lattice);
    bool lattice = cfg.soup.kind == SoupKind::Lattice && cfg.gamma_lattice.has_value();
    if (cfg.soup.kind == SoupKind::Lattice && !cfg.gamma_lattice.has_value())
        throw std::invalid_argument("build_configuration: lattice soup needs lattice gamma");
    detail::GammaIndex gamma_index;
    if (lattice) {
        const auto& gv = cfg.gamma_lattice->vertices;
        gamma_index.reserve(gv.size());
        for (std::size_t i = 0; i < gv.size(); ++i) gamma_index.emplace(gv[i], i);
    }
    for (std::size_t i = 0; i < cfg.soup.loops.size(); ++i) {
        HitRecord h = lattice ? detail::lattice_hit(*cfg.gamma_lattice, gamma_index,
                                                    cfg.soup.lattice_loops[i], i)
                              : detail::continuum_hit(cfg.gamma.path, cfg.soup.loops[i].path, i);
        if (h.sigma >= 0.0) {
            if (h.roots.empty())
                throw std::logic_error("build_configuration: intersecting loop with no roots");
            cfg.hits.push_back(std::move(h));
        }
    }
    detail::finish_configuration(cfg);
    return cfg;
}

inline Configuration build_configuration(const LatticePath& gamma, LoopSoup soup) {
    SimplePath sp{gamma.to_timed()};
    return build_configuration(std::move(sp), std::move(soup), gamma);
}

/// T_{<=eps}(X): total duration of intersecting loops of duration <= eps.
inline double small_loop_time(const Configuration& cfg, double eps) {
    if (eps <= 0) throw std::invalid_argument("small_loop_time: eps must be positive");
    double total = 0.0;
    for (const HitRecord& h : cfg.hits) {
        double tl = cfg.soup.loops[h.loop_index].duration();
        if (tl <= eps) total += tl;
    }
    return total;
}

/// Canonical scaling maps on whole configurations: they transform the
/// derived hit data consistently, so both sides of the scaling identities
/// can be computed independently of intersection re-detection.

/// Spatial dilation a * X.
inline Configuration scale_configuration_space(const Configuration& cfg, double a) {
    Configuration out = cfg;
    for (Vec2& p : out.gamma.path.points) p = a * p;
    out.gamma_lattice.reset();
    for (Loop& l : out.soup.loops)
        for (Vec2& p : l.path.points) p = a * p;
    out.soup.lattice_loops.clear();
    out.soup.kind = SoupKind::Continuum;
    for (HitRecord& h : out.hits) h.x = a * h.x;
    return out;
}

namespace detail {
inline void scale_times(TimedPath& p, double rate) {
    // S_c with rate = 1/c: new duration = old / c.
    p.duration *= rate;
    for (double& t : p.times) t *= rate;
    p.times.back() = p.duration;
    p.kind = PathKind::Continuum;
}
}  // namespace detail

/// Time scaling S_c applied to both gamma and the loops: f -> f(c t).
inline Configuration scale_configuration_time(const Configuration& cfg, double c) {
    Configuration out = cfg;
    double rate = 1.0 / c;
    detail::scale_times(out.gamma.path, rate);
    out.gamma_lattice.reset();
    for (Loop& l : out.soup.loops) detail::scale_times(l.path, rate);
    out.soup.lattice_loops.clear();
    out.soup.kind = SoupKind::Continuum;
    for (HitRecord& h : out.hits) {
        h.sigma *= rate;
        for (double& r : h.roots) r *= rate;
    }
    out.total_hit_duration *= rate;
    return out;
}

/// Time scaling S_c applied to gamma only (loop clocks untouched).
inline Configuration scale_configuration_gamma_time(const Configuration& cfg, double c) {
    Configuration out = cfg;
    double rate = 1.0 / c;
    detail::scale_times(out.gamma.path, rate);
    out.gamma_lattice.reset();
    for (HitRecord& h : out.hits) h.sigma *= rate;
    return out;
}

/// The mesh-n configuration map (phi*_n on gamma, phi_n on the soup):
/// space / n on everything, gamma time / (c* n^{5/4}), loop time / (2 n^2).
inline Configuration scale_configuration_mesh(const Configuration& cfg, std::int64_t n,
                                              double cstar) {
    Configuration out = cfg;
    double ninv = 1.0 / static_cast<double>(n);
    double gamma_rate = 1.0 / (cstar * std::pow(static_cast<double>(n), 1.25));
    double loop_rate = 1.0 / (2.0 * static_cast<double>(n) * static_cast<double>(n));
    detail::scale_times(out.gamma.path, gamma_rate);
    for (Vec2& p : out.gamma.path.points) p = ninv * p;
    out.gamma_lattice.reset();
    for (Loop& l : out.soup.loops) {
        detail::scale_times(l.path, loop_rate);
        for (Vec2& p : l.path.points) p = ninv * p;
        l.path.kind = PathKind::Lattice;
        l.path.mesh = n;
    }
    out.soup.kind = SoupKind::Continuum;
    out.soup.lattice_loops.clear();
    for (HitRecord& h : out.hits) {
        h.sigma *= gamma_rate;
        h.x = ninv * h.x;
        for (double& r : h.roots) r *= loop_rate;
    }
    out.total_hit_duration *= loop_rate;
    return out;
}

}  // namespace loopforge
