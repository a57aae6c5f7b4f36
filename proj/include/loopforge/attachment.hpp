#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "configuration.hpp"
#include "rng.hpp"
#include "timed_path.hpp"

namespace loopforge {

/// Tie-break data: a total order refinement for loops sharing a first-hit
/// time, plus a chosen temporal root for every hit loop. Orders and root
/// choices are stored as indices into the Configuration's hit list, which
/// makes the same TieBreak valid across the canonical scaling bijections.
struct TieBreak {
    std::vector<std::size_t> order;        // hit indices in the order prec_{gamma,B}
    std::vector<std::size_t> root_choice;  // per hit index: index into hits[i].roots
};

/// Collision structure of a configuration plus tie-break enumeration and
/// uniform sampling. The count is Prod (class size)! x Prod |Theta_l|.
struct TieBreakFamily {
    std::vector<std::vector<std::size_t>> classes;  // hit indices grouped by equal sigma
    double count = 1.0;

    explicit TieBreakFamily(const Configuration& cfg) {
        std::size_t h = cfg.hits.size();
        std::size_t i = 0;
        while (i < h) {
            std::size_t j = i;
            while (j < h && cfg.hits[j].sigma == cfg.hits[i].sigma) ++j;
            std::vector<std::size_t> cls;
            for (std::size_t k = i; k < j; ++k) cls.push_back(k);
            for (std::size_t m = 2; m <= cls.size(); ++m) count *= static_cast<double>(m);
            classes.push_back(std::move(cls));
            i = j;
        }
        for (const HitRecord& hit : cfg.hits) count *= static_cast<double>(hit.roots.size());
    }

    /// Deterministic tie-break: hit-index order within classes, first root.
    TieBreak first(const Configuration& cfg) const {
        TieBreak b;
        for (const auto& cls : classes)
            for (std::size_t k : cls) b.order.push_back(k);
        b.root_choice.assign(cfg.hits.size(), 0);
        return b;
    }

    /// Uniform tie-break: independent uniform permutation per collision
    /// class and uniform root per loop (the choice the reconstruction
    /// theorem needs).
    TieBreak uniform(const Configuration& cfg, Rng& rng) const {
        TieBreak b;
        for (const auto& cls : classes) {
            std::vector<std::size_t> perm = cls;
            for (std::size_t i = perm.size(); i > 1; --i)
                std::swap(perm[i - 1], perm[rng.uniform_below(i)]);
            for (std::size_t k : perm) b.order.push_back(k);
        }
        b.root_choice.resize(cfg.hits.size());
        for (std::size_t i = 0; i < cfg.hits.size(); ++i)
            b.root_choice[i] = static_cast<std::size_t>(
                rng.uniform_below(cfg.hits[i].roots.size()));
        return b;
    }
};

inline TieBreakFamily enumerate_tie_breaks(const Configuration& cfg) {
    return TieBreakFamily(cfg);
}

/// T_l = sum of durations of strictly earlier loops + lambda * sigma_l.
inline double reach_time(const Configuration& cfg, const TieBreak& b, double lambda,
                         std::size_t hit_index) {
    if (hit_index >= cfg.hits.size())
        throw std::domain_error("reach_time: loop not among the hits");
    double prefix = 0.0;
    for (std::size_t k : b.order) {
        if (k == hit_index) break;
        prefix += cfg.soup.loops[cfg.hits[k].loop_index].duration();
    }
    return prefix + lambda * cfg.hits[hit_index].sigma;
}

/// The time-change sigma_{X,lambda} evaluated from the configuration alone;
/// independent of the tie-break choice. On a loop interval it returns that
/// loop's sigma; elsewhere it interpolates between the enclosing loops'
/// first-hit times.
inline double sigma_of(const Configuration& cfg, double lambda, double t) {
    double t_gamma = cfg.gamma_duration();
    double total = cfg.total_hit_duration + lambda * t_gamma;
    if (t < 0 || t > total * (1 + 1e-12) + 1e-15)
        throw std::domain_error("sigma_of: time out of [0, t_{X,lambda}]");
    t = std::min(t, total);
    // Hits are already sorted by sigma; reach times use the hit order.
    std::size_t h = cfg.hits.size();
    double prefix = 0.0;
    double t_minus = 0.0, sigma_minus = 0.0;
    double t_plus = total, sigma_plus = t_gamma;
    for (std::size_t i = 0; i < h; ++i) {
        double tl = cfg.soup.loops[cfg.hits[i].loop_index].duration();
        double T = prefix + lambda * cfg.hits[i].sigma;
        double end = T + tl;
        if (t > T && t < end) return cfg.hits[i].sigma;  // inside a loop interval
        if (end <= t) {
            t_minus = std::max(t_minus, end);
            sigma_minus = std::max(sigma_minus, cfg.hits[i].sigma);
        }
        if (T >= t) {
            t_plus = std::min(t_plus, T);
            sigma_plus = std::min(sigma_plus, cfg.hits[i].sigma);
            break;  // later loops have larger T
        }
        prefix += tl;
    }
    if (t_plus <= t_minus) return sigma_minus;
    double mu = (t - t_minus) / (t_plus - t_minus);
    return (1 - mu) * sigma_minus + mu * sigma_plus;
}

struct AttachJump {
    double t = 0.0;
    Vec2 left{}, right{};
};

struct AttachmentResult {
    TimedPath x;
    double duration = 0.0;  // t_{X,lambda} = sum t_l + lambda t_gamma
    std::vector<double> sigma_times;   // PL breakpoints of sigma_{X,lambda}
    std::vector<double> sigma_values;
    std::vector<std::size_t> hit_order;                      // hit indices, attach order
    std::vector<std::pair<std::size_t, double>> reach_times; // (loop_index, T_l)
    std::vector<std::pair<double, double>> loop_intervals;   // (T_l, T_l + t_l)
    std::vector<AttachJump> jumps;                           // lambda = 0 only

    double sigma_at(double t) const {
        if (t < sigma_times.front() || t > sigma_times.back() * (1 + 1e-12) + 1e-15)
            throw std::domain_error("sigma_at: time out of range");
        t = std::min(t, sigma_times.back());
        auto it = std::upper_bound(sigma_times.begin(), sigma_times.end(), t);
        std::size_t i = static_cast<std::size_t>(it - sigma_times.begin());
        if (i >= sigma_times.size()) return sigma_values.back();
        if (i == 0) return sigma_values.front();
        double t0 = sigma_times[i - 1], t1 = sigma_times[i];
        if (t == t0) return sigma_values[i - 1];
        double mu = (t - t0) / (t1 - t0);
        return (1 - mu) * sigma_values[i - 1] + mu * sigma_values[i];
    }
};

struct AttachOptions {
    bool allow_lambda_zero = false;  // produce cadlag output with recorded jumps
};

/// The attachment map Xi(X, lambda, B): inserts every hit loop, rerooted at
/// its chosen temporal root, at its reach time; between loop intervals the
/// path follows gamma at the interpolated time-change. Exact on its sample
/// grid (loop samples shifted by T_l, plus gamma-sample preimages in the
/// gaps), and piecewise linear in between.
inline AttachmentResult attach(const Configuration& cfg, double lambda, const TieBreak& b,
                               const AttachOptions& opts = {}) {
    if (lambda < 0) throw std::invalid_argument("attach: lambda must be >= 0");
    if (lambda == 0 && !opts.allow_lambda_zero)
        throw std::invalid_argument(
            "attach: lambda = 0 on a finite sampled soup produces a cadlag time-change "
            "(first-hit times are not dense); pass allow_lambda_zero to accept jumps");
    std::size_t h = cfg.hits.size();
    if (b.order.size() != h || b.root_choice.size() != h)
        throw std::invalid_argument("attach: tie-break does not match configuration");

    const TimedPath& gp = cfg.gamma.path;
    double t_gamma = gp.duration;

    AttachmentResult res;
    res.hit_order = b.order;
    double prefix = 0.0;
    std::vector<double> T(h), End(h), Sig(h);
    std::vector<Loop> rerooted(h);
    for (std::size_t pos = 0; pos < h; ++pos) {
        std::size_t hi = b.order[pos];
        const HitRecord& hit = cfg.hits[hi];
        const Loop& loop = cfg.soup.loops[hit.loop_index];
        double theta = hit.roots.at(b.root_choice[hi]);
        rerooted[pos] = reroot(loop, theta);
        T[pos] = prefix + lambda * hit.sigma;
        prefix += loop.duration();
        End[pos] = T[pos] + loop.duration();
        Sig[pos] = hit.sigma;
        res.reach_times.emplace_back(hit.loop_index, T[pos]);
        res.loop_intervals.emplace_back(T[pos], End[pos]);
    }
    res.duration = prefix + lambda * t_gamma;

    // Validate that the order is non-decreasing in sigma (a genuine refinement).
    for (std::size_t pos = 1; pos < h; ++pos)
        if (Sig[pos] < Sig[pos - 1])
            throw std::invalid_argument("attach: tie-break order not sigma-monotone");

    TimedPath x;
    x.duration = res.duration;
    bool lattice_out = gp.kind == PathKind::Lattice && cfg.soup.kind == SoupKind::Lattice;
    x.kind = lattice_out ? PathKind::Lattice : PathKind::Continuum;
    x.mesh = gp.mesh;

    auto push_x = [&](double t, Vec2 p) {
        if (!x.times.empty()) {
            if (t < x.times.back()) return;
            if (t == x.times.back()) {
                Vec2 prev = x.points.back();
                if (norm(prev - p) > kLoopClosureTol) {
                    if (lambda > 0)
                        throw std::logic_error("attach: discontinuity at lambda > 0");
                    res.jumps.push_back({t, prev, p});
                    x.points.back() = p;  // cadlag: keep the right limit
                }
                return;
            }
        }
        x.times.push_back(t);
        x.points.push_back(p);
    };
    auto push_sigma = [&](double t, double s) {
        if (!res.sigma_times.empty()) {
            if (t < res.sigma_times.back()) return;
            if (t == res.sigma_times.back()) {
                res.sigma_values.back() = s;
                return;
            }
        }
        res.sigma_times.push_back(t);
        res.sigma_values.push_back(s);
    };

    // Gap filler: gamma-sample preimages between consecutive loop intervals.
    auto fill_gap = [&](double t0, double s0, double t1, double s1) {
        if (t1 <= t0) return;
        if (s1 > s0) {
            double rate = (t1 - t0) / (s1 - s0);
            auto lo = std::upper_bound(gp.times.begin(), gp.times.end(), s0);
            for (auto it = lo; it != gp.times.end() && *it < s1; ++it) {
                double tg = t0 + (*it - s0) * rate;
                if (tg > t0 && tg < t1) push_x(tg, gp.at(*it));
            }
        }
        push_x(t1, gp.at(s1));
    };

    push_sigma(0.0, 0.0);
    push_x(0.0, gp.at(0.0));
    double cur_t = 0.0, cur_s = 0.0;
    for (std::size_t pos = 0; pos < h; ++pos) {
        fill_gap(cur_t, cur_s, T[pos], Sig[pos]);
        push_sigma(T[pos], Sig[pos]);
        const TimedPath& lp = rerooted[pos].path;
        for (std::size_t i = 0; i < lp.size(); ++i) push_x(T[pos] + lp.times[i], lp.points[i]);
        push_x(End[pos], lp.points.back());
        push_sigma(End[pos], Sig[pos]);
        cur_t = End[pos];
        cur_s = Sig[pos];
    }
    fill_gap(cur_t, cur_s, res.duration, t_gamma);
    push_sigma(res.duration, t_gamma);
    if (x.times.back() != res.duration) push_x(res.duration, gp.at(t_gamma));

    x.validate();
    res.x = std::move(x);
    return res;
}

inline AttachmentResult attach(const Configuration& cfg, double lambda,
                               const AttachOptions& opts = {}) {
    TieBreakFamily fam(cfg);
    return attach(cfg, lambda, fam.first(cfg), opts);
}

/// Decorated lattice walk at lambda = 1, recovered with integer vertices.
inline LatticePath attach_lattice_walk(const Configuration& cfg, const TieBreak& b) {
    AttachmentResult res = attach(cfg, 1.0, b);
    return LatticePath::from_timed_unit(res.x);
}

/// Scaling identity checks: each returns the sup-norm discrepancy between
/// the two sides, evaluated on the union of their sample grids.
namespace detail {

inline double sup_difference(const TimedPath& a, const TimedPath& b) {
    double d = std::abs(a.duration - b.duration);
    std::vector<double> grid = a.times;
    grid.insert(grid.end(), b.times.begin(), b.times.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    double sup = 0.0;
    for (double t : grid) sup = std::max(sup, norm(a.at_clamped(t) - b.at_clamped(t)));
    return sup + d;
}

inline TimedPath map_space(const TimedPath& p, double a) {
    TimedPath out = p;
    for (Vec2& q : out.points) q = a * q;
    return out;
}

inline TimedPath map_time(const TimedPath& p, double rate) {
    TimedPath out = p;
    out.duration *= rate;
    for (double& t : out.times) t *= rate;
    out.times.back() = out.duration;
    return out;
}

}  // namespace detail

/// Spatial dilation commutes with attachment:
///   Xi(a X, lambda, B) = a Xi(X, lambda, B).
inline double check_spatial_scaling(const Configuration& cfg, double lambda, const TieBreak& b, double a) {
    AttachmentResult rhs = attach(cfg, lambda, b);
    Configuration scaled = scale_configuration_space(cfg, a);
    AttachmentResult lhs = attach(scaled, lambda, b);
    return detail::sup_difference(lhs.x, detail::map_space(rhs.x, a));
}

/// Time scaling of the whole configuration commutes with attachment:
///   Xi(S_c X, lambda, B) = S_c Xi(X, lambda, B).
inline double check_time_scaling(const Configuration& cfg, double lambda, const TieBreak& b, double c) {
    AttachmentResult rhs = attach(cfg, lambda, b);
    Configuration scaled = scale_configuration_time(cfg, c);
    AttachmentResult lhs = attach(scaled, lambda, b);
    return detail::sup_difference(lhs.x, detail::map_time(rhs.x, 1.0 / c));
}

/// Speeding up gamma is the same as slowing the pace:
///   Xi(S_c gamma, L, lambda, B) = Xi(gamma, L, lambda / c, B).
inline double check_pace_transfer(const Configuration& cfg, double lambda, const TieBreak& b, double c) {
    Configuration scaled = scale_configuration_gamma_time(cfg, c);
    AttachmentResult lhs = attach(scaled, lambda, b);
    AttachmentResult rhs = attach(cfg, lambda / c, b);
    return detail::sup_difference(lhs.x, rhs.x);
}

/// Mesh rescaling: scaling the decorated walk equals attaching the
/// rescaled configuration at pace lambda_n,
///   phi_n(Xi(gamma, L, 1, B)) = Xi(phi*_n gamma, phi_n L, lambda_n, B),
/// under the canonical bijection of hits and tie-breaks.
inline double check_mesh_rescaling(const Configuration& cfg, const TieBreak& b, std::int64_t n,
                         double cstar) {
    AttachmentResult raw = attach(cfg, 1.0, b);
    double ninv = 1.0 / static_cast<double>(n);
    double rate = 1.0 / (2.0 * static_cast<double>(n) * static_cast<double>(n));
    TimedPath lhs = detail::map_time(detail::map_space(raw.x, ninv), rate);
    Configuration scaled = scale_configuration_mesh(cfg, n, cstar);
    double lam = 0.5 * cstar * std::pow(static_cast<double>(n), -0.75);
    AttachmentResult rhs = attach(scaled, lam, b);
    return detail::sup_difference(lhs, rhs.x);
}

}  // namespace loopforge
