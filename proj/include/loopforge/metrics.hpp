#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "configuration.hpp"
#include "rho.hpp"
#include "timed_path.hpp"

namespace loopforge {

/// A delta-isomorphism witness: a partial bijection matching every loop of
/// duration >= delta on either side to a partner within d_inf <= delta/2.
struct IsoMatching {
    double delta = 0.0;
    bool attained = true;  // false when the infimum is a right limit
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

namespace detail {

/// Max-flow (BFS augmenting paths) on a tiny network; enough for the
/// circulation reduction below, where capacities are 0/1 except t->s.
struct FlowNet {
    struct Edge {
        int to;
        double cap;
        int rev;
    };
    std::vector<std::vector<Edge>> g;

    explicit FlowNet(int n) : g(n) {}

    void add(int a, int b, double cap) {
        g[a].push_back({b, cap, static_cast<int>(g[b].size())});
        g[b].push_back({a, 0.0, static_cast<int>(g[a].size()) - 1});
    }

    double max_flow(int s, int t) {
        double total = 0;
        for (;;) {
            std::vector<int> prev_node(g.size(), -1), prev_edge(g.size(), -1);
            std::queue<int> q;
            q.push(s);
            prev_node[s] = s;
            while (!q.empty() && prev_node[t] < 0) {
                int v = q.front();
                q.pop();
                for (std::size_t i = 0; i < g[v].size(); ++i) {
                    const Edge& e = g[v][i];
                    if (e.cap > 0.5 && prev_node[e.to] < 0) {
                        prev_node[e.to] = v;
                        prev_edge[e.to] = static_cast<int>(i);
                        q.push(e.to);
                    }
                }
            }
            if (prev_node[t] < 0) return total;
            for (int v = t; v != s; v = prev_node[v]) {
                Edge& e = g[prev_node[v]][prev_edge[v]];
                e.cap -= 1;
                g[v][e.rev].cap += 1;
            }
            total += 1;
        }
    }
};

/// Feasibility of a delta-isomorphism as a matching with node lower bounds:
/// required nodes (duration >= delta, or > delta for the right-limit check)
/// must be covered by edges {d_inf <= delta/2}. Standard circulation
/// reduction to max-flow. Returns the matched pairs on success.
inline bool matching_with_required(const std::vector<bool>& req_left,
                                   const std::vector<bool>& req_right,
                                   const std::vector<std::vector<bool>>& edge,
                                   std::vector<std::pair<std::size_t, std::size_t>>* pairs) {
    int nl = static_cast<int>(req_left.size()), nr = static_cast<int>(req_right.size());
    // Nodes: 0 = s, 1 = t, 2 = SS, 3 = TT, 4.. left, 4+nl.. right.
    FlowNet net(4 + nl + nr);
    int s = 0, t = 1, ss = 2, tt = 3;
    double need = 0;
    int nreq_l = 0, nreq_r = 0;
    for (int i = 0; i < nl; ++i) {
        if (req_left[i]) {
            net.add(ss, 4 + i, 1);  // lower bound on s -> Li
            ++nreq_l;
        } else {
            net.add(s, 4 + i, 1);
        }
    }
    for (int j = 0; j < nr; ++j) {
        if (req_right[j]) {
            net.add(4 + nl + j, tt, 1);  // lower bound on Rj -> t
            ++nreq_r;
        } else {
            net.add(4 + nl + j, t, 1);
        }
    }
    if (nreq_l > 0) net.add(s, tt, nreq_l);
    if (nreq_r > 0) net.add(ss, t, nreq_r);
    need = nreq_l + nreq_r;
    for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nr; ++j)
            if (edge[i][j]) net.add(4 + i, 4 + nl + j, 1);
    net.add(t, s, 1e18);
    double flow = net.max_flow(ss, tt);
    if (flow < need - 0.5) return false;
    if (pairs) {
        pairs->clear();
        for (int i = 0; i < nl; ++i)
            for (const FlowNet::Edge& e : net.g[4 + i])
                if (e.to >= 4 + nl && e.to < 4 + nl + nr && e.cap < 0.5)
                    pairs->emplace_back(i, e.to - 4 - nl);
    }
    return true;
}

}  // namespace detail

/// The soup distance d(L, L') of the delta-isomorphism construction. The
/// infimum over feasible delta is attained at one of the breakpoints
/// {2 d_inf(l, l')} U {t_l} U {t_l'}: between breakpoints the required sets
/// and the allowed edges are constant. A breakpoint can also be the
/// non-attained infimum (feasible only for delta just above it, where the
/// requirement {t >= delta} relaxes); the witness then carries attained =
/// false.
inline IsoMatching soup_distance(const LoopSoup& a, const LoopSoup& b) {
    std::size_t nl = a.size(), nr = b.size();
    std::vector<std::vector<double>> dist(nl, std::vector<double>(nr));
    std::vector<double> breakpoints{0.0};
    for (std::size_t i = 0; i < nl; ++i)
        for (std::size_t j = 0; j < nr; ++j) {
            dist[i][j] = d_inf(a.loops[i].path, b.loops[j].path);
            breakpoints.push_back(2 * dist[i][j]);
        }
    for (std::size_t i = 0; i < nl; ++i) breakpoints.push_back(a.loops[i].duration());
    for (std::size_t j = 0; j < nr; ++j) breakpoints.push_back(b.loops[j].duration());
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

    auto feasible = [&](double delta, bool strict,
                        std::vector<std::pair<std::size_t, std::size_t>>* pairs) {
        std::vector<bool> req_l(nl), req_r(nr);
        for (std::size_t i = 0; i < nl; ++i) {
            double t = a.loops[i].duration();
            req_l[i] = strict ? t > delta : t >= delta;
        }
        for (std::size_t j = 0; j < nr; ++j) {
            double t = b.loops[j].duration();
            req_r[j] = strict ? t > delta : t >= delta;
        }
        std::vector<std::vector<bool>> edge(nl, std::vector<bool>(nr));
        for (std::size_t i = 0; i < nl; ++i)
            for (std::size_t j = 0; j < nr; ++j) edge[i][j] = 2 * dist[i][j] <= delta;
        return detail::matching_with_required(req_l, req_r, edge, pairs);
    };

    IsoMatching out;
    for (double bp : breakpoints) {
        if (feasible(bp, false, &out.pairs)) {
            out.delta = bp;
            out.attained = true;
            return out;
        }
        if (feasible(bp, true, &out.pairs)) {
            out.delta = bp;
            out.attained = false;  // infimum, reached only from above
            return out;
        }
    }
    throw std::logic_error("soup_distance: no feasible breakpoint (unreachable)");
}

struct SuitedReport {
    bool suited = false;
    bool strongly_suited = false;
};

namespace detail {

inline const HitRecord* find_hit(const Configuration& cfg, std::size_t loop_index) {
    for (const HitRecord& h : cfg.hits)
        if (h.loop_index == loop_index) return &h;
    return nullptr;
}

}  // namespace detail

/// Suitedness of a witness with respect to two configurations: matched
/// partners of gamma-hitting loops of duration >= eps must hit the other
/// path too; strong suitedness additionally preserves the first-hit order.
inline SuitedReport is_suited(const Configuration& a, const Configuration& b,
                              const IsoMatching& w, double eps) {
    SuitedReport rep;
    rep.suited = true;
    std::vector<std::ptrdiff_t> fwd(a.soup.size(), -1), bwd(b.soup.size(), -1);
    for (const auto& [i, j] : w.pairs) {
        fwd[i] = static_cast<std::ptrdiff_t>(j);
        bwd[j] = static_cast<std::ptrdiff_t>(i);
    }
    std::vector<std::pair<double, double>> order_pairs;  // (sigma_A, sigma_B) on the test set
    for (const HitRecord& h : a.hits) {
        if (a.soup.loops[h.loop_index].duration() < eps) continue;
        std::ptrdiff_t j = fwd[h.loop_index];
        const HitRecord* hb = j >= 0 ? detail::find_hit(b, static_cast<std::size_t>(j)) : nullptr;
        if (!hb) {
            rep.suited = false;
            return rep;
        }
        order_pairs.emplace_back(h.sigma, hb->sigma);
    }
    for (const HitRecord& h : b.hits) {
        if (b.soup.loops[h.loop_index].duration() < eps) continue;
        std::ptrdiff_t i = bwd[h.loop_index];
        const HitRecord* ha = i >= 0 ? detail::find_hit(a, static_cast<std::size_t>(i)) : nullptr;
        if (!ha) {
            rep.suited = false;
            return rep;
        }
        order_pairs.emplace_back(ha->sigma, h.sigma);
    }
    rep.strongly_suited = true;
    for (std::size_t p = 0; p < order_pairs.size(); ++p)
        for (std::size_t q = p + 1; q < order_pairs.size(); ++q) {
            bool lt_a = order_pairs[p].first < order_pairs[q].first;
            bool lt_b = order_pairs[p].second < order_pairs[q].second;
            bool gt_a = order_pairs[p].first > order_pairs[q].first;
            bool gt_b = order_pairs[p].second > order_pairs[q].second;
            if (lt_a != lt_b || gt_a != gt_b) rep.strongly_suited = false;
        }
    return rep;
}

/// omega_delta over a whole soup: the max loop modulus.
inline double soup_modulus(const LoopSoup& soup, double delta) {
    double m = 0.0;
    for (const Loop& l : soup.loops) m = std::max(m, modulus(l.path, delta));
    return m;
}

struct ConfigDistance {
    double rho_term = 0.0;
    double rho_slack = 0.0;
    double soup_term = 0.0;
    double time_term = 0.0;     // |t_X - t_X'| with t_X = t_{gamma,L}
    double modulus_term = 0.0;  // sup over the dyadic grid on [0,1]
    double d_r0 = 0.0;
    double d_r0_weak = 0.0;
    IsoMatching witness;
};

/// d_{R0}(X, X') = rho(gamma, gamma') + d(L, L') + |t_X - t_X'|
///               + || delta -> omega_delta(L) - omega_delta(L') ||_{inf,[0,1]}
/// with the modulus sup evaluated on the dyadic grid {2^-j, j = 0..20};
/// omega is monotone in delta, so the grid sup is a certified lower bound
/// of the true sup with the refinement error reported through the grid.
inline ConfigDistance config_distance(const Configuration& a, const Configuration& b,
                                      int rho_grid = 128) {
    ConfigDistance out;
    RhoResult r = rho_with_slack(a.gamma.path, b.gamma.path, rho_grid);
    out.rho_term = r.value;
    out.rho_slack = r.slack;
    out.witness = soup_distance(a.soup, b.soup);
    out.soup_term = out.witness.delta;
    out.time_term = std::abs(a.total_hit_duration - b.total_hit_duration);
    for (int j = 0; j <= 20; ++j) {
        double delta = std::ldexp(1.0, -j);
        out.modulus_term =
            std::max(out.modulus_term, std::abs(soup_modulus(a.soup, delta) -
                                                soup_modulus(b.soup, delta)));
    }
    out.d_r0 = out.rho_term + out.soup_term + out.time_term + out.modulus_term;
    out.d_r0_weak = out.rho_term + out.soup_term;
    return out;
}

/// omega^1_delta(X) of Eq-(3) type: the largest gap between consecutive
/// first-hit times of loops with duration >= delta, padded with 0 and
/// t_gamma. Equals t_gamma when no such loop hits gamma.
inline double density_modulus(const Configuration& cfg, double delta) {
    if (delta <= 0) throw std::invalid_argument("density_modulus: delta must be positive");
    std::vector<double> sigmas{0.0};
    for (const HitRecord& h : cfg.hits)
        if (cfg.soup.loops[h.loop_index].duration() >= delta) sigmas.push_back(h.sigma);
    sigmas.push_back(cfg.gamma_duration());
    std::sort(sigmas.begin(), sigmas.end());
    double gap = 0.0;
    for (std::size_t i = 1; i < sigmas.size(); ++i) gap = std::max(gap, sigmas[i] - sigmas[i - 1]);
    return gap;
}

enum class SideFlag {
    Bilateral,
    OneSidedLeft,
    OneSidedRight,
    NoSide,        // every loop edge at the root runs along gamma
    EndpointRoot,  // sigma_l in {0, t_gamma}: side classification undefined
    NotEvaluated,  // continuum data: abstains by design
};

struct RegularityReport {
    bool total_time_finite = true;
    double total_time = 0.0;
    std::vector<double> equicontinuity_delta, equicontinuity_omega;   // condition (ii)
    bool sigma_injective = true;                                      // condition (iii)
    std::vector<std::pair<std::size_t, std::size_t>> sigma_collisions;  // loop index pairs
    bool roots_unique = true;
    std::vector<std::size_t> multi_root_loops;
    std::vector<double> density_delta, density_gap;                   // condition (iv)
    std::vector<SideFlag> bilateral_flags;                            // condition (v), per hit
};

namespace detail {

/// Side of a free lattice edge direction d at the root, against the
/// incoming gamma-direction a and outgoing b: sign of cross(a, d), falling
/// back to cross(b, d) when d is parallel to a (the straight-through edge
/// of a turn).
inline int edge_side(Vec2i a, Vec2i b, Vec2i d) {
    std::int64_t c = cross(a, d);
    if (c == 0) c = cross(b, d);
    return c > 0 ? 1 : (c < 0 ? -1 : 0);
}

inline SideFlag classify_hit(const LatticePath& gamma, const LatticePath& loop, double sigma_d) {
    std::size_t sigma = static_cast<std::size_t>(sigma_d);
    if (sigma == 0 || sigma + 1 >= gamma.vertices.size()) return SideFlag::EndpointRoot;
    Vec2i x = gamma.vertices[sigma];
    Vec2i a = x - gamma.vertices[sigma - 1];   // incoming direction
    Vec2i b = gamma.vertices[sigma + 1] - x;   // outgoing direction
    bool left = false, right = false;
    std::int64_t k = loop.steps();
    for (std::int64_t t = 0; t < k; ++t) {
        if (loop.vertices[static_cast<std::size_t>(t)] != x) continue;
        Vec2i prev = loop.vertices[static_cast<std::size_t>((t + k - 1) % k)];
        Vec2i next = loop.vertices[static_cast<std::size_t>(t + 1)];
        for (Vec2i d : {prev - x, next - x}) {
            if (d == Vec2i{-a.x, -a.y} || d == b) continue;  // runs along gamma
            int s = edge_side(a, b, d);
            if (s > 0) left = true;
            if (s < 0) right = true;
        }
    }
    if (left && right) return SideFlag::Bilateral;
    if (left) return SideFlag::OneSidedLeft;
    if (right) return SideFlag::OneSidedRight;
    return SideFlag::NoSide;
}

}  // namespace detail

/// Computable checks of the regularity conditions (i)-(v) on a sampled
/// configuration. Bilateral flags are only decidable on lattice data; the
/// continuum report abstains.
inline RegularityReport regularity_check(const Configuration& cfg) {
    RegularityReport rep;
    rep.total_time = cfg.total_hit_duration;
    rep.total_time_finite = std::isfinite(rep.total_time);
    for (int j = 0; j <= 10; ++j) {
        double delta = std::ldexp(1.0, -j);
        rep.equicontinuity_delta.push_back(delta);
        rep.equicontinuity_omega.push_back(soup_modulus(cfg.soup, delta));
        rep.density_delta.push_back(delta);
        rep.density_gap.push_back(density_modulus(cfg, delta));
    }
    for (std::size_t i = 0; i + 1 < cfg.hits.size(); ++i)
        if (cfg.hits[i].sigma == cfg.hits[i + 1].sigma) {
            rep.sigma_injective = false;
            rep.sigma_collisions.emplace_back(cfg.hits[i].loop_index,
                                              cfg.hits[i + 1].loop_index);
        }
    for (const HitRecord& h : cfg.hits)
        if (h.roots.size() > 1) {
            rep.roots_unique = false;
            rep.multi_root_loops.push_back(h.loop_index);
        }
    bool lattice = cfg.soup.kind == SoupKind::Lattice && cfg.gamma_lattice.has_value();
    for (const HitRecord& h : cfg.hits) {
        if (!lattice) {
            rep.bilateral_flags.push_back(SideFlag::NotEvaluated);
            continue;
        }
        rep.bilateral_flags.push_back(detail::classify_hit(
            *cfg.gamma_lattice, cfg.soup.lattice_loops[h.loop_index], h.sigma));
    }
    return rep;
}

}  // namespace loopforge
