#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "geometry.hpp"
#include "lattice.hpp"
#include "rng.hpp"
#include "timed_path.hpp"

namespace loopforge {

using u128 = unsigned __int128;

inline double u128_to_double(u128 v) {
    return std::ldexp(static_cast<double>(static_cast<std::uint64_t>(v >> 64)), 64) +
           static_cast<double>(static_cast<std::uint64_t>(v));
}

/// Hard cap on the lattice soup length cutoff: all walk counts for k <= 64
/// provably fit in 128-bit integers (N_k <= C(k,k/2)^2 < 2^122), so the
/// count DP stays exact without arbitrary-precision arithmetic.
inline constexpr std::int64_t kMaxSoupLen = 64;

enum class SoupKind { Lattice, Continuum };

/// Finite multiset of loops with sampling metadata. Lattice soups keep an
/// integer backing alongside the TimedPath view; loops are unit-speed raw
/// lattice objects until explicitly rescaled.
struct LoopSoup {
    SoupKind kind = SoupKind::Lattice;
    std::int64_t mesh = 1;      // lattice: domain mesh n
    std::int64_t max_len = 0;   // lattice: length cutoff K
    double tmin = 0.0;          // continuum: duration cutoff
    double bridge_step = 0.0;   // continuum: bridge discretization step
    double intensity = 1.0;     // fixed by construction
    /// Lattice: upper bound on the neglected mass sum_{k>K} 4^{-k} tr(A^k)/k.
    /// Continuum: the count mass below tmin diverges; this holds the omitted
    /// expected duration per e-fold of cutoff, area(D)/(2*pi).
    double truncated_mass = 0.0;
    bool truncated_mass_is_per_efold = false;

    std::vector<Loop> loops;
    std::vector<LatticePath> lattice_loops;  // parallel to loops, lattice kind

    std::size_t size() const { return loops.size(); }
};

/// Exact sampler for the random walk loop soup with intensity 1 on a finite
/// domain. Two lanes:
///  - k <= K ("DP lane"): for each vertex x and even k, the rooted loop
///    count is Poisson(N_k(x) 4^{-k} / k) with N_k(x) the number of length-k
///    closed walks at x inside the domain, computed by exact 128-bit walk
///    counts; each loop is drawn uniformly by stepwise conditioning.
///  - k in (K, K_ext] ("long lane"): domain loops of length k are exactly
///    the whole-plane rooted loop process, intensity C(k,k/2)^2 4^{-k}/k
///    per root, thinned by the stay-in-domain indicator. Candidates are
///    conditioned plane bridges (log-space binomial weights), rejected on
///    first domain exit. K_ext is chosen so the remaining tail is below
///    1e-12 expected loops per sample.
class LatticeSoupSampler {
public:
    LatticeSoupSampler(const LatticeDomain& dom, std::int64_t max_len)
        : dom_(&dom), max_len_(max_len) {
        if (max_len < 2 || max_len % 2 != 0)
            throw std::invalid_argument("LatticeSoupSampler: maxLen must be even and >= 2");
        if (max_len > kMaxSoupLen)
            throw std::invalid_argument("LatticeSoupSampler: maxLen above 128-bit exact range (64)");
        build_flags_();
        build_intensities_();
        build_long_lane_();
        tail_mass_ = tail_mass_upper_bound_(ext_len_);
    }

    double tail_mass() const { return tail_mass_; }
    std::int64_t extended_len() const { return ext_len_; }

    /// Poisson mean for rooted loops of length k at vertex x.
    double mean_count(Vec2i x, std::int64_t k) const {
        auto it = vertex_index_.find(x);
        if (it == vertex_index_.end() || k < 2 || k > max_len_ || k % 2 != 0) return 0.0;
        return means_[it->second * bands_() + (k / 2 - 1)];
    }

    /// Poisson-process decomposition: one Poisson(total intensity) draw for
    /// the loop count, then i.i.d. cells from the normalized intensity via
    /// a Walker alias table. Identical in law to per-cell Poisson draws.
    LoopSoup sample(Rng& rng) const {
        LoopSoup soup;
        soup.kind = SoupKind::Lattice;
        soup.mesh = dom_->mesh;
        soup.max_len = max_len_;
        soup.truncated_mass = tail_mass_;
        const auto& verts = dom_->vertex_list;
        if (total_mean_ > 0.0) {
            std::uint64_t count = rng.poisson(total_mean_);
            for (std::uint64_t c = 0; c < count; ++c) {
                std::size_t cell =
                    static_cast<std::size_t>(rng.uniform_below(alias_prob_.size()));
                if (rng.uniform01() >= alias_prob_[cell]) cell = alias_[cell];
                std::size_t xi = cell / static_cast<std::size_t>(bands_());
                std::int64_t k = 2 * (static_cast<std::int64_t>(cell % bands_()) + 1);
                LatticePath lp = sample_loop_at(verts[xi], k, rng);
                soup.loops.push_back(Loop{lp.to_timed()});
                soup.lattice_loops.push_back(std::move(lp));
            }
        }
        if (long_total_mean_ > 0.0) {
            std::uint64_t candidates = rng.poisson(long_total_mean_);
            for (std::uint64_t c = 0; c < candidates; ++c) {
                std::size_t cell =
                    static_cast<std::size_t>(rng.uniform_below(long_alias_prob_.size()));
                if (rng.uniform01() >= long_alias_prob_[cell]) cell = long_alias_[cell];
                std::int64_t k = 2 * (static_cast<std::int64_t>(cell) + max_len_ / 2 + 1);
                Vec2i root = verts[rng.uniform_below(verts.size())];
                LatticePath lp;
                if (sample_plane_bridge_(root, k, rng, &lp)) {
                    soup.loops.push_back(Loop{lp.to_timed()});
                    soup.lattice_loops.push_back(std::move(lp));
                }
            }
        }
        return soup;
    }

    /// Restricted sample over an even-length band [k_lo, k_hi] within the
    /// DP lane; merged band samples with independent seeds reproduce the
    /// DP-lane process in law.
    LoopSoup sample_band(Rng& rng, std::int64_t k_lo, std::int64_t k_hi) const {
        if (k_hi > max_len_)
            throw std::invalid_argument("sample_band: band beyond the DP lane cutoff");
        LoopSoup soup;
        soup.kind = SoupKind::Lattice;
        soup.mesh = dom_->mesh;
        soup.max_len = max_len_;
        soup.truncated_mass = tail_mass_;
        const auto& verts = dom_->vertex_list;
        for (std::size_t xi = 0; xi < verts.size(); ++xi) {
            for (std::int64_t band = 0; band < bands_(); ++band) {
                std::int64_t k = 2 * (band + 1);
                if (k < k_lo || k > k_hi) continue;
                double mean = means_[xi * bands_() + band];
                if (mean <= 0.0) continue;
                std::uint64_t count = rng.poisson(mean);
                for (std::uint64_t c = 0; c < count; ++c) {
                    LatticePath lp = sample_loop_at(verts[xi], k, rng);
                    soup.loops.push_back(Loop{lp.to_timed()});
                    soup.lattice_loops.push_back(std::move(lp));
                }
            }
        }
        return soup;
    }

    /// Uniform sample among the N_k(x) rooted length-k loops at x.
    LatticePath sample_loop_at(Vec2i x, std::int64_t k, Rng& rng) const {
        WalkCountTable table = walk_counts_to_(x, k - 1);
        LatticePath out;
        out.vertices.push_back(x);
        Vec2i v = x;
        for (std::int64_t r = k; r >= 1; --r) {
            u128 total = 0;
            u128 weight[4] = {0, 0, 0, 0};
            for (int d = 0; d < 4; ++d) {
                Vec2i w = v + kDirections4[d];
                if (!in_domain_(w)) continue;
                weight[d] = table.count(w, r - 1);
                total += weight[d];
            }
            if (total == 0) throw std::logic_error("sample_loop_at: dead end in count DP");
            u128 u = rng.uniform_below_u128(total);
            int chosen = 0;
            for (int d = 0; d < 4; ++d) {
                if (u < weight[d]) {
                    chosen = d;
                    break;
                }
                u -= weight[d];
            }
            v = v + kDirections4[chosen];
            out.vertices.push_back(v);
        }
        if (out.vertices.back() != x) throw std::logic_error("sample_loop_at: loop not closed");
        return out;
    }

private:
    std::int64_t bands_() const { return max_len_ / 2; }

    /// Dense membership grid over the domain's bounding box; the count DP
    /// probes membership in its innermost loop.
    void build_flags_() {
        const auto& verts = dom_->vertex_list;
        if (verts.empty()) throw std::invalid_argument("LatticeSoupSampler: empty domain");
        x0_ = y0_ = std::numeric_limits<std::int64_t>::max();
        std::int64_t x1 = std::numeric_limits<std::int64_t>::min(), y1 = x1;
        for (const Vec2i& v : verts) {
            x0_ = std::min(x0_, v.x);
            y0_ = std::min(y0_, v.y);
            x1 = std::max(x1, v.x);
            y1 = std::max(y1, v.y);
        }
        w_ = x1 - x0_ + 1;
        h_ = y1 - y0_ + 1;
        flags_.assign(static_cast<std::size_t>(w_ * h_), 0);
        for (const Vec2i& v : verts) flags_[(v.x - x0_) * h_ + (v.y - y0_)] = 1;
    }

    bool in_domain_(Vec2i v) const {
        std::int64_t dx = v.x - x0_, dy = v.y - y0_;
        if (dx < 0 || dy < 0 || dx >= w_ || dy >= h_) return false;
        return flags_[dx * h_ + dy] != 0;
    }

    /// Dense local table of walk counts to a root: count(v, r) = number of
    /// length-r walks from v to the root with all edges inside the domain.
    struct WalkCountTable {
        Vec2i root;
        std::int64_t radius = 0;
        std::int64_t depth = 0;
        std::vector<u128> data;  // (depth+1) x (2R+1)^2

        u128 count(Vec2i v, std::int64_t r) const {
            std::int64_t dx = v.x - root.x + radius, dy = v.y - root.y + radius;
            std::int64_t side = 2 * radius + 1;
            if (dx < 0 || dy < 0 || dx >= side || dy >= side) return 0;
            return data[static_cast<std::size_t>(r) * side * side + dx * side + dy];
        }
    };

    WalkCountTable walk_counts_to_(Vec2i root, std::int64_t depth) const {
        WalkCountTable t;
        t.root = root;
        t.radius = depth;
        t.depth = depth;
        std::int64_t side = 2 * depth + 1;
        t.data.assign(static_cast<std::size_t>(depth + 1) * side * side, 0);
        auto idx = [&](Vec2i v, std::int64_t r) {
            return static_cast<std::size_t>(r) * side * side + (v.x - root.x + depth) * side +
                   (v.y - root.y + depth);
        };
        t.data[idx(root, 0)] = 1;
        for (std::int64_t r = 1; r <= depth; ++r) {
            for (std::int64_t dx = -r; dx <= r; ++dx) {
                for (std::int64_t dy = -(r - std::llabs(dx)); dy <= r - std::llabs(dx); ++dy) {
                    Vec2i v{root.x + dx, root.y + dy};
                    if (!in_domain_(v)) continue;
                    u128 total = 0;
                    for (const Vec2i& d : kDirections4) {
                        Vec2i w = v + d;
                        // walks of length r-1 from w cannot reach the root
                        // from outside the L1 ball; also keeps idx in range
                        if (l1(w - root) > r - 1) continue;
                        if (!in_domain_(w)) continue;
                        total += t.data[idx(w, r - 1)];
                    }
                    t.data[idx(v, r)] = total;
                }
            }
        }
        return t;
    }

    /// N_{2r}(x) for all x and r <= K/2 via rows of A^r: the closed-walk
    /// count is the squared norm of the depth-r count row (A symmetric).
    void build_intensities_() {
        const auto& verts = dom_->vertex_list;
        vertex_index_.reserve(verts.size());
        for (std::size_t i = 0; i < verts.size(); ++i) vertex_index_.emplace(verts[i], i);
        means_.assign(verts.size() * bands_(), 0.0);
        std::int64_t half = max_len_ / 2;
        for (std::size_t xi = 0; xi < verts.size(); ++xi) {
            WalkCountTable t = walk_counts_to_(verts[xi], half);
            std::int64_t side = 2 * half + 1;
            for (std::int64_t r = 1; r <= half; ++r) {
                u128 closed = 0;
                const u128* level = &t.data[static_cast<std::size_t>(r) * side * side];
                for (std::int64_t c = 0; c < side * side; ++c) {
                    u128 v = level[c];
                    closed += v * v;
                }
                std::int64_t k = 2 * r;
                means_[xi * bands_() + (r - 1)] =
                    u128_to_double(closed) * std::ldexp(1.0, -2 * static_cast<int>(k)) /
                    static_cast<double>(k);
            }
        }
        build_alias_();
    }

    /// Walker alias table over a vector of intensities.
    static void build_walker_(const std::vector<double>& means, std::vector<std::size_t>& alias,
                              std::vector<double>& prob) {
        std::size_t n = means.size();
        double total = 0.0;
        for (double m : means) total += m;
        alias.assign(n, 0);
        prob.assign(n, 1.0);
        if (total <= 0.0 || n == 0) return;
        std::vector<double> scaled(n);
        for (std::size_t i = 0; i < n; ++i) scaled[i] = means[i] / total * static_cast<double>(n);
        std::vector<std::size_t> small, large;
        for (std::size_t i = 0; i < n; ++i) (scaled[i] < 1.0 ? small : large).push_back(i);
        while (!small.empty() && !large.empty()) {
            std::size_t s = small.back(), l = large.back();
            small.pop_back();
            large.pop_back();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            (scaled[l] < 1.0 ? small : large).push_back(l);
        }
        for (std::size_t i : small) prob[i] = 1.0;
        for (std::size_t i : large) prob[i] = 1.0;
    }

    void build_alias_() {
        total_mean_ = 0.0;
        for (double m : means_) total_mean_ += m;
        build_walker_(means_, alias_, alias_prob_);
    }

    /// Long lane setup: per-root whole-plane intensities mu_k for even
    /// k in (K, K_ext], with K_ext large enough that the in-domain tail
    /// beyond it is below 1e-12 expected loops.
    void build_long_lane_() {
        double q = spectral_ratio_();
        ext_len_ = max_len_;
        if (q <= 0.0) return;
        // |V| q^k kills the in-domain mass; solve |V| q^{K_ext} < 1e-12.
        double need = (std::log(1e-12) - std::log(static_cast<double>(dom_->size()))) /
                      std::log(q);
        std::int64_t cap = static_cast<std::int64_t>(std::min(2.0e6, std::ceil(need)));
        ext_len_ = std::max(max_len_, cap + (cap % 2));
        if (ext_len_ <= max_len_) return;
        log_fact_.resize(static_cast<std::size_t>(ext_len_) + 1);
        log_fact_[0] = 0.0;
        for (std::size_t i = 1; i < log_fact_.size(); ++i)
            log_fact_[i] = log_fact_[i - 1] + std::log(static_cast<double>(i));
        std::int64_t nbands = (ext_len_ - max_len_) / 2;
        std::vector<double> means(nbands);
        long_total_mean_ = 0.0;
        for (std::int64_t b = 0; b < nbands; ++b) {
            std::int64_t k = max_len_ + 2 * (b + 1);
            // mu_k = C(k,k/2)^2 4^{-k} / k, whole plane, per root.
            double lg = 2.0 * (log_fact_[k] - 2.0 * log_fact_[k / 2]) -
                        static_cast<double>(k) * std::log(4.0) -
                        std::log(static_cast<double>(k));
            means[b] = static_cast<double>(dom_->size()) * std::exp(lg);
            long_total_mean_ += means[b];
        }
        build_walker_(means, long_alias_, long_alias_prob_);
    }

    /// Uniform sample among whole-plane length-k loops rooted at root, by
    /// stepwise conditioning on plane bridge counts (log-space binomials).
    /// Returns false as soon as the bridge leaves the domain.
    bool sample_plane_bridge_(Vec2i root, std::int64_t k, Rng& rng, LatticePath* out) const {
        out->vertices.clear();
        out->vertices.push_back(root);
        Vec2i v{0, 0};  // relative to root
        auto log_count = [&](Vec2i u, std::int64_t r) {
            // plane walks u -> 0 of length r factor over diagonals into
            // C(r, (r+u.x+u.y)/2) C(r, (r+u.x-u.y)/2)
            std::int64_t a = u.x + u.y, b = u.x - u.y;
            if ((a + r) % 2 != 0 || std::llabs(a) > r || std::llabs(b) > r)
                return -std::numeric_limits<double>::infinity();
            double lc1 = log_fact_[r] - log_fact_[(r + a) / 2] - log_fact_[(r - a) / 2];
            double lc2 = log_fact_[r] - log_fact_[(r + b) / 2] - log_fact_[(r - b) / 2];
            return lc1 + lc2;
        };
        for (std::int64_t r = k; r >= 1; --r) {
            double lw[4], m = -std::numeric_limits<double>::infinity();
            for (int d = 0; d < 4; ++d) {
                lw[d] = log_count(v + kDirections4[d], r - 1);
                m = std::max(m, lw[d]);
            }
            double w[4], tot = 0;
            for (int d = 0; d < 4; ++d) {
                w[d] = std::isfinite(lw[d]) ? std::exp(lw[d] - m) : 0.0;
                tot += w[d];
            }
            double u = rng.uniform01() * tot;
            int chosen = 3;
            for (int d = 0; d < 4; ++d) {
                if (u < w[d]) {
                    chosen = d;
                    break;
                }
                u -= w[d];
            }
            v = v + kDirections4[chosen];
            Vec2i abs_v = root + v;
            if (!in_domain_(abs_v)) return false;
            out->vertices.push_back(abs_v);
        }
        return true;
    }

    double spectral_ratio_() const {
        const auto& verts = dom_->vertex_list;
        if (verts.empty()) return 0.0;
        std::vector<double> v(verts.size(), 1.0), w(verts.size());
        double lambda = 0.0;
        for (int it = 0; it < 200; ++it) {
            for (std::size_t i = 0; i < verts.size(); ++i) {
                double s = 0;
                for (const Vec2i& d : kDirections4) {
                    auto j = vertex_index_.find(verts[i] + d);
                    if (j != vertex_index_.end()) s += v[j->second];
                }
                w[i] = s;
            }
            double nw = 0;
            for (double x : w) nw = std::max(nw, std::abs(x));
            if (nw == 0) return 0.0;
            lambda = nw;
            for (std::size_t i = 0; i < verts.size(); ++i) v[i] = w[i] / nw;
        }
        return std::min(lambda / 4.0, 1.0 - 1e-12);
    }

    /// Upper bound sum_{k>K} 4^{-k} tr(A^k)/k <= |V| q^{K+2} / ((K+2)(1-q^2))
    /// with q = lambda_max(A)/4 from power iteration.
    double tail_mass_upper_bound_(std::int64_t beyond) const {
        double q = spectral_ratio_();
        if (q <= 0.0) return 0.0;
        double K = static_cast<double>(beyond);
        double lg = std::log(static_cast<double>(dom_->size())) + (K + 2) * std::log(q) -
                    std::log((K + 2) * (1 - q * q));
        return std::exp(lg);
    }

    const LatticeDomain* dom_;
    std::int64_t max_len_;
    std::unordered_map<Vec2i, std::size_t, Vec2iHash> vertex_index_;
    std::vector<double> means_;  // vertex-major, band = k/2 - 1
    double tail_mass_ = 0.0;
    std::int64_t x0_ = 0, y0_ = 0, w_ = 0, h_ = 0;
    std::vector<std::uint8_t> flags_;
    double total_mean_ = 0.0;
    std::vector<std::size_t> alias_;
    std::vector<double> alias_prob_;
    std::int64_t ext_len_ = 0;
    double long_total_mean_ = 0.0;
    std::vector<double> log_fact_;
    std::vector<std::size_t> long_alias_;
    std::vector<double> long_alias_prob_;
};

inline LoopSoup sample_lattice_soup(const LatticeDomain& dom, std::int64_t max_len, Rng& rng) {
    return LatticeSoupSampler(dom, max_len).sample(rng);
}

struct BrownianCandidateStats {
    std::uint64_t candidates = 0;
    std::vector<double> durations;  // all candidate durations, kept or not
};

/// Truncated Brownian loop soup on a polygonal domain: Poisson(area/(2 pi
/// tmin)) candidates; each candidate has duration with density t^{-2} on
/// [tmin, inf), a uniform root, and a Brownian bridge discretized at
/// bridge_step; kept iff every sampled point stays in the domain.
inline LoopSoup sample_brownian_soup(const Polygon& poly, double tmin, double bridge_step,
                                     Rng& rng, BrownianCandidateStats* stats = nullptr) {
    if (tmin <= 0 || bridge_step <= 0)
        throw std::invalid_argument("sample_brownian_soup: tmin and bridge_step must be positive");
    if (poly.vertices.size() < 3)
        throw std::invalid_argument("sample_brownian_soup: degenerate polygon");
    LoopSoup soup;
    soup.kind = SoupKind::Continuum;
    soup.tmin = tmin;
    soup.bridge_step = bridge_step;
    double area = poly.area();
    soup.truncated_mass = area / (2.0 * 3.14159265358979323846);
    soup.truncated_mass_is_per_efold = true;

    Vec2 lo, hi;
    poly.bounding_box(lo, hi);
    double mean = area / (2.0 * 3.14159265358979323846 * tmin);
    std::uint64_t candidates = rng.poisson(mean);
    if (stats) stats->candidates = candidates;
    for (std::uint64_t c = 0; c < candidates; ++c) {
        double t = tmin / std::max(rng.uniform01(), 1e-300);
        if (stats) stats->durations.push_back(t);
        Vec2 root;
        for (;;) {
            root = {lo.x + rng.uniform01() * (hi.x - lo.x), lo.y + rng.uniform01() * (hi.y - lo.y)};
            if (poly.contains(root)) break;
        }
        // Time grid 0 = t_0 < ... < t_M = t with uniform step (last partial).
        std::vector<double> times{0.0};
        for (double s = bridge_step; s < t; s += bridge_step) times.push_back(s);
        times.push_back(t);
        // Standard BM at grid times, then the bridge transform pins x -> x.
        std::vector<Vec2> wpath(times.size());
        wpath[0] = {0, 0};
        for (std::size_t i = 1; i < times.size(); ++i) {
            double sd = std::sqrt(times[i] - times[i - 1]);
            wpath[i] = wpath[i - 1] + Vec2{sd * rng.normal(), sd * rng.normal()};
        }
        Vec2 wend = wpath.back();
        TimedPath bp;
        bp.kind = PathKind::Continuum;
        bp.duration = t;
        bp.times = times;
        bp.points.resize(times.size());
        bool inside = true;
        for (std::size_t i = 0; i < times.size(); ++i) {
            double mu = times[i] / t;
            bp.points[i] = root + (wpath[i] - mu * wend);
            if (!poly.contains(bp.points[i])) {
                inside = false;
                break;
            }
        }
        if (!inside) continue;
        bp.points.back() = bp.points.front();
        soup.loops.push_back(Loop{std::move(bp)});
    }
    return soup;
}

/// Massive thinning: continuum loops kept with probability exp(-m^2 t_l);
/// lattice loops with probability (1 - m^2/(2n^2))^{steps}, the discrete
/// retention that converges to the continuum one under phi_n.
inline LoopSoup thin_massive(const LoopSoup& soup, double mass, Rng& rng) {
    if (mass < 0) throw std::invalid_argument("thin_massive: mass must be >= 0");
    LoopSoup out = soup;
    out.loops.clear();
    out.lattice_loops.clear();
    double m2 = mass * mass;
    for (std::size_t i = 0; i < soup.loops.size(); ++i) {
        double keep;
        if (soup.kind == SoupKind::Lattice) {
            double n = static_cast<double>(soup.mesh);
            double base = 1.0 - m2 / (2.0 * n * n);
            if (base < 0)
                throw std::invalid_argument("thin_massive: lattice retention base negative");
            keep = std::pow(base, static_cast<double>(soup.lattice_loops[i].steps()));
        } else {
            keep = std::exp(-m2 * soup.loops[i].duration());
        }
        // Shared-uniform coupling: the same draw decides for every mass,
        // making retention monotone in m pathwise.
        if (rng.uniform01() < keep) {
            out.loops.push_back(soup.loops[i]);
            if (soup.kind == SoupKind::Lattice)
                out.lattice_loops.push_back(soup.lattice_loops[i]);
        }
    }
    return out;
}

}  // namespace loopforge
