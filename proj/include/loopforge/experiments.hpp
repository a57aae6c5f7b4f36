#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "attachment.hpp"
#include "configuration.hpp"
#include "lattice.hpp"
#include "loop_soup.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "walks.hpp"

namespace loopforge {

using json = nlohmann::json;

/// Self-describing experiment output; reproducible bit-exactly from
/// (parameters, master seed).
struct ExperimentReport {
    std::string name;
    json parameters = json::object();
    std::uint64_t master_seed = 0;
    std::uint64_t replicates = 0;
    json statistics = json::object();
    json test_result = json::object();
    json thresholds = json::object();
    std::vector<std::string> flags;
    bool passed = false;

    json to_json() const {
        return json{{"name", name},
                    {"parameters", parameters},
                    {"master_seed", master_seed},
                    {"replicates", replicates},
                    {"statistics", statistics},
                    {"test_result", test_result},
                    {"thresholds", thresholds},
                    {"flags", flags},
                    {"passed", passed}};
    }
};

namespace detail {

/// Deterministic replicated runs: replicates are split into fixed chunks,
/// workers claim chunks by atomic counter, and partial accumulators are
/// merged in chunk order. Results are independent of the worker count.
template <typename Acc, typename ChunkFn>
Acc run_chunks(std::uint64_t n, int jobs, ChunkFn chunk_fn) {
    const std::uint64_t chunk_size = 512;
    std::uint64_t chunks = (n + chunk_size - 1) / chunk_size;
    std::vector<Acc> partial(chunks);
    std::atomic<std::uint64_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::uint64_t c = next.fetch_add(1);
            if (c >= chunks) return;
            std::uint64_t lo = c * chunk_size, hi = std::min(n, lo + chunk_size);
            partial[c] = chunk_fn(lo, hi);
        }
    };
    int nw = std::max(1, jobs);
    if (nw == 1 || chunks <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    Acc total{};
    for (std::uint64_t c = 0; c < chunks; ++c) total.merge(partial[c]);
    return total;
}

struct MeanAcc {
    std::uint64_t n = 0;
    double sum = 0, sumsq = 0;
    void add(double x) {
        ++n;
        sum += x;
        sumsq += x * x;
    }
    void merge(const MeanAcc& o) {
        n += o.n;
        sum += o.sum;
        sumsq += o.sumsq;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    double stderr_mean() const {
        if (n < 2) return 0.0;
        double m = mean();
        double var = (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
        return std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
    }
};

}  // namespace detail

// --------------------------------------------------------------------------
// Decorating a loop-erased walk with the soup reconstructs the walk
// --------------------------------------------------------------------------

struct SrwEquivalenceParams {
    std::int64_t max_len = 64;       // soup cutoff K
    std::int64_t prefix_len = 4;     // binning prefix P
    std::uint64_t replicates = 200000;
    double threshold_p = 0.001;
    int jobs = 1;
};

/// Samples N decorated-LERW walks and N direct SRWs, bins both by their
/// step prefix (with exited-early paths as their own cells), and runs a
/// two-sample chi-square. The loop-erasure identity and the duration
/// identity are asserted on every pipeline replicate.
inline ExperimentReport verify_srw_equivalence(const LatticeDomain& dom,
                                               const SrwEquivalenceParams& p,
                                               std::uint64_t seed) {
    LatticeSoupSampler sampler(dom, p.max_len);

    using Key = std::vector<int>;
    struct Acc {
        std::map<Key, std::pair<double, double>> cells;
        std::uint64_t eq16_failures = 0;
        std::uint64_t duration_failures = 0;
        void merge(const Acc& o) {
            for (const auto& [k, v] : o.cells) {
                auto& c = cells[k];
                c.first += v.first;
                c.second += v.second;
            }
            eq16_failures += o.eq16_failures;
            duration_failures += o.duration_failures;
        }
    };

    auto prefix_key = [&](const LatticePath& path) {
        Key key;
        std::int64_t steps = std::min<std::int64_t>(p.prefix_len, path.steps());
        for (std::int64_t s = 0; s < steps; ++s) {
            Vec2i d = path.vertices[s + 1] - path.vertices[s];
            for (int dir = 0; dir < 4; ++dir)
                if (d == kDirections4[dir]) key.push_back(dir);
        }
        return key;
    };

    Acc total = detail::run_chunks<Acc>(p.replicates, p.jobs, [&](std::uint64_t lo,
                                                                  std::uint64_t hi) {
        Acc acc;
        for (std::uint64_t i = lo; i < hi; ++i) {
            Rng rng_pipeline(child_seed(seed, 2 * i));
            WalkSample lerw = sample_lerw(dom, rng_pipeline);
            LoopSoup soup = sampler.sample(rng_pipeline);
            Configuration cfg = build_configuration(lerw.path, std::move(soup));
            TieBreak b = TieBreakFamily(cfg).uniform(cfg, rng_pipeline);
            AttachmentResult res = attach(cfg, 1.0, b);
            double expected = cfg.total_hit_duration + cfg.gamma_duration();
            if (std::abs(res.duration - expected) > 1e-12 * std::max(1.0, expected))
                ++acc.duration_failures;
            LatticePath x = LatticePath::from_timed_unit(res.x);
            if (loop_erase(x).vertices != cfg.gamma_lattice->vertices) ++acc.eq16_failures;
            acc.cells[prefix_key(x)].first += 1;

            Rng rng_srw(child_seed(seed, 2 * i + 1));
            WalkSample srw = sample_srw(dom, rng_srw);
            acc.cells[prefix_key(srw.path)].second += 1;
        }
        return acc;
    });

    std::vector<double> arm_a, arm_b;
    for (const auto& [k, v] : total.cells) {
        arm_a.push_back(v.first);
        arm_b.push_back(v.second);
    }
    ChiSquareResult chi = chi_square_two_sample(arm_a, arm_b);

    ExperimentReport rep;
    rep.name = "srw_equivalence";
    rep.parameters = {{"max_len", p.max_len},
                      {"prefix_len", p.prefix_len},
                      {"domain_size", dom.size()},
                      {"jobs", p.jobs}};
    rep.master_seed = seed;
    rep.replicates = p.replicates;
    rep.statistics = {{"cells", total.cells.size()},
                      {"eq16_failures", total.eq16_failures},
                      {"duration_failures", total.duration_failures},
                      {"soup_tail_mass", sampler.tail_mass()}};
    rep.test_result = {{"statistic", chi.statistic}, {"dof", chi.dof}, {"p_value", chi.p_value}};
    rep.thresholds = {{"p", p.threshold_p},
                      {"max_expected_missing_loops", 1e-2},
                      {"min_expected_cell_count", 5.0}};
    double missing = sampler.tail_mass() * static_cast<double>(p.replicates);
    if (missing > 1e-2)
        rep.flags.push_back("soup cutoff too small: expected missing loops " +
                            std::to_string(missing));
    double cell_floor = static_cast<double>(p.replicates) *
                        std::pow(4.0, -static_cast<double>(p.prefix_len));
    if (cell_floor < 5.0) rep.flags.push_back("prefix too long for the replicate budget");
    rep.passed = chi.p_value > p.threshold_p && total.eq16_failures == 0 &&
                 total.duration_failures == 0 && rep.flags.empty();
    return rep;
}

// --------------------------------------------------------------------------
// Rooted loop intensity at the origin
// --------------------------------------------------------------------------

inline double intensity_target(std::int64_t k) {
    double binom = 1;
    for (std::int64_t i = 0; i < k / 2; ++i)
        binom = binom * static_cast<double>(k - i) / static_cast<double>(i + 1);
    return std::pow(4.0, -static_cast<double>(k)) / static_cast<double>(k) * binom * binom;
}

/// Empirical mean count of rooted loops of length k at the origin versus
/// 4^{-k}/k C(k,k/2)^2, on a domain large enough that no such loop sees
/// the boundary.
inline ExperimentReport intensity_check(const std::vector<std::int64_t>& k_list,
                                        std::uint64_t replicates, std::uint64_t seed,
                                        int jobs = 1) {
    std::int64_t kmax = 2;
    for (std::int64_t k : k_list) kmax = std::max(kmax, k);
    LatticeDomain dom = LatticeDomain::box(kmax + 3, kmax + 3);
    LatticeSoupSampler sampler(dom, kmax);

    struct Acc {
        std::map<std::int64_t, detail::MeanAcc> counts;
        void merge(const Acc& o) {
            for (const auto& [k, m] : o.counts) counts[k].merge(m);
        }
    };
    Acc total = detail::run_chunks<Acc>(replicates, jobs, [&](std::uint64_t lo, std::uint64_t hi) {
        Acc acc;
        for (std::uint64_t i = lo; i < hi; ++i) {
            Rng rng(child_seed(seed, i));
            LoopSoup soup = sampler.sample(rng);
            std::map<std::int64_t, double> per_k;
            for (std::int64_t k : k_list) per_k[k] = 0;
            for (const LatticePath& l : soup.lattice_loops)
                if (l.vertices[0] == Vec2i{0, 0} && per_k.count(l.steps()))
                    per_k[l.steps()] += 1;
            for (const auto& [k, c] : per_k) acc.counts[k].add(c);
        }
        return acc;
    });

    ExperimentReport rep;
    rep.name = "intensity";
    rep.parameters = {{"k_list", k_list}, {"jobs", jobs}};
    rep.master_seed = seed;
    rep.replicates = replicates;
    rep.thresholds = {{"z_max", 3.0}};
    bool ok = true;
    json cells = json::array();
    for (std::int64_t k : k_list) {
        const detail::MeanAcc& m = total.counts.at(k);
        double target = intensity_target(k);
        double sampler_mean = sampler.mean_count({0, 0}, k);
        double se = m.stderr_mean();
        double z = se > 0 ? (m.mean() - target) / se : 0.0;
        ok = ok && std::abs(z) <= 3.0 && std::abs(sampler_mean - target) <= 1e-12;
        cells.push_back({{"k", k},
                         {"target", target},
                         {"sampler_mean", sampler_mean},
                         {"empirical_mean", m.mean()},
                         {"stderr", se},
                         {"z", z}});
    }
    rep.statistics = {{"cells", cells}};
    rep.passed = ok;
    return rep;
}

// --------------------------------------------------------------------------
// Tail of the bridge range
// --------------------------------------------------------------------------

namespace detail {

/// Exact uniform sampler over length-k closed walks at the origin of Z^2,
/// by stepwise conditioning on free-plane bridge counts. Walk counts
/// factor over the diagonal coordinates u = x+y, v = x-y into binomials.
class PlaneBridgeSampler {
public:
    explicit PlaneBridgeSampler(std::int64_t k) : k_(k) {
        if (k < 2 || k % 2 != 0)
            throw std::invalid_argument("PlaneBridgeSampler: k must be even and >= 2");
        // binom_[r][j] = C(r, j); counts for k <= 40 stay exact in doubles.
        binom_.assign(k + 1, std::vector<double>(k + 1, 0.0));
        for (std::int64_t r = 0; r <= k; ++r) {
            binom_[r][0] = 1;
            for (std::int64_t j = 1; j <= r; ++j)
                binom_[r][j] = binom_[r - 1][j - 1] + (j <= r - 1 ? binom_[r - 1][j] : 0.0);
        }
    }

    /// Number of length-r walks from (x,y) to the origin.
    double count(std::int64_t x, std::int64_t y, std::int64_t r) const {
        std::int64_t u = x + y, v = x - y;
        if ((u + r) % 2 != 0 || std::llabs(u) > r || std::llabs(v) > r) return 0.0;
        return binom_[r][(r + u) / 2] * binom_[r][(r + v) / 2];
    }

    LatticePath sample(Rng& rng) const {
        LatticePath path;
        Vec2i p{0, 0};
        path.vertices.push_back(p);
        for (std::int64_t r = k_; r >= 1; --r) {
            double w[4], totw = 0;
            for (int d = 0; d < 4; ++d) {
                Vec2i q = p + kDirections4[d];
                w[d] = count(q.x, q.y, r - 1);
                totw += w[d];
            }
            double u = rng.uniform01() * totw;
            int chosen = 3;
            for (int d = 0; d < 4; ++d) {
                if (u < w[d]) {
                    chosen = d;
                    break;
                }
                u -= w[d];
            }
            p = p + kDirections4[chosen];
            path.vertices.push_back(p);
        }
        return path;
    }

private:
    std::int64_t k_;
    std::vector<std::vector<double>> binom_;
};

}  // namespace detail

/// Samples length-k bridges and checks that log P(r_L >= R sqrt(k)) decays
/// at least like -R^2 / 2 over the tested R grid (the exp(-R^2) bound with
/// unknown constant, tested through the fitted slope against R^2).
inline ExperimentReport range_tail_check(std::int64_t k, const std::vector<double>& r_grid,
                                         std::uint64_t replicates, std::uint64_t seed,
                                         int jobs = 1) {
    detail::PlaneBridgeSampler sampler(k);
    struct Acc {
        std::vector<std::uint64_t> exceed;
        void merge(const Acc& o) {
            if (exceed.size() < o.exceed.size()) exceed.resize(o.exceed.size(), 0);
            for (std::size_t i = 0; i < o.exceed.size(); ++i) exceed[i] += o.exceed[i];
        }
    };
    Acc total = detail::run_chunks<Acc>(replicates, jobs, [&](std::uint64_t lo, std::uint64_t hi) {
        Acc acc;
        acc.exceed.assign(r_grid.size(), 0);
        for (std::uint64_t i = lo; i < hi; ++i) {
            Rng rng(child_seed(seed, i));
            LatticePath bridge = sampler.sample(rng);
            double r2max = 0;
            for (const Vec2i& v : bridge.vertices)
                r2max = std::max(r2max, static_cast<double>(v.x * v.x + v.y * v.y));
            double r = std::sqrt(r2max);
            for (std::size_t j = 0; j < r_grid.size(); ++j)
                if (r >= r_grid[j] * std::sqrt(static_cast<double>(k))) ++acc.exceed[j];
        }
        return acc;
    });

    ExperimentReport rep;
    rep.name = "range_tail";
    rep.parameters = {{"k", k}, {"r_grid", r_grid}, {"jobs", jobs}};
    rep.master_seed = seed;
    rep.replicates = replicates;
    rep.thresholds = {{"max_slope", -0.5}};
    std::vector<double> xs, ys;
    json cells = json::array();
    double prev_survival = 1.1;
    bool monotone = true;
    for (std::size_t j = 0; j < r_grid.size(); ++j) {
        double survival =
            static_cast<double>(total.exceed[j]) / static_cast<double>(replicates);
        if (survival > prev_survival + 1e-12) monotone = false;
        prev_survival = survival;
        json cell = {{"R", r_grid[j]}, {"survival", survival}};
        if (total.exceed[j] == 0) {
            cell["dropped"] = true;
            rep.flags.push_back("empty tail cell at R = " + std::to_string(r_grid[j]));
        } else {
            xs.push_back(r_grid[j] * r_grid[j]);
            ys.push_back(std::log(survival));
        }
        cells.push_back(cell);
    }
    double slope = 0.0;
    if (xs.size() >= 2) slope = linear_fit(xs, ys).slope;
    rep.statistics = {{"cells", cells}, {"monotone", monotone}};
    rep.test_result = {{"slope_vs_R2", slope}, {"points", xs.size()}};
    rep.passed = monotone && xs.size() >= 2 && slope <= -0.5;
    return rep;
}

// --------------------------------------------------------------------------
// Time on small loops, across meshes
// --------------------------------------------------------------------------

struct SmallLoopProfileParams {
    std::vector<std::int64_t> meshes{8, 16, 32};
    std::vector<double> deltas{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
    std::uint64_t replicates = 1000;
    std::int64_t max_len = 64;
    int jobs = 1;
};

/// For each mesh n and cutoff delta: mean of T_{<= delta}(X^n), the phi_n
/// scaled time the decorated path spends on loops of duration <= delta.
/// Asserts monotonicity in delta and no growth in n beyond 3 SE. Cells
/// with 2 n^2 delta > K can miss truncated loops and carry an "exact"
/// flag; the growth assertion is also evaluated on the exact columns.
inline ExperimentReport small_loop_profile(const Polygon& domain,
                                           const SmallLoopProfileParams& p,
                                           std::uint64_t seed) {
    ExperimentReport rep;
    rep.name = "small_loop_profile";
    rep.parameters = {{"meshes", p.meshes},
                      {"deltas", p.deltas},
                      {"max_len", p.max_len},
                      {"jobs", p.jobs}};
    rep.master_seed = seed;
    rep.replicates = p.replicates;
    rep.thresholds = {{"se_factor", 3.0}};

    struct Acc {
        std::vector<detail::MeanAcc> per_delta;
        void merge(const Acc& o) {
            if (per_delta.size() < o.per_delta.size()) per_delta.resize(o.per_delta.size());
            for (std::size_t i = 0; i < o.per_delta.size(); ++i)
                per_delta[i].merge(o.per_delta[i]);
        }
    };

    std::vector<std::vector<double>> mean(p.meshes.size()), se(p.meshes.size());
    std::vector<std::int64_t> ext_len(p.meshes.size());
    for (std::size_t mi = 0; mi < p.meshes.size(); ++mi) {
        std::int64_t n = p.meshes[mi];
        LatticeDomain dom = LatticeDomain::from_polygon(domain, n);
        LatticeSoupSampler sampler(dom, p.max_len);
        ext_len[mi] = sampler.extended_len();
        double loop_rate = 1.0 / (2.0 * static_cast<double>(n) * static_cast<double>(n));
        std::uint64_t mesh_seed = child_seed(seed, 1000 + mi);
        Acc acc = detail::run_chunks<Acc>(p.replicates, p.jobs,
                                          [&](std::uint64_t lo, std::uint64_t hi) {
            Acc a;
            a.per_delta.resize(p.deltas.size());
            for (std::uint64_t i = lo; i < hi; ++i) {
                Rng rng(child_seed(mesh_seed, i));
                WalkSample lerw = sample_lerw(dom, rng);
                LoopSoup soup = sampler.sample(rng);
                Configuration cfg = build_configuration(lerw.path, std::move(soup));
                for (std::size_t di = 0; di < p.deltas.size(); ++di) {
                    // scaled duration <= delta  <=>  steps <= 2 n^2 delta
                    double cutoff_steps = p.deltas[di] / loop_rate;
                    double t = 0;
                    for (const HitRecord& h : cfg.hits) {
                        double steps = cfg.soup.loops[h.loop_index].duration();
                        if (steps <= cutoff_steps) t += steps * loop_rate;
                    }
                    a.per_delta[di].add(t);
                }
            }
            return a;
        });
        for (std::size_t di = 0; di < p.deltas.size(); ++di) {
            mean[mi].push_back(acc.per_delta[di].mean());
            se[mi].push_back(acc.per_delta[di].stderr_mean());
        }
    }

    bool monotone = true, bounded = true, bounded_exact = true;
    json surface = json::array();
    for (std::size_t mi = 0; mi < p.meshes.size(); ++mi) {
        std::int64_t n = p.meshes[mi];
        for (std::size_t di = 0; di < p.deltas.size(); ++di) {
            bool exact = 2.0 * n * n * p.deltas[di] <= static_cast<double>(ext_len[mi]) + 1e-9;
            surface.push_back({{"mesh", n},
                               {"delta", p.deltas[di]},
                               {"mean", mean[mi][di]},
                               {"stderr", se[mi][di]},
                               {"exact", exact}});
            if (di + 1 < p.deltas.size() && p.deltas[di + 1] < p.deltas[di] &&
                mean[mi][di + 1] > mean[mi][di] + 1e-12)
                monotone = false;
        }
    }
    double max_growth_z = 0.0;
    for (std::size_t di = 0; di < p.deltas.size(); ++di) {
        for (std::size_t a = 0; a < p.meshes.size(); ++a)
            for (std::size_t b = a + 1; b < p.meshes.size(); ++b) {
                double gap = mean[b][di] - mean[a][di];
                double sd = std::sqrt(se[a][di] * se[a][di] + se[b][di] * se[b][di]);
                if (sd > 0) max_growth_z = std::max(max_growth_z, gap / sd);
                if (gap > 3.0 * sd) {
                    bounded = false;
                    bool both_exact =
                        2.0 * p.meshes[a] * p.meshes[a] * p.deltas[di] <= ext_len[a] + 1e-9 &&
                        2.0 * p.meshes[b] * p.meshes[b] * p.deltas[di] <= ext_len[b] + 1e-9;
                    if (both_exact) bounded_exact = false;
                }
            }
    }
    // Deceleration diagnostic: for a monotone sequence converging to a
    // finite limit, increments across consecutive mesh octaves shrink.
    bool decelerating = true;
    if (p.meshes.size() >= 3) {
        for (std::size_t di = 0; di < p.deltas.size(); ++di)
            for (std::size_t a = 0; a + 2 < p.meshes.size(); ++a) {
                double inc1 = mean[a + 1][di] - mean[a][di];
                double inc2 = mean[a + 2][di] - mean[a + 1][di];
                double sd = std::sqrt(se[a][di] * se[a][di] + 4 * se[a + 1][di] * se[a + 1][di] +
                                      se[a + 2][di] * se[a + 2][di]);
                if (inc2 > inc1 + 3.0 * sd) decelerating = false;
            }
    }
    rep.statistics = {{"surface", surface}};
    rep.test_result = {{"monotone_in_delta", monotone},
                       {"bounded_in_mesh", bounded},
                       {"bounded_in_mesh_exact_cells", bounded_exact},
                       {"max_growth_z", max_growth_z},
                       {"increments_decelerating", decelerating}};
    if (!bounded)
        rep.flags.push_back(
            "surface grows with the mesh beyond noise: the exact process converges to its "
            "continuum value from below at these meshes (finer lattices admit more small-loop "
            "scales under a fixed cutoff); increments_decelerating reports the convergence "
            "diagnostic");
    rep.passed = monotone && bounded;
    return rep;
}

// --------------------------------------------------------------------------
// Neighborhood cardinality of the loop-erased walk
// --------------------------------------------------------------------------

inline ExperimentReport neighborhood_cardinality(const Polygon& domain, std::int64_t n,
                                                 const std::vector<std::int64_t>& k_grid,
                                                 std::uint64_t replicates, std::uint64_t seed,
                                                 int jobs = 1) {
    LatticeDomain dom = LatticeDomain::from_polygon(domain, n);
    struct Acc {
        std::vector<detail::MeanAcc> per_k;
        void merge(const Acc& o) {
            if (per_k.size() < o.per_k.size()) per_k.resize(o.per_k.size());
            for (std::size_t i = 0; i < o.per_k.size(); ++i) per_k[i].merge(o.per_k[i]);
        }
    };
    Acc total = detail::run_chunks<Acc>(replicates, jobs, [&](std::uint64_t lo, std::uint64_t hi) {
        Acc acc;
        acc.per_k.resize(k_grid.size());
        std::int64_t kmax = 0;
        for (std::int64_t k : k_grid) kmax = std::max(kmax, k);
        for (std::uint64_t i = lo; i < hi; ++i) {
            Rng rng(child_seed(seed, i));
            WalkSample lerw = sample_lerw(dom, rng);
            std::vector<std::uint64_t> counts(k_grid.size(), 0);
            for (const Vec2i& v : dom.vertex_list) {
                std::int64_t best = std::numeric_limits<std::int64_t>::max();
                for (const Vec2i& g : lerw.path.vertices) {
                    std::int64_t dx = v.x - g.x, dy = v.y - g.y;
                    best = std::min(best, dx * dx + dy * dy);
                    if (best == 0) break;
                }
                for (std::size_t j = 0; j < k_grid.size(); ++j)
                    if (best <= k_grid[j] * k_grid[j]) ++counts[j];
            }
            for (std::size_t j = 0; j < k_grid.size(); ++j)
                acc.per_k[j].add(static_cast<double>(counts[j]));
        }
        return acc;
    });

    ExperimentReport rep;
    rep.name = "neighborhood_cardinality";
    rep.parameters = {{"mesh", n}, {"k_grid", k_grid}, {"jobs", jobs}};
    rep.master_seed = seed;
    rep.replicates = replicates;
    rep.thresholds = {{"max_loglog_slope", 1.0}};
    json cells = json::array();
    std::vector<double> xs, ys;
    double prev = -1;
    bool monotone = true;
    for (std::size_t j = 0; j < k_grid.size(); ++j) {
        double m = total.per_k[j].mean();
        if (m < prev - 1e-9) monotone = false;
        prev = m;
        cells.push_back({{"k", k_grid[j]}, {"mean", m}, {"stderr", total.per_k[j].stderr_mean()}});
        xs.push_back(std::log(static_cast<double>(k_grid[j])));
        ys.push_back(std::log(std::max(m, 1e-12)));
        if (static_cast<double>(k_grid[j]) < std::log10(static_cast<double>(n)))
            rep.flags.push_back("k below the log(n) hypothesis at k = " +
                                std::to_string(k_grid[j]));
        if (k_grid[j] > n / 2)
            rep.flags.push_back("k above n/2 hypothesis at k = " + std::to_string(k_grid[j]));
    }
    double slope = linear_fit(xs, ys).slope;
    rep.statistics = {{"cells", cells}, {"monotone", monotone}};
    rep.test_result = {{"fitted_exponent", slope}};
    rep.passed = monotone && slope > 0.0 && slope <= 1.0;
    return rep;
}

// --------------------------------------------------------------------------
// Cross-mesh stability of the decorated walk
// --------------------------------------------------------------------------

struct ScalingStabilityParams {
    std::int64_t mesh_a = 16, mesh_b = 32;
    double rescaled_time = 0.05;
    std::uint64_t replicates = 10000;
    std::int64_t max_len = 64;
    double msd_tolerance = 0.05;  // relative
    double threshold_p = 0.001;
    int jobs = 1;
};

/// Runs the full pipeline at two meshes and compares rescaled summary
/// functionals: MSD of phi_n(X) at a fixed rescaled time against 2t, and
/// the exit-angle histogram across meshes.
inline ExperimentReport scaling_stability(const Polygon& domain,
                                          const ScalingStabilityParams& p, std::uint64_t seed) {
    ExperimentReport rep;
    rep.name = "scaling_stability";
    rep.parameters = {{"mesh_a", p.mesh_a},
                      {"mesh_b", p.mesh_b},
                      {"rescaled_time", p.rescaled_time},
                      {"max_len", p.max_len},
                      {"jobs", p.jobs}};
    rep.master_seed = seed;
    rep.replicates = p.replicates;
    rep.thresholds = {{"msd_tolerance", p.msd_tolerance}, {"p", p.threshold_p}};

    const int sectors = 8;
    struct Acc {
        detail::MeanAcc msd;
        std::vector<double> angle_bins = std::vector<double>(8, 0.0);
        std::uint64_t duration_failures = 0;
        std::uint64_t too_short = 0;
        void merge(const Acc& o) {
            msd.merge(o.msd);
            for (int i = 0; i < 8; ++i) angle_bins[i] += o.angle_bins[i];
            duration_failures += o.duration_failures;
            too_short += o.too_short;
        }
    };

    auto run_mesh = [&](std::int64_t n, std::uint64_t mesh_seed) {
        LatticeDomain dom = LatticeDomain::from_polygon(domain, n);
        LatticeSoupSampler sampler(dom, p.max_len);
        return detail::run_chunks<Acc>(p.replicates, p.jobs,
                                       [&, n](std::uint64_t lo, std::uint64_t hi) {
            Acc acc;
            for (std::uint64_t i = lo; i < hi; ++i) {
                Rng rng(child_seed(mesh_seed, i));
                WalkSample lerw = sample_lerw(dom, rng);
                LoopSoup soup = sampler.sample(rng);
                Configuration cfg = build_configuration(lerw.path, std::move(soup));
                TieBreak b = TieBreakFamily(cfg).uniform(cfg, rng);
                AttachmentResult res = attach(cfg, 1.0, b);
                double expected = cfg.total_hit_duration + cfg.gamma_duration();
                if (std::abs(res.duration - expected) > 1e-12 * std::max(1.0, expected))
                    ++acc.duration_failures;
                // phi_n(X) at rescaled time t: walk time 2 n^2 t, PL interp.
                double walk_time = 2.0 * n * n * p.rescaled_time;
                if (walk_time > res.duration) {
                    ++acc.too_short;
                } else {
                    Vec2 pos = res.x.at(walk_time);
                    acc.msd.add((pos.x * pos.x + pos.y * pos.y) /
                                (static_cast<double>(n) * static_cast<double>(n)));
                }
                Vec2i exit = LatticePath::from_timed_unit(res.x).vertices.back();
                double angle = std::atan2(static_cast<double>(exit.y),
                                          static_cast<double>(exit.x));
                int bin = std::min(sectors - 1,
                                   static_cast<int>((angle + 3.14159265358979323846) /
                                                    (2 * 3.14159265358979323846) * sectors));
                acc.angle_bins[bin] += 1;
            }
            return acc;
        });
    };

    Acc a = run_mesh(p.mesh_a, child_seed(seed, 1));
    Acc b = run_mesh(p.mesh_b, child_seed(seed, 2));
    double target = 2.0 * p.rescaled_time;
    ChiSquareResult chi = chi_square_two_sample(a.angle_bins, b.angle_bins);
    json stats = json::array();
    bool msd_ok = true;
    for (const Acc* acc : {&a, &b}) {
        double m = acc->msd.mean();
        msd_ok = msd_ok && std::abs(m - target) <= p.msd_tolerance * target;
        stats.push_back({{"msd_mean", m},
                         {"msd_stderr", acc->msd.stderr_mean()},
                         {"too_short", acc->too_short},
                         {"duration_failures", acc->duration_failures}});
    }
    rep.statistics = {{"per_mesh", stats}, {"msd_target", target}};
    rep.test_result = {{"exit_angle_p", chi.p_value},
                       {"statistic", chi.statistic},
                       {"dof", chi.dof}};
    rep.passed = msd_ok && chi.p_value > p.threshold_p && a.duration_failures == 0 &&
                 b.duration_failures == 0;
    return rep;
}

}  // namespace loopforge
