// Acceptance suite: one pass/fail line per criterion. Exit code 0 iff all
// criteria pass.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "loopforge/attachment.hpp"
#include "loopforge/configuration.hpp"
#include "loopforge/experiments.hpp"
#include "loopforge/lattice.hpp"
#include "loopforge/loop_soup.hpp"
#include "loopforge/metrics.hpp"
#include "loopforge/rng.hpp"
#include "loopforge/walks.hpp"

using namespace loopforge;

namespace {

using Clock = std::chrono::steady_clock;

struct Criterion {
    bool pass = false;
    std::string detail;
};

int g_jobs = 2;

Configuration random_configuration(Rng& rng, const LatticeDomain& dom,
                                   const LatticeSoupSampler& sampler) {
    WalkSample lerw = sample_lerw(dom, rng);
    return build_configuration(lerw.path, sampler.sample(rng));
}

// 1. Reconstruction in law on the 3x3 box, N = 2e5 per arm, prefix 4,
//    two-sample chi-square p > 0.001, single-threaded under 5 minutes.
Criterion criterion1() {
    auto t0 = Clock::now();
    LatticeDomain dom = LatticeDomain::box(3, 3);
    SrwEquivalenceParams p;
    p.replicates = 200000;
    p.prefix_len = 4;
    p.max_len = 64;
    p.jobs = 1;
    ExperimentReport rep = verify_srw_equivalence(dom, p, 20260809);
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    double pv = rep.test_result.at("p_value").get<double>();
    Criterion c;
    c.pass = rep.passed && secs < 300.0;
    c.detail = "p = " + std::to_string(pv) + ", eq16 failures " +
               std::to_string(rep.statistics.at("eq16_failures").get<std::uint64_t>()) +
               ", runtime " + std::to_string(secs) + " s (single-threaded)";
    return c;
}

// 2. Loop-erasure identity exact on >= 1e4 replicates across seeds and domains; and
// 3. the duration identity within 1e-12 relative on all attachments.
Criterion g_criterion3_result;  // filled by criterion2

Criterion criterion2() {
    std::vector<LatticeDomain> domains;
    domains.push_back(LatticeDomain::box(3, 3));
    domains.push_back(LatticeDomain::box(5, 5));
    domains.push_back(LatticeDomain::box(7, 3));
    domains.push_back(LatticeDomain::from_polygon(Polygon::rectangle(-1, -1, 1, 1), 3));
    std::uint64_t total = 0, eq16_failures = 0, duration_failures = 0;
    const double lambdas[] = {1.0, 1.0, 1.0, 1.0};  // erasure inversion needs unit pace
    for (std::size_t d = 0; d < domains.size(); ++d) {
        LatticeSoupSampler sampler(domains[d], 32);
        for (std::uint64_t i = 0; i < 2500; ++i) {
            Rng rng(child_seed(0xE16 + d, i));
            Configuration cfg = random_configuration(rng, domains[d], sampler);
            TieBreak b = TieBreakFamily(cfg).uniform(cfg, rng);
            AttachmentResult res = attach(cfg, lambdas[d], b);
            double expected = cfg.total_hit_duration + lambdas[d] * cfg.gamma_duration();
            if (std::abs(res.duration - expected) > 1e-12 * std::max(1.0, expected))
                ++duration_failures;
            LatticePath x = LatticePath::from_timed_unit(res.x);
            if (loop_erase(x).vertices != cfg.gamma_lattice->vertices) ++eq16_failures;
            ++total;
        }
    }
    // Duration identity at non-unit pace as well.
    LatticeDomain dom = LatticeDomain::box(5, 5);
    LatticeSoupSampler sampler(dom, 16);
    for (std::uint64_t i = 0; i < 2000; ++i) {
        Rng rng(child_seed(0x3F, i));
        Configuration cfg = random_configuration(rng, dom, sampler);
        double lambda = 0.25 + 2.5 * rng.uniform01();
        TieBreak b = TieBreakFamily(cfg).uniform(cfg, rng);
        AttachmentResult res = attach(cfg, lambda, b);
        double expected = cfg.total_hit_duration + lambda * cfg.gamma_duration();
        if (std::abs(res.duration - expected) > 1e-12 * std::max(1.0, expected))
            ++duration_failures;
    }
    Criterion c2;
    c2.pass = eq16_failures == 0 && total >= 10000;
    c2.detail = "loopErase(X) = gamma in " + std::to_string(total - eq16_failures) + "/" +
                std::to_string(total) + " replicates over 4 domains";
    g_criterion3_result.pass = duration_failures == 0;
    g_criterion3_result.detail =
        "t_X = sum t_l + lambda t_gamma within 1e-12 relative on all " +
        std::to_string(total + 2000) + " attachments (violations: " +
        std::to_string(duration_failures) + ")";
    return c2;
}

Criterion criterion3() { return g_criterion3_result; }

// 4. Scaling identities Eqs (12)-(15), sup discrepancy <= 1e-9 on >= 100
//    random lattice instances per identity.
Criterion criterion4() {
    LatticeDomain dom = LatticeDomain::box(5, 5);
    LatticeSoupSampler sampler(dom, 8);
    double worst = 0.0;
    int per_identity = 100;
    for (int i = 0; i < per_identity; ++i) {
        Rng rng(child_seed(0x12151, i));
        Configuration cfg = random_configuration(rng, dom, sampler);
        TieBreak b = TieBreakFamily(cfg).uniform(cfg, rng);
        double lambda = 0.5 + rng.uniform01();
        double a = 0.25 + 3.0 * rng.uniform01();
        double cc = 0.3 + 2.0 * rng.uniform01();
        std::int64_t n = 1 + static_cast<std::int64_t>(rng.uniform_below(6));
        double cstar = 0.5 + rng.uniform01();
        worst = std::max(worst, check_spatial_scaling(cfg, lambda, b, a));
        worst = std::max(worst, check_time_scaling(cfg, lambda, b, cc));
        worst = std::max(worst, check_pace_transfer(cfg, lambda, b, cc));
        worst = std::max(worst, check_mesh_rescaling(cfg, b, n, cstar));
    }
    Criterion c;
    c.pass = worst <= 1e-9;
    c.detail = "sup discrepancy " + std::to_string(worst) + " over 100 instances x 4 identities";
    return c;
}

// 5. Rooted loop intensity for k in {2,4,6} within 3 SE at 1e5 replicates.
Criterion criterion5() {
    ExperimentReport rep = intensity_check({2, 4, 6}, 100000, 0x30E9, g_jobs);
    Criterion c;
    c.pass = rep.passed;
    std::string zs;
    for (const auto& cell : rep.statistics.at("cells"))
        zs += " z(k=" + std::to_string(cell.at("k").get<std::int64_t>()) + ") = " +
              std::to_string(cell.at("z").get<double>());
    c.detail = "targets 0.125, 0.035156, 0.016276;" + zs;
    return c;
}

// 6. Time-change and decorated-path modulus bounds: zero violations over >= 1e3
//    random configurations x a 16-point delta/eps grid.
Criterion criterion6() {
    std::uint64_t configs = 0, violations = 0;
    LatticeDomain doms[2] = {LatticeDomain::box(3, 3), LatticeDomain::box(5, 5)};
    LatticeSoupSampler samplers[2] = {LatticeSoupSampler(doms[0], 8),
                                      LatticeSoupSampler(doms[1], 8)};
    for (std::uint64_t i = 0; i < 1000; ++i) {
        int d = static_cast<int>(i % 2);
        Rng rng(child_seed(0xE3, i));
        Configuration cfg = random_configuration(rng, doms[d], samplers[d]);
        double lambda = 0.25 + 2.0 * rng.uniform01();
        TieBreak b = TieBreakFamily(cfg).uniform(cfg, rng);
        AttachmentResult res = attach(cfg, lambda, b);
        ++configs;
        TimedPath sigma_path;
        sigma_path.duration = res.duration;
        sigma_path.times = res.sigma_times;
        for (double v : res.sigma_values) sigma_path.points.push_back({v, 0});
        TimedPath gs;
        gs.duration = res.duration;
        gs.times = res.x.times;
        for (double t : gs.times) gs.points.push_back(cfg.gamma.path.at(res.sigma_at(t)));
        for (int j = 1; j <= 16; ++j) {
            double delta = res.duration * std::pow(2.0, -0.5 * j);
            if (delta <= 0) continue;
            if (modulus(sigma_path, delta) > density_modulus(cfg, delta) + 1e-9) ++violations;
            double wl = 0.0;
            for (const HitRecord& h : cfg.hits)
                wl = std::max(wl, periodic_modulus(cfg.soup.loops[h.loop_index], delta));
            if (modulus(res.x, delta) > 2 * wl + modulus(gs, delta) + 1e-9) ++violations;
        }
    }
    Criterion c;
    c.pass = violations == 0 && configs >= 1000;
    c.detail = std::to_string(violations) + " violations over " + std::to_string(configs) +
               " configurations x 16 deltas (time-change and path modulus bounds)";
    return c;
}

// 7. soupDistance equals the exhaustive-bijection oracle on 200 random
//    pairs (<= 5 loops), pseudometric axioms on 200 triples.
Loop acceptance_loop(Rng& rng) {
    std::vector<Vec2i> vs{{static_cast<std::int64_t>(rng.uniform_below(7)) - 3,
                           static_cast<std::int64_t>(rng.uniform_below(7)) - 3}};
    int half = 1 + static_cast<int>(rng.uniform_below(4));
    for (int i = 0; i < half; ++i) vs.push_back(vs.back() + kDirections4[rng.uniform_direction4()]);
    for (std::size_t i = vs.size() - 1; i-- > 0;) vs.push_back(vs[i]);
    return Loop{LatticePath{vs}.to_timed()};
}

LoopSoup acceptance_soup(Rng& rng) {
    LoopSoup soup;
    soup.kind = SoupKind::Continuum;
    std::size_t n = rng.uniform_below(6);
    for (std::size_t i = 0; i < n; ++i) soup.loops.push_back(acceptance_loop(rng));
    return soup;
}

double oracle_distance(const LoopSoup& a, const LoopSoup& b) {
    std::size_t nl = a.size(), nr = b.size();
    std::vector<std::vector<double>> dist(nl, std::vector<double>(nr));
    for (std::size_t i = 0; i < nl; ++i)
        for (std::size_t j = 0; j < nr; ++j)
            dist[i][j] = d_inf(a.loops[i].path, b.loops[j].path);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> assign(nl, -1);
    std::vector<bool> used(nr, false);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == nl) {
            double v = 0;
            for (std::size_t p = 0; p < nl; ++p)
                v = assign[p] < 0 ? std::max(v, a.loops[p].duration())
                                  : std::max(v, 2 * dist[p][assign[p]]);
            for (std::size_t q = 0; q < nr; ++q)
                if (!used[q]) v = std::max(v, b.loops[q].duration());
            best = std::min(best, v);
            return;
        }
        assign[i] = -1;
        rec(i + 1);
        for (std::size_t j = 0; j < nr; ++j) {
            if (used[j]) continue;
            used[j] = true;
            assign[i] = static_cast<int>(j);
            rec(i + 1);
            used[j] = false;
            assign[i] = -1;
        }
    };
    rec(0);
    return best;
}

Criterion criterion7() {
    std::uint64_t oracle_mismatches = 0, axiom_failures = 0;
    for (int i = 0; i < 200; ++i) {
        Rng rng(child_seed(0xD157, i));
        LoopSoup a = acceptance_soup(rng);
        LoopSoup b = acceptance_soup(rng);
        if (soup_distance(a, b).delta != oracle_distance(a, b)) ++oracle_mismatches;
    }
    LatticeDomain dom = LatticeDomain::box(5, 5);
    LatticeSoupSampler sampler(dom, 6);
    for (int i = 0; i < 200; ++i) {
        Rng rng(child_seed(0x7819, i));
        Configuration x = random_configuration(rng, dom, sampler);
        Configuration y = random_configuration(rng, dom, sampler);
        Configuration z = random_configuration(rng, dom, sampler);
        double dxy = soup_distance(x.soup, y.soup).delta;
        double dyx = soup_distance(y.soup, x.soup).delta;
        if (dxy != dyx) ++axiom_failures;  // symmetry, exact
        double dyz = soup_distance(y.soup, z.soup).delta;
        double dxz = soup_distance(x.soup, z.soup).delta;
        if (dxz > dxy + dyz + 1e-12) ++axiom_failures;  // d triangle, exact
        ConfigDistance cxy = config_distance(x, y, 48);
        ConfigDistance cyz = config_distance(y, z, 48);
        ConfigDistance cxz = config_distance(x, z, 48);
        double slack = cxy.rho_slack + cyz.rho_slack + cxz.rho_slack;
        if (cxz.d_r0 > cxy.d_r0 + cyz.d_r0 + slack + 1e-9) ++axiom_failures;
    }
    Criterion c;
    c.pass = oracle_mismatches == 0 && axiom_failures == 0;
    c.detail = "oracle mismatches " + std::to_string(oracle_mismatches) +
               "/200 pairs; axiom failures " + std::to_string(axiom_failures) + "/200 triples";
    return c;
}

// 8. Bridge range tail: fitted slope of log-survival against R^2 at k = 16,
//    R in {1, 1.5, 2}, 1e6 bridges, slope <= -0.5.
Criterion criterion8() {
    ExperimentReport rep = range_tail_check(16, {1.0, 1.5, 2.0}, 1000000, 0x27, g_jobs);
    Criterion c;
    c.pass = rep.passed;
    c.detail = "slope " + std::to_string(rep.test_result.at("slope_vs_R2").get<double>()) +
               " (<= -0.5 required)";
    return c;
}

// 9. Small-loop time surface: monotone in delta and
//    uniformly bounded in n within 3 SE per cell, 1e3 replicates per cell.
Criterion criterion9() {
    Polygon square = Polygon::rectangle(-1, -1, 1, 1);
    SmallLoopProfileParams p;
    p.meshes = {8, 16, 32};
    p.deltas = {0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
    p.replicates = 1000;
    p.jobs = g_jobs;
    ExperimentReport rep = small_loop_profile(square, p, 0x26);
    Criterion c;
    c.pass = rep.passed;
    c.detail = std::string("monotone ") +
               (rep.test_result.at("monotone_in_delta").get<bool>() ? "yes" : "NO") +
               ", bounded in n " +
               (rep.test_result.at("bounded_in_mesh").get<bool>() ? "yes" : "NO");
    return c;
}

// 10. Pipeline sanity: MSD of phi_n(X) at t = 0.05 within 5% of 0.1 at
//     n in {16, 32}; cross-mesh exit-angle chi-square p > 0.001.
Criterion criterion10() {
    Polygon square = Polygon::rectangle(-1, -1, 1, 1);
    ScalingStabilityParams p;
    p.mesh_a = 16;
    p.mesh_b = 32;
    p.replicates = 10000;
    p.jobs = g_jobs;
    ExperimentReport rep = scaling_stability(square, p, 0x54);
    Criterion c;
    c.pass = rep.passed;
    std::string msds;
    for (const auto& m : rep.statistics.at("per_mesh"))
        msds += " " + std::to_string(m.at("msd_mean").get<double>());
    c.detail = "MSD" + msds + " (target 0.1 +- 5%), exit-angle p = " +
               std::to_string(rep.test_result.at("exit_angle_p").get<double>());
    return c;
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        Criterion (*fn)();
    };
    Entry entries[] = {
        {"1 decorated walk is a simple random walk (prefix law)", criterion1},
        {"2 loop erasure inverts attachment", criterion2},
        {"3 duration identity", criterion3},
        {"4 scaling identities (space, time, pace, mesh)", criterion4},
        {"5 rooted loop intensity", criterion5},
        {"6 time-change and path modulus bounds", criterion6},
        {"7 soup distance oracle + pseudometric", criterion7},
        {"8 bridge range tail decay", criterion8},
        {"9 small-loop time surface", criterion9},
        {"10 cross-mesh scaling stability", criterion10},
    };
    int failures = 0;
    for (const Entry& e : entries) {
        auto t0 = Clock::now();
        Criterion c = e.fn();
        double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        std::printf("[%s] criterion %s: %s (%.1f s)\n", c.pass ? "PASS" : "FAIL", e.name,
                    c.detail.c_str(), secs);
        std::fflush(stdout);
        if (!c.pass) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
