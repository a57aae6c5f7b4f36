#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "loopforge/configuration.hpp"
#include "loopforge/lattice.hpp"
#include "loopforge/loop_soup.hpp"
#include "loopforge/rng.hpp"
#include "loopforge/stats.hpp"

using namespace loopforge;

namespace {

double binom(int n, int k) {
    double r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return r;
}

/// Rooted-loop intensity at length k on the whole plane: 4^{-k}/k C(k,k/2)^2.
double whole_plane_mean(int k) {
    return std::pow(4.0, -k) / k * binom(k, k / 2) * binom(k, k / 2);
}

}  // namespace

TEST_CASE("lattice soup: single-vertex domain has no loops and zero tail") {
    LatticeDomain dom = LatticeDomain::box(1, 1);
    LatticeSoupSampler sampler(dom, 8);
    CHECK(sampler.tail_mass() == 0.0);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) CHECK(sampler.sample(rng).size() == 0);
}

TEST_CASE("lattice soup: interior intensities match the closed-form plane counts") {
    // Box of radius 5: no loop of length <= 8 rooted at the center sees the
    // boundary, so N_k(0) equals the free-plane count C(k,k/2)^2.
    LatticeDomain dom = LatticeDomain::box(11, 11);
    LatticeSoupSampler sampler(dom, 8);
    CHECK(sampler.mean_count({0, 0}, 2) == 0.125);  // dyadic, exact
    CHECK(sampler.mean_count({0, 0}, 4) == 36.0 / 1024.0);
    CHECK(sampler.mean_count({0, 0}, 6) == Catch::Approx(400.0 / 24576.0).epsilon(1e-15));
    CHECK(sampler.mean_count({0, 0}, 2) == Catch::Approx(whole_plane_mean(2)));
    CHECK(sampler.mean_count({0, 0}, 4) == Catch::Approx(whole_plane_mean(4)));
}

TEST_CASE("lattice soup: empirical per-(x,k) counts match the Poisson means") {
    LatticeDomain dom = LatticeDomain::box(5, 5);
    LatticeSoupSampler sampler(dom, 6);
    const int reps = 6000;
    Rng rng(11);
    std::map<std::pair<std::pair<std::int64_t, std::int64_t>, std::int64_t>, double> counts;
    for (int r = 0; r < reps; ++r) {
        LoopSoup soup = sampler.sample(rng);
        for (const LatticePath& l : soup.lattice_loops)
            counts[{{l.vertices[0].x, l.vertices[0].y}, l.steps()}] += 1.0;
    }
    for (Vec2i x : {Vec2i{0, 0}, Vec2i{1, 1}, Vec2i{-2, 0}, Vec2i{2, 2}}) {
        for (std::int64_t k : {2, 4, 6}) {
            double mean = sampler.mean_count(x, k);
            double emp = counts[{{x.x, x.y}, k}] / reps;
            double se = std::sqrt(std::max(mean, 1e-12) / reps);
            INFO("x=(" << x.x << "," << x.y << ") k=" << k << " mean " << mean << " emp " << emp);
            CHECK(std::abs(emp - mean) <= 3 * se + 1e-9);
        }
    }
}

TEST_CASE("lattice soup: sampled loops are valid, even length, edges in domain") {
    LatticeDomain dom = LatticeDomain::box(5, 5);
    LatticeSoupSampler sampler(dom, 8);
    Rng rng(13);
    int seen = 0;
    for (int r = 0; r < 300 && seen < 400; ++r) {
        LoopSoup soup = sampler.sample(rng);
        for (const LatticePath& l : soup.lattice_loops) {
            ++seen;
            l.validate();
            CHECK(l.closed());
            CHECK(l.steps() % 2 == 0);
            CHECK(l.steps() >= 2);
            for (const Vec2i& v : l.vertices) CHECK(dom.contains(v));
        }
    }
    CHECK(seen > 0);
}

TEST_CASE("lattice soup: conditioned sampling is uniform among length-4 loops at a vertex") {
    // At the center of a radius-5 box there are exactly C(4,2)^2 = 36
    // length-4 closed walks; the conditional sampler must hit them uniformly.
    LatticeDomain dom = LatticeDomain::box(11, 11);
    LatticeSoupSampler sampler(dom, 4);
    Rng rng(17);
    const int n = 36000;
    std::map<std::vector<std::pair<std::int64_t, std::int64_t>>, double> counts;
    for (int i = 0; i < n; ++i) {
        LatticePath l = sampler.sample_loop_at({0, 0}, 4, rng);
        std::vector<std::pair<std::int64_t, std::int64_t>> key;
        for (const Vec2i& v : l.vertices) key.emplace_back(v.x, v.y);
        counts[key] += 1.0;
    }
    CHECK(counts.size() == 36);
    std::vector<double> obs, exp;
    for (const auto& [k, c] : counts) {
        obs.push_back(c);
        exp.push_back(n / 36.0);
    }
    ChiSquareResult r = chi_square_gof(obs, exp);
    INFO("p = " << r.p_value);
    CHECK(r.p_value > 0.001);
}

TEST_CASE("lattice soup: disjoint length bands merge to the full sample in law") {
    LatticeDomain dom = LatticeDomain::box(5, 5);
    LatticeSoupSampler sampler(dom, 8);
    const int reps = 4000;
    Rng rng_full(23), rng_a(29), rng_b(31);
    Welford full2, full4, merged2, merged4;
    for (int r = 0; r < reps; ++r) {
        LoopSoup f = sampler.sample(rng_full);
        double c2 = 0, c4 = 0;
        for (const LatticePath& l : f.lattice_loops) {
            if (l.steps() == 2) ++c2;
            if (l.steps() >= 4 && l.steps() <= 8) ++c4;
        }
        full2.add(c2);
        full4.add(c4);
        LoopSoup a = sampler.sample_band(rng_a, 2, 2);
        LoopSoup b = sampler.sample_band(rng_b, 4, 8);
        double m2 = 0, m4 = 0;
        for (const LatticePath& l : a.lattice_loops)
            if (l.steps() == 2) ++m2;
        for (const LatticePath& l : b.lattice_loops)
            if (l.steps() >= 4 && l.steps() <= 8) ++m4;
        merged2.add(m2);
        merged4.add(m4);
    }
    CHECK(std::abs(full2.mean - merged2.mean) <=
          3 * std::sqrt(full2.stderr_mean() * full2.stderr_mean() +
                        merged2.stderr_mean() * merged2.stderr_mean()));
    CHECK(std::abs(full4.mean - merged4.mean) <=
          3 * std::sqrt(full4.stderr_mean() * full4.stderr_mean() +
                        merged4.stderr_mean() * merged4.stderr_mean()));
    // Poisson: variance equals mean.
    CHECK(std::abs(full2.variance() - full2.mean) <= 5 * full2.stderr_mean());
}

TEST_CASE("brownian soup: candidate count and duration law match closed forms") {
    Polygon unit = Polygon::rectangle(0, 0, 1, 1);
    double tmin = 0.01;
    Rng rng(37);
    double target_mean = 1.0 / (2.0 * 3.14159265358979323846 * tmin);
    CHECK(target_mean == Catch::Approx(15.9155).epsilon(1e-4));
    const int reps = 400;
    Welford cand;
    std::vector<double> durations;
    for (int r = 0; r < reps; ++r) {
        BrownianCandidateStats stats;
        LoopSoup soup = sample_brownian_soup(unit, tmin, 0.002, rng, &stats);
        cand.add(static_cast<double>(stats.candidates));
        durations.insert(durations.end(), stats.durations.begin(), stats.durations.end());
        for (const Loop& l : soup.loops) {
            l.validate();
            CHECK(l.duration() >= tmin);
            for (const Vec2& p : l.path.points) CHECK(unit.contains(p));
        }
    }
    CHECK(std::abs(cand.mean - target_mean) <= 3 * cand.stderr_mean());
    // P(t > s) = tmin / s for candidates.
    for (double s : {0.02, 0.05, 0.2}) {
        double p = tmin / s;
        double emp = 0;
        for (double t : durations) emp += (t > s) ? 1 : 0;
        emp /= static_cast<double>(durations.size());
        double se = std::sqrt(p * (1 - p) / static_cast<double>(durations.size()));
        CHECK(std::abs(emp - p) <= 3 * se + 1e-6);
    }
}

TEST_CASE("brownian soup: huge tmin gives an empty soup") {
    Polygon unit = Polygon::rectangle(0, 0, 1, 1);
    Rng rng(41);
    int total = 0;
    for (int r = 0; r < 50; ++r)
        total += static_cast<int>(sample_brownian_soup(unit, 1e6, 0.01, rng).size());
    CHECK(total == 0);
}

TEST_CASE("thin_massive: m = 0 identity, closed-form retention, monotone coupling") {
    LatticeDomain dom = LatticeDomain::box(5, 5);
    LatticeSoupSampler sampler(dom, 6);
    Rng rng(43);
    LoopSoup soup;
    while (soup.size() == 0) soup = sampler.sample(rng);

    Rng r0(47);
    LoopSoup same = thin_massive(soup, 0.0, r0);
    CHECK(same.size() == soup.size());

    // Single continuum loop with t = 1, m = 1: kept w.p. e^{-1}.
    LoopSoup single;
    single.kind = SoupKind::Continuum;
    single.loops.push_back(Loop{TimedPath::constant({0.5, 0.5}, 1.0)});
    int kept = 0;
    const int n = 40000;
    Rng r1(53);
    for (int i = 0; i < n; ++i) kept += static_cast<int>(thin_massive(single, 1.0, r1).size());
    double p = std::exp(-1.0);
    CHECK(std::abs(kept / static_cast<double>(n) - p) <= 3 * std::sqrt(p * (1 - p) / n));

    // Coupled monotonicity: same uniforms, retention shrinks with m.
    for (int trial = 0; trial < 50; ++trial) {
        Rng ra(100 + trial), rb(100 + trial);
        LoopSoup light = thin_massive(soup, 0.3, ra);
        LoopSoup heavy = thin_massive(soup, 1.2, rb);
        CHECK(heavy.size() <= light.size());
    }
    Rng rbad(991);
    CHECK_THROWS_AS(thin_massive(soup, 1.7, rbad), std::invalid_argument);  // base < 0 at mesh 1
}

TEST_CASE("build_configuration: hand examples from a straight gamma") {
    LatticePath gamma;
    gamma.vertices = {{0, 0}, {1, 0}, {2, 0}};

    LoopSoup soup;
    soup.kind = SoupKind::Lattice;
    LatticePath l1;
    l1.vertices = {{1, 0}, {1, 1}, {2, 1}, {2, 0}, {1, 0}};
    soup.lattice_loops.push_back(l1);
    soup.loops.push_back(Loop{l1.to_timed()});
    LatticePath l2;
    l2.vertices = {{2, 0}, {2, 1}, {1, 1}, {1, 0}, {2, 0}};
    soup.lattice_loops.push_back(l2);
    soup.loops.push_back(Loop{l2.to_timed()});
    LatticePath l3;  // disjoint from gamma
    l3.vertices = {{5, 5}, {6, 5}, {6, 6}, {5, 6}, {5, 5}};
    soup.lattice_loops.push_back(l3);
    soup.loops.push_back(Loop{l3.to_timed()});

    Configuration cfg = build_configuration(gamma, soup);
    REQUIRE(cfg.hits.size() == 2);
    CHECK(cfg.hits[0].loop_index == 0);
    CHECK(cfg.hits[0].sigma == 1.0);
    CHECK(cfg.hits[0].x == Vec2{1, 0});
    CHECK(cfg.hits[0].roots == std::vector<double>{0.0});  // time 4 == 0 mod t_l
    CHECK(cfg.hits[1].loop_index == 1);
    CHECK(cfg.hits[1].sigma == 1.0);  // gamma reaches (1,0) before (2,0)
    CHECK(cfg.hits[1].x == Vec2{1, 0});
    CHECK(cfg.hits[1].roots == std::vector<double>{3.0});
    CHECK(cfg.total_hit_duration == 8.0);
}

TEST_CASE("build_configuration: hits are consistent and prunable") {
    Rng rng(59);
    LatticeDomain dom = LatticeDomain::box(5, 5);
    LatticeSoupSampler sampler(dom, 6);
    for (int trial = 0; trial < 30; ++trial) {
        LatticePath gamma;
        gamma.vertices = {{0, 0}, {0, 1}, {1, 1}};
        LoopSoup soup = sampler.sample(rng);
        Configuration cfg = build_configuration(gamma, soup);
        for (const HitRecord& h : cfg.hits) {
            CHECK(!h.roots.empty());
            Vec2i g = gamma.vertices[static_cast<std::size_t>(h.sigma)];
            bool on_loop = false;
            for (const Vec2i& v : soup.lattice_loops[h.loop_index].vertices)
                if (v == g) on_loop = true;
            CHECK(on_loop);
        }
        // Drop all non-intersecting loops; hit data must be unchanged.
        LoopSoup pruned;
        pruned.kind = SoupKind::Lattice;
        for (const HitRecord& h : cfg.hits) {
            pruned.loops.push_back(soup.loops[h.loop_index]);
            pruned.lattice_loops.push_back(soup.lattice_loops[h.loop_index]);
        }
        Configuration cfg2 = build_configuration(gamma, pruned);
        REQUIRE(cfg2.hits.size() == cfg.hits.size());
        for (std::size_t i = 0; i < cfg.hits.size(); ++i) {
            CHECK(cfg2.hits[i].sigma == cfg.hits[i].sigma);
            CHECK(cfg2.hits[i].roots == cfg.hits[i].roots);
        }
        CHECK(cfg2.total_hit_duration == cfg.total_hit_duration);
    }
}

TEST_CASE("small_loop_time: trivial values and monotonicity") {
    LatticePath gamma;
    gamma.vertices = {{0, 0}, {1, 0}};
    LoopSoup empty;
    empty.kind = SoupKind::Lattice;
    Configuration none = build_configuration(gamma, empty);
    CHECK(small_loop_time(none, 1.0) == 0.0);

    // Hits with durations 2 and 6: eps = 4 keeps only the first.
    LoopSoup soup;
    soup.kind = SoupKind::Lattice;
    LatticePath a;
    a.vertices = {{0, 0}, {0, 1}, {0, 0}};
    LatticePath b;
    b.vertices = {{1, 0}, {2, 0}, {2, 1}, {2, 0}, {1, 0}, {1, 1}, {1, 0}};
    soup.lattice_loops = {a, b};
    soup.loops = {Loop{a.to_timed()}, Loop{b.to_timed()}};
    Configuration cfg = build_configuration(gamma, soup);
    REQUIRE(cfg.hits.size() == 2);
    CHECK(small_loop_time(cfg, 4.0) == 2.0);
    CHECK(small_loop_time(cfg, 100.0) == cfg.total_hit_duration);
    double prev = 0;
    for (double eps : {0.5, 2.0, 4.0, 6.0, 10.0}) {
        double v = small_loop_time(cfg, eps);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("thin_massive never increases expected small-loop time") {
    LatticeDomain dom = LatticeDomain::box(5, 5);
    LatticeSoupSampler sampler(dom, 6);
    LatticePath gamma;
    gamma.vertices = {{0, 0}, {0, 1}, {1, 1}};
    Rng rng(61);
    Welford orig, thinned;
    for (int r = 0; r < 2000; ++r) {
        LoopSoup soup = sampler.sample(rng);
        Configuration a = build_configuration(gamma, soup);
        orig.add(small_loop_time(a, 4.0));
        LoopSoup t = thin_massive(soup, 0.7, rng);
        Configuration b = build_configuration(gamma, t);
        thinned.add(small_loop_time(b, 4.0));
    }
    CHECK(thinned.mean <= orig.mean + 3 * (orig.stderr_mean() + thinned.stderr_mean()));
}
