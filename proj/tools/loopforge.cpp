// loopforge: sampling, attachment, metrics, and verification for planar
// loop-decorated walks. File-based I/O, deterministic seeding.
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "loopforge/attachment.hpp"
#include "loopforge/configuration.hpp"
#include "loopforge/experiments.hpp"
#include "loopforge/json_io.hpp"
#include "loopforge/lattice.hpp"
#include "loopforge/loop_soup.hpp"
#include "loopforge/metrics.hpp"
#include "loopforge/rng.hpp"
#include "loopforge/svg.hpp"
#include "loopforge/walks.hpp"

using namespace loopforge;

namespace {

constexpr const char* kVersion = "1.0.0";

json parse_inline_or_file(const std::string& spec) {
    if (!spec.empty() && spec.front() == '{') return json::parse(spec);
    return read_json_file(spec);
}

std::uint64_t resolve_seed(std::uint64_t seed, bool seed_set) {
    if (seed_set) return seed;
    if (const char* env = std::getenv("LOOPFORGE_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

/// Every artifact is self-describing: version, full run config, seed.
json wrap_output(const std::string& command, const json& config, std::uint64_t seed,
                 json payload) {
    payload["version"] = kVersion;
    payload["command"] = command;
    payload["config"] = config;
    payload["master_seed"] = seed;
    return payload;
}

void emit(const json& out, const std::string& out_path) {
    if (out_path.empty())
        std::cout << out.dump(2) << "\n";
    else
        write_json_file(out_path, out);
}

int run_verify_report(const ExperimentReport& rep, const std::string& out_path,
                      const std::string& svg_path, const json& config) {
    json out = wrap_output("verify", config, rep.master_seed, rep.to_json());
    emit(out, out_path);
    if (!svg_path.empty()) {
        std::ofstream svg(svg_path);
        svg << plot_report(rep.to_json());
    }
    return rep.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"loop soups, loop-erased walks, and chronological loop attachment"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1;
    std::string out_path;
    app.add_option("--seed", seed, "master seed (fallback: LOOPFORGE_SEED env)")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--jobs", jobs, "worker cap for replicated experiments");
    app.add_option("--out", out_path, "output file (default: stdout)");

    // ---- soup ----
    auto* soup_cmd = app.add_subcommand("soup", "sample a loop soup");
    std::string soup_domain = "{\"box\":[5,5]}";
    std::int64_t soup_mesh = 1, soup_maxlen = 64;
    bool continuum = false;
    double tmin = 0.01, bridge_step = 0.01, soup_mass = 0.0;
    soup_cmd->add_option("--domain", soup_domain, "domain JSON (inline or file)");
    soup_cmd->add_option("--mesh", soup_mesh, "mesh n for polygon discretization");
    soup_cmd->add_option("--max-len", soup_maxlen, "lattice length cutoff K (even, <= 64)");
    soup_cmd->add_flag("--continuum", continuum, "sample the Brownian soup instead");
    soup_cmd->add_option("--tmin", tmin, "continuum duration cutoff");
    soup_cmd->add_option("--bridge-step", bridge_step, "bridge discretization step");
    soup_cmd->add_option("--mass", soup_mass, "massive thinning parameter m");

    // ---- srw / lerw ----
    auto* srw_cmd = app.add_subcommand("srw", "sample a simple random walk");
    auto* lerw_cmd = app.add_subcommand("lerw", "sample a loop-erased random walk");
    std::string walk_domain = "{\"box\":[5,5]}";
    std::int64_t walk_mesh = 1;
    double walk_mass = 0.0;
    for (CLI::App* c : {srw_cmd, lerw_cmd}) {
        c->add_option("--domain", walk_domain, "domain JSON (inline or file)");
        c->add_option("--mesh", walk_mesh, "mesh n for polygon discretization");
        c->add_option("--mass", walk_mass, "killing mass m (conditioned to exit)");
    }

    // ---- attach ----
    auto* attach_cmd = app.add_subcommand("attach", "decorate a simple path with soup loops");
    std::string attach_config;
    double lambda = 1.0;
    std::string tie_break = "uniform";
    bool cadlag = false;
    attach_cmd->add_option("--config", attach_config, "configuration JSON file")->required();
    attach_cmd->add_option("--lambda", lambda, "pace at which X follows gamma");
    attach_cmd->add_option("--tie-break", tie_break, "uniform|first")
        ->check(CLI::IsMember({"uniform", "first"}));
    attach_cmd->add_flag("--cadlag", cadlag, "allow lambda = 0 with recorded jumps");

    // ---- dist ----
    auto* dist_cmd = app.add_subcommand("dist", "configuration distance");
    std::string dist_a, dist_b;
    int rho_grid = 128;
    dist_cmd->add_option("--a", dist_a, "first configuration JSON")->required();
    dist_cmd->add_option("--b", dist_b, "second configuration JSON")->required();
    dist_cmd->add_option("--rho-grid", rho_grid, "DP grid for the rho term");

    // ---- regularity ----
    auto* reg_cmd = app.add_subcommand("regularity", "regularity conditions report");
    std::string reg_config;
    reg_cmd->add_option("--config", reg_config, "configuration JSON file")->required();

    // ---- verify ----
    auto* verify_cmd = app.add_subcommand("verify", "statistical verification experiments");
    verify_cmd->require_subcommand(1);
    std::string svg_path;
    verify_cmd->add_option("--svg", svg_path, "also render the report as SVG");
    double threshold_p = 0.001;
    std::uint64_t replicates = 0;  // 0 = experiment default
    verify_cmd->add_option("--threshold-p", threshold_p, "chi-square p threshold");
    verify_cmd->add_option("--replicates", replicates, "replicate count override");

    auto* v_srw = verify_cmd->add_subcommand("srw", "attached-walk prefix law test");
    std::string v_domain = "{\"box\":[3,3]}";
    std::int64_t v_maxlen = 64, prefix_len = 4;
    v_srw->add_option("--domain", v_domain, "domain JSON");
    v_srw->add_option("--max-len", v_maxlen, "soup cutoff K");
    v_srw->add_option("--prefix-len", prefix_len, "binning prefix length P");

    auto* v_int = verify_cmd->add_subcommand("intensity", "rooted loop intensity at the origin");
    std::vector<std::int64_t> k_list{2, 4, 6};
    v_int->add_option("--k", k_list, "even loop lengths");

    auto* v_tail = verify_cmd->add_subcommand("tail", "bridge range tail decay");
    std::int64_t tail_k = 16;
    std::vector<double> r_grid{1.0, 1.5, 2.0};
    v_tail->add_option("--k", tail_k, "bridge length");
    v_tail->add_option("--r", r_grid, "R grid");

    auto* v_small = verify_cmd->add_subcommand("smallloop", "small-loop time surface");
    std::vector<std::int64_t> meshes{8, 16, 32};
    std::vector<double> deltas{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
    std::string small_domain = "{\"box\":[2,2]}";
    std::string csv_path;
    v_small->add_option("--mesh", meshes, "meshes n");
    v_small->add_option("--delta", deltas, "duration cutoffs");
    v_small->add_option("--domain", small_domain, "polygon domain JSON");
    v_small->add_option("--csv", csv_path, "emit the surface as CSV");

    auto* v_nb = verify_cmd->add_subcommand("neighborhood", "walk neighborhood cardinality");
    std::int64_t nb_mesh = 64;
    std::vector<std::int64_t> nb_k{4, 8, 16};
    std::string nb_domain = "{\"box\":[2,2]}";
    v_nb->add_option("--mesh", nb_mesh, "mesh n");
    v_nb->add_option("--k", nb_k, "neighborhood radii");
    v_nb->add_option("--domain", nb_domain, "polygon domain JSON");

    auto* v_scale = verify_cmd->add_subcommand("scaling", "cross-mesh scaling stability");
    std::vector<std::int64_t> scale_meshes{16, 32};
    double rescaled_time = 0.05;
    std::string scale_domain = "{\"box\":[2,2]}";
    v_scale->add_option("--mesh", scale_meshes, "two meshes n1 < n2");
    v_scale->add_option("--t", rescaled_time, "rescaled comparison time");
    v_scale->add_option("--domain", scale_domain, "polygon domain JSON");

    // ---- demo ----
    auto* demo_cmd = app.add_subcommand("demo", "tiny end-to-end pipeline");

    try {
        app.parse(argc, argv);
        std::uint64_t master = resolve_seed(seed, seed_set);

        if (soup_cmd->parsed()) {
            json cfg{{"domain", json::parse(soup_domain.front() == '{' ? soup_domain : "{}")},
                     {"mesh", soup_mesh},
                     {"continuum", continuum},
                     {"mass", soup_mass}};
            Rng rng(master);
            LoopSoup soup;
            if (continuum) {
                Polygon poly = polygon_from_json(parse_inline_or_file(soup_domain));
                cfg["tmin"] = tmin;
                cfg["bridge_step"] = bridge_step;
                soup = sample_brownian_soup(poly, tmin, bridge_step, rng);
            } else {
                json dj = parse_inline_or_file(soup_domain);
                dj["mesh"] = soup_mesh;
                LatticeDomain dom = domain_from_json(dj);
                cfg["max_len"] = soup_maxlen;
                soup = sample_lattice_soup(dom, soup_maxlen, rng);
            }
            if (soup_mass > 0) soup = thin_massive(soup, soup_mass, rng);
            emit(wrap_output("soup", cfg, master, soup_to_json(soup)), out_path);
            return 0;
        }

        if (srw_cmd->parsed() || lerw_cmd->parsed()) {
            json dj = parse_inline_or_file(walk_domain);
            dj["mesh"] = walk_mesh;
            LatticeDomain dom = domain_from_json(dj);
            json cfg{{"domain", dj}, {"mass", walk_mass}};
            Rng rng(master);
            WalkSample w;
            if (walk_mass > 0) {
                w = sample_killed_conditioned(dom, walk_mass, rng).walk;
            } else {
                w = sample_srw(dom, rng);
            }
            w.seed = master;
            const char* name = "srw";
            if (lerw_cmd->parsed()) {
                w.path = loop_erase(w.path);
                name = "lerw";
            }
            emit(wrap_output(name, cfg, master, walk_to_json(w)), out_path);
            return 0;
        }

        if (attach_cmd->parsed()) {
            Configuration cfg = configuration_from_json(read_json_file(attach_config));
            Rng rng(master);
            TieBreakFamily fam(cfg);
            TieBreak b = tie_break == "uniform" ? fam.uniform(cfg, rng) : fam.first(cfg);
            AttachOptions opts;
            opts.allow_lambda_zero = cadlag;
            AttachmentResult res = attach(cfg, lambda, b, opts);
            json config{{"config", attach_config},
                        {"lambda", lambda},
                        {"tie_break", tie_break},
                        {"cadlag", cadlag}};
            emit(wrap_output("attach", config, master, attachment_to_json(cfg, res)), out_path);
            return 0;
        }

        if (dist_cmd->parsed()) {
            Configuration a = configuration_from_json(read_json_file(dist_a));
            Configuration b = configuration_from_json(read_json_file(dist_b));
            ConfigDistance d = config_distance(a, b, rho_grid);
            json pairs = json::array();
            for (const auto& [i, j] : d.witness.pairs) pairs.push_back({i, j});
            json payload{{"rho", d.rho_term},
                         {"rho_slack", d.rho_slack},
                         {"d", d.soup_term},
                         {"dt", d.time_term},
                         {"domega", d.modulus_term},
                         {"d_R0", d.d_r0},
                         {"d_R0_weak", d.d_r0_weak},
                         {"witness", {{"delta", d.witness.delta},
                                      {"attained", d.witness.attained},
                                      {"pairs", pairs}}}};
            json config{{"a", dist_a}, {"b", dist_b}, {"rho_grid", rho_grid}};
            emit(wrap_output("dist", config, master, payload), out_path);
            return 0;
        }

        if (reg_cmd->parsed()) {
            Configuration cfg = configuration_from_json(read_json_file(reg_config));
            json config{{"config", reg_config}};
            emit(wrap_output("regularity", config, master,
                             regularity_to_json(regularity_check(cfg))),
                 out_path);
            return 0;
        }

        if (verify_cmd->parsed()) {
            json config{{"threshold_p", threshold_p}, {"jobs", jobs}};
            if (v_srw->parsed()) {
                json dj = parse_inline_or_file(v_domain);
                LatticeDomain dom = domain_from_json(dj);
                SrwEquivalenceParams p;
                p.max_len = v_maxlen;
                p.prefix_len = prefix_len;
                p.threshold_p = threshold_p;
                p.jobs = jobs;
                if (replicates) p.replicates = replicates;
                config["domain"] = dj;
                return run_verify_report(verify_srw_equivalence(dom, p, master), out_path,
                                         svg_path, config);
            }
            if (v_int->parsed()) {
                std::uint64_t n = replicates ? replicates : 100000;
                return run_verify_report(intensity_check(k_list, n, master, jobs), out_path,
                                         svg_path, config);
            }
            if (v_tail->parsed()) {
                std::uint64_t n = replicates ? replicates : 1000000;
                return run_verify_report(range_tail_check(tail_k, r_grid, n, master, jobs),
                                         out_path, svg_path, config);
            }
            if (v_small->parsed()) {
                Polygon poly = polygon_from_json(parse_inline_or_file(small_domain));
                SmallLoopProfileParams p;
                p.meshes = meshes;
                p.deltas = deltas;
                p.jobs = jobs;
                if (replicates) p.replicates = replicates;
                ExperimentReport rep = small_loop_profile(poly, p, master);
                if (!csv_path.empty()) {
                    std::ofstream csv(csv_path);
                    csv << "mesh,delta,mean,stderr,exact\n";
                    for (const auto& cell : rep.statistics.at("surface"))
                        csv << cell.at("mesh").get<std::int64_t>() << ","
                            << cell.at("delta").get<double>() << ","
                            << cell.at("mean").get<double>() << ","
                            << cell.at("stderr").get<double>() << ","
                            << (cell.at("exact").get<bool>() ? 1 : 0) << "\n";
                }
                return run_verify_report(rep, out_path, svg_path, config);
            }
            if (v_nb->parsed()) {
                Polygon poly = polygon_from_json(parse_inline_or_file(nb_domain));
                std::uint64_t n = replicates ? replicates : 100;
                return run_verify_report(
                    neighborhood_cardinality(poly, nb_mesh, nb_k, n, master, jobs), out_path,
                    svg_path, config);
            }
            if (v_scale->parsed()) {
                if (scale_meshes.size() != 2 || scale_meshes[0] >= scale_meshes[1])
                    throw CLI::ValidationError("--mesh", "need two meshes n1 < n2");
                Polygon poly = polygon_from_json(parse_inline_or_file(scale_domain));
                ScalingStabilityParams p;
                p.mesh_a = scale_meshes[0];
                p.mesh_b = scale_meshes[1];
                p.rescaled_time = rescaled_time;
                p.threshold_p = threshold_p;
                p.jobs = jobs;
                if (replicates) p.replicates = replicates;
                return run_verify_report(scaling_stability(poly, p, master), out_path, svg_path,
                                         config);
            }
        }

        if (demo_cmd->parsed()) {
            // Tiny preset: 3x3 box, short soup, small prefix test.
            LatticeDomain dom = LatticeDomain::box(3, 3);
            Rng rng(master);
            WalkSample lerw = sample_lerw(dom, rng);
            LatticeSoupSampler sampler(dom, 64);
            LoopSoup soup = sampler.sample(rng);
            Configuration cfg = build_configuration(lerw.path, soup);
            TieBreak b = TieBreakFamily(cfg).uniform(cfg, rng);
            AttachmentResult res = attach(cfg, 1.0, b);
            LatticePath x = LatticePath::from_timed_unit(res.x);
            SrwEquivalenceParams p;
            p.max_len = 64;
            p.prefix_len = 3;
            p.replicates = 2000;
            p.jobs = jobs;
            ExperimentReport rep = verify_srw_equivalence(dom, p, child_seed(master, 42));
            json payload{{"gamma", lattice_path_to_json(lerw.path)},
                         {"soup_loops", soup.size()},
                         {"decorated_steps", x.steps()},
                         {"eq16_holds", loop_erase(x).vertices == lerw.path.vertices},
                         {"prefix_test", rep.to_json()}};
            emit(wrap_output("demo", json{{"preset", "3x3"}}, master, payload), out_path);
            return rep.passed ? 0 : 1;
        }

        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        json err{{"error", e.what()}, {"kind", "usage"}};
        std::cerr << err.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        json err{{"error", e.what()}, {"kind", "runtime"}};
        std::cerr << err.dump() << "\n";
        return 2;
    }
}
