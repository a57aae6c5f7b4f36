#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "attachment.hpp"
#include "configuration.hpp"
#include "geometry.hpp"
#include "lattice.hpp"
#include "loop_soup.hpp"
#include "metrics.hpp"
#include "timed_path.hpp"
#include "walks.hpp"

namespace loopforge {

using json = nlohmann::json;

/// JSON path format:
///   {"kind":"lattice"|"continuum", "mesh":n (lattice only),
///    "duration":t, "samples":[[t0,x0,y0],...]}
/// Loops additionally carry {"closed":true}.
inline json path_to_json(const TimedPath& p, bool closed = false) {
    json samples = json::array();
    for (std::size_t i = 0; i < p.size(); ++i)
        samples.push_back({p.times[i], p.points[i].x, p.points[i].y});
    json out{{"kind", p.kind == PathKind::Lattice ? "lattice" : "continuum"},
             {"duration", p.duration},
             {"samples", samples}};
    if (p.kind == PathKind::Lattice) out["mesh"] = p.mesh;
    if (closed) out["closed"] = true;
    return out;
}

inline TimedPath path_from_json(const json& j) {
    TimedPath p;
    std::string kind = j.at("kind").get<std::string>();
    p.kind = kind == "lattice" ? PathKind::Lattice : PathKind::Continuum;
    if (p.kind == PathKind::Lattice) p.mesh = j.value("mesh", std::int64_t{1});
    p.duration = j.at("duration").get<double>();
    for (const json& s : j.at("samples")) {
        p.times.push_back(s.at(0).get<double>());
        p.points.push_back({s.at(1).get<double>(), s.at(2).get<double>()});
    }
    p.validate();
    return p;
}

inline json lattice_path_to_json(const LatticePath& p) {
    return path_to_json(p.to_timed(), p.closed());
}

inline LatticePath lattice_path_from_json(const json& j) {
    TimedPath p = path_from_json(j);
    LatticePath out;
    for (const Vec2& q : p.points) {
        Vec2i v{static_cast<std::int64_t>(std::llround(q.x)),
                static_cast<std::int64_t>(std::llround(q.y))};
        if (q.x != static_cast<double>(v.x) || q.y != static_cast<double>(v.y))
            throw std::invalid_argument("lattice path JSON: non-integer vertex");
        out.vertices.push_back(v);
    }
    out.validate();
    return out;
}

/// Soup JSON: {"meta":{...}, "truncated_mass":..., "loops":[<loop JSON>...]}.
inline json soup_to_json(const LoopSoup& soup) {
    json meta;
    if (soup.kind == SoupKind::Lattice) {
        meta = {{"kind", "lattice"}, {"mesh", soup.mesh}, {"max_len", soup.max_len}};
    } else {
        meta = {{"kind", "continuum"}, {"tmin", soup.tmin}, {"bridge_step", soup.bridge_step}};
    }
    meta["intensity"] = soup.intensity;
    if (soup.truncated_mass_is_per_efold) meta["truncated_mass_per_efold"] = true;
    json loops = json::array();
    for (std::size_t i = 0; i < soup.size(); ++i) {
        if (soup.kind == SoupKind::Lattice)
            loops.push_back(lattice_path_to_json(soup.lattice_loops[i]));
        else
            loops.push_back(path_to_json(soup.loops[i].path, true));
    }
    return json{{"meta", meta}, {"truncated_mass", soup.truncated_mass}, {"loops", loops}};
}

inline LoopSoup soup_from_json(const json& j) {
    LoopSoup soup;
    const json& meta = j.at("meta");
    std::string kind = meta.at("kind").get<std::string>();
    soup.kind = kind == "lattice" ? SoupKind::Lattice : SoupKind::Continuum;
    if (soup.kind == SoupKind::Lattice) {
        soup.mesh = meta.value("mesh", std::int64_t{1});
        soup.max_len = meta.value("max_len", std::int64_t{0});
    } else {
        soup.tmin = meta.value("tmin", 0.0);
        soup.bridge_step = meta.value("bridge_step", 0.0);
    }
    soup.intensity = meta.value("intensity", 1.0);
    soup.truncated_mass = j.value("truncated_mass", 0.0);
    soup.truncated_mass_is_per_efold = meta.value("truncated_mass_per_efold", false);
    for (const json& lj : j.at("loops")) {
        if (soup.kind == SoupKind::Lattice) {
            LatticePath lp = lattice_path_from_json(lj);
            if (!lp.closed()) throw std::invalid_argument("soup JSON: open lattice loop");
            if (lp.steps() % 2 != 0)
                throw std::invalid_argument("soup JSON: odd lattice loop length");
            soup.lattice_loops.push_back(lp);
            soup.loops.push_back(Loop{lp.to_timed()});
        } else {
            Loop l{path_from_json(lj)};
            l.validate();
            soup.loops.push_back(std::move(l));
        }
    }
    return soup;
}

/// Walk sample: path JSON plus {"seed":..., "exit":[i,j]}.
inline json walk_to_json(const WalkSample& w) {
    json out = lattice_path_to_json(w.path);
    out["seed"] = w.seed;
    out["exit"] = {w.exit_vertex.x, w.exit_vertex.y};
    return out;
}

/// Domain spec: {"box":[w,h]} or {"polygon":[[x,y],...]} plus "mesh".
inline LatticeDomain domain_from_json(const json& j) {
    if (j.contains("box")) {
        const json& b = j.at("box");
        return LatticeDomain::box(b.at(0).get<std::int64_t>(), b.at(1).get<std::int64_t>());
    }
    if (j.contains("polygon")) {
        Polygon poly;
        for (const json& v : j.at("polygon"))
            poly.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        return LatticeDomain::from_polygon(poly, j.value("mesh", std::int64_t{1}));
    }
    throw std::invalid_argument("domain JSON: need \"box\" or \"polygon\"");
}

inline Polygon polygon_from_json(const json& j) {
    if (j.contains("box")) {
        const json& b = j.at("box");
        double w = b.at(0).get<double>(), h = b.at(1).get<double>();
        return Polygon::rectangle(-w / 2, -h / 2, w / 2, h / 2);
    }
    Polygon poly;
    for (const json& v : j.at("polygon"))
        poly.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    return poly;
}

/// Configuration file: {"gamma": <path JSON>, "soup": <soup JSON>}. Hits are
/// derived deterministically on load.
inline json configuration_to_json(const Configuration& cfg) {
    json out;
    if (cfg.gamma_lattice)
        out["gamma"] = lattice_path_to_json(*cfg.gamma_lattice);
    else
        out["gamma"] = path_to_json(cfg.gamma.path);
    out["soup"] = soup_to_json(cfg.soup);
    return out;
}

inline Configuration configuration_from_json(const json& j) {
    LoopSoup soup = soup_from_json(j.at("soup"));
    if (soup.kind == SoupKind::Lattice) {
        std::int64_t gamma_mesh = j.at("gamma").value("mesh", std::int64_t{1});
        if (gamma_mesh != soup.mesh)
            throw std::invalid_argument("configuration JSON: gamma/soup mesh mismatch");
        LatticePath gamma = lattice_path_from_json(j.at("gamma"));
        if (!gamma.is_simple())
            throw std::invalid_argument("configuration JSON: gamma is not simple");
        return build_configuration(gamma, std::move(soup));
    }
    SimplePath gamma{path_from_json(j.at("gamma"))};
    return build_configuration(std::move(gamma), std::move(soup));
}

inline json attachment_to_json(const Configuration& cfg, const AttachmentResult& res) {
    json reach = json::array();
    for (const auto& [loop_index, t] : res.reach_times)
        reach.push_back({{"loop", loop_index}, {"T", t}});
    json intervals = json::array();
    for (const auto& [lo, hi] : res.loop_intervals) intervals.push_back({lo, hi});
    json sigma = json::array();
    for (std::size_t i = 0; i < res.sigma_times.size(); ++i)
        sigma.push_back({res.sigma_times[i], res.sigma_values[i]});
    json jumps = json::array();
    for (const AttachJump& jm : res.jumps)
        jumps.push_back({{"t", jm.t},
                         {"left", {jm.left.x, jm.left.y}},
                         {"right", {jm.right.x, jm.right.y}}});
    return json{{"X", path_to_json(res.x)},
                {"duration", res.duration},
                {"sigma", sigma},
                {"reach_times", reach},
                {"loop_intervals", intervals},
                {"jumps", jumps},
                {"gamma_duration", cfg.gamma_duration()},
                {"total_hit_duration", cfg.total_hit_duration}};
}

inline json regularity_to_json(const RegularityReport& rep) {
    auto flag_name = [](SideFlag f) {
        switch (f) {
            case SideFlag::Bilateral: return "bilateral";
            case SideFlag::OneSidedLeft: return "one-sided-left";
            case SideFlag::OneSidedRight: return "one-sided-right";
            case SideFlag::NoSide: return "no-side";
            case SideFlag::EndpointRoot: return "endpoint-root";
            default: return "not-evaluated";
        }
    };
    json flags = json::array();
    for (SideFlag f : rep.bilateral_flags) flags.push_back(flag_name(f));
    json collisions = json::array();
    for (const auto& [a, b] : rep.sigma_collisions) collisions.push_back({a, b});
    return json{{"total_time_finite", rep.total_time_finite},
                {"total_time", rep.total_time},
                {"equicontinuity", {{"delta", rep.equicontinuity_delta},
                                    {"omega", rep.equicontinuity_omega}}},
                {"sigma_injective", rep.sigma_injective},
                {"sigma_collisions", collisions},
                {"roots_unique", rep.roots_unique},
                {"multi_root_loops", rep.multi_root_loops},
                {"density", {{"delta", rep.density_delta}, {"gap", rep.density_gap}}},
                {"bilateral_flags", flags}};
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace loopforge
