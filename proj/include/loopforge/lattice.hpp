#pragma once

#include <cstdint>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "geometry.hpp"
#include "timed_path.hpp"

namespace loopforge {

/// Nearest-neighbor path on Z^2, unit time per step. Integer backing keeps
/// lattice identities bit-exact.
struct LatticePath {
    std::vector<Vec2i> vertices;

    std::int64_t steps() const {
        return static_cast<std::int64_t>(vertices.size()) - 1;
    }

    bool closed() const { return !vertices.empty() && vertices.front() == vertices.back(); }

    void validate() const {
        if (vertices.empty()) throw std::invalid_argument("LatticePath: empty");
        for (std::size_t i = 1; i < vertices.size(); ++i)
            if (l1(vertices[i] - vertices[i - 1]) != 1)
                throw std::invalid_argument("LatticePath: non-nearest-neighbor step");
    }

    bool is_simple() const {
        std::unordered_set<Vec2i, Vec2iHash> seen;
        for (const Vec2i& v : vertices)
            if (!seen.insert(v).second) return false;
        return true;
    }

    /// Unit-speed TimedPath on Z^2 (mesh 1).
    TimedPath to_timed() const {
        TimedPath out;
        out.kind = PathKind::Lattice;
        out.mesh = 1;
        out.duration = static_cast<double>(steps());
        out.times.reserve(vertices.size());
        out.points.reserve(vertices.size());
        for (std::size_t i = 0; i < vertices.size(); ++i) {
            out.times.push_back(static_cast<double>(i));
            out.points.push_back({static_cast<double>(vertices[i].x),
                                  static_cast<double>(vertices[i].y)});
        }
        return out;
    }

    /// Recover integer vertices from a unit-speed lattice TimedPath whose
    /// samples are exact integers (as produced by attachment at lambda = 1).
    static LatticePath from_timed_unit(const TimedPath& p) {
        LatticePath out;
        out.vertices.reserve(p.size());
        std::int64_t n = static_cast<std::int64_t>(std::llround(p.duration));
        for (std::int64_t k = 0; k <= n; ++k) {
            Vec2 v = p.at(static_cast<double>(k));
            Vec2i vi{static_cast<std::int64_t>(std::llround(v.x)),
                     static_cast<std::int64_t>(std::llround(v.y))};
            if (std::abs(v.x - static_cast<double>(vi.x)) > 1e-9 ||
                std::abs(v.y - static_cast<double>(vi.y)) > 1e-9)
                throw std::invalid_argument("from_timed_unit: non-integer vertex");
            out.vertices.push_back(vi);
        }
        out.validate();
        return out;
    }
};

/// Chronological loop erasure LE(p): runs through p, erasing the cycle each
/// time a vertex repeats. Result is a simple path with the same endpoints.
inline LatticePath loop_erase(const LatticePath& p) {
    p.validate();
    std::vector<Vec2i> out;
    std::unordered_map<Vec2i, std::size_t, Vec2iHash> position;
    out.reserve(p.vertices.size());
    for (const Vec2i& v : p.vertices) {
        auto it = position.find(v);
        if (it != position.end()) {
            for (std::size_t j = it->second + 1; j < out.size(); ++j) position.erase(out[j]);
            out.resize(it->second + 1);
        } else {
            position.emplace(v, out.size());
            out.push_back(v);
        }
    }
    return LatticePath{std::move(out)};
}

/// Finite vertex set on Z^2 with an origin; the playground for walks and
/// soups. Vertices are stored in integer coordinates of the mesh-n lattice
/// (i.e. physical position v/n for polygon-derived domains).
struct LatticeDomain {
    std::int64_t mesh = 1;
    std::unordered_set<Vec2i, Vec2iHash> vertices;
    Vec2i origin{0, 0};
    std::vector<Vec2i> vertex_list;  // deterministic order (sorted)

    bool contains(Vec2i v) const { return vertices.count(v) > 0; }

    std::size_t size() const { return vertices.size(); }

    void finalize() {
        if (!contains(origin)) throw std::invalid_argument("LatticeDomain: origin not in domain");
        restrict_to_component_();
        vertex_list.assign(vertices.begin(), vertices.end());
        std::sort(vertex_list.begin(), vertex_list.end(), [](Vec2i a, Vec2i b) {
            return a.x != b.x ? a.x < b.x : a.y < b.y;
        });
    }

    /// w x h box of vertices around the origin (odd sizes are symmetric).
    static LatticeDomain box(std::int64_t w, std::int64_t h) {
        if (w < 1 || h < 1) throw std::invalid_argument("LatticeDomain::box: empty box");
        LatticeDomain dom;
        std::int64_t x0 = -((w - 1) / 2), y0 = -((h - 1) / 2);
        for (std::int64_t x = x0; x < x0 + w; ++x)
            for (std::int64_t y = y0; y < y0 + h; ++y) dom.vertices.insert({x, y});
        dom.finalize();
        return dom;
    }

    /// Discretization of a polygonal domain D at mesh n: vertex v included
    /// iff B(v/n, 1/(2n)) lies in D; then the component of the origin.
    static LatticeDomain from_polygon(const Polygon& poly, std::int64_t n) {
        if (n < 1) throw std::invalid_argument("LatticeDomain::from_polygon: mesh < 1");
        LatticeDomain dom;
        dom.mesh = n;
        Vec2 lo, hi;
        poly.bounding_box(lo, hi);
        double r = 1.0 / (2.0 * n);
        std::int64_t xa = static_cast<std::int64_t>(std::floor(lo.x * n)) - 1;
        std::int64_t xb = static_cast<std::int64_t>(std::ceil(hi.x * n)) + 1;
        std::int64_t ya = static_cast<std::int64_t>(std::floor(lo.y * n)) - 1;
        std::int64_t yb = static_cast<std::int64_t>(std::ceil(hi.y * n)) + 1;
        for (std::int64_t x = xa; x <= xb; ++x)
            for (std::int64_t y = ya; y <= yb; ++y) {
                Vec2 p{static_cast<double>(x) / n, static_cast<double>(y) / n};
                if (poly.contains_ball(p, r)) dom.vertices.insert({x, y});
            }
        dom.finalize();
        return dom;
    }

private:
    void restrict_to_component_() {
        std::unordered_set<Vec2i, Vec2iHash> component;
        std::queue<Vec2i> frontier;
        frontier.push(origin);
        component.insert(origin);
        while (!frontier.empty()) {
            Vec2i v = frontier.front();
            frontier.pop();
            for (const Vec2i& d : kDirections4) {
                Vec2i w = v + d;
                if (vertices.count(w) && !component.count(w)) {
                    component.insert(w);
                    frontier.push(w);
                }
            }
        }
        vertices = std::move(component);
    }
};

}  // namespace loopforge
