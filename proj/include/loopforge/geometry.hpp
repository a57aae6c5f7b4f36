#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace loopforge {

struct Vec2 {
    double x = 0.0, y = 0.0;
    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm2(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::sqrt(norm2(a)); }

struct Vec2i {
    std::int64_t x = 0, y = 0;
    friend Vec2i operator+(Vec2i a, Vec2i b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2i operator-(Vec2i a, Vec2i b) { return {a.x - b.x, a.y - b.y}; }
    friend bool operator==(Vec2i a, Vec2i b) { return a.x == b.x && a.y == b.y; }
    friend bool operator!=(Vec2i a, Vec2i b) { return !(a == b); }
};

inline std::int64_t cross(Vec2i a, Vec2i b) { return a.x * b.y - a.y * b.x; }
inline std::int64_t l1(Vec2i a) { return std::llabs(a.x) + std::llabs(a.y); }

struct Vec2iHash {
    std::size_t operator()(const Vec2i& v) const {
        std::uint64_t h = static_cast<std::uint64_t>(v.x) * 0x9e3779b97f4a7c15ULL;
        h ^= static_cast<std::uint64_t>(v.y) + 0x7f4a7c159e3779b9ULL + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

inline const Vec2i kDirections4[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

/// Result of a segment/segment proximity test. `ambiguous` is set when an
/// orientation determinant falls inside the epsilon guard band.
struct SegmentHit {
    double t = 0.0;  // parameter along the first segment, in [0,1]
    Vec2 point{};
    bool ambiguous = false;
};

inline int orientation_sign(Vec2 a, Vec2 b, Vec2 c, double guard, bool* ambiguous) {
    double d = cross(b - a, c - a);
    double scale = std::abs(b.x - a.x) + std::abs(b.y - a.y) + std::abs(c.x - a.x) +
                   std::abs(c.y - a.y);
    if (std::abs(d) <= guard * (1.0 + scale * scale)) {
        if (ambiguous) *ambiguous = true;
        return 0;
    }
    return d > 0 ? 1 : -1;
}

/// Earliest intersection of segment [p0,p1] with segment [q0,q1], as a
/// parameter along [p0,p1]. Handles collinear overlap by reporting the
/// smallest parameter at which the segments touch.
inline std::optional<SegmentHit> segment_intersect(Vec2 p0, Vec2 p1, Vec2 q0, Vec2 q1,
                                                   double guard = 1e-12) {
    bool ambiguous = false;
    Vec2 r = p1 - p0, s = q1 - q0;
    double denom = cross(r, s);
    double scale = norm(r) + norm(s) + 1.0;
    if (std::abs(denom) > guard * scale * scale) {
        double t = cross(q0 - p0, s) / denom;
        double u = cross(q0 - p0, r) / denom;
        double tol = guard * scale;
        if (t >= -tol && t <= 1 + tol && u >= -tol && u <= 1 + tol) {
            t = std::min(1.0, std::max(0.0, t));
            return SegmentHit{t, p0 + t * r, std::abs(denom) <= 10 * guard * scale * scale};
        }
        return std::nullopt;
    }
    // Parallel. Touching only possible if collinear.
    if (orientation_sign(p0, p1, q0, guard, &ambiguous) != 0) return std::nullopt;
    double rr = norm2(r);
    double t0, t1;
    if (rr > 0) {
        t0 = dot(q0 - p0, r) / rr;
        t1 = dot(q1 - p0, r) / rr;
    } else {
        // Degenerate first segment: touch iff p0 lies on [q0,q1].
        double ss = norm2(s);
        double u = ss > 0 ? dot(p0 - q0, s) / ss : 0.0;
        Vec2 proj = q0 + std::min(1.0, std::max(0.0, u)) * s;
        if (norm(proj - p0) <= guard * scale) return SegmentHit{0.0, p0, true};
        return std::nullopt;
    }
    if (t0 > t1) std::swap(t0, t1);
    double lo = std::max(0.0, t0), hi = std::min(1.0, t1);
    if (lo > hi) return std::nullopt;
    return SegmentHit{lo, p0 + lo * r, true};
}

/// Distance from point p to segment [a,b].
inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    Vec2 d = b - a;
    double dd = norm2(d);
    if (dd == 0) return norm(p - a);
    double u = dot(p - a, d) / dd;
    u = std::min(1.0, std::max(0.0, u));
    return norm(p - (a + u * d));
}

/// Simple polygon as a closed vertex list (no repetition of the first vertex).
struct Polygon {
    std::vector<Vec2> vertices;

    double area() const {
        double a = 0;
        std::size_t n = vertices.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& p = vertices[i];
            const Vec2& q = vertices[(i + 1) % n];
            a += cross(p, q);
        }
        return std::abs(a) / 2.0;
    }

    /// Even-odd rule point containment (boundary counts as inside).
    bool contains(Vec2 p) const {
        std::size_t n = vertices.size();
        bool inside = false;
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            Vec2 a = vertices[i], b = vertices[j];
            if (point_segment_distance(p, a, b) <= 1e-15) return true;
            bool crosses = (a.y > p.y) != (b.y > p.y);
            if (crosses) {
                double xint = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if (p.x < xint) inside = !inside;
            }
        }
        return inside;
    }

    double boundary_distance(Vec2 p) const {
        double best = std::numeric_limits<double>::infinity();
        std::size_t n = vertices.size();
        for (std::size_t i = 0; i < n; ++i)
            best = std::min(best, point_segment_distance(p, vertices[i], vertices[(i + 1) % n]));
        return best;
    }

    /// True iff the closed ball B(p, r) lies inside the polygon.
    bool contains_ball(Vec2 p, double r) const {
        return contains(p) && boundary_distance(p) >= r;
    }

    void bounding_box(Vec2& lo, Vec2& hi) const {
        lo = hi = vertices.at(0);
        for (const Vec2& v : vertices) {
            lo.x = std::min(lo.x, v.x);
            lo.y = std::min(lo.y, v.y);
            hi.x = std::max(hi.x, v.x);
            hi.y = std::max(hi.y, v.y);
        }
    }

    static Polygon rectangle(double x0, double y0, double x1, double y1) {
        return Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
    }
};

}  // namespace loopforge
