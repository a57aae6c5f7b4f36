#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace loopforge {

/// Regularized lower incomplete gamma P(a, x) via series / continued
/// fraction (Lentz). Used for chi-square tail probabilities.
inline double gamma_p(double a, double x) {
    if (a <= 0 || x < 0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0) return 0.0;
    double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    // Continued fraction for Q(a,x), then P = 1 - Q.
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    double q = std::exp(-x + a * std::log(x) - gln) * h;
    return 1.0 - q;
}

/// Chi-square survival function P(Chi2_dof >= stat).
inline double chi_square_pvalue(double stat, double dof) {
    if (dof <= 0) return 1.0;
    return 1.0 - gamma_p(dof / 2.0, stat / 2.0);
}

struct ChiSquareResult {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
    std::size_t cells_used = 0;
    std::size_t cells_merged = 0;
};

/// One-sample goodness of fit against expected counts. Cells with expected
/// count below min_expected are pooled into one remainder cell.
inline ChiSquareResult chi_square_gof(const std::vector<double>& observed,
                                      const std::vector<double>& expected,
                                      double min_expected = 5.0) {
    if (observed.size() != expected.size())
        throw std::invalid_argument("chi_square_gof: size mismatch");
    double o_pool = 0, e_pool = 0;
    ChiSquareResult r;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (expected[i] < min_expected) {
            o_pool += observed[i];
            e_pool += expected[i];
            ++r.cells_merged;
            continue;
        }
        r.statistic += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
        ++r.cells_used;
    }
    if (e_pool > 0) {
        r.statistic += (o_pool - e_pool) * (o_pool - e_pool) / e_pool;
        ++r.cells_used;
    }
    r.dof = static_cast<double>(r.cells_used) - 1.0;
    r.p_value = r.dof > 0 ? chi_square_pvalue(r.statistic, r.dof) : 1.0;
    return r;
}

/// Two-sample homogeneity test across cells; expected counts from pooled
/// proportions. Cells whose pooled expectation is below min_expected in
/// either arm are pooled into a remainder cell.
inline ChiSquareResult chi_square_two_sample(const std::vector<double>& a,
                                             const std::vector<double>& b,
                                             double min_expected = 5.0) {
    if (a.size() != b.size()) throw std::invalid_argument("chi_square_two_sample: size mismatch");
    double na = 0, nb = 0;
    for (double v : a) na += v;
    for (double v : b) nb += v;
    double n = na + nb;
    if (n == 0) return {};
    ChiSquareResult r;
    double ap = 0, bp = 0;
    auto add_cell = [&](double oa, double ob) {
        double tot = oa + ob;
        if (tot == 0) return;
        double ea = tot * na / n, eb = tot * nb / n;
        r.statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
        ++r.cells_used;
    };
    for (std::size_t i = 0; i < a.size(); ++i) {
        double tot = a[i] + b[i];
        double ea = tot * na / n, eb = tot * nb / n;
        if (ea < min_expected || eb < min_expected) {
            ap += a[i];
            bp += b[i];
            ++r.cells_merged;
            continue;
        }
        add_cell(a[i], b[i]);
    }
    if (ap + bp > 0) add_cell(ap, bp);
    r.dof = static_cast<double>(r.cells_used) - 1.0;
    r.p_value = r.dof > 0 ? chi_square_pvalue(r.statistic, r.dof) : 1.0;
    return r;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("linear_fit: need >= 2 points");
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0) throw std::invalid_argument("linear_fit: degenerate x values");
    LinearFit f;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

/// Running mean / standard error accumulator.
struct Welford {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double stderr_mean() const {
        return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
    }
};

}  // namespace loopforge
