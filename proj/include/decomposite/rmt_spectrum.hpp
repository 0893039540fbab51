#pragma once

// Stieltjes / Hilbert transform machinery for sample spectra: the finite-sum
// transform, the closed-form Marchenko-Pastur transform for Sigma = I, and a
// kernel-smoothed estimate of the boundary value m(x + i0) on the real line.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

namespace decomposite {

using Complex = std::complex<double>;

/// (1/p) sum_i 1 / (lambda_i - z).
inline Complex empirical_stieltjes(std::span<const double> eigenvalues, Complex z) {
    if (eigenvalues.empty()) {
        throw std::invalid_argument("empirical_stieltjes: empty eigenvalue vector");
    }
    Complex sum{0.0, 0.0};
    for (double lambda : eigenvalues) {
        const Complex diff = Complex(lambda, 0.0) - z;
        if (diff == Complex(0.0, 0.0)) {
            throw std::domain_error("empirical_stieltjes: real argument " +
                                    std::to_string(z.real()) + " coincides with an eigenvalue");
        }
        sum += 1.0 / diff;
    }
    return sum / static_cast<double>(eigenvalues.size());
}

/// Marchenko-Pastur law with concentration c = p/n and unit population variance.
struct MPModel {
    double c = 0.0;
    double lower = 1.0;  // (1 - sqrt c)^2
    double upper = 1.0;  // (1 + sqrt c)^2
};

inline MPModel mp_edges(double c) {
    if (!(c >= 0.0 && c < 1.0)) {
        throw std::invalid_argument("mp_edges: need 0 <= c < 1, got " + std::to_string(c));
    }
    const double r = std::sqrt(c);
    return MPModel{c, (1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)};
}

/// Boundary value of the MP Stieltjes transform on the support:
/// ((1 - c - x) + i sqrt((upper - x)(x - lower))) / (2 c x).
inline Complex mp_stieltjes(double x, const MPModel& model) {
    if (model.c <= 0.0) {
        throw std::domain_error("mp_stieltjes: c = 0 has a point-mass spectrum");
    }
    if (x <= 0.0) {
        throw std::domain_error("mp_stieltjes: need x > 0");
    }
    if (x < model.lower || x > model.upper) {
        throw std::domain_error("mp_stieltjes: x = " + std::to_string(x) + " outside [" +
                                std::to_string(model.lower) + ", " + std::to_string(model.upper) + "]");
    }
    const double denom = 2.0 * model.c * x;
    const double radicand = std::max(0.0, (model.upper - x) * (x - model.lower));
    return {(1.0 - model.c - x) / denom, std::sqrt(radicand) / denom};
}

/// MP density f(x) = Im[m(x)] / pi on the support, zero elsewhere.
inline double mp_density(double x, const MPModel& model) {
    if (x <= model.lower || x >= model.upper) return 0.0;
    return mp_stieltjes(x, model).imag() / std::numbers::pi;
}

/// Re[m(x)] = PV integral of dF(t) / (t - x) for any x > 0. Inside the
/// support this is (1 - c - x)/(2cx); outside it is the (real) transform itself,
/// taking the root that behaves like -1/x for large x and stays positive below
/// the lower edge.
inline double mp_hilbert(double x, const MPModel& model) {
    if (model.c <= 0.0) {
        throw std::domain_error("mp_hilbert: c = 0 has a point-mass spectrum");
    }
    if (x <= 0.0) {
        throw std::domain_error("mp_hilbert: need x > 0");
    }
    const double denom = 2.0 * model.c * x;
    const double a = 1.0 - model.c - x;
    if (x >= model.lower && x <= model.upper) return a / denom;
    const double root = std::sqrt((x - model.upper) * (x - model.lower));
    return x > model.upper ? (a + root) / denom : (a - root) / denom;
}

// ── Kernel estimate ──────────────────────────────────────────────────────

/// Global bandwidth h; observation j is smoothed with width h * lambda_j.
struct KernelConfig {
    double bandwidth = 0.1;

    static KernelConfig for_sample_size(long n) {
        if (n < 1) throw std::invalid_argument("KernelConfig: need n >= 1");
        return KernelConfig{std::pow(static_cast<double>(n), -1.0 / 3.0)};
    }
};

inline constexpr double kEpanechnikovHalfWidth = 2.2360679774997896964;  // sqrt(5)

/// Unit-variance Epanechnikov kernel, 3/(4 sqrt 5) (1 - u^2/5) on |u| <= sqrt 5.
inline double epanechnikov(double u) noexcept {
    const double t = 1.0 - u * u / 5.0;
    return t > 0.0 ? 3.0 / (4.0 * kEpanechnikovHalfWidth) * t : 0.0;
}

/// PV integral of k(t) / (t - u) dt for the kernel above (pi times its Hilbert transform).
inline double epanechnikov_pv(double u) noexcept {
    // Far from the support the closed form cancels catastrophically; expand
    // 1/(t - u) in t/u instead. Even moments are 3 * 5^m / ((2m+1)(2m+3)).
    if (std::abs(u) > 4.0 * kEpanechnikovHalfWidth) {
        const double r = 5.0 / (u * u);
        double sum = 0.0, power = 1.0;
        for (int m = 0; m < 40; ++m) {
            const double term = 3.0 * power / ((2.0 * m + 1.0) * (2.0 * m + 3.0));
            sum += term;
            if (term < 1e-17 * sum) break;
            power *= r;
        }
        return -sum / u;
    }
    const double t = 1.0 - u * u / 5.0;
    double log_term = 0.0;
    const double num = std::abs(kEpanechnikovHalfWidth - u);
    const double den = std::abs(kEpanechnikovHalfWidth + u);
    // At u = +-sqrt 5 the logarithm diverges but its coefficient vanishes.
    if (num > 0.0 && den > 0.0) {
        log_term = 3.0 / (4.0 * kEpanechnikovHalfWidth) * t * std::log(num / den);
    }
    return -0.3 * u + log_term;
}

/// Smoothed estimate of m(x + i0): imaginary part pi * f_h(x), real part the
/// principal-value integral of the smoothed density f_h against 1/(t - x).
inline Complex kernel_stieltjes_estimate(std::span<const double> eigenvalues,
                                         const KernelConfig& cfg, double x) {
    if (eigenvalues.empty()) {
        throw std::invalid_argument("kernel_stieltjes_estimate: empty eigenvalue vector");
    }
    if (!(cfg.bandwidth > 0.0)) {
        throw std::invalid_argument("kernel_stieltjes_estimate: bandwidth must be positive");
    }
    double re = 0.0;
    double density = 0.0;
    for (double lambda : eigenvalues) {
        if (!(lambda > 0.0)) {
            throw std::invalid_argument("kernel_stieltjes_estimate: eigenvalues must be positive");
        }
        const double h = cfg.bandwidth * lambda;
        const double u = (x - lambda) / h;
        re += epanechnikov_pv(u) / h;
        density += epanechnikov(u) / h;
    }
    const double p = static_cast<double>(eigenvalues.size());
    return {re / p, std::numbers::pi * density / p};
}

}  // namespace decomposite
