#pragma once

// Asymptotic local power of the decomposite statistic, the composite
// competitor, their relative efficiency, and a Monte-Carlo power harness
// on AR(1) covariances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "decomposite/core_linalg.hpp"
#include "decomposite/mean_tests.hpp"
#include "decomposite/parallel.hpp"

namespace decomposite {

// ── Mixture representation sum_i psi_i w_i^2, w_i ~ N(theta_i, 1) ───────

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

inline void require_same_length(const std::vector<double>& a, const std::vector<double>& b, const char* who) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(who) + ": length mismatch (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    }
}

inline void require_positive(const std::vector<double>& psi, const char* who) {
    for (double v : psi) {
        if (!(v > 0.0)) throw std::invalid_argument(std::string(who) + ": weights must be positive");
    }
}

/// E = sum psi + sum psi theta^2, Var = 2 sum psi^2 + 4 sum psi^2 theta^2.
inline Moments t20_moments(const std::vector<double>& psi, const std::vector<double>& theta) {
    require_same_length(psi, theta, "t20_moments");
    require_positive(psi, "t20_moments");
    Moments m;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double t2 = theta[i] * theta[i];
        m.mean += psi[i] * (1.0 + t2);
        m.variance += psi[i] * psi[i] * (2.0 + 4.0 * t2);
    }
    return m;
}

inline std::vector<double> sample_t20(const std::vector<double>& psi, const std::vector<double>& theta,
                                      std::size_t reps, std::uint64_t seed) {
    require_same_length(psi, theta, "sample_t20");
    require_positive(psi, "sample_t20");
    if (reps < 1) throw std::invalid_argument("sample_t20: need reps >= 1");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(reps);
    for (double& value : out) {
        double sum = 0.0;
        for (std::size_t i = 0; i < psi.size(); ++i) {
            const double w = theta[i] + normal(rng);
            sum += psi[i] * w * w;
        }
        value = sum;
    }
    return out;
}

// ── Local alternatives and power functions ───────────────────────────────

struct LocalAlternative {
    Vector delta;
    Index n = 1;
    Index p = 1;
};

/// mu = n^(-1/2) p^(1/4) delta.
inline Vector local_alternative_mean(const LocalAlternative& alt) {
    if (alt.n < 1 || alt.p < 1) {
        throw std::invalid_argument("local_alternative_mean: need n >= 1 and p >= 1");
    }
    const double scale = std::pow(static_cast<double>(alt.p), 0.25) / std::sqrt(static_cast<double>(alt.n));
    return scale * alt.delta;
}

/// Phi(-z_alpha + shift / sqrt(2 d)).
inline double power_from_shift(double shift, double d, double alpha) {
    if (!(d > 0.0)) throw std::invalid_argument("power_from_shift: need d > 0");
    return standard_normal_cdf(-normal_upper_quantile(alpha) + shift / std::sqrt(2.0 * d));
}

struct AsymptoticModel {
    std::vector<double> psi;   // ascending, positive
    std::vector<double> beta;  // local coordinates paired with psi
    double d = 1.0;            // lim sum psi^2 / p
    double alpha = 0.05;
};

inline double asymptotic_power(const AsymptoticModel& model) {
    require_same_length(model.psi, model.beta, "asymptotic_power");
    require_positive(model.psi, "asymptotic_power");
    if (!std::is_sorted(model.psi.begin(), model.psi.end())) {
        throw std::invalid_argument("asymptotic_power: psi must be ascending");
    }
    if (!(model.d > 0.0)) throw std::invalid_argument("asymptotic_power: need d > 0");
    double shift = 0.0;
    for (std::size_t i = 0; i < model.psi.size(); ++i) shift += model.psi[i] * model.beta[i] * model.beta[i];
    return power_from_shift(shift, model.d, model.alpha);
}

inline double composite_power(double delta_quadform, double d1, double alpha) {
    if (!(d1 > 0.0)) throw std::invalid_argument("composite_power: need d1 > 0");
    if (delta_quadform < 0.0) throw std::invalid_argument("composite_power: quadratic form must be >= 0");
    return power_from_shift(delta_quadform, d1, alpha);
}

/// Noncentrality quadratic form and its limit constant; shift() = q / sqrt(2 d).
struct NoncentralityShift {
    double quadform = 0.0;
    double d = 1.0;
    double shift() const { return quadform / std::sqrt(2.0 * d); }
};

/// Relative efficiency of test a with respect to test b.
inline double are(const NoncentralityShift& a, const NoncentralityShift& b) {
    if (!(a.d > 0.0) || !(b.d > 0.0)) throw std::invalid_argument("are: need d > 0");
    const double denom = b.shift();
    if (!(denom > 0.0)) throw std::domain_error("are: zero denominator shift");
    return a.shift() / denom;
}

// ── Analytic shifts for the AR(1) comparison ─────────────────────────────

inline Matrix block_diagonal_part(const Matrix& sigma, const std::vector<Index>& sizes) {
    Matrix out = Matrix::Zero(sigma.rows(), sigma.cols());
    Index start = 0;
    for (Index s : sizes) {
        out.block(start, start, s, s) = sigma.block(start, start, s, s);
        start += s;
    }
    return out;
}

/// delta^T Sigma_K^-1 delta and d1 = tr(Gamma_K^2)/p with Gamma_K = Sigma^(1/2) Sigma_K^-1 Sigma^(1/2),
/// where Sigma_K keeps the K contiguous diagonal blocks of sigma.
inline NoncentralityShift composite_shift(const Matrix& sigma, const Vector& delta, Index k) {
    const Index p = sigma.rows();
    const Matrix blocks = block_diagonal_part(sigma, contiguous_blocks(p, k));
    Eigen::LLT<Matrix> llt(blocks);
    if (llt.info() != Eigen::Success) throw ComputationError("composite_shift: block covariance not PD");
    const Matrix m = llt.solve(sigma);  // Sigma_K^-1 Sigma, similar to Gamma_K
    return {delta.dot(llt.solve(delta)), (m * m).trace() / static_cast<double>(p)};
}

/// Monte-Carlo estimate of the oracle precision spectrum: a_i = E[u_i^T Sigma^-1 u_i]
/// where u_i is the sample eigenvector of rank i (ascending) at sample size n.
inline std::vector<double> oracle_precision_spectrum(const Matrix& sigma, Index n, std::size_t reps,
                                                     std::uint64_t seed) {
    const Index p = sigma.rows();
    if (reps < 1) throw std::invalid_argument("oracle_precision_spectrum: need reps >= 1");
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) throw ComputationError("oracle_precision_spectrum: sigma not PD");
    const Matrix precision = llt.solve(Matrix::Identity(p, p));
    std::vector<Vector> per_rep(reps);
    parallel_for(reps, [&](std::size_t r) {
        const DataMatrix x = sample_mvn(Vector::Zero(p), sigma, n, derive_seed(seed, r));
        const SpectralDecomposition dec = spectral_decompose(sample_moments(x).cov);
        per_rep[r] = (dec.eigenvectors.transpose() * precision * dec.eigenvectors).diagonal();
    });
    Vector total = Vector::Zero(p);
    for (const Vector& v : per_rep) total += v;
    total /= static_cast<double>(reps);
    return {total.data(), total.data() + p};
}

/// delta^T Sigma_1^-1 delta and d = sum (gamma_i a_i)^2 / p, where
/// Sigma_1^-1 = V diag(a) V^T on the population eigenbasis (rank-matched).
inline NoncentralityShift decomposite_shift(const Matrix& sigma, const Vector& delta,
                                            const std::vector<double>& oracle_precision) {
    const SpectralDecomposition pop = spectral_decompose(sigma);
    const Index p = sigma.rows();
    if (static_cast<Index>(oracle_precision.size()) != p) {
        throw std::invalid_argument("decomposite_shift: oracle spectrum length mismatch");
    }
    const Vector a = Eigen::Map<const Vector>(oracle_precision.data(), p);
    const Vector coords = pop.eigenvectors.transpose() * delta;
    double d = 0.0;
    for (Index i = 0; i < p; ++i) {
        const double w = pop.eigenvalues(i) * a(i);
        d += w * w;
    }
    return {coords.dot(a.cwiseProduct(coords)), d / static_cast<double>(p)};
}

// ── Monte-Carlo power ────────────────────────────────────────────────────

inline constexpr std::uint64_t kDefaultDeltaSeed = 20240601;

/// delta_i i.i.d. uniform(-1, 1).
inline Vector draw_delta(Index p, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Vector d(p);
    for (Index i = 0; i < p; ++i) d(i) = unif(rng);
    return d;
}

struct PowerConfig {
    Index p = 20;
    Index n = 60;
    double rho = 0.5;
    double alpha = 0.05;
    std::size_t reps = 1000;
    std::size_t null_reps = 0;  // 0 -> same as reps
    Index k = 2;
    std::uint64_t seed = 1;
    std::vector<StatisticSpec> methods;
    std::optional<Vector> delta;           // default: draw_delta(p, delta_seed)
    std::uint64_t delta_seed = kDefaultDeltaSeed;
    double delta_scale = 1.0;
    std::size_t oracle_reps = 0;           // > 0 -> also compute the analytic ARE
};

struct MethodPower {
    std::string method;
    double rejection_rate = 0.0;
    double std_err = 0.0;
    double critical_value = 0.0;
    std::optional<double> are_vs_composite;  // ratio of implied normal shifts
};

struct PowerEstimate {
    PowerConfig config;
    Vector delta;  // after scaling
    std::vector<MethodPower> methods;
    std::optional<double> analytic_are;
    std::optional<NoncentralityShift> decomposite_noncentrality;
    std::optional<NoncentralityShift> composite_noncentrality;
};

/// Empirical (1 - alpha) quantile: the ceil((1 - alpha) N)-th order statistic.
inline double upper_critical_value(std::vector<double> null_stats, double alpha) {
    if (null_stats.empty()) throw std::invalid_argument("upper_critical_value: no samples");
    std::sort(null_stats.begin(), null_stats.end());
    const double pos = std::ceil((1.0 - alpha) * static_cast<double>(null_stats.size()));
    const std::size_t idx = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(null_stats.size()))) - 1;
    return null_stats[idx];
}

/// Size-calibrated Monte-Carlo power under X ~ N(mu, ar1(rho)) with the local
/// alternative mu = n^(-1/2) p^(1/4) delta. Each method's critical value is
/// its empirical (1 - alpha) quantile from an independent null run of the same
/// size. Within a phase, replicate r uses the same dataset for every method.
inline PowerEstimate mc_power(const PowerConfig& cfg) {
    if (cfg.p < 1 || cfg.n <= cfg.p) throw std::invalid_argument("mc_power: need 1 <= p < n");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("mc_power: need alpha in (0, 1)");
    if (cfg.reps < 1) throw std::invalid_argument("mc_power: need reps >= 1");
    if (cfg.methods.empty()) throw std::invalid_argument("mc_power: no methods");
    if (cfg.delta && cfg.delta->size() != cfg.p) throw std::invalid_argument("mc_power: delta length != p");

    PowerEstimate out;
    out.config = cfg;
    out.delta = cfg.delta_scale * cfg.delta.value_or(draw_delta(cfg.p, cfg.delta_seed));
    const Matrix sigma = ar1_covariance(cfg.rho, cfg.p);
    const Vector mu = local_alternative_mean({out.delta, cfg.n, cfg.p});
    const std::size_t null_reps = cfg.null_reps != 0 ? cfg.null_reps : cfg.reps;
    const std::size_t m = cfg.methods.size();
    std::vector<StatisticSpec> methods = cfg.methods;
    for (StatisticSpec& spec : methods) spec.blocks = cfg.k;

    auto run_phase = [&](std::uint64_t phase, const Vector& mean, std::size_t reps) {
        std::vector<std::vector<double>> stats(m, std::vector<double>(reps));
        parallel_for(reps, [&](std::size_t r) {
            const DataMatrix x = sample_mvn(mean, sigma, cfg.n, derive_seed(cfg.seed, phase, r));
            for (std::size_t j = 0; j < m; ++j) stats[j][r] = compute_statistic(x, methods[j]);
        });
        return stats;
    };
    const auto null_stats = run_phase(0, Vector::Zero(cfg.p), null_reps);
    const auto alt_stats = run_phase(1, mu, cfg.reps);

    const double z_alpha = normal_upper_quantile(cfg.alpha);
    const double reps_d = static_cast<double>(cfg.reps);
    auto implied_shift = [&](double rate) {
        const double clipped = std::clamp(rate, 0.5 / reps_d, 1.0 - 0.5 / reps_d);
        return boost::math::quantile(boost::math::normal_distribution<double>(), clipped) + z_alpha;
    };

    std::optional<double> composite_shift_value;
    for (std::size_t j = 0; j < m; ++j) {
        MethodPower mp;
        mp.method = to_string(cfg.methods[j].kind);
        mp.critical_value = upper_critical_value(null_stats[j], cfg.alpha);
        const auto rejected = std::count_if(alt_stats[j].begin(), alt_stats[j].end(),
                                            [&](double s) { return s > mp.critical_value; });
        mp.rejection_rate = static_cast<double>(rejected) / reps_d;
        mp.std_err = std::sqrt(mp.rejection_rate * (1.0 - mp.rejection_rate) / reps_d);
        if (cfg.methods[j].kind == StatisticKind::Composite) composite_shift_value = implied_shift(mp.rejection_rate);
        out.methods.push_back(mp);
    }
    if (composite_shift_value && *composite_shift_value > 0.0) {
        for (MethodPower& mp : out.methods) {
            mp.are_vs_composite = implied_shift(mp.rejection_rate) / *composite_shift_value;
        }
    }

    if (cfg.oracle_reps > 0) {
        const auto oracle = oracle_precision_spectrum(sigma, cfg.n, cfg.oracle_reps, derive_seed(cfg.seed, 2));
        out.decomposite_noncentrality = decomposite_shift(sigma, out.delta, oracle);
        out.composite_noncentrality = composite_shift(sigma, out.delta, cfg.k);
        out.analytic_are = are(*out.decomposite_noncentrality, *out.composite_noncentrality);
    }
    return out;
}

}  // namespace decomposite
