#pragma once

// Orthogonally equivariant covariance / precision estimation. Every estimator
// here keeps the sample eigenvectors and replaces the sample eigenvalues.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "decomposite/core_linalg.hpp"
#include "decomposite/rmt_spectrum.hpp"

namespace decomposite {

enum class SpectrumMethod { SteinRaw, SteinIsotonized, LwOracle, LwPlugin, Identity, Ridge, Sample };

inline const char* to_string(SpectrumMethod m) {
    switch (m) {
        case SpectrumMethod::SteinRaw: return "stein-raw";
        case SpectrumMethod::SteinIsotonized: return "stein-isotonized";
        case SpectrumMethod::LwOracle: return "lw-oracle";
        case SpectrumMethod::LwPlugin: return "lw-plugin";
        case SpectrumMethod::Identity: return "identity";
        case SpectrumMethod::Ridge: return "ridge";
        case SpectrumMethod::Sample: return "sample";
    }
    return "unknown";
}

/// Shrunk variance-scale eigenvalues plus a record of every repair applied.
struct ShrinkageSpectrum {
    std::vector<double> values;
    SpectrumMethod method = SpectrumMethod::Sample;

    // Values before any safeguarding (NaN where the raw formula was invalid).
    std::vector<double> raw_values;
    bool raw_valid = true;        // every raw value finite and positive
    bool raw_monotone = true;     // raw values nondecreasing
    std::size_t interpolated = 0; // lw: entries with nonpositive denominator
    std::size_t clamped = 0;      // stein: entries raised to the positivity floor
    std::vector<std::string> warnings;
};

inline bool is_nondecreasing(std::span<const double> v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] >= v[i - 1])) return false;
    }
    return true;
}

/// Stein's raw shrinker n l_i / (n - p + 1 - 2 l_i sum_{j != i} 1/(l_j - l_i)).
/// Negative and non-monotone values are returned as computed.
inline ShrinkageSpectrum stein_raw(std::span<const double> eigenvalues, long n) {
    const std::size_t p = eigenvalues.size();
    if (p == 0) throw std::invalid_argument("stein_raw: empty eigenvalue vector");
    if (n < 1) throw std::invalid_argument("stein_raw: need n >= 1");
    ShrinkageSpectrum out;
    out.method = SpectrumMethod::SteinRaw;
    out.values.resize(p);
    const double nd = static_cast<double>(n);
    const double base = nd - static_cast<double>(p) + 1.0;
    for (std::size_t i = 0; i < p; ++i) {
        const double li = eigenvalues[i];
        double sum = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (j == i) continue;
            const double gap = eigenvalues[j] - li;
            if (gap == 0.0) {
                throw std::domain_error("stein_raw: repeated eigenvalue " + std::to_string(li));
            }
            sum += 1.0 / gap;
        }
        const double denom = base - 2.0 * li * sum;
        if (denom == 0.0) {
            throw std::domain_error("stein_raw: zero denominator at index " + std::to_string(i));
        }
        out.values[i] = nd * li / denom;
    }
    out.raw_values = out.values;
    out.raw_monotone = is_nondecreasing(out.values);
    out.raw_valid = std::all_of(out.values.begin(), out.values.end(), [](double v) { return v > 0.0; });
    return out;
}

/// Least-squares nondecreasing fit (pool adjacent violators, unit weights).
inline std::vector<double> isotonize(std::span<const double> values) {
    struct Block {
        double sum;
        std::size_t count;
        double mean() const { return sum / static_cast<double>(count); }
    };
    std::vector<Block> blocks;
    blocks.reserve(values.size());
    for (double v : values) {
        blocks.push_back({v, 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
            Block top = blocks.back();
            blocks.pop_back();
            blocks.back().sum += top.sum;
            blocks.back().count += top.count;
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (const Block& b : blocks) out.insert(out.end(), b.count, b.mean());
    return out;
}

/// Oracle precision eigenvalue (1 - c - 2 c lambda Re m(lambda)) / lambda.
inline double lw_oracle(double lambda, double c, double re_m) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("lw_oracle: need lambda > 0");
    }
    return (1.0 - c - 2.0 * c * lambda * re_m) / lambda;
}

/// Stein raw -> PAVA -> positivity floor eps * median(lambda).
inline ShrinkageSpectrum stein_isotonized(std::span<const double> eigenvalues, long n) {
    ShrinkageSpectrum out = stein_raw(eigenvalues, n);
    out.method = SpectrumMethod::SteinIsotonized;
    out.values = isotonize(out.values);
    std::vector<double> sorted(eigenvalues.begin(), eigenvalues.end());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double floor = 1e-8 * std::abs(sorted[sorted.size() / 2]);
    for (double& v : out.values) {
        if (!(v > floor)) {
            v = floor > 0.0 ? floor : 1e-300;
            ++out.clamped;
        }
    }
    if (out.clamped > 0) {
        out.warnings.push_back("stein: " + std::to_string(out.clamped) +
                               " isotonized value(s) clamped to positivity floor");
    }
    return out;
}

/// Nonlinear shrinkage lambda_i / (1 - c - 2 c lambda_i Re m_h(lambda_i)) with the
/// kernel estimate m_h. Entries whose denominator is not positive are filled by
/// linear interpolation (in lambda) between valid neighbours; the result is then
/// made nondecreasing by PAVA.
inline ShrinkageSpectrum lw_shrink(std::span<const double> eigenvalues, long n,
                                   const KernelConfig& cfg) {
    const std::size_t p = eigenvalues.size();
    if (p == 0) throw std::invalid_argument("lw_shrink: empty eigenvalue vector");
    if (static_cast<long>(p) >= n) {
        throw std::invalid_argument("lw_shrink: need p < n (p=" + std::to_string(p) +
                                    ", n=" + std::to_string(n) + ")");
    }
    for (double l : eigenvalues) {
        if (!(l > 0.0)) throw std::invalid_argument("lw_shrink: eigenvalues must be positive");
    }
    const double c = static_cast<double>(p) / static_cast<double>(n);

    ShrinkageSpectrum out;
    out.method = SpectrumMethod::LwPlugin;
    out.raw_values.resize(p);
    std::vector<bool> valid(p);
    for (std::size_t i = 0; i < p; ++i) {
        const double li = eigenvalues[i];
        const double re = kernel_stieltjes_estimate(eigenvalues, cfg, li).real();
        const double denom = 1.0 - c - 2.0 * c * li * re;
        valid[i] = denom > 0.0 && std::isfinite(denom);
        out.raw_values[i] = valid[i] ? li / denom : std::numeric_limits<double>::quiet_NaN();
    }
    out.raw_valid = std::all_of(valid.begin(), valid.end(), [](bool v) { return v; });
    out.raw_monotone = out.raw_valid && is_nondecreasing(out.raw_values);

    std::vector<double> filled = out.raw_values;
    if (!out.raw_valid) {
        std::vector<std::size_t> good;
        for (std::size_t i = 0; i < p; ++i) {
            if (valid[i]) good.push_back(i);
        }
        if (good.empty()) {
            throw ComputationError("lw_shrink: shrinkage denominator is nonpositive everywhere");
        }
        for (std::size_t i = 0; i < p; ++i) {
            if (valid[i]) continue;
            ++out.interpolated;
            auto hi = std::lower_bound(good.begin(), good.end(), i);
            if (hi == good.begin()) {
                filled[i] = out.raw_values[*hi];
            } else if (hi == good.end()) {
                filled[i] = out.raw_values[good.back()];
            } else {
                const std::size_t a = *(hi - 1), b = *hi;
                const double la = eigenvalues[a], lb = eigenvalues[b];
                const double t = lb > la ? (eigenvalues[i] - la) / (lb - la) : 0.5;
                filled[i] = (1.0 - t) * out.raw_values[a] + t * out.raw_values[b];
            }
        }
        out.warnings.push_back("lw: " + std::to_string(out.interpolated) +
                               " value(s) with nonpositive denominator interpolated");
    }
    out.values = is_nondecreasing(filled) ? filled : isotonize(filled);
    if (out.raw_valid && !out.raw_monotone) {
        out.warnings.push_back("lw: raw shrunk spectrum was not monotone; isotonized");
    }
    return out;
}

// ── Matrix assembly ──────────────────────────────────────────────────────

enum class PrecisionMethod { Sample, Identity, Diagonal, Ridge, Stein, Lw };

inline const char* to_string(PrecisionMethod m) {
    switch (m) {
        case PrecisionMethod::Sample: return "sample";
        case PrecisionMethod::Identity: return "identity";
        case PrecisionMethod::Diagonal: return "diagonal";
        case PrecisionMethod::Ridge: return "ridge";
        case PrecisionMethod::Stein: return "stein";
        case PrecisionMethod::Lw: return "lw";
    }
    return "unknown";
}

struct PrecisionEstimate {
    Matrix matrix;
    SpectralDecomposition decomposition;  // of the sample covariance S
    PrecisionMethod method = PrecisionMethod::Sample;
    // Precision-side spectrum psi_i on the columns of decomposition.eigenvectors
    // (empty for identity and diagonal, which do not use the sample eigenbasis).
    std::vector<double> precision_spectrum;
    std::vector<std::string> warnings;
};

namespace detail {

// Nudge exact ties apart by 1e-10 * lambda so Stein's pairwise sum is defined.
inline std::vector<double> separate_ties(const Vector& eigenvalues, std::vector<std::string>& warnings) {
    std::vector<double> v(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
    std::size_t nudged = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] <= v[i - 1]) {
            v[i] = v[i - 1] + 1e-10 * std::max(std::abs(v[i - 1]), 1e-300);
            ++nudged;
        }
    }
    if (nudged > 0) {
        warnings.push_back("stein: " + std::to_string(nudged) + " repeated eigenvalue(s) perturbed");
    }
    return v;
}

inline PrecisionEstimate from_spectrum(SpectralDecomposition dec, PrecisionMethod method,
                                       std::vector<double> psi, std::vector<std::string> warnings) {
    PrecisionEstimate est;
    const Vector psi_vec = Eigen::Map<const Vector>(psi.data(), static_cast<Index>(psi.size()));
    est.matrix = dec.assemble(psi_vec);
    est.matrix = 0.5 * (est.matrix + est.matrix.transpose()).eval();
    est.decomposition = std::move(dec);
    est.method = method;
    est.precision_spectrum = std::move(psi);
    est.warnings = std::move(warnings);
    return est;
}

}  // namespace detail

/// Precision estimate from the sample covariance of x. `ridge` is required
/// (and must be positive) for PrecisionMethod::Ridge; `cfg` defaults to
/// bandwidth n^(-1/3) for the lw method.
inline PrecisionEstimate precision_estimate(const DataMatrix& x, PrecisionMethod method,
                                            std::optional<KernelConfig> cfg = std::nullopt,
                                            std::optional<double> ridge = std::nullopt) {
    const Index n = x.rows();
    const Index p = x.cols();
    const SampleMoments mom = sample_moments(x);

    if (method == PrecisionMethod::Identity) {
        PrecisionEstimate est;
        est.matrix = Matrix::Identity(p, p);
        est.method = method;
        return est;
    }
    if (method == PrecisionMethod::Diagonal) {
        PrecisionEstimate est;
        Vector inv(p);
        for (Index i = 0; i < p; ++i) {
            const double s = mom.cov(i, i);
            if (!(s > 0.0)) {
                throw ComputationError("precision_estimate: zero sample variance in column " +
                                       std::to_string(i + 1));
            }
            inv(i) = 1.0 / s;
        }
        est.matrix = inv.asDiagonal();
        est.method = method;
        return est;
    }

    SpectralDecomposition dec = spectral_decompose(mom.cov);
    const Vector& lambda = dec.eigenvalues;
    std::vector<std::string> warnings;
    std::vector<double> psi(static_cast<std::size_t>(p));

    switch (method) {
        case PrecisionMethod::Sample: {
            if (n - 1 < p) {
                throw ComputationError("precision_estimate: sample method needs n - 1 >= p");
            }
            const double top = std::max(std::abs(lambda(p - 1)), 1e-300);
            if (!(lambda(0) > 1e-12 * top)) {
                throw ComputationError("precision_estimate: sample covariance is singular");
            }
            for (Index i = 0; i < p; ++i) psi[i] = 1.0 / lambda(i);
            break;
        }
        case PrecisionMethod::Ridge: {
            if (!ridge || !(*ridge > 0.0)) {
                throw std::invalid_argument("precision_estimate: ridge method needs lambda > 0");
            }
            for (Index i = 0; i < p; ++i) psi[i] = 1.0 / (std::max(lambda(i), 0.0) + *ridge);
            break;
        }
        case PrecisionMethod::Stein: {
            const std::vector<double> separated = detail::separate_ties(lambda, warnings);
            const ShrinkageSpectrum s = stein_isotonized(separated, static_cast<long>(n));
            warnings.insert(warnings.end(), s.warnings.begin(), s.warnings.end());
            for (Index i = 0; i < p; ++i) psi[i] = 1.0 / s.values[i];
            break;
        }
        case PrecisionMethod::Lw: {
            if (p >= n) {
                throw ComputationError("precision_estimate: lw method needs p < n (p=" + std::to_string(p) +
                                       ", n=" + std::to_string(n) + ")");
            }
            if (!(lambda(0) > 0.0)) {
                throw ComputationError("precision_estimate: lw method needs a positive definite S");
            }
            const KernelConfig k = cfg.value_or(KernelConfig::for_sample_size(n));
            std::vector<double> l(lambda.data(), lambda.data() + p);
            const ShrinkageSpectrum s = lw_shrink(l, static_cast<long>(n), k);
            warnings.insert(warnings.end(), s.warnings.begin(), s.warnings.end());
            for (Index i = 0; i < p; ++i) psi[i] = 1.0 / s.values[i];
            break;
        }
        default:
            break;
    }
    return detail::from_spectrum(std::move(dec), method, std::move(psi), std::move(warnings));
}

}  // namespace decomposite
