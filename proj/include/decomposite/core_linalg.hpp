#pragma once

// Dense symmetric linear algebra, sample moments, structured covariances and
// seeded Gaussian sampling. Everything here is a pure function of its inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace decomposite {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised when a numerical routine fails on otherwise well-formed input
/// (singular matrix, failed factorization, solver non-convergence).
class ComputationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// n observations (rows) by p variables (columns). All entries finite.
class DataMatrix {
public:
    DataMatrix() = default;

    explicit DataMatrix(Matrix values) : values_(std::move(values)) {
        if (values_.rows() < 1 || values_.cols() < 1) {
            throw std::invalid_argument("DataMatrix: need at least one row and one column");
        }
        if (!values_.allFinite()) {
            for (Index i = 0; i < values_.rows(); ++i) {
                for (Index j = 0; j < values_.cols(); ++j) {
                    if (!std::isfinite(values_(i, j))) {
                        throw std::invalid_argument("DataMatrix: non-finite entry at row " +
                                                    std::to_string(i + 1) + ", column " +
                                                    std::to_string(j + 1));
                    }
                }
            }
        }
    }

    Index rows() const noexcept { return values_.rows(); }
    Index cols() const noexcept { return values_.cols(); }
    const Matrix& values() const noexcept { return values_; }

private:
    Matrix values_;
};

struct SampleMoments {
    Vector mean;
    Matrix cov;  // divisor n - 1
};

/// Eigenvalues ascending; column k of `eigenvectors` pairs with eigenvalue k.
struct SpectralDecomposition {
    Vector eigenvalues;
    Matrix eigenvectors;

    Matrix reconstruct() const {
        return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
    }

    /// U diag(values) U^T for an arbitrary spectrum on the same eigenbasis.
    Matrix assemble(const Vector& values) const {
        if (values.size() != eigenvalues.size()) {
            throw std::invalid_argument("SpectralDecomposition::assemble: spectrum length mismatch");
        }
        return eigenvectors * values.asDiagonal() * eigenvectors.transpose();
    }
};

inline SampleMoments sample_moments(const DataMatrix& x) {
    const Index n = x.rows();
    if (n < 2) {
        throw std::invalid_argument("sample_moments: need n >= 2 rows, got " + std::to_string(n));
    }
    SampleMoments m;
    m.mean = x.values().colwise().mean().transpose();
    const Matrix centered = x.values().rowwise() - m.mean.transpose();
    m.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    // Exact symmetry; the product above is symmetric only up to rounding.
    m.cov = 0.5 * (m.cov + m.cov.transpose()).eval();
    return m;
}

inline double relative_asymmetry(const Matrix& m) {
    const double scale = std::max(1.0, m.norm());
    return (m - m.transpose()).norm() / scale;
}

inline SpectralDecomposition spectral_decompose(const Matrix& m, double symmetry_tol = 1e-8) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw std::invalid_argument("spectral_decompose: need a non-empty square matrix");
    }
    if (!m.allFinite()) {
        throw std::invalid_argument("spectral_decompose: non-finite entry");
    }
    if (relative_asymmetry(m) > symmetry_tol) {
        throw std::invalid_argument("spectral_decompose: matrix is not symmetric");
    }
    const Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw ComputationError("spectral_decompose: eigen-solver did not converge");
    }
    SpectralDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
    // Sign convention: first non-negligible component of each eigenvector is nonnegative.
    for (Index k = 0; k < out.eigenvectors.cols(); ++k) {
        auto col = out.eigenvectors.col(k);
        for (Index i = 0; i < col.size(); ++i) {
            if (std::abs(col(i)) > 1e-12) {
                if (col(i) < 0.0) col *= -1.0;
                break;
            }
        }
    }
    return out;
}

/// sigma_ij = rho^|i-j|.
inline Matrix ar1_covariance(double rho, Index p) {
    if (!(std::abs(rho) < 1.0)) {
        throw std::invalid_argument("ar1_covariance: need |rho| < 1");
    }
    if (p < 1) {
        throw std::invalid_argument("ar1_covariance: need p >= 1");
    }
    Matrix s(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < p; ++j) {
            s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
        }
    }
    return s;
}

// ── Seeds ────────────────────────────────────────────────────────────────
//
// A single master seed feeds every random routine. Independent streams are
// split off with splitmix64: derive_seed(master, a, b, ...) folds each index
// into the state in order, so the stream for (master, replicate 17, phase 1)
// is the same regardless of how many other streams were drawn before it.

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master) noexcept { return splitmix64(master); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, Rest... rest) noexcept {
    return derive_seed(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL),
                       static_cast<std::uint64_t>(rest)...);
}

using Rng = std::mt19937_64;

/// n i.i.d. rows from N(mu, sigma), generated as mu + L z with sigma = L L^T.
inline DataMatrix sample_mvn(const Vector& mu, const Matrix& sigma, Index n, std::uint64_t seed) {
    const Index p = mu.size();
    if (sigma.rows() != p || sigma.cols() != p) {
        throw std::invalid_argument("sample_mvn: mean and covariance dimensions disagree");
    }
    if (n < 1) {
        throw std::invalid_argument("sample_mvn: need n >= 1");
    }
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw ComputationError("sample_mvn: covariance is not positive definite (Cholesky failed)");
    }
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(n, p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) z(i, j) = normal(rng);
    }
    Matrix x = z * llt.matrixL().transpose();
    x.rowwise() += mu.transpose();
    return DataMatrix(std::move(x));
}

/// Subtract mu0 from every row, reducing H0: mu = mu0 to H0: mu = 0.
inline DataMatrix shift_rows(const DataMatrix& x, const Vector& mu0) {
    if (mu0.size() != x.cols()) {
        throw std::invalid_argument("shift_rows: mu0 has length " + std::to_string(mu0.size()) +
                                    ", data has " + std::to_string(x.cols()) + " columns");
    }
    Matrix shifted = x.values().rowwise() - mu0.transpose();
    return DataMatrix(std::move(shifted));
}

}  // namespace decomposite
