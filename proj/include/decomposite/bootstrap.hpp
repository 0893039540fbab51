#pragma once

// CSV ingestion, the resampling null distribution for any mean-test
// statistic, and empirical p-values.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "decomposite/core_linalg.hpp"
#include "decomposite/mean_tests.hpp"
#include "decomposite/parallel.hpp"

namespace decomposite {

class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

// from_chars ignores the global locale, so "1.5" parses the same everywhere.
inline std::optional<double> parse_double(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
    return value;
}

}  // namespace detail

/// Comma-separated numeric table; rows are observations. Blank lines are skipped.
inline DataMatrix read_csv(std::istream& in, bool has_header) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool header_pending = has_header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (detail::trim(line).empty()) continue;
        if (header_pending) {
            header_pending = false;
            continue;
        }
        const auto cells = detail::split_commas(line);
        if (width == 0) width = cells.size();
        if (cells.size() != width) {
            throw CsvError("read_csv: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                           " fields, expected " + std::to_string(width));
        }
        std::vector<double> row(width);
        for (std::size_t j = 0; j < width; ++j) {
            const auto v = detail::parse_double(cells[j]);
            if (!v || !std::isfinite(*v)) {
                throw CsvError("read_csv: non-numeric cell \"" + std::string(cells[j]) + "\" at line " +
                               std::to_string(line_no) + ", column " + std::to_string(j + 1));
            }
            row[j] = *v;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw CsvError("read_csv: no data rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < width; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    return DataMatrix(std::move(m));
}

inline DataMatrix read_csv(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw CsvError("read_csv: cannot open " + path);
    return read_csv(in, has_header);
}

inline void write_csv(std::ostream& out, const DataMatrix& x, const std::vector<std::string>& header = {}) {
    std::ostringstream buf;
    buf.precision(17);
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) buf << (j ? "," : "") << header[j];
        buf << '\n';
    }
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) buf << (j ? "," : "") << x.values()(i, j);
        buf << '\n';
    }
    out << buf.str();
}

// ── Bootstrap ────────────────────────────────────────────────────────────

enum class Tail { Lower, Upper, TwoSided };

inline const char* to_string(Tail t) {
    switch (t) {
        case Tail::Lower: return "lower";
        case Tail::Upper: return "upper";
        case Tail::TwoSided: return "two-sided";
    }
    return "unknown";
}

struct BootstrapConfig {
    std::size_t reps = 1000;
    double fraction = 0.95;
    std::uint64_t seed = 0;
    Tail tail = Tail::Upper;
    StatisticSpec statistic;
    std::optional<Vector> mu0;
    bool center = true;    // resample from data centred at its mean (null bootstrap)
    bool add_one = false;  // (count + 1) / (B + 1)
};

struct BootstrapResult {
    double observed = 0.0;
    std::vector<double> samples;
    double p_value = 1.0;
    std::size_t redraws = 0;
    std::vector<std::pair<double, double>> quantiles;  // (level, value)
};

/// #{s < obs}/B (lower), #{s > obs}/B (upper), or 2 min(lower, upper) capped at 1.
inline double empirical_p_value(double observed, const std::vector<double>& samples, Tail tail,
                                bool add_one = false) {
    if (samples.empty()) throw std::invalid_argument("empirical_p_value: empty sample");
    const auto below = static_cast<double>(std::count_if(samples.begin(), samples.end(),
                                                         [&](double s) { return s < observed; }));
    const auto above = static_cast<double>(std::count_if(samples.begin(), samples.end(),
                                                         [&](double s) { return s > observed; }));
    const double b = static_cast<double>(samples.size());
    auto ratio = [&](double count) { return add_one ? (count + 1.0) / (b + 1.0) : count / b; };
    switch (tail) {
        case Tail::Lower: return ratio(below);
        case Tail::Upper: return ratio(above);
        case Tail::TwoSided: return std::min(1.0, 2.0 * std::min(ratio(below), ratio(above)));
    }
    return 1.0;
}

inline std::size_t resample_size(Index n, double fraction) {
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

struct BootstrapDistribution {
    std::vector<double> samples;
    std::size_t redraws = 0;
};

/// B statistics on resamples of ceil(fraction * n) rows drawn with replacement.
/// Resample b uses stream derive_seed(seed, b, attempt); a resample on which the
/// statistic cannot be computed is redrawn with the next attempt index.
inline BootstrapDistribution bootstrap_distribution(const DataMatrix& x, const BootstrapConfig& cfg) {
    if (cfg.reps < 1) throw std::invalid_argument("bootstrap_distribution: need B >= 1");
    if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0)) {
        throw std::invalid_argument("bootstrap_distribution: fraction must be in (0, 1]");
    }
    const DataMatrix shifted = cfg.mu0 ? shift_rows(x, *cfg.mu0) : x;
    const std::size_t m = resample_size(shifted.rows(), cfg.fraction);
    if (m < 2) throw std::invalid_argument("bootstrap_distribution: resample size below 2");

    Matrix base = shifted.values();
    if (cfg.center) base.rowwise() -= base.colwise().mean();

    constexpr std::size_t kMaxAttempts = 100;
    BootstrapDistribution out;
    out.samples.resize(cfg.reps);
    std::vector<std::size_t> attempts(cfg.reps, 0);
    parallel_for(cfg.reps, [&](std::size_t b) {
        for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
            Rng rng(derive_seed(cfg.seed, b, attempt));
            std::uniform_int_distribution<Index> pick(0, base.rows() - 1);
            Matrix sub(static_cast<Index>(m), base.cols());
            for (Index i = 0; i < static_cast<Index>(m); ++i) sub.row(i) = base.row(pick(rng));
            try {
                out.samples[b] = compute_statistic(DataMatrix(std::move(sub)), cfg.statistic);
                attempts[b] = attempt;
                return;
            } catch (const ComputationError&) {
            }
        }
        throw ComputationError("bootstrap_distribution: resample " + std::to_string(b) +
                               " degenerate after repeated redraws");
    });
    for (std::size_t a : attempts) out.redraws += a;
    return out;
}

inline double empirical_quantile(std::vector<double> sorted_or_not, double level) {
    std::sort(sorted_or_not.begin(), sorted_or_not.end());
    const double pos = level * static_cast<double>(sorted_or_not.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted_or_not.size() - 1);
    return sorted_or_not[lo] + (pos - static_cast<double>(lo)) * (sorted_or_not[hi] - sorted_or_not[lo]);
}

inline BootstrapResult run_bootstrap(const DataMatrix& x, const BootstrapConfig& cfg) {
    const DataMatrix shifted = cfg.mu0 ? shift_rows(x, *cfg.mu0) : x;
    BootstrapResult res;
    res.observed = compute_statistic(shifted, cfg.statistic);
    BootstrapConfig inner = cfg;
    inner.mu0.reset();
    BootstrapDistribution dist = bootstrap_distribution(shifted, inner);
    res.samples = std::move(dist.samples);
    res.redraws = dist.redraws;
    res.p_value = empirical_p_value(res.observed, res.samples, cfg.tail, cfg.add_one);
    for (double level : {0.005, 0.025, 0.05, 0.5, 0.95, 0.975, 0.995}) {
        res.quantiles.emplace_back(level, empirical_quantile(res.samples, level));
    }
    return res;
}

// ── Synthetic fixtures ───────────────────────────────────────────────────

struct FixtureConfig {
    Index days = 120;
    Index stations = 30;
    double rho = 0.6;         // AR(1) correlation between neighbouring stations
    double noise_cv = 0.08;   // daily noise as a fraction of station baseline
    double shift = 0.0;       // relative mean increase applied to the second half of the days
    std::uint64_t seed = 0;
};

/// Metro-like ridership table: lognormal station baselines times (1 + correlated noise).
inline DataMatrix metro_fixture(const FixtureConfig& cfg) {
    if (cfg.days < 2 || cfg.stations < 1) throw std::invalid_argument("metro_fixture: need days >= 2, stations >= 1");
    Rng rng(derive_seed(cfg.seed, 0));
    std::lognormal_distribution<double> base_dist(std::log(20000.0), 0.8);
    Vector baseline(cfg.stations);
    for (Index j = 0; j < cfg.stations; ++j) baseline(j) = std::round(base_dist(rng));
    const DataMatrix noise = sample_mvn(Vector::Zero(cfg.stations), ar1_covariance(cfg.rho, cfg.stations),
                                        cfg.days, derive_seed(cfg.seed, 1));
    Matrix out(cfg.days, cfg.stations);
    for (Index i = 0; i < cfg.days; ++i) {
        const double lift = i >= cfg.days / 2 ? 1.0 + cfg.shift : 1.0;
        for (Index j = 0; j < cfg.stations; ++j) {
            out(i, j) = std::round(baseline(j) * lift * (1.0 + cfg.noise_cv * noise.values()(i, j)));
        }
    }
    return DataMatrix(std::move(out));
}

}  // namespace decomposite
