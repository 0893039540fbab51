#pragma once

// Command-line front end. run_cli returns the process exit status:
// 0 success, 1 computation or data error, 2 usage error.

#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "decomposite/bootstrap.hpp"
#include "decomposite/core_linalg.hpp"
#include "decomposite/mean_tests.hpp"
#include "decomposite/power_analysis.hpp"
#include "decomposite/rmt_spectrum.hpp"
#include "decomposite/shrinkage.hpp"

namespace decomposite {

namespace cli_detail {

using nlohmann::json;

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::string format_number(double v) {
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

inline StatisticSpec make_spec(const std::string& method, std::optional<double> ridge, Index k) {
    const auto kind = parse_statistic_kind(method);
    if (!kind) throw UsageError("unknown method: " + method);
    if (*kind == StatisticKind::Ridge && !ridge) throw UsageError("method ridge requires --ridge");
    if (ridge && !(*ridge > 0.0)) throw UsageError("--ridge must be positive");
    StatisticSpec spec;
    spec.kind = *kind;
    spec.ridge = ridge;
    spec.blocks = k;
    return spec;
}

inline Vector read_vector(const std::string& path) {
    const DataMatrix m = read_csv(path, false);
    const Matrix& v = m.values();
    if (v.rows() != 1 && v.cols() != 1) throw CsvError("read_vector: " + path + " must hold a single row or column");
    return Eigen::Map<const Vector>(v.data(), v.size());
}

inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed, bool nondeterministic) {
    if (seed) return *seed;
    if (!nondeterministic) throw UsageError("--seed is required (or pass --nondeterministic)");
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

inline const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names = {"hotelling", "decomposite", "stein", "bs",
                                                   "diag",      "ridge",       "composite"};
    return names;
}

struct TestArgs {
    std::string input;
    bool header = false;
    std::string method = "decomposite";
    std::optional<double> ridge;
    Index k = 2;
    std::string mu0;
    double alpha = 0.05;
    std::string out = "json";
};

struct BootstrapArgs {
    std::string input;
    bool header = false;
    std::string method = "decomposite";
    std::optional<double> ridge;
    Index k = 2;
    std::string mu0;
    std::size_t reps = 1000;
    double frac = 0.95;
    std::string tail = "upper";
    std::optional<std::uint64_t> seed;
    bool nondeterministic = false;
    bool no_center = false;
    bool add_one = false;
    std::string out = "json";
};

struct PowerArgs {
    Index p = 20;
    Index n = 60;
    std::vector<double> rho = {0.5};
    double alpha = 0.05;
    std::size_t reps = 1000;
    std::size_t null_reps = 0;
    Index k = 2;
    std::vector<std::string> methods = {"decomposite", "composite"};
    std::optional<std::uint64_t> seed;
    bool nondeterministic = false;
    std::uint64_t delta_seed = kDefaultDeltaSeed;
    double delta_scale = 1.0;
    std::size_t oracle_reps = 0;
    std::string out = "csv";
};

struct SpectrumArgs {
    std::string input;
    bool header = false;
    std::optional<double> bandwidth;
};

struct MpArgs {
    double c = 1.0 / 3.0;
    std::size_t points = 50;
    std::optional<double> from;
    std::optional<double> to;
};

struct FixtureArgs {
    Index days = 120;
    Index stations = 30;
    double rho = 0.6;
    double noise = 0.08;
    double shift = 0.0;
    std::uint64_t seed = 0;
    std::string output;
    bool header = false;
};

inline DataMatrix load_input(const std::string& path, bool header, const std::string& mu0) {
    DataMatrix x = read_csv(path, header);
    if (!mu0.empty()) x = shift_rows(x, read_vector(mu0));
    return x;
}

inline int run_test(const TestArgs& a, std::ostream& out) {
    if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw UsageError("--alpha must be in (0, 1)");
    const StatisticSpec spec = make_spec(a.method, a.ridge, a.k);
    const DataMatrix x = load_input(a.input, a.header, a.mu0);
    const TestOutcome res = compute_outcome(x, spec);
    json warnings = res.notes;
    if (!res.p_value) warnings.push_back("no asymptotic p-value for this method; use the bootstrap subcommand");
    if (a.out == "csv") {
        out << "method,statistic,normalized,p_value\n"
            << res.method << ',' << format_number(res.statistic) << ',' << format_optional(res.normalized) << ','
            << format_optional(res.p_value) << '\n';
        return 0;
    }
    json report = {
        {"method", res.method},
        {"statistic", res.statistic},
        {"normalized", optional_json(res.normalized)},
        {"p_value", optional_json(res.p_value)},
        {"config",
         {{"input", a.input},
          {"n", x.rows()},
          {"p", x.cols()},
          {"alpha", a.alpha},
          {"ridge", optional_json(a.ridge)},
          {"k", a.k},
          {"mu0", a.mu0.empty() ? json(nullptr) : json(a.mu0)}}},
        {"warnings", warnings},
    };
    if (res.p_value) report["reject"] = *res.p_value < a.alpha;
    if (res.df1) report["df"] = {*res.df1, *res.df2};
    if (!res.block_sizes.empty()) report["block_sizes"] = res.block_sizes;
    out << report.dump(2) << '\n';
    return 0;
}

inline Tail parse_tail(const std::string& s) {
    if (s == "lower") return Tail::Lower;
    if (s == "upper") return Tail::Upper;
    return Tail::TwoSided;
}

inline int run_bootstrap_cmd(const BootstrapArgs& a, std::ostream& out) {
    BootstrapConfig cfg;
    cfg.reps = a.reps;
    cfg.fraction = a.frac;
    cfg.seed = resolve_seed(a.seed, a.nondeterministic);
    cfg.tail = parse_tail(a.tail);
    cfg.statistic = make_spec(a.method, a.ridge, a.k);
    cfg.center = !a.no_center;
    cfg.add_one = a.add_one;
    const DataMatrix x = load_input(a.input, a.header, a.mu0);
    const BootstrapResult res = run_bootstrap(x, cfg);

    json warnings = json::array();
    if (res.redraws > 0) warnings.push_back(std::to_string(res.redraws) + " degenerate resamples redrawn");
    if (!cfg.center) warnings.push_back("uncentered resamples: distribution tracks the alternative, not the null");
    if (a.out == "csv") {
        out << "method,statistic,p_value,reps,redraws\n"
            << a.method << ',' << format_number(res.observed) << ',' << format_number(res.p_value) << ','
            << cfg.reps << ',' << res.redraws << '\n';
        return 0;
    }
    json quantiles = json::object();
    for (const auto& [level, value] : res.quantiles) quantiles[format_number(level)] = value;
    json report = {
        {"method", a.method},
        {"statistic", res.observed},
        {"normalized", nullptr},
        {"p_value", res.p_value},
        {"config",
         {{"input", a.input},
          {"n", x.rows()},
          {"p", x.cols()},
          {"reps", cfg.reps},
          {"frac", cfg.fraction},
          {"resample_size", resample_size(x.rows(), cfg.fraction)},
          {"tail", to_string(cfg.tail)},
          {"seed", cfg.seed},
          {"center", cfg.center},
          {"add_one", cfg.add_one},
          {"ridge", optional_json(a.ridge)},
          {"k", a.k},
          {"mu0", a.mu0.empty() ? json(nullptr) : json(a.mu0)}}},
        {"warnings", warnings},
        {"redraws", res.redraws},
        {"quantiles", quantiles},
    };
    out << report.dump(2) << '\n';
    return 0;
}

inline int run_power(const PowerArgs& a, std::ostream& out) {
    std::vector<StatisticSpec> specs;
    for (const std::string& m : a.methods) specs.push_back(make_spec(m, std::nullopt, a.k));
    const std::uint64_t seed = resolve_seed(a.seed, a.nondeterministic);

    json rows = json::array();
    std::ostringstream csv;
    csv << "method,rho,p,n,rejection_rate,std_err,are_vs_composite\n";
    json analytic = json::array();
    for (double rho : a.rho) {
        PowerConfig cfg;
        cfg.p = a.p;
        cfg.n = a.n;
        cfg.rho = rho;
        cfg.alpha = a.alpha;
        cfg.reps = a.reps;
        cfg.null_reps = a.null_reps;
        cfg.k = a.k;
        cfg.seed = seed;
        cfg.methods = specs;
        cfg.delta_seed = a.delta_seed;
        cfg.delta_scale = a.delta_scale;
        cfg.oracle_reps = a.oracle_reps;
        const PowerEstimate est = mc_power(cfg);
        for (const MethodPower& mp : est.methods) {
            rows.push_back({{"method", mp.method},
                            {"rho", rho},
                            {"p", a.p},
                            {"n", a.n},
                            {"rejection_rate", mp.rejection_rate},
                            {"std_err", mp.std_err},
                            {"are_vs_composite", optional_json(mp.are_vs_composite)}});
            csv << mp.method << ',' << format_number(rho) << ',' << a.p << ',' << a.n << ','
                << format_number(mp.rejection_rate) << ',' << format_number(mp.std_err) << ','
                << format_optional(mp.are_vs_composite) << '\n';
        }
        if (est.analytic_are) analytic.push_back({{"rho", rho}, {"are", *est.analytic_are}});
    }
    if (a.out == "csv") {
        out << csv.str();
        return 0;
    }
    json report = {
        {"method", "simulate-power"},
        {"statistic", nullptr},
        {"normalized", nullptr},
        {"p_value", nullptr},
        {"config",
         {{"p", a.p},
          {"n", a.n},
          {"alpha", a.alpha},
          {"reps", a.reps},
          {"null_reps", a.null_reps != 0 ? a.null_reps : a.reps},
          {"k", a.k},
          {"seed", seed},
          {"delta_seed", a.delta_seed},
          {"delta_scale", a.delta_scale},
          {"oracle_reps", a.oracle_reps}}},
        {"warnings", json::array()},
        {"results", rows},
        {"analytic_are", analytic},
    };
    out << report.dump(2) << '\n';
    return 0;
}

inline int run_spectrum(const SpectrumArgs& a, std::ostream& out) {
    const DataMatrix x = read_csv(a.input, a.header);
    const Index n = x.rows();
    if (x.cols() >= n) throw ComputationError("spectrum: need p < n for the shrinkage spectra");
    const SpectralDecomposition dec = spectral_decompose(sample_moments(x).cov);
    std::vector<std::string> warnings;
    const std::vector<double> lambda = detail::separate_ties(dec.eigenvalues, warnings);
    if (lambda.front() <= 0.0) throw ComputationError("spectrum: sample covariance is singular");
    const ShrinkageSpectrum stein = stein_isotonized(lambda, static_cast<long>(n));
    const KernelConfig cfg = a.bandwidth ? KernelConfig{*a.bandwidth} : KernelConfig::for_sample_size(n);
    if (!(cfg.bandwidth > 0.0)) throw UsageError("--bandwidth must be positive");
    const ShrinkageSpectrum lw = lw_shrink(lambda, static_cast<long>(n), cfg);
    out << "lambda,stein,lw\n";
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        out << format_number(lambda[i]) << ',' << format_number(stein.values[i]) << ','
            << format_number(lw.values[i]) << '\n';
    }
    return 0;
}

inline int run_mp(const MpArgs& a, std::ostream& out) {
    if (!(a.c > 0.0 && a.c < 1.0)) throw UsageError("--c must be in (0, 1)");
    if (a.points < 1) throw UsageError("--points must be >= 1");
    const MPModel model = mp_edges(a.c);
    const double lo = a.from.value_or(model.lower);
    const double hi = a.to.value_or(model.upper);
    if (!(lo > 0.0 && hi > lo)) throw UsageError("need 0 < --from < --to");
    // Without an explicit range the grid stays strictly inside the support.
    const bool interior = !a.from && !a.to;
    out << "x,re,im,density\n";
    for (std::size_t k = 0; k < a.points; ++k) {
        const double t = interior ? (static_cast<double>(k) + 1.0) / (static_cast<double>(a.points) + 1.0)
                                  : (a.points == 1 ? 0.0 : static_cast<double>(k) / (a.points - 1.0));
        const double x = lo + (hi - lo) * t;
        const bool inside = x >= model.lower && x <= model.upper;
        const Complex m = inside ? mp_stieltjes(x, model) : Complex(mp_hilbert(x, model), 0.0);
        out << format_number(x) << ',' << format_number(m.real()) << ',' << format_number(m.imag()) << ','
            << format_number(mp_density(x, model)) << '\n';
    }
    return 0;
}

inline int run_fixture(const FixtureArgs& a, std::ostream& out) {
    FixtureConfig cfg;
    cfg.days = a.days;
    cfg.stations = a.stations;
    cfg.rho = a.rho;
    cfg.noise_cv = a.noise;
    cfg.shift = a.shift;
    cfg.seed = a.seed;
    const DataMatrix x = metro_fixture(cfg);
    std::vector<std::string> header;
    if (a.header) {
        for (Index j = 0; j < x.cols(); ++j) header.push_back("station_" + std::to_string(j + 1));
    }
    if (a.output.empty()) {
        write_csv(out, x, header);
    } else {
        std::ofstream file(a.output);
        if (!file) throw CsvError("fixtures gen: cannot write " + a.output);
        write_csv(file, x, header);
    }
    return 0;
}

}  // namespace cli_detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using namespace cli_detail;
    CLI::App app{"High-dimensional one-sample mean tests with nonlinear shrinkage", "decomposite"};
    app.require_subcommand(1);

    TestArgs test_args;
    auto* test = app.add_subcommand("test", "Test H0: mu = mu0 on a CSV sample");
    test->add_option("--input", test_args.input, "CSV file, rows are observations")->required();
    test->add_flag("--header", test_args.header, "Skip the first row");
    test->add_option("--method", test_args.method)->check(CLI::IsMember(method_names()));
    test->add_option("--ridge", test_args.ridge, "Ridge parameter for --method ridge");
    test->add_option("--k", test_args.k, "Number of blocks for --method composite")->check(CLI::PositiveNumber);
    test->add_option("--mu0", test_args.mu0, "CSV file holding the hypothesised mean");
    test->add_option("--alpha", test_args.alpha);
    test->add_option("--out", test_args.out)->check(CLI::IsMember({"json", "csv"}));

    BootstrapArgs boot_args;
    auto* boot = app.add_subcommand("bootstrap", "Resampling p-value for any statistic");
    boot->add_option("--input", boot_args.input)->required();
    boot->add_flag("--header", boot_args.header);
    boot->add_option("--method", boot_args.method)->check(CLI::IsMember(method_names()));
    boot->add_option("--ridge", boot_args.ridge);
    boot->add_option("--k", boot_args.k)->check(CLI::PositiveNumber);
    boot->add_option("--mu0", boot_args.mu0);
    boot->add_option("--reps", boot_args.reps)->check(CLI::PositiveNumber);
    boot->add_option("--frac", boot_args.frac)->check(CLI::Range(0.0, 1.0));
    boot->add_option("--tail", boot_args.tail)->check(CLI::IsMember({"lower", "upper", "two-sided"}));
    boot->add_option("--seed", boot_args.seed);
    boot->add_flag("--nondeterministic", boot_args.nondeterministic);
    boot->add_flag("--no-center", boot_args.no_center, "Resample the raw rows");
    boot->add_flag("--add-one", boot_args.add_one, "Report (count + 1) / (B + 1)");
    boot->add_option("--out", boot_args.out)->check(CLI::IsMember({"json", "csv"}));

    PowerArgs power_args;
    auto* power = app.add_subcommand("simulate-power", "Monte-Carlo power under AR(1) covariance");
    power->add_option("--p", power_args.p)->check(CLI::PositiveNumber);
    power->add_option("--n", power_args.n)->check(CLI::PositiveNumber);
    power->add_option("--rho", power_args.rho)->delimiter(',')->check(CLI::Range(-0.999, 0.999));
    power->add_option("--alpha", power_args.alpha)->check(CLI::Range(1e-6, 0.999));
    power->add_option("--reps", power_args.reps)->check(CLI::PositiveNumber);
    power->add_option("--null-reps", power_args.null_reps, "Null replicates for critical values (default --reps)");
    power->add_option("--k", power_args.k)->check(CLI::PositiveNumber);
    power->add_option("--methods", power_args.methods)->delimiter(',')->check(CLI::IsMember(method_names()));
    power->add_option("--seed", power_args.seed);
    power->add_flag("--nondeterministic", power_args.nondeterministic);
    power->add_option("--delta-seed", power_args.delta_seed);
    power->add_option("--delta-scale", power_args.delta_scale);
    power->add_option("--oracle-reps", power_args.oracle_reps, "Replicates for the analytic ARE (0 = skip)");
    power->add_option("--out", power_args.out)->check(CLI::IsMember({"json", "csv"}));

    SpectrumArgs spectrum_args;
    auto* spectrum = app.add_subcommand("spectrum", "Sample, Stein and LW eigenvalues as CSV");
    spectrum->add_option("--input", spectrum_args.input)->required();
    spectrum->add_flag("--header", spectrum_args.header);
    spectrum->add_option("--bandwidth", spectrum_args.bandwidth, "Kernel bandwidth (default n^-1/3)");

    MpArgs mp_args;
    auto* mp = app.add_subcommand("mp", "Marchenko-Pastur transform and density on a grid");
    mp->add_option("--c", mp_args.c, "Concentration p/n in (0, 1)");
    mp->add_option("--points", mp_args.points);
    mp->add_option("--from", mp_args.from);
    mp->add_option("--to", mp_args.to);

    FixtureArgs fixture_args;
    auto* fixtures = app.add_subcommand("fixtures", "Synthetic data");
    fixtures->require_subcommand(1);
    auto* gen = fixtures->add_subcommand("gen", "Metro-like ridership CSV (days x stations)");
    gen->add_option("--days", fixture_args.days)->check(CLI::PositiveNumber);
    gen->add_option("--stations", fixture_args.stations)->check(CLI::PositiveNumber);
    gen->add_option("--rho", fixture_args.rho)->check(CLI::Range(-0.999, 0.999));
    gen->add_option("--noise", fixture_args.noise);
    gen->add_option("--shift", fixture_args.shift, "Relative mean lift in the second half");
    gen->add_option("--seed", fixture_args.seed);
    gen->add_option("--output", fixture_args.output, "Write here instead of stdout");
    gen->add_flag("--header", fixture_args.header);

    std::vector<std::string> argv_storage = {"decomposite"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (std::string& s : argv_storage) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (test->parsed()) return run_test(test_args, out);
        if (boot->parsed()) return run_bootstrap_cmd(boot_args, out);
        if (power->parsed()) return run_power(power_args, out);
        if (spectrum->parsed()) return run_spectrum(spectrum_args, out);
        if (mp->parsed()) return run_mp(mp_args, out);
        if (gen->parsed()) return run_fixture(fixture_args, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << app.help();
    return 2;
}

}  // namespace decomposite
