#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "random.hpp"
#include "scenario.hpp"
#include "sweep.hpp"

// Acceptance experiments with pinned parameters. Each check reports pass/fail
// with the numbers it was decided on.

namespace spinboost {

struct VerifyOptions
{
    std::uint64_t seed{20240611};
    unsigned threads{0};
};

struct CriterionResult
{
    int id{0};
    std::string name;
    bool pass{false};
    std::string detail;
    double seconds{0};
    std::optional<double> budget_seconds;
};

namespace detail {

inline std::string fmt(double v, int digits = 6)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

/// Least-squares slope of y on x with intercept.
inline double ls_slope(std::vector<double> const& x, std::vector<double> const& y)
{
    double mx = 0;
    double my = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0;
    double sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

template <class F>
CriterionResult timed(int id, std::string name, std::optional<double> budget, F&& body)
{
    CriterionResult r;
    r.id = id;
    r.name = std::move(name);
    r.budget_seconds = budget;
    auto const t0 = std::chrono::steady_clock::now();
    try
    {
        body(r);
    }
    catch (std::exception const& e)
    {
        r.pass = false;
        r.detail += std::string(r.detail.empty() ? "" : "; ") + "exception: " + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget && r.seconds > *budget)
    {
        r.pass = false;
        r.detail += "; over runtime budget " + fmt(*budget, 3) + " s";
    }
    return r;
}

inline IntegratorSpec mc(std::uint64_t samples, std::uint64_t seed, unsigned threads)
{
    auto s = IntegratorSpec::monte_carlo(samples, seed);
    s.threads = threads;
    return s;
}

inline ParticleSet const& pair_particles()
{
    static ParticleSet const p = ParticleSet::identical(2, 1.0, spin_half);
    return p;
}

inline ParticleSet const& single_particle()
{
    static ParticleSet const p = ParticleSet::identical(1, 1.0, spin_half);
    return p;
}

} // namespace detail

/// 1: single spin-1/2, 1 - purity against w has log-log slope 2.
inline CriterionResult check_peres(VerifyOptions const& opt)
{
    return detail::timed(1, "peres-scaling", 60.0, [&](CriterionResult& r) {
        auto const rho = SpinState::up_z({spin_half});
        auto const lambda = boost_from_rapidity(Vec3(0.5, 0, 0));
        auto spec = IntegratorSpec::gauss_hermite(24);
        spec.threads = opt.threads;
        std::vector<double> lw;
        std::vector<double> ld;
        double transverse = 0;
        double nz_max = -1;
        for (double w : {0.01, 0.02, 0.04, 0.08})
        {
            auto const res = transform_spin_state(rho, lambda, make_single_gaussian(w, Vec3::Zero(), 1.0),
                                                  detail::single_particle(), spec);
            lw.push_back(std::log(w));
            ld.push_back(std::log(1 - res.purity));
            transverse = std::max({transverse, std::abs(res.bloch->x()), std::abs(res.bloch->y())});
            nz_max = std::max(nz_max, res.bloch->z());
        }
        double const slope = detail::ls_slope(lw, ld);
        r.pass = std::abs(slope - 2.0) <= 0.10 && transverse <= 1e-10 && nz_max < 1.0;
        r.detail = "slope=" + detail::fmt(slope) + " max|n'x|,|n'y|=" + detail::fmt(transverse, 3)
                   + " max n'z=" + detail::fmt(nz_max, 10);
    });
}

/// 2: leading-order predictor within 5% of the measured deficit.
inline CriterionResult check_leading_order(VerifyOptions const& opt)
{
    return detail::timed(2, "leading-order", 120.0, [&](CriterionResult& r) {
        auto const rho = SpinState::bell_pair(BellKind::minus);
        auto const lambda = boost_from_rapidity(Vec3(0, 0, 1));
        auto const packet = make_entangled_gaussian(0.025, 0.0, 1.0);
        auto const& ps = detail::pair_particles();
        auto const res = transform_spin_state(rho, lambda, packet, ps, detail::mc(1000000, opt.seed, opt.threads));
        auto const blocks = hessian_blocks(rho, lambda, ps, packet.center(), default_step(ps, packet));
        double const tr = trace_form(blocks.u, packet.plain_covariance());
        double const deficit = 1 - res.purity;
        double const rel = std::abs(tr - deficit) / deficit;
        r.pass = deficit > 0 && rel <= 0.05 && blocks.converged;
        r.detail = "tr(U Sigma)=" + detail::fmt(tr) + " deficit=" + detail::fmt(deficit) + " +- "
                   + detail::fmt(res.error_estimate, 3) + " rel.diff=" + detail::fmt(rel, 3);
    });
}

/// 3: pure rotations leave purity at 1 and act as (U x U) rho (U x U)^+.
inline CriterionResult check_rotation(VerifyOptions const& opt)
{
    return detail::timed(3, "rotation-covariance", std::nullopt, [&](CriterionResult& r) {
        CounterRng const rng(opt.seed, 3);
        auto const packet = make_entangled_gaussian(0.2, 0.3, 1.0);
        auto const& ps = detail::pair_particles();
        double worst_purity = 0;
        double worst_state = 0;
        double worst_d = 0;
        for (std::uint64_t i = 0; i < 5; ++i)
        {
            auto const nrm = rng.normal_pair(2 * i);
            auto const nrm2 = rng.normal_pair(2 * i + 1);
            Vec3 const axis = Vec3(nrm[0], nrm[1], nrm2[0]).normalized();
            double const angle = rng.uniform_pair(100 + i)[0] * std::numbers::pi;
            auto const lambda = LorentzTransform::rotation(axis, angle);
            CMat const u = rotation_rep(spin_half, axis, angle).u;
            CMat const uu = detail::kron(u, u);
            for (auto kind : {BellKind::minus, BellKind::plus})
            {
                auto const rho = SpinState::bell_pair(kind);
                auto const res = transform_spin_state(rho, lambda, packet, ps, detail::mc(1000, opt.seed, opt.threads));
                worst_purity = std::max(worst_purity, std::abs(res.purity - 1));
                worst_state = std::max(
                    worst_state, (res.rho_prime.matrix() - uu * rho.matrix() * uu.adjoint()).cwiseAbs().maxCoeff());
                auto const e = expand(rho, lambda, ps, packet);
                worst_d = std::max(worst_d, e.eigenvalues.cwiseAbs().maxCoeff());
            }
        }
        r.pass = worst_purity <= 1e-10 && worst_state <= 1e-10 && worst_d <= 1e-12;
        r.detail = "max|purity-1|=" + detail::fmt(worst_purity, 3) + " max|rho'-UrhoU+|=" + detail::fmt(worst_state, 3)
                   + " max D=" + detail::fmt(worst_d, 3);
    });
}

struct TheoremCase
{
    double sigma;
    double x;
    double xi;
    Vec3 axis;
    std::string state;
};

/// The 20 pinned localized scenarios; parameters do not depend on the seed.
inline std::vector<TheoremCase> theorem_cases()
{
    CounterRng const rng(0x5eed7e0, 0);
    std::vector<std::string> const states{"bell-minus", "bell-plus", "up-z"};
    std::vector<TheoremCase> out;
    for (std::uint64_t i = 0; i < 20; ++i)
    {
        auto const u = rng.uniform_pair(4 * i);
        auto const v = rng.uniform_pair(4 * i + 1);
        auto const n1 = rng.normal_pair(4 * i + 2);
        auto const n2 = rng.normal_pair(4 * i + 3);
        TheoremCase c;
        c.sigma = 0.05 + 0.45 * u[0];
        c.x = 0.9 * u[1];
        c.xi = 0.2 + 1.8 * v[0];
        c.axis = Vec3(n1[0], n1[1], n2[0]).normalized();
        c.state = states[i % 3];
        out.push_back(c);
    }
    return out;
}

/// 4: every localized scenario is measurably mixed.
inline CriterionResult check_theorem(VerifyOptions const& opt)
{
    return detail::timed(4, "theorem-consequence", 300.0, [&](CriterionResult& r) {
        auto const& ps = detail::pair_particles();
        int failures = 0;
        double worst = -1;
        std::size_t i = 0;
        for (auto const& c : theorem_cases())
        {
            auto const rho = named_state(c.state, ps);
            auto const res = transform_spin_state(rho, boost_from_rapidity(c.axis * c.xi),
                                                  make_entangled_gaussian(c.sigma, c.x, 1.0), ps,
                                                  detail::mc(100000, derive_seed(opt.seed, i++), opt.threads));
            double const upper = res.purity + 3 * res.error_estimate;
            worst = std::max(worst, upper);
            failures += !(upper <= 1 - 1e-6);
        }
        r.pass = failures == 0;
        r.detail = "scenarios=20 failing=" + std::to_string(failures) + " max(purity+3se)=" + detail::fmt(worst, 10);
    });
}

/// The Fig. 1 grid at (xi = 1, x = 0) for both Bell states.
inline Scenario fig1_scenario(std::uint64_t seed, std::uint64_t samples = 200000)
{
    json doc = {
        {"particles", {{"masses", {1.0, 1.0}}, {"spins", {0.5, 0.5}}}},
        {"state", "bell-minus"},
        {"packet", {{"kind", "entangled-gaussian"}, {"sigma", 0.025}, {"x", 0.0}}},
        {"boost", {{"rapidity", {0.0, 0.0, 1.0}}}},
        {"integrator", {{"method", "monte-carlo"}, {"samples", samples}}},
        {"seed", seed},
        {"sweep",
         {{"sigma", {{"from", 0.025}, {"to", 0.5}, {"step", 0.025}}},
          {"x", {0.0}},
          {"xi", {1.0}},
          {"states", {"bell-minus", "bell-plus"}}}},
    };
    return parse_scenario(doc);
}

struct Fig1Analysis
{
    bool monotone{true};
    double r2{0};
    double slope{0};
    bool deviation_grows{true};
    bool rows_ok{true};
};

/// Shape checks on the rows of one state, in increasing sigma.
inline Fig1Analysis analyze_fig1(std::vector<SweepRow> const& rows)
{
    Fig1Analysis a;
    for (auto const& row : rows)
        a.rows_ok = a.rows_ok && row.status == "ok";
    for (std::size_t i = 1; i < rows.size(); ++i)
    {
        double const noise = 3 * std::hypot(rows[i].deficit_stderr, rows[i - 1].deficit_stderr);
        a.monotone = a.monotone && rows[i].deficit > rows[i - 1].deficit - noise;
    }
    // line through the origin over sigma <= 0.1, centered R^2
    double svv = 0;
    double svd = 0;
    double mean = 0;
    std::size_t n = 0;
    for (auto const& row : rows)
        if (row.sigma <= 0.1 + 1e-9)
        {
            svv += row.var_p * row.var_p;
            svd += row.var_p * row.deficit;
            mean += row.deficit;
            ++n;
        }
    mean /= static_cast<double>(n);
    a.slope = svd / svv;
    double ss_res = 0;
    double ss_tot = 0;
    for (auto const& row : rows)
        if (row.sigma <= 0.1 + 1e-9)
        {
            ss_res += std::pow(row.deficit - a.slope * row.var_p, 2);
            ss_tot += std::pow(row.deficit - mean, 2);
        }
    a.r2 = 1 - ss_res / ss_tot;
    double prev = -1;
    double prev_se = 0;
    for (auto const& row : rows)
        if (row.sigma >= 0.2 - 1e-9)
        {
            double const dev = std::abs(row.deficit - a.slope * row.var_p);
            if (prev >= 0)
                a.deviation_grows = a.deviation_grows && dev > prev - 3 * std::hypot(row.deficit_stderr, prev_se);
            prev = dev;
            prev_se = row.deficit_stderr;
        }
    return a;
}

/// 5: qualitative reproduction of the purity-vs-width figure.
inline CriterionResult check_fig1(VerifyOptions const& opt)
{
    return detail::timed(5, "fig1-shape", 600.0, [&](CriterionResult& r) {
        auto const sc = fig1_scenario(opt.seed);
        auto const rows = run_sweep(sc, opt.threads);
        r.pass = rows.size() == 40;
        for (std::string const state : {"bell-minus", "bell-plus"})
        {
            std::vector<SweepRow> part;
            for (auto const& row : rows)
                if (row.state == state)
                    part.push_back(row);
            auto const a = analyze_fig1(part);
            r.pass = r.pass && part.size() == 20 && a.rows_ok && a.monotone && a.r2 >= 0.99 && a.deviation_grows;
            r.detail += (r.detail.empty() ? "" : "; ") + state + ": rows=" + std::to_string(part.size())
                        + " monotone=" + (a.monotone ? "yes" : "no") + " R2=" + detail::fmt(a.r2, 6)
                        + " deviation-grows=" + (a.deviation_grows ? "yes" : "no")
                        + (a.rows_ok ? "" : " (row failures)");
        }
    });
}

struct CrossCase
{
    std::string state;
    double sigma;
    double x;
    Vec3 rapidity;
};

inline std::vector<CrossCase> cross_method_cases()
{
    return {
        {"bell-minus", 0.1, 0.0, Vec3(0, 0, 1.0)},
        {"bell-plus", 0.2, 0.5, Vec3(0.3, 0, 0.8)},
        {"up-z", 0.3, 0.3, Vec3(1.5, 0, 0)},
        {"bell-minus", 0.4, 0.7, Vec3(0, 0.6, 0)},
        {"bell-plus", 0.15, 0.2, Vec3(-0.4, 0.5, 1.2)},
    };
}

/// 6: reduced-state route vs kernel double integral, and Monte Carlo vs quadrature for N = 1.
inline CriterionResult check_cross_method(VerifyOptions const& opt)
{
    return detail::timed(6, "cross-method", std::nullopt, [&](CriterionResult& r) {
        auto const& ps = detail::pair_particles();
        int agree = 0;
        double worst = 0;
        std::uint64_t i = 0;
        for (auto const& c : cross_method_cases())
        {
            auto const rho = named_state(c.state, ps);
            auto const lambda = boost_from_rapidity(c.rapidity);
            auto const packet = make_entangled_gaussian(c.sigma, c.x, 1.0);
            auto const a = transform_spin_state(rho, lambda, packet, ps,
                                                detail::mc(200000, derive_seed(opt.seed, 2 * i), opt.threads));
            auto const b = boosted_purity_double_integral(
                rho, lambda, packet, ps, detail::mc(200000, derive_seed(opt.seed, 2 * i + 1), opt.threads));
            double const z = std::abs(a.purity - b.value) / std::hypot(a.error_estimate, b.error_estimate);
            worst = std::max(worst, z);
            agree += z <= 3;
            ++i;
        }
        int agree1 = 0;
        double worst1 = 0;
        std::vector<std::pair<Vec3, double>> const singles{{Vec3(0.2, 0, 1.1), 0.3}, {Vec3(0.7, 0.4, 0), 0.15}};
        for (auto const& [rap, w] : singles)
        {
            auto const rho = SpinState::up_z({spin_half});
            auto const packet = make_single_gaussian(w, Vec3(0.1, 0, 0), 1.0);
            auto gh_spec = IntegratorSpec::gauss_hermite(24);
            gh_spec.threads = opt.threads;
            auto const gh = transform_spin_state(rho, boost_from_rapidity(rap), packet, detail::single_particle(), gh_spec);
            auto const m = transform_spin_state(rho, boost_from_rapidity(rap), packet, detail::single_particle(),
                                                detail::mc(200000, derive_seed(opt.seed, 100 + i++), opt.threads));
            double const z = std::abs(gh.purity - m.purity) / std::hypot(gh.error_estimate, m.error_estimate);
            worst1 = std::max(worst1, z);
            agree1 += z <= 3;
        }
        r.pass = agree == 5 && agree1 == 2;
        r.detail = "reduced-vs-kernel agree " + std::to_string(agree) + "/5 (max z=" + detail::fmt(worst, 3)
                   + "); mc-vs-gh agree " + std::to_string(agree1) + "/2 (max z=" + detail::fmt(worst1, 3) + ")";
    });
}

/// 7: bound saturation for minimal-uncertainty packets and the measured purity
/// against the bound at sigma = 0.05.
inline CriterionResult check_bound(VerifyOptions const& opt)
{
    return detail::timed(7, "localization-bound", std::nullopt, [&](CriterionResult& r) {
        struct Case
        {
            std::string state;
            bool single;
            double x;
            Vec3 rapidity;
        };
        std::vector<Case> const cases{
            {"up-z", true, 0.0, Vec3(0.5, 0, 0)},     {"up-z", true, 0.0, Vec3(0.3, 0.2, 0.9)},
            {"bell-minus", false, 0.0, Vec3(0, 0, 1)}, {"bell-minus", false, 0.5, Vec3(0, 0, 1)},
            {"bell-minus", false, 0.9, Vec3(0.4, -0.3, 0.8)}, {"bell-plus", false, 0.0, Vec3(0, 0, 1)},
        };
        double worst_gap = 0;
        double worst_excess = -1;
        int excess_fail = 0;
        std::uint64_t i = 0;
        for (auto const& c : cases)
        {
            auto const& ps = c.single ? detail::single_particle() : detail::pair_particles();
            auto const rho = named_state(c.state, ps);
            auto const lambda = boost_from_rapidity(c.rapidity);
            auto const packet = c.single ? make_single_gaussian(0.05, Vec3::Zero(), 1.0)
                                         : make_entangled_gaussian(0.05, c.x, 1.0);
            auto const e = expand(rho, lambda, ps, packet);
            worst_gap = std::max(worst_gap, std::abs(e.bound - (1 - e.predicted_lo)));
            auto spec = c.single ? IntegratorSpec::gauss_hermite(24) : detail::mc(200000, derive_seed(opt.seed, i), opt.threads);
            spec.threads = opt.threads;
            auto const res = transform_spin_state(rho, lambda, packet, ps, spec);
            double const excess = (res.purity - e.bound) / (1 - e.bound);
            worst_excess = std::max(worst_excess, excess);
            excess_fail += !(res.purity <= e.bound + 0.1 * (1 - e.bound));
            ++i;
        }
        r.pass = worst_gap <= 1e-10 && excess_fail == 0;
        r.detail = "max|bound-(1-pred)|=" + detail::fmt(worst_gap, 3) + " max (purity-bound)/(1-bound)="
                   + detail::fmt(worst_excess, 4) + " cases=" + std::to_string(cases.size());
    });
}

//---------------------------------------------------------------------------//
// Suites
//---------------------------------------------------------------------------//

using CriterionCheck = std::function<CriterionResult(VerifyOptions const&)>;

inline std::vector<CriterionCheck> all_checks()
{
    return {check_peres, check_leading_order, check_rotation, check_theorem,
            check_fig1,  check_cross_method,  check_bound};
}

/// Criterion ids for a suite name, or nothing for an unknown suite.
inline std::optional<std::vector<int>> suite_criteria(std::string const& name)
{
    if (name == "peres")
        return std::vector<int>{1};
    if (name == "expansion")
        return std::vector<int>{2, 7};
    if (name == "rotation")
        return std::vector<int>{3};
    if (name == "theorem")
        return std::vector<int>{4};
    if (name == "fig1")
        return std::vector<int>{5};
    if (name == "cross-method")
        return std::vector<int>{6};
    if (name == "all")
        return std::vector<int>{1, 2, 3, 4, 5, 6, 7};
    return std::nullopt;
}

inline std::string format_result(CriterionResult const& r)
{
    return "criterion " + std::to_string(r.id) + " " + r.name + ": " + (r.pass ? "PASS" : "FAIL") + " | "
           + r.detail + " | " + detail::fmt(r.seconds, 3) + " s";
}

inline json results_json(std::vector<CriterionResult> const& results)
{
    json out = json::array();
    for (auto const& r : results)
        out.push_back({{"criterion", r.id},
                       {"name", r.name},
                       {"pass", r.pass},
                       {"detail", r.detail},
                       {"seconds", r.seconds},
                       {"budget_seconds", r.budget_seconds ? json(*r.budget_seconds) : json(nullptr)}});
    return out;
}

/// Run the criteria of a suite, printing one line per criterion as it ends.
inline std::vector<CriterionResult> run_criteria(std::vector<int> const& ids, VerifyOptions const& opt,
                                                 std::ostream* progress)
{
    auto const checks = all_checks();
    std::vector<CriterionResult> out;
    for (int id : ids)
    {
        out.push_back(checks[static_cast<std::size_t>(id - 1)](opt));
        if (progress)
            *progress << format_result(out.back()) << std::endl;
    }
    return out;
}

} // namespace spinboost
