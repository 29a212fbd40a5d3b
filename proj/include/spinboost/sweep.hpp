#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "random.hpp"
#include "scenario.hpp"

// Parameter sweeps over (state, xi, x, sigma). Rows run in parallel, each with
// its own seed derived from the global seed and the row index, and are
// emitted in grid order.

namespace spinboost {

struct SweepRow
{
    double sigma{0};
    double x{0};
    double xi{0};
    std::string state;
    double var_p{std::numeric_limits<double>::quiet_NaN()};
    //! JSON only: the variance under the Gaussian factor alone
    double var_p_gaussian{std::numeric_limits<double>::quiet_NaN()};
    double deficit{std::numeric_limits<double>::quiet_NaN()};
    double deficit_stderr{std::numeric_limits<double>::quiet_NaN()};
    double predicted_lo{std::numeric_limits<double>::quiet_NaN()};
    double bound{std::numeric_limits<double>::quiet_NaN()};
    double nz_prime{std::numeric_limits<double>::quiet_NaN()};
    //! ok | fd-unconverged | accuracy | consistency | invalid
    std::string status{"ok"};
};

inline constexpr char const* kCsvVersion = "# spinboost sweep csv v1";
inline constexpr char const* kCsvHeader =
    "sigma,x,xi,state,var_p,deficit,deficit_stderr,predicted_lo,bound,nz_prime,status";

/// Exit status for a set of rows: 0 if all ok, 2 if any row had invalid
/// input, 3 otherwise.
inline int sweep_exit_code(std::vector<SweepRow> const& rows)
{
    int code = exit_ok;
    for (auto const& r : rows)
    {
        if (r.status == "invalid")
            return exit_invalid_input;
        if (r.status != "ok")
            code = exit_accuracy_failure;
    }
    return code;
}

/// Fill a row from a completed evaluation.
inline void fill_row(SweepRow& row, Evaluation const& ev)
{
    row.var_p = ev.var_p;
    row.var_p_gaussian = ev.var_p_gaussian;
    row.deficit = 1.0 - ev.state.purity;
    row.deficit_stderr = ev.state.error_estimate;
    row.nz_prime = ev.nz_prime;
    if (ev.expansion)
    {
        row.predicted_lo = ev.expansion->predicted_lo;
        row.bound = ev.expansion->bound;
        if (!ev.expansion->converged)
            row.status = "fd-unconverged";
    }
}

/// A run expressed as a single sweep row.
inline SweepRow row_for_run(Scenario const& sc, Evaluation const& ev)
{
    SweepRow row;
    row.sigma = sc.packet.width;
    row.x = sc.packet.correlation;
    row.xi = sc.rapidity.norm();
    row.state = sc.state_label;
    fill_row(row, ev);
    return row;
}

namespace detail {

inline SweepRow sweep_row(Scenario const& base, SweepGrid const& g, std::size_t index)
{
    std::size_t rem = index;
    std::size_t const is = rem % g.sigma.size();
    rem /= g.sigma.size();
    std::size_t const ix = rem % g.x.size();
    rem /= g.x.size();
    std::size_t const ixi = rem % g.xi.size();
    rem /= g.xi.size();

    SweepRow row;
    row.sigma = g.sigma[is];
    row.x = g.x[ix];
    row.xi = g.xi[ixi];
    row.state = g.states[rem];
    try
    {
        PacketConfig cfg = base.packet;
        cfg.width = row.sigma;
        cfg.correlation = row.x;
        SpinState const rho = row.state == base.state_label ? base.state : named_state(row.state, base.particles);
        WavePacket const packet = build_packet(cfg, base.particles);
        auto const lambda = boost_from_rapidity(g.axis * row.xi);
        IntegratorSpec spec = base.integrator;
        spec.seed = derive_seed(base.seed, index);
        spec.threads = 1;
        try
        {
            fill_row(row, evaluate(base.particles, rho, packet, lambda, spec));
        }
        catch (AccuracyError const& e)
        {
            row.deficit = 1.0 - e.estimate();
            row.deficit_stderr = e.error();
            row.status = "accuracy";
        }
    }
    catch (InvalidArgument const&)
    {
        row.status = "invalid";
    }
    catch (ConsistencyError const&)
    {
        row.status = "consistency";
    }
    return row;
}

} // namespace detail

/*!
 * Evaluate every grid point of the scenario's sweep. Row order: states, then
 * xi, then x, with sigma varying fastest. Output does not depend on `threads`.
 */
inline std::vector<SweepRow> run_sweep(Scenario const& sc, unsigned threads)
{
    if (!sc.sweep)
        throw InvalidArgument("sweep: missing");
    SweepGrid const& g = *sc.sweep;
    std::size_t const n = g.size();
    if (n == 0)
        throw InvalidArgument("sweep: grid is empty");
    std::vector<SweepRow> rows(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++)
            rows[i] = detail::sweep_row(sc, g, i);
    };
    unsigned const t = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), n));
    if (t <= 1)
    {
        worker();
    }
    else
    {
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < t; ++k)
            pool.emplace_back(worker);
    }
    return rows;
}

//---------------------------------------------------------------------------//
// Output
//---------------------------------------------------------------------------//

inline std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v == 0 ? 0.0 : v);
    return buf;
}

inline void write_csv(std::ostream& os, std::vector<SweepRow> const& rows)
{
    os << kCsvVersion << '\n' << kCsvHeader << '\n';
    for (auto const& r : rows)
    {
        os << format_number(r.sigma) << ',' << format_number(r.x) << ',' << format_number(r.xi) << ',' << r.state
           << ',' << format_number(r.var_p) << ',' << format_number(r.deficit) << ','
           << format_number(r.deficit_stderr) << ',' << format_number(r.predicted_lo) << ','
           << format_number(r.bound) << ',' << format_number(r.nz_prime) << ',' << r.status << '\n';
    }
}

inline json sweep_json(std::vector<SweepRow> const& rows)
{
    auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
    json out;
    out["schema"] = "spinboost-sweep/1";
    out["rows"] = json::array();
    for (auto const& r : rows)
        out["rows"].push_back({{"sigma", r.sigma},
                               {"x", r.x},
                               {"xi", r.xi},
                               {"state", r.state},
                               {"var_p", num(r.var_p)},
                               {"var_p_gaussian", num(r.var_p_gaussian)},
                               {"deficit", num(r.deficit)},
                               {"deficit_stderr", num(r.deficit_stderr)},
                               {"predicted_lo", num(r.predicted_lo)},
                               {"bound", num(r.bound)},
                               {"nz_prime", num(r.nz_prime)},
                               {"status", r.status}});
    return out;
}

} // namespace spinboost
