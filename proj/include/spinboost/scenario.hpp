#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "boostmap.hpp"
#include "errors.hpp"
#include "expansion.hpp"
#include "integration.hpp"
#include "kinematics.hpp"
#include "spin.hpp"
#include "wavepackets.hpp"

// Scenario documents: JSON configs describing particles, spin state, packet,
// boost and integrator, plus the per-scenario evaluation shared by the run and
// sweep commands. Schema: docs/config.md.

namespace spinboost {

using nlohmann::json;

enum ExitCode : int
{
    exit_ok = 0,
    exit_verification_failure = 1,
    exit_invalid_input = 2,
    exit_accuracy_failure = 3,
};

struct PacketConfig
{
    PacketKind kind{PacketKind::entangled_gaussian};
    double width{0.1};
    double correlation{0};
    Vec3 mean{Vec3::Zero()};
};

struct OutputConfig
{
    std::string path;    //!< empty: standard output
    std::string format;  //!< empty: the command's default
};

struct SweepGrid
{
    std::vector<double> sigma;
    std::vector<double> x;
    std::vector<double> xi;
    std::vector<std::string> states;
    Vec3 axis{Vec3::UnitZ()};

    std::size_t size() const { return sigma.size() * x.size() * xi.size() * states.size(); }
};

struct Scenario
{
    ParticleSet particles;
    SpinState state;
    std::string state_label;
    PacketConfig packet;
    Vec3 rapidity;
    IntegratorSpec integrator;
    std::uint64_t seed{0};
    unsigned threads{0};
    OutputConfig output;
    std::optional<SweepGrid> sweep;
};

//---------------------------------------------------------------------------//
// Construction helpers
//---------------------------------------------------------------------------//

/// bell-minus, bell-plus or up-z over the given particles.
inline SpinState named_state(std::string const& name, ParticleSet const& particles)
{
    if (name == "up-z")
        return SpinState::up_z(particles.spins());
    if (name == "bell-minus" || name == "bell-plus")
    {
        if (particles.size() != 2 || particles.spins()[0] != spin_half || particles.spins()[1] != spin_half)
            throw InvalidArgument("state: " + name + " needs exactly two spin-1/2 particles");
        return SpinState::bell_pair(name == "bell-minus" ? BellKind::minus : BellKind::plus);
    }
    throw InvalidArgument("state: unknown state name '" + name + "'");
}

inline WavePacket build_packet(PacketConfig const& cfg, ParticleSet const& particles)
{
    if (cfg.kind == PacketKind::single_gaussian)
    {
        if (particles.size() != 1)
            throw InvalidArgument("packet: single-gaussian needs exactly one particle");
        return make_single_gaussian(cfg.width, cfg.mean, particles.mass(0));
    }
    if (particles.size() != 2)
        throw InvalidArgument("packet: entangled-gaussian needs exactly two particles");
    if (particles.mass(0) != particles.mass(1))
        throw InvalidArgument("packet: entangled-gaussian needs equal masses");
    return make_entangled_gaussian(cfg.width, cfg.correlation, particles.mass(0));
}

//---------------------------------------------------------------------------//
// Parsing
//---------------------------------------------------------------------------//

namespace detail {

inline std::string field(std::string const& base, std::string const& key)
{
    return base.empty() ? key : base + "." + key;
}

inline void allow_keys(json const& obj, std::string const& where, std::initializer_list<std::string_view> keys)
{
    if (!obj.is_object())
        throw InvalidArgument(where + ": expected an object");
    for (auto const& item : obj.items())
    {
        bool known = false;
        for (auto k : keys)
            known = known || item.key() == k;
        if (!known)
            throw InvalidArgument(field(where, item.key()) + ": unknown field");
    }
}

inline double number(json const& v, std::string const& where)
{
    if (!v.is_number())
        throw InvalidArgument(where + ": expected a number");
    double const d = v.get<double>();
    if (!std::isfinite(d))
        throw InvalidArgument(where + ": must be finite");
    return d;
}

inline std::uint64_t count(json const& v, std::string const& where)
{
    if (v.is_number_unsigned())
        return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw InvalidArgument(where + ": expected a non-negative integer");
}

inline std::string text(json const& v, std::string const& where)
{
    if (!v.is_string())
        throw InvalidArgument(where + ": expected a string");
    return v.get<std::string>();
}

inline std::vector<double> numbers(json const& v, std::string const& where)
{
    if (!v.is_array())
        throw InvalidArgument(where + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

inline Vec3 vec3(json const& v, std::string const& where)
{
    auto const xs = numbers(v, where);
    if (xs.size() != 3)
        throw InvalidArgument(where + ": expected three components");
    return Vec3(xs[0], xs[1], xs[2]);
}

/// Explicit list, or {"from", "to", "step"} inclusive of both ends.
inline std::vector<double> grid_axis(json const& v, std::string const& where)
{
    if (v.is_array())
    {
        auto out = numbers(v, where);
        if (out.empty())
            throw InvalidArgument(where + ": grid axis is empty");
        return out;
    }
    allow_keys(v, where, {"from", "to", "step"});
    if (!v.contains("from") || !v.contains("to") || !v.contains("step"))
        throw InvalidArgument(where + ": range needs from, to and step");
    double const from = number(v["from"], field(where, "from"));
    double const to = number(v["to"], field(where, "to"));
    double const step = number(v["step"], field(where, "step"));
    if (!(step > 0) || to < from)
        throw InvalidArgument(where + ": range needs step > 0 and to >= from");
    auto const n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
    if (n > 100000)
        throw InvalidArgument(where + ": range has too many points");
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(from + static_cast<double>(i) * step);
    return out;
}

inline ParticleSet parse_particles(json const& v)
{
    allow_keys(v, "particles", {"count", "masses", "spins"});
    std::size_t n = 0;
    std::optional<std::vector<double>> masses;
    std::optional<std::vector<double>> spins;
    if (v.contains("masses"))
        masses = numbers(v["masses"], "particles.masses");
    if (v.contains("spins"))
        spins = numbers(v["spins"], "particles.spins");
    if (v.contains("count"))
        n = count(v["count"], "particles.count");
    else if (masses)
        n = masses->size();
    else if (spins)
        n = spins->size();
    if (n == 0)
        throw InvalidArgument("particles: need at least one particle");
    if (!masses)
        masses = std::vector<double>(n, 1.0);
    if (!spins)
        spins = std::vector<double>(n, 0.5);
    if (masses->size() != n)
        throw InvalidArgument("particles.masses: length differs from particle count");
    if (spins->size() != n)
        throw InvalidArgument("particles.spins: length differs from particle count");
    std::vector<Spin> ss;
    for (std::size_t k = 0; k < n; ++k)
    {
        if (!((*masses)[k] > 0))
            throw InvalidArgument("particles.masses[" + std::to_string(k) + "]: must be positive");
        try
        {
            ss.push_back(Spin::from_value((*spins)[k]));
        }
        catch (InvalidArgument const& e)
        {
            throw InvalidArgument("particles.spins[" + std::to_string(k) + "]: " + e.what());
        }
    }
    return ParticleSet(*masses, ss);
}

inline cplx complex_entry(json const& v, std::string const& where)
{
    if (v.is_number())
        return {number(v, where), 0.0};
    if (v.is_array() && v.size() == 2)
        return {number(v[0], where + "[0]"), number(v[1], where + "[1]")};
    throw InvalidArgument(where + ": expected a number or a [re, im] pair");
}

inline std::pair<SpinState, std::string> parse_state(json const& v, ParticleSet const& particles)
{
    if (v.is_string())
    {
        auto const name = v.get<std::string>();
        return {named_state(name, particles), name};
    }
    allow_keys(v, "state", {"matrix"});
    if (!v.contains("matrix") || !v["matrix"].is_array())
        throw InvalidArgument("state.matrix: expected an array of rows");
    json const& rows = v["matrix"];
    auto const d = static_cast<Eigen::Index>(rows.size());
    if (d != particles.spin_dim())
        throw InvalidArgument("state.matrix: dimension " + std::to_string(d) + " does not match the particle spins ("
                              + std::to_string(particles.spin_dim()) + ")");
    CMat m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
    {
        std::string const row = "state.matrix[" + std::to_string(i) + "]";
        if (!rows[i].is_array() || static_cast<Eigen::Index>(rows[i].size()) != d)
            throw InvalidArgument(row + ": expected " + std::to_string(d) + " entries");
        for (Eigen::Index j = 0; j < d; ++j)
            m(i, j) = complex_entry(rows[i][j], row + "[" + std::to_string(j) + "]");
    }
    try
    {
        return {SpinState(m, particles.spins()), "custom"};
    }
    catch (InvalidArgument const& e)
    {
        throw InvalidArgument(std::string("state.matrix: ") + e.what());
    }
}

inline PacketConfig parse_packet(json const& v)
{
    allow_keys(v, "packet", {"kind", "w", "mean", "sigma", "x"});
    if (!v.contains("kind"))
        throw InvalidArgument("packet.kind: missing");
    auto const kind = text(v["kind"], "packet.kind");
    PacketConfig cfg;
    if (kind == "single-gaussian")
    {
        cfg.kind = PacketKind::single_gaussian;
        if (v.contains("sigma") || v.contains("x"))
            throw InvalidArgument("packet: single-gaussian takes w and mean");
        if (!v.contains("w"))
            throw InvalidArgument("packet.w: missing");
        cfg.width = number(v["w"], "packet.w");
        if (v.contains("mean"))
            cfg.mean = vec3(v["mean"], "packet.mean");
    }
    else if (kind == "entangled-gaussian")
    {
        cfg.kind = PacketKind::entangled_gaussian;
        if (v.contains("w") || v.contains("mean"))
            throw InvalidArgument("packet: entangled-gaussian takes sigma and x");
        if (!v.contains("sigma"))
            throw InvalidArgument("packet.sigma: missing");
        cfg.width = number(v["sigma"], "packet.sigma");
        if (v.contains("x"))
            cfg.correlation = number(v["x"], "packet.x");
    }
    else
    {
        throw InvalidArgument("packet.kind: unknown kind '" + kind + "'");
    }
    if (!(cfg.width > 0))
        throw InvalidArgument(std::string("packet.") + (kind == "single-gaussian" ? "w" : "sigma") + ": must be positive");
    if (!(cfg.correlation >= 0 && cfg.correlation < 1))
        throw InvalidArgument("packet.x: must lie in [0, 1)");
    return cfg;
}

inline IntegratorSpec parse_integrator(json const& v)
{
    allow_keys(v, "integrator", {"method", "samples", "nodes", "max_error"});
    IntegratorSpec spec;
    auto const method = v.contains("method") ? text(v["method"], "integrator.method") : std::string("monte-carlo");
    if (method == "monte-carlo")
    {
        if (v.contains("nodes"))
            throw InvalidArgument("integrator.nodes: only for gauss-hermite");
        spec.method = IntegrationMethod::monte_carlo;
        if (v.contains("samples"))
            spec.samples = count(v["samples"], "integrator.samples");
        if (spec.samples < 1000)
            throw InvalidArgument("integrator.samples: need at least 1000");
    }
    else if (method == "gauss-hermite")
    {
        if (v.contains("samples"))
            throw InvalidArgument("integrator.samples: only for monte-carlo");
        spec.method = IntegrationMethod::gauss_hermite;
        if (v.contains("nodes"))
            spec.nodes = static_cast<int>(std::min<std::uint64_t>(count(v["nodes"], "integrator.nodes"), 1000));
        if (spec.nodes < 8)
            throw InvalidArgument("integrator.nodes: need at least 8");
    }
    else
    {
        throw InvalidArgument("integrator.method: unknown method '" + method + "'");
    }
    if (v.contains("max_error"))
    {
        spec.max_error = number(v["max_error"], "integrator.max_error");
        if (!(spec.max_error > 0))
            throw InvalidArgument("integrator.max_error: must be positive");
    }
    return spec;
}

inline SweepGrid parse_sweep(json const& v, Scenario const& base)
{
    allow_keys(v, "sweep", {"sigma", "x", "xi", "states", "axis"});
    SweepGrid g;
    if (!v.contains("sigma"))
        throw InvalidArgument("sweep.sigma: missing");
    g.sigma = grid_axis(v["sigma"], "sweep.sigma");
    for (double s : g.sigma)
        if (!(s > 0))
            throw InvalidArgument("sweep.sigma: widths must be positive");
    g.x = v.contains("x") ? grid_axis(v["x"], "sweep.x") : std::vector<double>{base.packet.correlation};
    for (double x : g.x)
        if (!(x >= 0 && x < 1))
            throw InvalidArgument("sweep.x: correlations must lie in [0, 1)");
    if (base.packet.kind == PacketKind::single_gaussian && (g.x.size() != 1 || g.x[0] != 0))
        throw InvalidArgument("sweep.x: single-gaussian packets have no correlation parameter");
    if (v.contains("axis"))
    {
        g.axis = vec3(v["axis"], "sweep.axis");
        if (!(g.axis.norm() > 0))
            throw InvalidArgument("sweep.axis: must be nonzero");
        g.axis.normalize();
    }
    if (v.contains("xi"))
        g.xi = grid_axis(v["xi"], "sweep.xi");
    else
    {
        double const xi = base.rapidity.norm();
        g.xi = {xi};
        if (xi > 0)
            g.axis = base.rapidity / xi;
    }
    if (v.contains("states"))
    {
        if (!v["states"].is_array() || v["states"].empty())
            throw InvalidArgument("sweep.states: expected a non-empty array of state names");
        for (std::size_t i = 0; i < v["states"].size(); ++i)
        {
            std::string const where = "sweep.states[" + std::to_string(i) + "]";
            auto const name = text(v["states"][i], where);
            try
            {
                named_state(name, base.particles);
            }
            catch (InvalidArgument const& e)
            {
                throw InvalidArgument(where + ": " + e.what());
            }
            g.states.push_back(name);
        }
    }
    else
    {
        g.states = {base.state_label};
    }
    return g;
}

} // namespace detail

/*!
 * Validate and convert a scenario document. Errors are InvalidArgument with a
 * message that starts with the offending field.
 */
inline Scenario parse_scenario(json const& doc)
{
    detail::allow_keys(doc, "config",
                       {"particles", "state", "packet", "boost", "integrator", "seed", "threads", "output", "sweep"});
    ParticleSet particles = doc.contains("particles") ? detail::parse_particles(doc["particles"])
                                                      : ParticleSet::identical(2, 1.0, spin_half);
    if (!doc.contains("state"))
        throw InvalidArgument("state: missing");
    auto [state, label] = detail::parse_state(doc["state"], particles);
    if (!doc.contains("packet"))
        throw InvalidArgument("packet: missing");
    PacketConfig packet = detail::parse_packet(doc["packet"]);

    Vec3 rapidity = Vec3::Zero();
    if (doc.contains("boost"))
    {
        detail::allow_keys(doc["boost"], "boost", {"rapidity"});
        if (doc["boost"].contains("rapidity"))
            rapidity = detail::vec3(doc["boost"]["rapidity"], "boost.rapidity");
    }
    IntegratorSpec integrator = doc.contains("integrator") ? detail::parse_integrator(doc["integrator"])
                                                           : IntegratorSpec{};
    std::uint64_t const seed = doc.contains("seed") ? detail::count(doc["seed"], "seed") : 0;
    integrator.seed = seed;
    unsigned threads = 0;
    if (doc.contains("threads"))
        threads = static_cast<unsigned>(std::min<std::uint64_t>(detail::count(doc["threads"], "threads"), 1024));

    OutputConfig output;
    if (doc.contains("output"))
    {
        detail::allow_keys(doc["output"], "output", {"path", "format"});
        if (doc["output"].contains("path"))
            output.path = detail::text(doc["output"]["path"], "output.path");
        if (doc["output"].contains("format"))
        {
            output.format = detail::text(doc["output"]["format"], "output.format");
            if (output.format != "csv" && output.format != "json")
                throw InvalidArgument("output.format: expected csv or json");
        }
    }

    Scenario sc{std::move(particles), std::move(state), std::move(label), packet, rapidity, integrator,
                seed, threads, output, std::nullopt};
    // cross-field consistency
    build_packet(sc.packet, sc.particles);
    if (doc.contains("sweep"))
        sc.sweep = detail::parse_sweep(doc["sweep"], sc);
    return sc;
}

inline Scenario load_scenario(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
        throw InvalidArgument("config: cannot read '" + path + "'");
    json doc;
    try
    {
        doc = json::parse(in);
    }
    catch (json::parse_error const& e)
    {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    return parse_scenario(doc);
}

//---------------------------------------------------------------------------//
// Evaluation
//---------------------------------------------------------------------------//

struct ExpansionSummary
{
    double predicted_lo{0};
    double bound{1};
    VectorXd eigenvalues;
    double richardson_delta{0};
    bool converged{true};
};

struct Evaluation
{
    BoostedStateResult state;
    //! <dp_1x^2> under |g|^2 dP~
    double var_p{0};
    //! the same under the Gaussian factor alone
    double var_p_gaussian{0};
    //! <J_z>/s of particle 1's reduced state; the Bloch z component for spin 1/2
    double nz_prime{0};
    //! pure input states only
    std::optional<ExpansionSummary> expansion{};
};

/// <J_z>/s for particle k of a joint state
inline double polarization_z(CMat const& rho, std::vector<Spin> const& spins, std::size_t k)
{
    if (spins[k].two_s == 0)
        return 0.0;
    CMat const reduced = partial_trace_keep(rho, spins, k);
    return (reduced * spin_operators(spins[k])[2]).trace().real() / spins[k].value();
}

/// Expansion about the packet center with the Gaussian-factor covariance.
inline ExpansionSummary expand(SpinState const& rho, LorentzTransform const& lambda, ParticleSet const& particles,
                               WavePacket const& packet)
{
    auto const blocks = hessian_blocks(rho, lambda, particles, packet.center(), default_step(particles, packet));
    auto const e = spectral_decompose(blocks, packet.plain_covariance());
    ExpansionSummary s;
    s.predicted_lo = predict_depurification(e);
    s.bound = localization_bound(e, position_covariance(packet));
    s.eigenvalues = e.d;
    s.richardson_delta = blocks.richardson_delta;
    s.converged = blocks.converged;
    return s;
}

inline Evaluation evaluate(ParticleSet const& particles, SpinState const& rho, WavePacket const& packet,
                           LorentzTransform const& lambda, IntegratorSpec const& spec)
{
    Evaluation ev{transform_spin_state(rho, lambda, packet, particles, spec)};
    IntegratorSpec mspec = spec;
    mspec.max_error = std::numeric_limits<double>::infinity();
    ev.var_p = moments(packet, mspec).covariance(0, 0);
    ev.var_p_gaussian = packet.plain_covariance()(0, 0);
    ev.nz_prime = polarization_z(ev.state.rho_prime.matrix(), rho.spins(), 0);
    if (ev.state.input_pure)
        ev.expansion = expand(rho, lambda, particles, packet);
    return ev;
}

inline Evaluation evaluate(Scenario const& sc)
{
    IntegratorSpec spec = sc.integrator;
    spec.threads = sc.threads;
    return evaluate(sc.particles, sc.state, build_packet(sc.packet, sc.particles),
                    boost_from_rapidity(sc.rapidity), spec);
}

//---------------------------------------------------------------------------//
// Run report
//---------------------------------------------------------------------------//

inline json complex_matrix_json(CMat const& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back({m(i, j).real(), m(i, j).imag()});
        rows.push_back(row);
    }
    return rows;
}

inline json vector_json(VectorXd const& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(v[i]);
    return out;
}

inline json run_report(Scenario const& sc, Evaluation const& ev)
{
    auto const& r = ev.state;
    json out;
    out["schema"] = "spinboost-run/1";
    out["state"] = sc.state_label;
    out["purity"] = r.purity;
    out["deficit"] = 1.0 - r.purity;
    out["error_estimate"] = r.error_estimate;
    out["rho_prime"] = complex_matrix_json(r.rho_prime.matrix());
    out["bloch"] = r.bloch ? vector_json(*r.bloch) : json(nullptr);
    out["nz_prime"] = ev.nz_prime;
    out["var_p"] = ev.var_p;
    out["var_p_gaussian"] = ev.var_p_gaussian;
    if (ev.expansion)
    {
        out["expansion"] = {{"predicted_lo", ev.expansion->predicted_lo},
                            {"bound", ev.expansion->bound},
                            {"eigenvalues", vector_json(ev.expansion->eigenvalues)},
                            {"richardson_delta", ev.expansion->richardson_delta},
                            {"converged", ev.expansion->converged}};
    }
    else
    {
        out["expansion"] = nullptr;
    }
    out["diagnostics"] = {{"provenance", r.provenance},
                          {"input_pure", r.input_pure},
                          {"hermiticity_correction", r.hermiticity_correction},
                          {"trace_correction", r.trace_correction},
                          {"correction_flagged", r.correction_flagged},
                          {"effective_sample_size", r.effective_sample_size},
                          {"points", r.points},
                          {"integrator", sc.integrator.describe()},
                          {"seed", sc.seed}};
    return out;
}

} // namespace spinboost
