#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "spinboost/scenario.hpp"
#include "spinboost/sweep.hpp"
#include "spinboost/verify.hpp"

using namespace spinboost;

namespace {

json base_doc()
{
    return json::parse(R"({
        "particles": {"masses": [1.0, 1.0], "spins": [0.5, 0.5]},
        "state": "bell-minus",
        "packet": {"kind": "entangled-gaussian", "sigma": 0.1, "x": 0.2},
        "boost": {"rapidity": [0.0, 0.0, 1.0]},
        "integrator": {"method": "monte-carlo", "samples": 2000},
        "seed": 5
    })");
}

std::string error_of(json const& doc)
{
    try
    {
        parse_scenario(doc);
    }
    catch (InvalidArgument const& e)
    {
        return e.what();
    }
    return "";
}

bool starts_with(std::string const& s, std::string const& prefix) { return s.rfind(prefix, 0) == 0; }

std::string csv_of(std::vector<SweepRow> const& rows)
{
    std::ostringstream os;
    write_csv(os, rows);
    return os.str();
}

} // namespace

TEST(ParseScenario, Defaults)
{
    auto const sc = parse_scenario(base_doc());
    EXPECT_EQ(sc.particles.size(), 2u);
    EXPECT_EQ(sc.state_label, "bell-minus");
    EXPECT_EQ(sc.packet.kind, PacketKind::entangled_gaussian);
    EXPECT_EQ(sc.packet.width, 0.1);
    EXPECT_EQ(sc.packet.correlation, 0.2);
    EXPECT_EQ(sc.rapidity, Vec3(0, 0, 1));
    EXPECT_EQ(sc.integrator.samples, 2000u);
    EXPECT_EQ(sc.integrator.seed, 5u);
    EXPECT_FALSE(sc.sweep.has_value());

    json minimal = base_doc();
    minimal.erase("particles");
    minimal.erase("integrator");
    auto const m = parse_scenario(minimal);
    EXPECT_EQ(m.particles.masses(), (std::vector<double>{1.0, 1.0}));
    EXPECT_EQ(m.integrator.method, IntegrationMethod::monte_carlo);
}

TEST(ParseScenario, ErrorsNameTheField)
{
    json d = base_doc();
    d["particles"]["spins"] = {0.5, 1.0};
    EXPECT_TRUE(starts_with(error_of(d), "state")) << error_of(d);

    d = base_doc();
    d["packet"]["sigma"] = -0.1;
    EXPECT_TRUE(starts_with(error_of(d), "packet.sigma")) << error_of(d);

    d = base_doc();
    d["packet"]["x"] = 1.0;
    EXPECT_TRUE(starts_with(error_of(d), "packet.x")) << error_of(d);

    d = base_doc();
    d["boost"]["rapidity"] = {0.0, 1.0};
    EXPECT_TRUE(starts_with(error_of(d), "boost.rapidity")) << error_of(d);

    d = base_doc();
    d["integrator"]["samples"] = 10;
    EXPECT_TRUE(starts_with(error_of(d), "integrator.samples")) << error_of(d);

    d = base_doc();
    d["integrator"] = {{"method", "gauss-hermite"}, {"nodes", 4}};
    EXPECT_TRUE(starts_with(error_of(d), "integrator.nodes")) << error_of(d);

    d = base_doc();
    d["colour"] = "blue";
    EXPECT_TRUE(starts_with(error_of(d), "config.colour")) << error_of(d);

    d = base_doc();
    d["state"] = "bell-zero";
    EXPECT_TRUE(starts_with(error_of(d), "state")) << error_of(d);

    d = base_doc();
    d["particles"]["masses"] = {1.0, 2.0};
    EXPECT_TRUE(starts_with(error_of(d), "packet")) << error_of(d);

    d = base_doc();
    d["packet"] = {{"kind", "single-gaussian"}, {"w", 0.1}};
    EXPECT_TRUE(starts_with(error_of(d), "packet")) << error_of(d);

    d = base_doc();
    d["seed"] = -3;
    EXPECT_TRUE(starts_with(error_of(d), "seed")) << error_of(d);

    d = base_doc();
    d["output"] = {{"format", "xml"}};
    EXPECT_TRUE(starts_with(error_of(d), "output.format")) << error_of(d);
}

TEST(ParseScenario, CustomMatrixState)
{
    json d = base_doc();
    d["particles"] = {{"masses", {1.0}}, {"spins", {0.5}}};
    d["packet"] = {{"kind", "single-gaussian"}, {"w", 0.1}};
    // spin up along +x, with complex entries as [re, im]
    d["state"] = {{"matrix", {{0.5, 0.5}, {{0.5, 0.0}, 0.5}}}};
    auto const sc = parse_scenario(d);
    EXPECT_EQ(sc.state_label, "custom");
    EXPECT_NEAR(bloch_vector(sc.state).x(), 1.0, 1e-15);

    d["state"] = {{"matrix", {{0.5, 0.0}, {0.0, 0.6}}}};
    EXPECT_TRUE(starts_with(error_of(d), "state.matrix")) << error_of(d);
    d["state"] = {{"matrix", {{1.0}}}};
    EXPECT_TRUE(starts_with(error_of(d), "state.matrix")) << error_of(d);
}

TEST(ParseScenario, SweepGrid)
{
    json d = base_doc();
    d["sweep"] = {{"sigma", {{"from", 0.025}, {"to", 0.5}, {"step", 0.025}}},
                  {"x", {0.0, 0.5}},
                  {"xi", {0.5, 1.0, 2.0}},
                  {"states", {"bell-minus", "bell-plus"}}};
    auto const sc = parse_scenario(d);
    ASSERT_TRUE(sc.sweep);
    ASSERT_EQ(sc.sweep->sigma.size(), 20u);
    EXPECT_NEAR(sc.sweep->sigma.back(), 0.5, 1e-12);
    EXPECT_EQ(sc.sweep->size(), 20u * 2 * 3 * 2);
    EXPECT_EQ(sc.sweep->axis, Vec3::UnitZ());

    d["sweep"] = {{"sigma", json::array()}};
    EXPECT_TRUE(starts_with(error_of(d), "sweep.sigma")) << error_of(d);
    d["sweep"] = {{"sigma", {0.1}}, {"states", {"bell-zero"}}};
    EXPECT_TRUE(starts_with(error_of(d), "sweep.states[0]")) << error_of(d);
    d["sweep"] = {{"sigma", {0.1}}, {"x", {1.2}}};
    EXPECT_TRUE(starts_with(error_of(d), "sweep.x")) << error_of(d);

    // without xi the configured boost supplies both rapidity and axis
    d["sweep"] = {{"sigma", {0.1}}};
    d["boost"]["rapidity"] = {0.0, 2.0, 0.0};
    auto const b = parse_scenario(d);
    EXPECT_EQ(b.sweep->xi, std::vector<double>{2.0});
    EXPECT_EQ(b.sweep->axis, Vec3::UnitY());
}

TEST(Evaluate, IdentityBoostLeavesStateUnchanged)
{
    json d = base_doc();
    d["boost"]["rapidity"] = {0.0, 0.0, 0.0};
    auto const sc = parse_scenario(d);
    auto const ev = evaluate(sc);
    EXPECT_EQ(ev.state.purity, purity(sc.state));
    EXPECT_EQ(ev.state.rho_prime.matrix(), sc.state.matrix());
    ASSERT_TRUE(ev.expansion);
    EXPECT_EQ(ev.expansion->predicted_lo, 0.0);
    EXPECT_EQ(ev.expansion->bound, 1.0);

    auto const report = run_report(sc, ev);
    EXPECT_EQ(report["purity"].get<double>(), purity(sc.state));
    EXPECT_EQ(report["rho_prime"].size(), 4u);
    EXPECT_NEAR(report["rho_prime"][1][2][0].get<double>(), -0.5, 1e-15);
    EXPECT_TRUE(report["bloch"].is_null());
}

TEST(Evaluate, PeresConfigBlochVector)
{
    json d = json::parse(R"({
        "particles": {"masses": [1.0], "spins": [0.5]},
        "state": "up-z",
        "packet": {"kind": "single-gaussian", "w": 0.05},
        "boost": {"rapidity": [0.5, 0.0, 0.0]},
        "integrator": {"method": "gauss-hermite", "nodes": 24}
    })");
    auto const sc = parse_scenario(d);
    auto const report = run_report(sc, evaluate(sc));
    auto const n = report["bloch"];
    ASSERT_EQ(n.size(), 3u);
    EXPECT_LE(std::abs(n[0].get<double>()), 1e-10);
    EXPECT_LE(std::abs(n[1].get<double>()), 1e-10);
    EXPECT_LT(n[2].get<double>(), 1.0);
    EXPECT_EQ(report["nz_prime"].get<double>(), n[2].get<double>());
    // variance with the 1/2E weights sits just below the Gaussian-factor one
    EXPECT_LT(report["var_p"].get<double>(), report["var_p_gaussian"].get<double>());
    EXPECT_NEAR(report["var_p"].get<double>(), report["var_p_gaussian"].get<double>(), 0.01 * 0.05 * 0.05);
}

TEST(Evaluate, PolarizationOfFirstParticle)
{
    auto const up = SpinState::up_z({spin_half, Spin::from_value(1.0)});
    EXPECT_NEAR(polarization_z(up.matrix(), up.spins(), 0), 1.0, 1e-15);
    EXPECT_NEAR(polarization_z(up.matrix(), up.spins(), 1), 1.0, 1e-15);
    auto const singlet = SpinState::bell_pair(BellKind::minus);
    EXPECT_NEAR(polarization_z(singlet.matrix(), singlet.spins(), 0), 0.0, 1e-15);
}

TEST(Sweep, CsvHeaderAndOrder)
{
    json d = base_doc();
    d["sweep"] = {{"sigma", {0.05, 0.1}}, {"x", {0.0, 0.5}}, {"xi", {1.0}}, {"states", {"bell-minus", "up-z"}}};
    auto const sc = parse_scenario(d);
    auto const rows = run_sweep(sc, 1);
    ASSERT_EQ(rows.size(), 8u);
    EXPECT_EQ(rows[0].state, "bell-minus");
    EXPECT_EQ(rows[1].sigma, 0.1);
    EXPECT_EQ(rows[2].x, 0.5);
    EXPECT_EQ(rows[4].state, "up-z");
    for (auto const& r : rows)
    {
        EXPECT_EQ(r.status, "ok");
        EXPECT_GT(r.deficit_stderr, 0);
        EXPECT_TRUE(std::isfinite(r.var_p) && std::isfinite(r.predicted_lo) && std::isfinite(r.bound)
                    && std::isfinite(r.nz_prime));
    }
    EXPECT_EQ(sweep_exit_code(rows), exit_ok);

    std::istringstream in(csv_of(rows));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "# spinboost sweep csv v1");
    std::getline(in, line);
    EXPECT_EQ(line, "sigma,x,xi,state,var_p,deficit,deficit_stderr,predicted_lo,bound,nz_prime,status");
    int n = 0;
    while (std::getline(in, line))
    {
        ++n;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 10);
    }
    EXPECT_EQ(n, 8);
}

TEST(Sweep, ByteIdenticalAcrossThreadCounts)
{
    json d = base_doc();
    d["sweep"] = {{"sigma", {0.05, 0.1, 0.2}}, {"states", {"bell-minus", "bell-plus"}}};
    auto const sc = parse_scenario(d);
    auto const one = csv_of(run_sweep(sc, 1));
    EXPECT_EQ(one, csv_of(run_sweep(sc, 3)));
    EXPECT_EQ(one, csv_of(run_sweep(sc, 1)));
}

TEST(Sweep, SinglePointMatchesRun)
{
    json d = base_doc();
    d["sweep"] = {{"sigma", {0.1}}, {"x", {0.2}}};
    auto sc = parse_scenario(d);
    auto const rows = run_sweep(sc, 1);
    ASSERT_EQ(rows.size(), 1u);
    // the sweep row uses seed derive_seed(seed, 0)
    sc.integrator.seed = derive_seed(sc.seed, 0);
    auto const run = row_for_run(sc, evaluate(sc));
    EXPECT_EQ(csv_of(rows), csv_of({run}));
}

TEST(Sweep, SingleParticleSlope)
{
    json d = json::parse(R"({
        "particles": {"masses": [1.0], "spins": [0.5]},
        "state": "up-z",
        "packet": {"kind": "single-gaussian", "w": 0.01},
        "boost": {"rapidity": [0.5, 0.0, 0.0]},
        "integrator": {"method": "gauss-hermite", "nodes": 24},
        "sweep": {"sigma": [0.01, 0.02, 0.04, 0.08]}
    })");
    auto const rows = run_sweep(parse_scenario(d), 1);
    std::vector<double> lw;
    std::vector<double> ld;
    for (auto const& r : rows)
    {
        lw.push_back(std::log(r.sigma));
        ld.push_back(std::log(r.deficit));
        EXPECT_EQ(r.xi, 0.5);
    }
    EXPECT_NEAR(detail::ls_slope(lw, ld), 2.0, 0.1);
}

TEST(Sweep, AccuracyFailuresAreRecordedPerRow)
{
    json d = base_doc();
    d["integrator"]["max_error"] = 1e-12;
    d["sweep"] = {{"sigma", {0.1, 0.2}}};
    auto const rows = run_sweep(parse_scenario(d), 1);
    for (auto const& r : rows)
    {
        EXPECT_EQ(r.status, "accuracy");
        EXPECT_GT(r.deficit, 0);
        EXPECT_GT(r.deficit_stderr, 1e-12);
    }
    EXPECT_EQ(sweep_exit_code(rows), exit_accuracy_failure);
    EXPECT_NE(csv_of(rows).find(",nan,"), std::string::npos);
}

TEST(Sweep, NumberFormatting)
{
    EXPECT_EQ(format_number(0.025), "0.025");
    EXPECT_EQ(format_number(-0.0), "0");
    EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(Verify, SuiteNames)
{
    EXPECT_EQ(*suite_criteria("peres"), std::vector<int>{1});
    EXPECT_EQ(*suite_criteria("expansion"), (std::vector<int>{2, 7}));
    EXPECT_EQ(*suite_criteria("theorem"), std::vector<int>{4});
    EXPECT_EQ(*suite_criteria("cross-method"), std::vector<int>{6});
    EXPECT_EQ(suite_criteria("all")->size(), 7u);
    EXPECT_FALSE(suite_criteria("bogus").has_value());
}

TEST(Verify, TheoremCasesArePinnedAndInRange)
{
    auto const a = theorem_cases();
    auto const b = theorem_cases();
    ASSERT_EQ(a.size(), 20u);
    int counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        EXPECT_EQ(a[i].sigma, b[i].sigma);
        EXPECT_GE(a[i].sigma, 0.05);
        EXPECT_LE(a[i].sigma, 0.5);
        EXPECT_GE(a[i].x, 0.0);
        EXPECT_LT(a[i].x, 0.9);
        EXPECT_GE(a[i].xi, 0.2);
        EXPECT_LE(a[i].xi, 2.0);
        EXPECT_NEAR(a[i].axis.norm(), 1.0, 1e-12);
        counts[a[i].state == "bell-minus" ? 0 : a[i].state == "bell-plus" ? 1 : 2]++;
    }
    EXPECT_EQ(counts[0] + counts[1] + counts[2], 20);
    EXPECT_GT(counts[2], 0);
}

TEST(Verify, Fig1AnalysisOnSyntheticRows)
{
    std::vector<SweepRow> rows;
    for (int i = 1; i <= 20; ++i)
    {
        SweepRow r;
        r.sigma = 0.025 * i;
        r.var_p = r.sigma * r.sigma;
        r.deficit = 0.4 * r.var_p - 0.3 * r.var_p * r.var_p;
        r.deficit_stderr = 1e-9;
        rows.push_back(r);
    }
    auto a = analyze_fig1(rows);
    EXPECT_TRUE(a.monotone);
    EXPECT_TRUE(a.deviation_grows);
    EXPECT_GT(a.r2, 0.999);
    EXPECT_TRUE(a.rows_ok);

    rows[5].deficit = rows[4].deficit * 0.9;
    a = analyze_fig1(rows);
    EXPECT_FALSE(a.monotone);
}
