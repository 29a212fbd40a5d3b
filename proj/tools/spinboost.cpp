// spinboost command line: run a scenario, sweep a grid, or run acceptance suites.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "spinboost/scenario.hpp"
#include "spinboost/sweep.hpp"
#include "spinboost/verify.hpp"

namespace {

using namespace spinboost;

struct CommonFlags
{
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string format;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_config)
{
    auto* cfg = cmd->add_option("--config", f.config, "scenario config (JSON)");
    if (needs_config)
        cfg->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "output path (default: config output.path, else stdout)");
    cmd->add_option("--seed", f.seed, "global seed (overrides the config)");
    cmd->add_option("--threads", f.threads, "worker threads, 0 = all cores");
    cmd->add_option("--format", f.format, "output format")->check(CLI::IsMember({"csv", "json"}));
}

/// Write through `emit` to the chosen path or stdout; false if the file cannot be opened.
template <class Emit>
bool write_output(std::string const& path, Emit&& emit)
{
    if (path.empty())
    {
        emit(std::cout);
        std::cout.flush();
        return true;
    }
    std::ofstream os(path);
    if (!os)
        return false;
    emit(os);
    return static_cast<bool>(os);
}

Scenario load(CommonFlags const& f)
{
    Scenario sc = load_scenario(f.config);
    if (f.seed)
    {
        sc.seed = *f.seed;
        sc.integrator.seed = *f.seed;
    }
    if (f.threads)
        sc.threads = *f.threads;
    return sc;
}

int cmd_run(CommonFlags const& f)
{
    Scenario const sc = load(f);
    std::string const format = !f.format.empty() ? f.format : !sc.output.format.empty() ? sc.output.format : "json";
    std::string const path = !f.out.empty() ? f.out : sc.output.path;

    Evaluation const ev = evaluate(sc);
    bool ok = false;
    if (format == "json")
        ok = write_output(path, [&](std::ostream& os) { os << run_report(sc, ev).dump(2) << '\n'; });
    else
        ok = write_output(path, [&](std::ostream& os) { write_csv(os, {row_for_run(sc, ev)}); });
    if (!ok)
    {
        std::cerr << "error: output: cannot write '" << path << "'\n";
        return exit_invalid_input;
    }
    if (ev.state.correction_flagged)
        std::cerr << "warning: Hermiticity or trace correction above 1e-6\n";
    if (ev.expansion && !ev.expansion->converged)
    {
        std::cerr << "error: finite-difference Hessian did not converge (Richardson delta "
                  << ev.expansion->richardson_delta << ")\n";
        return exit_accuracy_failure;
    }
    return exit_ok;
}

int cmd_sweep(CommonFlags const& f)
{
    Scenario const sc = load(f);
    if (!sc.sweep)
        throw InvalidArgument("sweep: config has no sweep section");
    std::string const format = !f.format.empty() ? f.format : !sc.output.format.empty() ? sc.output.format : "csv";
    std::string const path = !f.out.empty() ? f.out : sc.output.path;

    auto const rows = run_sweep(sc, sc.threads);
    bool ok = false;
    if (format == "csv")
        ok = write_output(path, [&](std::ostream& os) { write_csv(os, rows); });
    else
        ok = write_output(path, [&](std::ostream& os) { os << sweep_json(rows).dump(2) << '\n'; });
    if (!ok)
    {
        std::cerr << "error: output: cannot write '" << path << "'\n";
        return exit_invalid_input;
    }
    int const code = sweep_exit_code(rows);
    if (code != exit_ok)
        std::cerr << "error: some sweep rows failed, see the status column\n";
    return code;
}

int cmd_verify(std::string const& suite, CommonFlags const& f)
{
    auto const ids = suite_criteria(suite);
    if (!ids)
    {
        std::cerr << "error: unknown suite '" << suite
                  << "' (peres, expansion, theorem, cross-method, rotation, fig1, all)\n";
        return exit_invalid_input;
    }
    VerifyOptions opt;
    if (f.seed)
        opt.seed = *f.seed;
    if (f.threads)
        opt.threads = *f.threads;
    bool const json_out = f.format == "json";
    bool const lines_to_stdout = f.out.empty() && !json_out;
    auto const results = run_criteria(*ids, opt, lines_to_stdout ? &std::cout : &std::cerr);
    bool all = true;
    for (auto const& r : results)
        all = all && r.pass;
    if (!lines_to_stdout)
    {
        bool const ok = write_output(f.out, [&](std::ostream& os) {
            if (json_out)
                os << results_json(results).dump(2) << '\n';
            else
                for (auto const& r : results)
                    os << format_result(r) << '\n';
        });
        if (!ok)
        {
            std::cerr << "error: output: cannot write '" << f.out << "'\n";
            return exit_invalid_input;
        }
    }
    return all ? exit_ok : exit_verification_failure;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Boost-induced spin depurification of localized wave packets"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    auto* run = app.add_subcommand("run", "evaluate one scenario");
    add_common(run, run_flags, true);

    CommonFlags sweep_flags;
    auto* sweep = app.add_subcommand("sweep", "evaluate the scenario's sweep grid");
    add_common(sweep, sweep_flags, true);

    CommonFlags verify_flags;
    std::string suite;
    auto* verify = app.add_subcommand("verify", "run an acceptance suite");
    verify->add_option("suite", suite, "peres | expansion | theorem | cross-method | rotation | fig1 | all")
        ->required();
    add_common(verify, verify_flags, false);

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        int const code = app.exit(e);
        return code == 0 ? exit_ok : exit_invalid_input;
    }

    try
    {
        if (*run)
            return cmd_run(run_flags);
        if (*sweep)
            return cmd_sweep(sweep_flags);
        return cmd_verify(suite, verify_flags);
    }
    catch (InvalidArgument const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_invalid_input;
    }
    catch (AccuracyError const& e)
    {
        std::cerr << "error: " << e.what() << " (estimate " << e.estimate() << ", error " << e.error() << ")\n";
        return exit_accuracy_failure;
    }
    catch (ConsistencyError const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_accuracy_failure;
    }
}
