#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "hpsim/commands.hpp"
#include "hpsim/domain.hpp"
#include "hpsim/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitIo = 4;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Health plan one-year profit/loss simulator and solvency capital estimator"};
    app.set_version_flag("--version", hpsim::kToolVersion);
    app.require_subcommand(1);
    app.fallthrough();

    uint64_t seed = 0;
    int threads = 0;
    std::string out_dir = "out";
    app.add_option("--seed", seed, "Master seed controlling all randomness")
        ->capture_default_str();
    app.add_option("--threads", threads, "Worker threads (0 = all cores); results do not depend on it")
        ->capture_default_str();
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();

    hpsim::cli::GenOptions gen;
    auto* cmd_gen = app.add_subcommand("gen", "Generate a synthetic portfolio, episode history and true-parameter file");
    cmd_gen->add_option("--spec", gen.spec_file, "Generator spec JSON")->required();

    hpsim::cli::FitOptions fit;
    std::string fit_config;
    auto* cmd_fit = app.add_subcommand("fit", "Fit the three-part expenditure model");
    cmd_fit->add_option("--portfolio", fit.portfolio_file, "Portfolio CSV")->required();
    cmd_fit->add_option("--episodes", fit.episodes_file, "Episode history CSV")->required();
    cmd_fit->add_option("--model-config", fit_config, "Model config JSON (term lists, pooling)");
    cmd_fit->add_option("--branches", fit.branches, "Branch count (default: inferred from episodes)");

    hpsim::cli::ExpectOptions expect;
    auto* cmd_expect = app.add_subcommand("expect", "Closed-form expected expenditure report");
    cmd_expect->add_option("--model", expect.model_file, "Fitted model JSON")->required();
    cmd_expect->add_option("--portfolio", expect.portfolio_file, "Portfolio CSV")->required();

    hpsim::cli::AdjudicateOptions adjudicate;
    auto* cmd_adjudicate =
        app.add_subcommand("adjudicate", "Apply plan limits to an episode file");
    cmd_adjudicate->add_option("--episodes", adjudicate.episodes_file, "Episode CSV")->required();
    cmd_adjudicate->add_option("--plan", adjudicate.plan_file, "Plan design JSON")->required();
    cmd_adjudicate->add_option("--portfolio", adjudicate.portfolio_file,
                               "Portfolio CSV (family grouping)")
        ->required();

    hpsim::cli::SimulateOptions simulate;
    auto* cmd_simulate =
        app.add_subcommand("simulate", "Monte Carlo distributions of expenditure, reimbursement and profit");
    cmd_simulate->add_option("--model", simulate.model_file, "Fitted model JSON")->required();
    cmd_simulate->add_option("--portfolio", simulate.portfolio_file, "Portfolio CSV")->required();
    cmd_simulate->add_option("--plan", simulate.plan_file, "Plan design JSON")->required();
    cmd_simulate->add_option("-n,--scenarios", simulate.n_scenarios, "Scenario count")
        ->capture_default_str();
    cmd_simulate->add_flag("--detail", simulate.keep_family_branch_detail,
                           "Keep per-family-branch detail (memory heavy)");

    hpsim::cli::RiskOptions risk;
    auto* cmd_risk = app.add_subcommand("risk", "Risk measures and SCR from a distribution file");
    cmd_risk->add_option("--distribution", risk.distribution_file, "Distribution CSV (profit)")
        ->required();
    cmd_risk->add_option("--alpha", risk.alpha, "Confidence level")->capture_default_str();
    cmd_risk->add_option("--basis", risk.basis, "SCR basis: quantile_of_loss | unexpected_loss")
        ->capture_default_str();
    cmd_risk->add_option("--resamples", risk.bootstrap_resamples, "Bootstrap resamples")
        ->capture_default_str();
    double initial_capital = 0.0;
    auto* cap_opt = cmd_risk->add_option("--initial-capital", initial_capital,
                                         "Reporting-only initial capital offset");

    CLI11_PARSE(app, argc, argv);

    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (app.got_subcommand(cmd_gen)) {
            gen.seed = seed;
            gen.out_dir = out_dir;
            hpsim::cli::cmd_gen(gen);
        } else if (app.got_subcommand(cmd_fit)) {
            if (!fit_config.empty()) fit.model_config = fit_config;
            fit.out_dir = out_dir;
            hpsim::cli::cmd_fit(fit);
        } else if (app.got_subcommand(cmd_expect)) {
            expect.out_dir = out_dir;
            hpsim::cli::cmd_expect(expect);
        } else if (app.got_subcommand(cmd_adjudicate)) {
            adjudicate.threads = threads;
            adjudicate.out_dir = out_dir;
            hpsim::cli::cmd_adjudicate(adjudicate);
        } else if (app.got_subcommand(cmd_simulate)) {
            simulate.seed = seed;
            simulate.threads = threads;
            simulate.out_dir = out_dir;
            hpsim::cli::cmd_simulate(simulate);
        } else if (app.got_subcommand(cmd_risk)) {
            risk.seed = seed;
            if (cap_opt->count() > 0) risk.initial_capital = initial_capital;
            risk.out_dir = out_dir;
            hpsim::cli::cmd_risk(risk);
        }
    } catch (const hpsim::ValidationError& ex) {
        std::fprintf(stderr, "error (validation): %s\n", ex.what());
        return kExitValidation;
    } catch (const hpsim::ConvergenceError& ex) {
        std::fprintf(stderr, "error (convergence): %s\n", ex.what());
        return kExitConvergence;
    } catch (const hpsim::IoError& ex) {
        std::fprintf(stderr, "error (io): %s\n", ex.what());
        return kExitIo;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return kExitOk;
}
