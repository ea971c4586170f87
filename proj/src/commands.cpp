#include "hpsim/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "hpsim/benefits.hpp"
#include "hpsim/engine.hpp"
#include "hpsim/glm.hpp"
#include "hpsim/io.hpp"
#include "hpsim/risk.hpp"

namespace hpsim::cli {

using nlohmann::json;

namespace {

void make_out_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
}

double round_cents(double v) { return std::round(v * 100.0) / 100.0; }

void check_schema(const glm::ThreePartModel& model, const Portfolio& portfolio) {
    if (!(model.schema == portfolio.schema))
        throw ValidationError("model and portfolio covariate schemas differ");
}

}  // namespace

void cmd_gen(const GenOptions& opt) {
    const engine::GeneratorSpec spec = io::load_generator_spec_json(opt.spec_file);
    const engine::SyntheticData data = engine::generate_synthetic_portfolio(spec, opt.seed);
    make_out_dir(opt.out_dir);
    io::save_portfolio_csv(opt.out_dir / "portfolio.csv", data.portfolio);
    io::save_episodes_csv(opt.out_dir / "episodes.csv", data.episodes, data.portfolio);
    io::save_model_json(opt.out_dir / "true_model.json", data.true_model);

    json config;
    config["seed"] = opt.seed;
    config["members"] = spec.members;
    config["families"] = spec.families;
    config["branches"] = spec.branches;
    io::write_manifest(opt.out_dir, "gen", opt.seed, {opt.spec_file}, config);
    std::printf("gen: %lld members, %lld families, %d branches, %zu episodes -> %s\n",
                static_cast<long long>(spec.members), static_cast<long long>(spec.families),
                spec.branches, data.episodes.size(), opt.out_dir.string().c_str());
}

void cmd_fit(const FitOptions& opt) {
    Portfolio portfolio = io::load_portfolio_csv(opt.portfolio_file);
    const ValidationReport rep = validate_portfolio(portfolio);
    if (!rep.valid()) throw ValidationError("invalid portfolio: " + rep.summary());
    const std::vector<Episode> episodes = io::load_episodes_csv(opt.episodes_file, portfolio);

    int branch_count = opt.branches;
    if (branch_count == 0) {
        for (const auto& e : episodes) branch_count = std::max(branch_count, e.branch_id);
    }
    if (branch_count < 1) throw ValidationError("no branches found; pass --branches");
    portfolio.branches.clear();
    for (int j = 1; j <= branch_count; ++j)
        portfolio.branches.push_back({j, "branch " + std::to_string(j)});

    glm::ThreePartConfig config;
    json config_echo;
    if (opt.model_config) {
        const json doc = io::load_json_file(*opt.model_config);
        if (doc.contains("count") && doc["count"].contains("terms"))
            config.count_terms = doc["count"]["terms"].get<std::vector<std::string>>();
        if (doc.contains("type") && doc["type"].contains("terms"))
            config.type_terms = doc["type"]["terms"].get<std::vector<std::string>>();
        if (doc.contains("severity")) {
            if (doc["severity"].contains("terms"))
                config.severity_terms = doc["severity"]["terms"].get<std::vector<std::string>>();
            config.pooled_severity = doc["severity"].value("pooled", false);
        }
    }
    config_echo["count_terms"] = config.count_terms;
    config_echo["type_terms"] = config.type_terms;
    config_echo["severity_terms"] = config.severity_terms;
    config_echo["pooled_severity"] = config.pooled_severity;
    config_echo["branches"] = branch_count;

    const glm::ThreePartModel model = glm::fit_three_part_model(portfolio, episodes, config);
    make_out_dir(opt.out_dir);
    io::save_model_json(opt.out_dir / "model.json", model);
    io::save_fit_report_json(opt.out_dir / "fit_report.json", model);

    std::vector<std::filesystem::path> inputs{opt.portfolio_file, opt.episodes_file};
    if (opt.model_config) inputs.push_back(*opt.model_config);
    io::write_manifest(opt.out_dir, "fit", 0, inputs, config_echo);
    std::printf("fit: count ll=%.6f (%d it), type ll=%.6f (%d it), severity ll=%.6f -> %s\n",
                model.count.diagnostics.log_likelihood, model.count.diagnostics.iterations,
                model.type.diagnostics.log_likelihood, model.type.diagnostics.iterations,
                model.severity.diagnostics.log_likelihood, opt.out_dir.string().c_str());
}

void cmd_expect(const ExpectOptions& opt) {
    const glm::ThreePartModel model = io::load_model_json(opt.model_file);
    const Portfolio portfolio = io::load_portfolio_csv(opt.portfolio_file);
    check_schema(model, portfolio);
    const engine::ExpectedExpenditureReport report = engine::expected_totals(model, portfolio);
    make_out_dir(opt.out_dir);
    io::save_expected_report(opt.out_dir / "expected.json",
                             opt.out_dir / "expected_members.csv", report, portfolio);

    json config;
    config["branches"] = model.branch_count();
    io::write_manifest(opt.out_dir, "expect", 0, {opt.model_file, opt.portfolio_file}, config);
    std::printf("expect: total expected expenditure %.2f -> %s\n", round_cents(report.total),
                opt.out_dir.string().c_str());
}

void cmd_adjudicate(const AdjudicateOptions& opt) {
    const Portfolio portfolio = io::load_portfolio_csv(opt.portfolio_file);
    const io::PlanFile plan_file = io::load_plan_json(opt.plan_file);
    const std::vector<Episode> episodes = io::load_episodes_csv(opt.episodes_file, portfolio);
    const FamilyIndex families = group_by_family(portfolio);
    const benefits::AdjudicationResult result = benefits::adjudicate(
        episodes, families, plan_file.plan, plan_file.plan.rules.size(), opt.threads);
    make_out_dir(opt.out_dir);
    io::save_adjudication_csv(opt.out_dir / "reimbursements.csv", result, portfolio);

    json config;
    config["threads"] = opt.threads;
    io::write_manifest(opt.out_dir, "adjudicate", 0,
                       {opt.episodes_file, opt.plan_file, opt.portfolio_file}, config);
    std::printf("adjudicate: %zu episodes, %zu family-branch cells, total %.2f -> %s\n",
                episodes.size(), result.cells.size(), round_cents(result.total),
                opt.out_dir.string().c_str());
}

void cmd_simulate(const SimulateOptions& opt) {
    const glm::ThreePartModel model = io::load_model_json(opt.model_file);
    const Portfolio portfolio = io::load_portfolio_csv(opt.portfolio_file);
    check_schema(model, portfolio);
    const io::PlanFile plan_file = io::load_plan_json(opt.plan_file);
    if (plan_file.plan.rules.size() != static_cast<std::size_t>(model.branch_count()))
        throw ValidationError("plan and model disagree on branch count");

    const FamilyIndex families = group_by_family(portfolio);
    const engine::MemberRates rates = engine::precompute_rates(model, portfolio);

    engine::SimulationConfig config;
    config.n_scenarios = opt.n_scenarios;
    config.master_seed = opt.seed;
    config.threads = opt.threads;
    config.keep_family_branch_detail = opt.keep_family_branch_detail;
    const engine::SimulationResult result =
        engine::run_simulation(rates, families, plan_file.plan, portfolio, config);

    make_out_dir(opt.out_dir);
    io::save_distribution_csv(opt.out_dir / "dist_expenditure.csv", result.expenditure);
    io::save_distribution_csv(opt.out_dir / "dist_reimbursement.csv", result.reimbursement);
    io::save_distribution_csv(opt.out_dir / "dist_profit.csv", result.profit);
    io::save_histogram_csv(opt.out_dir / "hist_profit.csv", result.profit);
    io::save_simulation_summary_json(opt.out_dir / "summary.json", result);

    json config_echo;
    config_echo["n_scenarios"] = opt.n_scenarios;
    config_echo["seed"] = opt.seed;
    config_echo["threads"] = opt.threads;
    config_echo["keep_family_branch_detail"] = opt.keep_family_branch_detail;
    io::write_manifest(opt.out_dir, "simulate", opt.seed,
                       {opt.model_file, opt.portfolio_file, opt.plan_file}, config_echo);
    std::printf(
        "simulate: n=%lld seed=%llu  expenditure mean %.2f, reimbursement mean %.2f, "
        "profit mean %.2f -> %s\n",
        static_cast<long long>(result.n_scenarios),
        static_cast<unsigned long long>(result.master_seed),
        round_cents(result.expenditure_stats.mean), round_cents(result.reimbursement_stats.mean),
        round_cents(result.profit_stats.mean), opt.out_dir.string().c_str());
}

void cmd_risk(const RiskOptions& opt) {
    const engine::EmpiricalDistribution dist =
        io::load_distribution_csv(opt.distribution_file);
    risk::RiskConfig config;
    config.alpha = opt.alpha;
    config.basis = risk::scr_basis_from_string(opt.basis);
    config.bootstrap_resamples = opt.bootstrap_resamples;
    config.bootstrap_seed = opt.seed;
    const risk::RiskReport report = risk::scr(dist.values, config);
    make_out_dir(opt.out_dir);
    io::save_risk_report_json(opt.out_dir / "risk.json", report, opt.initial_capital);

    json config_echo;
    config_echo["alpha"] = opt.alpha;
    config_echo["basis"] = opt.basis;
    config_echo["bootstrap_resamples"] = opt.bootstrap_resamples;
    config_echo["seed"] = opt.seed;
    if (opt.initial_capital) config_echo["initial_capital"] = *opt.initial_capital;
    io::write_manifest(opt.out_dir, "risk", opt.seed, {opt.distribution_file}, config_echo);
    std::printf("risk: alpha=%.4f var=%.2f tvar=%.2f scr=%.2f (%s) -> %s\n", report.alpha,
                round_cents(report.value_at_risk), round_cents(report.tail_value_at_risk),
                round_cents(report.scr), report.basis.c_str(), opt.out_dir.string().c_str());
}

}  // namespace hpsim::cli
