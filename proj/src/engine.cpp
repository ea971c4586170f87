#include "hpsim/engine.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hpsim::engine {

namespace {

// Compensated (Kahan) accumulator for the summary totals.
struct Kahan {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

SummaryStats summarize(const std::vector<double>& values) {
    SummaryStats s;
    if (values.empty()) return s;
    Kahan mean_acc;
    s.min = values.front();
    s.max = values.front();
    for (double v : values) {
        mean_acc.add(v);
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }
    s.mean = mean_acc.sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        Kahan var_acc;
        for (double v : values) var_acc.add((v - s.mean) * (v - s.mean));
        const double sd =
            std::sqrt(var_acc.sum / static_cast<double>(values.size() - 1));
        s.std_error = sd / std::sqrt(static_cast<double>(values.size()));
    }
    return s;
}

EmpiricalDistribution make_distribution(std::string label, uint64_t seed,
                                        const std::vector<double>& by_scenario) {
    EmpiricalDistribution d;
    d.label = std::move(label);
    d.master_seed = seed;
    const auto n = by_scenario.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (by_scenario[a] != by_scenario[b]) return by_scenario[a] < by_scenario[b];
        return a < b;
    });
    d.values.reserve(n);
    d.scenario_index.reserve(n);
    for (std::size_t k : order) {
        d.values.push_back(by_scenario[k]);
        d.scenario_index.push_back(static_cast<int64_t>(k));
    }
    return d;
}

SimulationResult assemble(const MemberRates& rates, const FamilyIndex& families,
                          const PlanDesign& plan, const Portfolio& portfolio,
                          const SimulationConfig& config,
                          std::vector<ScenarioResult>&& results) {
    SimulationResult out;
    out.n_scenarios = config.n_scenarios;
    out.master_seed = config.master_seed;
    out.total_contributions = contributions(plan, portfolio);

    const auto n = results.size();
    std::vector<double> z(n), k(n), u(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = results[i].expenditure;
        k[i] = results[i].reimbursement;
        u[i] = results[i].profit;
    }
    out.expenditure_stats = summarize(z);
    out.reimbursement_stats = summarize(k);
    out.profit_stats = summarize(u);
    out.expenditure = make_distribution("expenditure", config.master_seed, z);
    out.reimbursement = make_distribution("reimbursement", config.master_seed, k);
    out.profit = make_distribution("profit", config.master_seed, u);
    if (config.keep_family_branch_detail) out.detail = std::move(results);
    (void)rates;
    (void)families;
    return out;
}

}  // namespace

double expected_member_branch(const glm::ThreePartModel& model, const CovariateRecord& x,
                              int branch_id) {
    const double mu = glm::predict_count_mean(model.count, x);
    const Eigen::VectorXd probs = glm::predict_type_probs(model.type, x);
    if (branch_id < 1 || branch_id > model.branch_count())
        throw ValidationError("unknown branch id " + std::to_string(branch_id));
    const double p = probs(branch_id - 1);
    if (p == 0.0) return 0.0;
    return mu * p * glm::predict_severity_mean(model.severity, x, branch_id);
}

ExpectedExpenditureReport expected_totals(const glm::ThreePartModel& model,
                                          const Portfolio& portfolio) {
    const FamilyIndex families = group_by_family(portfolio);
    const auto r = portfolio.member_count();
    const auto branch_count = static_cast<std::size_t>(model.branch_count());

    const Eigen::MatrixXd count_design = model.count.layout.matrix(portfolio.covariates);
    const Eigen::MatrixXd type_design = model.type.layout.matrix(portfolio.covariates);
    const Eigen::MatrixXd sev_design = model.severity.layout.matrix(portfolio.covariates);
    const Eigen::VectorXd mu = glm::count_means(model.count, count_design);
    const Eigen::MatrixXd probs = glm::type_probabilities(model.type, type_design);
    const Eigen::MatrixXd sev = glm::severity_means(model.severity, sev_design);

    ExpectedExpenditureReport rep;
    rep.per_member.resize(r);
    rep.per_member_branch.assign(r, std::vector<double>(branch_count, 0.0));
    for (std::size_t i = 0; i < r; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        double member_total = 0.0;
        for (std::size_t j = 0; j < branch_count; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double e = mu(ii) * probs(ii, jj) * sev(ii, jj);
            rep.per_member_branch[i][j] = e;
            member_total += e;
        }
        rep.per_member[i] = member_total;
    }

    rep.per_family.assign(portfolio.family_count(), 0.0);
    for (std::size_t f = 0; f < families.members_of_family.size(); ++f) {
        Kahan acc;
        for (uint32_t row : families.members_of_family[f]) acc.add(rep.per_member[row]);
        rep.per_family[f] = acc.sum;
    }

    Kahan total;
    for (double v : rep.per_member) total.add(v);
    rep.total = total.sum;
    return rep;
}

double contributions(const PlanDesign& plan, const Portfolio& portfolio) {
    if (!(plan.contribution >= 0.0)) throw ValidationError("contribution must be >= 0");
    return plan.contribution * static_cast<double>(portfolio.member_count());
}

MemberRates precompute_rates(const glm::ThreePartModel& model, const Portfolio& portfolio) {
    MemberRates rates;
    const auto r = portfolio.member_count();
    const auto branch_count = static_cast<std::size_t>(model.branch_count());
    rates.member_count = r;
    rates.branch_count = branch_count;
    rates.dispersion = model.count.dispersion;

    const Eigen::MatrixXd count_design = model.count.layout.matrix(portfolio.covariates);
    const Eigen::MatrixXd type_design = model.type.layout.matrix(portfolio.covariates);
    const Eigen::MatrixXd sev_design = model.severity.layout.matrix(portfolio.covariates);
    const Eigen::VectorXd mu = glm::count_means(model.count, count_design);
    const Eigen::MatrixXd probs = glm::type_probabilities(model.type, type_design);
    const Eigen::MatrixXd sev = glm::severity_means(model.severity, sev_design);

    rates.count_mean.resize(r);
    rates.type_cumprob.resize(r * branch_count);
    rates.severity_mean.resize(r * branch_count);
    rates.severity_shape.resize(branch_count);
    for (std::size_t j = 0; j < branch_count; ++j)
        rates.severity_shape[j] = model.severity.branches[j].shape;

    for (std::size_t i = 0; i < r; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        rates.count_mean[i] = mu(ii);
        double acc = 0.0;
        for (std::size_t j = 0; j < branch_count; ++j) {
            acc += probs(ii, static_cast<Eigen::Index>(j));
            rates.type_cumprob[i * branch_count + j] = acc;
            rates.severity_mean[i * branch_count + j] = sev(ii, static_cast<Eigen::Index>(j));
        }
    }
    return rates;
}

void SimulationConfig::validate() const {
    if (n_scenarios < 1) throw ValidationError("n_scenarios must be >= 1");
    if (threads < 0) throw ValidationError("threads must be >= 0");
}

void ScenarioScratch::ensure(std::size_t cells) {
    if (expenditure_acc.size() < cells) {
        expenditure_acc.assign(cells, 0.0);
        reimbursement_acc.assign(cells, 0.0);
        stamp.assign(cells, -1);
        epoch = 0;
    }
}

ScenarioResult simulate_scenario(const MemberRates& rates, const FamilyIndex& families,
                                 const PlanDesign& plan, double total_contributions,
                                 uint64_t master_seed, int64_t scenario_index,
                                 ScenarioScratch& scratch, bool keep_detail) {
    const std::size_t branch_count = rates.branch_count;
    scratch.ensure(families.members_of_family.size() * branch_count);
    scratch.touched.clear();
    const int64_t epoch = ++scratch.epoch;

    for (std::size_t i = 0; i < rates.member_count; ++i) {
        auto stream = rng::Stream::derive(master_seed, rng::Purpose::Scenario,
                                          static_cast<uint64_t>(scenario_index),
                                          static_cast<uint64_t>(i));
        const int64_t episodes = rng::negbin_draw(stream, rates.count_mean[i], rates.dispersion);
        if (episodes == 0) continue;
        const uint32_t family = families.family_of_member[i];
        const std::span<const double> cum(&rates.type_cumprob[i * branch_count], branch_count);
        for (int64_t e = 0; e < episodes; ++e) {
            const int j = rng::categorical_draw(stream, cum);
            const double shape = rates.severity_shape[static_cast<std::size_t>(j)];
            const double mean = rates.severity_mean[i * branch_count + static_cast<std::size_t>(j)];
            const double y = rng::gamma_draw(stream, shape) * (mean / shape);
            const double paid =
                benefits::episode_reimbursement(y, plan.rules[static_cast<std::size_t>(j)]);
            const std::size_t cell = family * branch_count + static_cast<std::size_t>(j);
            if (scratch.stamp[cell] != epoch) {
                scratch.stamp[cell] = epoch;
                scratch.expenditure_acc[cell] = 0.0;
                scratch.reimbursement_acc[cell] = 0.0;
                scratch.touched.push_back(static_cast<uint32_t>(cell));
            }
            scratch.expenditure_acc[cell] += y;
            scratch.reimbursement_acc[cell] += paid;
        }
    }

    ScenarioResult result;
    result.scenario_index = scenario_index;
    double z = 0.0;
    double k = 0.0;
    for (uint32_t cell : scratch.touched) {
        const auto j = cell % branch_count;
        const auto& rules = plan.rules[j];
        double amount = scratch.reimbursement_acc[cell];
        const bool capped = rules.family_cap && amount > *rules.family_cap;
        if (capped) amount = *rules.family_cap;
        z += scratch.expenditure_acc[cell];
        k += amount;
        if (keep_detail) {
            benefits::FamilyBranchReimbursement d;
            d.family_pos = static_cast<uint32_t>(cell / branch_count);
            d.branch_id = static_cast<int>(j) + 1;
            d.amount = amount;
            d.capped = capped;
            result.detail.push_back(d);
        }
    }
    if (keep_detail) {
        std::sort(result.detail.begin(), result.detail.end(),
                  [](const auto& a, const auto& b) {
                      if (a.family_pos != b.family_pos) return a.family_pos < b.family_pos;
                      return a.branch_id < b.branch_id;
                  });
    }
    result.expenditure = z;
    result.reimbursement = k;
    result.profit = total_contributions - k;
    return result;
}

SimulationResult run_simulation(const MemberRates& rates, const FamilyIndex& families,
                                const PlanDesign& plan, const Portfolio& portfolio,
                                const SimulationConfig& config) {
    config.validate();
    plan.validate(rates.branch_count);
    const double cash_in = contributions(plan, portfolio);
    std::vector<ScenarioResult> results(static_cast<std::size_t>(config.n_scenarios));
    const int nthreads = config.threads > 0 ? config.threads : omp_get_max_threads();

#pragma omp parallel num_threads(nthreads)
    {
        ScenarioScratch scratch;
#pragma omp for schedule(dynamic, 16)
        for (int64_t s = 0; s < config.n_scenarios; ++s) {
            results[static_cast<std::size_t>(s)] =
                simulate_scenario(rates, families, plan, cash_in, config.master_seed, s,
                                  scratch, config.keep_family_branch_detail);
        }
    }
    return assemble(rates, families, plan, portfolio, config, std::move(results));
}

SimulationResult run_simulation_reference(const MemberRates& rates, const FamilyIndex& families,
                                          const PlanDesign& plan, const Portfolio& portfolio,
                                          const SimulationConfig& config) {
    config.validate();
    plan.validate(rates.branch_count);
    const double cash_in = contributions(plan, portfolio);
    std::vector<ScenarioResult> results(static_cast<std::size_t>(config.n_scenarios));
    ScenarioScratch scratch;
    for (int64_t s = 0; s < config.n_scenarios; ++s) {
        results[static_cast<std::size_t>(s)] =
            simulate_scenario(rates, families, plan, cash_in, config.master_seed, s, scratch,
                              config.keep_family_branch_detail);
    }
    return assemble(rates, families, plan, portfolio, config, std::move(results));
}

void GeneratorSpec::validate() const {
    if (members < 1) throw ValidationError("generator needs members >= 1");
    if (families < 1) throw ValidationError("generator needs families >= 1");
    if (families > members) throw ValidationError("H exceeds r");
    if (branches < 1) throw ValidationError("generator needs branches >= 1");
    if (age_min < 0 || age_max < age_min) throw ValidationError("bad age range");
    if (!(male_fraction >= 0.0 && male_fraction <= 1.0))
        throw ValidationError("male_fraction must be in [0,1]");
    const std::size_t p = 3;  // intercept, age, sex=M
    if (count_coefficients.size() != p)
        throw ValidationError("count_coefficients must have 3 entries");
    if (!(count_dispersion > 0.0)) throw ValidationError("count_dispersion must be > 0");
    if (type_coefficients.size() != static_cast<std::size_t>(branches - 1))
        throw ValidationError("type_coefficients must have J-1 rows");
    for (const auto& row : type_coefficients)
        if (row.size() != p) throw ValidationError("type coefficient rows must have 3 entries");
    if (severity_coefficients.size() != static_cast<std::size_t>(branches))
        throw ValidationError("severity_coefficients must have J rows");
    for (const auto& row : severity_coefficients)
        if (row.size() != p)
            throw ValidationError("severity coefficient rows must have 3 entries");
    if (severity_shapes.size() != static_cast<std::size_t>(branches))
        throw ValidationError("severity_shapes must have J entries");
    for (double a : severity_shapes)
        if (!(a > 0.0)) throw ValidationError("severity shapes must be > 0");
    if (!branch_names.empty() && branch_names.size() != static_cast<std::size_t>(branches))
        throw ValidationError("branch_names must have J entries when given");
}

SyntheticData generate_synthetic_portfolio(const GeneratorSpec& spec, uint64_t seed) {
    spec.validate();
    SyntheticData data;
    Portfolio& p = data.portfolio;

    p.schema.columns = {
        {"age", CovariateKind::Numeric, {}},
        {"sex", CovariateKind::Categorical, {"F", "M"}},
    };
    p.covariates.columns.resize(2);
    p.covariates.rows = static_cast<std::size_t>(spec.members);
    auto& age_col = p.covariates.columns[0].numeric;
    auto& sex_col = p.covariates.columns[1].level;
    age_col.resize(p.covariates.rows);
    sex_col.resize(p.covariates.rows);

    p.branches.resize(static_cast<std::size_t>(spec.branches));
    for (int j = 1; j <= spec.branches; ++j) {
        p.branches[static_cast<std::size_t>(j - 1)].branch_id = j;
        p.branches[static_cast<std::size_t>(j - 1)].name =
            spec.branch_names.empty() ? "branch " + std::to_string(j)
                                      : spec.branch_names[static_cast<std::size_t>(j - 1)];
    }

    const auto digits = std::to_string(spec.members).size();
    auto pad = [digits](int64_t v) {
        std::string s = std::to_string(v);
        return std::string(digits > s.size() ? digits - s.size() : 0, '0') + s;
    };

    p.members.resize(static_cast<std::size_t>(spec.members));
    p.families.resize(static_cast<std::size_t>(spec.families));
    for (int64_t f = 0; f < spec.families; ++f)
        p.families[static_cast<std::size_t>(f)].family_id = "f" + pad(f + 1);

    const int age_span = spec.age_max - spec.age_min + 1;
    for (int64_t i = 0; i < spec.members; ++i) {
        auto stream = rng::Stream::derive(seed, rng::Purpose::PortfolioGen,
                                          static_cast<uint64_t>(i));
        // First H members seed the families so none is empty.
        int64_t family = i < spec.families
                             ? i
                             : static_cast<int64_t>(stream.uniform01() *
                                                    static_cast<double>(spec.families));
        family = std::min(family, spec.families - 1);
        auto& m = p.members[static_cast<std::size_t>(i)];
        m.member_id = "m" + pad(i + 1);
        m.family_id = p.families[static_cast<std::size_t>(family)].family_id;
        p.families[static_cast<std::size_t>(family)].member_rows.push_back(
            static_cast<uint32_t>(i));
        int age = spec.age_min + static_cast<int>(stream.uniform01() * age_span);
        age_col[static_cast<std::size_t>(i)] = std::min(age, spec.age_max);
        sex_col[static_cast<std::size_t>(i)] = stream.uniform01() < spec.male_fraction ? 1 : 0;
    }

    // Assemble the generating model in the fitted-model representation.
    glm::ThreePartModel& model = data.true_model;
    model.schema = p.schema;
    model.branches = p.branches;
    const std::vector<std::string> terms{"age", "sex"};
    const glm::DesignLayout layout = glm::DesignLayout::build(p.schema, terms);

    model.count.layout = layout;
    model.count.coefficients =
        Eigen::Map<const Eigen::VectorXd>(spec.count_coefficients.data(), 3);
    model.count.standard_errors = Eigen::VectorXd::Zero(3);
    model.count.dispersion = spec.count_dispersion;

    model.type.layout = layout;
    model.type.branch_count = spec.branches;
    model.type.coefficients.resize(spec.branches - 1, 3);
    for (int j = 0; j < spec.branches - 1; ++j)
        for (int k = 0; k < 3; ++k)
            model.type.coefficients(j, k) =
                spec.type_coefficients[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
    model.type.standard_errors = Eigen::MatrixXd::Zero(spec.branches - 1, 3);

    model.severity.layout = layout;
    model.severity.branches.resize(static_cast<std::size_t>(spec.branches));
    for (int j = 0; j < spec.branches; ++j) {
        auto& b = model.severity.branches[static_cast<std::size_t>(j)];
        b.coefficients = Eigen::Map<const Eigen::VectorXd>(
            spec.severity_coefficients[static_cast<std::size_t>(j)].data(), 3);
        b.standard_errors = Eigen::VectorXd::Zero(3);
        b.shape = spec.severity_shapes[static_cast<std::size_t>(j)];
    }

    // One observation year drawn from the true model, for fitting exercises.
    const MemberRates rates = precompute_rates(model, p);
    for (int64_t i = 0; i < spec.members; ++i) {
        auto stream = rng::Stream::derive(seed, rng::Purpose::HistoryGen,
                                          static_cast<uint64_t>(i));
        const auto ii = static_cast<std::size_t>(i);
        const int64_t episodes =
            rng::negbin_draw(stream, rates.count_mean[ii], rates.dispersion);
        const std::span<const double> cum(&rates.type_cumprob[ii * rates.branch_count],
                                          rates.branch_count);
        for (int64_t e = 0; e < episodes; ++e) {
            const int j = rng::categorical_draw(stream, cum);
            const double shape = rates.severity_shape[static_cast<std::size_t>(j)];
            const double mean =
                rates.severity_mean[ii * rates.branch_count + static_cast<std::size_t>(j)];
            Episode ep;
            ep.member_row = static_cast<uint32_t>(i);
            ep.branch_id = j + 1;
            ep.expenditure = rng::gamma_draw(stream, shape) * (mean / shape);
            data.episodes.push_back(ep);
        }
    }
    return data;
}

}  // namespace hpsim::engine
