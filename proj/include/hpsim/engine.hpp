#ifndef HPSIM_ENGINE_HPP
#define HPSIM_ENGINE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hpsim/benefits.hpp"
#include "hpsim/domain.hpp"
#include "hpsim/glm.hpp"
#include "hpsim/rng.hpp"

namespace hpsim::engine {

// ---- Closed-form expectations ----

struct ExpectedExpenditureReport {
    std::vector<double> per_member;                // E[expenditure] per member row
    std::vector<std::vector<double>> per_member_branch;  // [row][branch-1]
    std::vector<double> per_family;                // aligned to portfolio families
    double total = 0.0;
};

double expected_member_branch(const glm::ThreePartModel& model, const CovariateRecord& x,
                              int branch_id);

ExpectedExpenditureReport expected_totals(const glm::ThreePartModel& model,
                                          const Portfolio& portfolio);

// Total annual cash-in: flat contribution times member count.
double contributions(const PlanDesign& plan, const Portfolio& portfolio);

// ---- Monte Carlo simulation ----

// Per-member sampling parameters; fixed across scenarios, shared read-only
// by all workers.
struct MemberRates {
    std::size_t member_count = 0;
    std::size_t branch_count = 0;
    double dispersion = 1.0;                 // NegBin size
    std::vector<double> count_mean;          // r
    std::vector<double> type_cumprob;        // r x J, row-major cumulative
    std::vector<double> severity_mean;       // r x J, row-major
    std::vector<double> severity_shape;      // J
};

MemberRates precompute_rates(const glm::ThreePartModel& model, const Portfolio& portfolio);

struct SimulationConfig {
    int64_t n_scenarios = 1;
    uint64_t master_seed = 0;
    int threads = 0;  // 0 = all available
    bool keep_family_branch_detail = false;

    void validate() const;
};

struct ScenarioResult {
    int64_t scenario_index = 0;
    double expenditure = 0.0;    // total annual expenditure
    double reimbursement = 0.0;  // plan payout after all limits
    double profit = 0.0;         // contributions - reimbursement
    std::vector<benefits::FamilyBranchReimbursement> detail;  // only when requested
};

// Reusable per-worker buffers; cells are epoch-stamped so nothing needs
// clearing between scenarios.
struct ScenarioScratch {
    std::vector<double> expenditure_acc;
    std::vector<double> reimbursement_acc;
    std::vector<int64_t> stamp;
    std::vector<uint32_t> touched;
    int64_t epoch = 0;

    void ensure(std::size_t cells);
};

// One full replay of the portfolio year. Draw order per member is fixed:
// episode count first, then per episode a (branch, severity) pair. Streams
// derive from (master seed, scenario index, member row), so the result is a
// pure function of those plus the inputs.
ScenarioResult simulate_scenario(const MemberRates& rates, const FamilyIndex& families,
                                 const PlanDesign& plan, double total_contributions,
                                 uint64_t master_seed, int64_t scenario_index,
                                 ScenarioScratch& scratch, bool keep_detail = false);

struct EmpiricalDistribution {
    std::string label;
    uint64_t master_seed = 0;
    std::vector<double> values;           // sorted ascending
    std::vector<int64_t> scenario_index;  // provenance of each sorted value

    std::size_t size() const { return values.size(); }
};

struct SummaryStats {
    double mean = 0.0;
    double std_error = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct SimulationResult {
    int64_t n_scenarios = 0;
    uint64_t master_seed = 0;
    double total_contributions = 0.0;
    EmpiricalDistribution expenditure;
    EmpiricalDistribution reimbursement;
    EmpiricalDistribution profit;
    SummaryStats expenditure_stats;
    SummaryStats reimbursement_stats;
    SummaryStats profit_stats;
    std::vector<ScenarioResult> detail;  // only when requested
};

// OpenMP kernel: scenarios are distributed over workers, written into
// per-scenario slots, then summarized in index order. Output is bit-identical
// for any thread count.
SimulationResult run_simulation(const MemberRates& rates, const FamilyIndex& families,
                                const PlanDesign& plan, const Portfolio& portfolio,
                                const SimulationConfig& config);

// Serial reference: the plain loop the parallel kernel must reproduce
// bit-for-bit. Kept for tests and the benchmark.
SimulationResult run_simulation_reference(const MemberRates& rates, const FamilyIndex& families,
                                          const PlanDesign& plan, const Portfolio& portfolio,
                                          const SimulationConfig& config);

// ---- Synthetic data (verification at desk scale) ----

struct GeneratorSpec {
    int64_t members = 1000;
    int64_t families = 400;
    int branches = 3;
    int age_min = 18;
    int age_max = 90;
    double male_fraction = 0.5;
    // True parameters over the design [ (intercept), age, sex=M ].
    std::vector<double> count_coefficients{-0.3, 0.01, 0.1};
    double count_dispersion = 1.5;
    std::vector<std::vector<double>> type_coefficients;     // (J-1) x 3
    std::vector<std::vector<double>> severity_coefficients; // J x 3
    std::vector<double> severity_shapes;                    // J
    std::vector<std::string> branch_names;                  // optional, size J

    void validate() const;
};

struct SyntheticData {
    Portfolio portfolio;
    std::vector<Episode> episodes;   // one simulated observation year
    glm::ThreePartModel true_model;  // the generating parameters
};

SyntheticData generate_synthetic_portfolio(const GeneratorSpec& spec, uint64_t seed);

}  // namespace hpsim::engine

#endif  // HPSIM_ENGINE_HPP
