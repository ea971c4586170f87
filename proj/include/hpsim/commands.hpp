#ifndef HPSIM_COMMANDS_HPP
#define HPSIM_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace hpsim::cli {

// Command bodies shared by the binary and the test suites. Each writes its
// outputs plus a manifest into out_dir and throws typed errors
// (ValidationError / ConvergenceError / IoError) that main() maps to exit
// codes.

struct GenOptions {
    std::filesystem::path spec_file;
    uint64_t seed = 0;
    std::filesystem::path out_dir;
};
void cmd_gen(const GenOptions& opt);

struct FitOptions {
    std::filesystem::path portfolio_file;
    std::filesystem::path episodes_file;
    std::optional<std::filesystem::path> model_config;  // term lists, pooling
    int branches = 0;                                   // 0 = infer from episodes
    std::filesystem::path out_dir;
};
void cmd_fit(const FitOptions& opt);

struct ExpectOptions {
    std::filesystem::path model_file;
    std::filesystem::path portfolio_file;
    std::filesystem::path out_dir;
};
void cmd_expect(const ExpectOptions& opt);

struct AdjudicateOptions {
    std::filesystem::path episodes_file;
    std::filesystem::path plan_file;
    std::filesystem::path portfolio_file;  // supplies the family grouping
    int threads = 0;
    std::filesystem::path out_dir;
};
void cmd_adjudicate(const AdjudicateOptions& opt);

struct SimulateOptions {
    std::filesystem::path model_file;
    std::filesystem::path portfolio_file;
    std::filesystem::path plan_file;
    int64_t n_scenarios = 1000;
    uint64_t seed = 0;
    int threads = 0;
    bool keep_family_branch_detail = false;
    std::filesystem::path out_dir;
};
void cmd_simulate(const SimulateOptions& opt);

struct RiskOptions {
    std::filesystem::path distribution_file;
    double alpha = 0.995;
    std::string basis = "quantile_of_loss";
    int bootstrap_resamples = 200;
    uint64_t seed = 0;
    std::optional<double> initial_capital;
    std::filesystem::path out_dir;
};
void cmd_risk(const RiskOptions& opt);

}  // namespace hpsim::cli

#endif  // HPSIM_COMMANDS_HPP
