#ifndef HPSIM_IO_HPP
#define HPSIM_IO_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hpsim/domain.hpp"
#include "hpsim/engine.hpp"
#include "hpsim/glm.hpp"
#include "hpsim/risk.hpp"

namespace hpsim::io {

// Parses a JSON document, mapping parse failures to IoError.
nlohmann::json load_json_file(const std::filesystem::path& path);

// ---- Files: portfolio / episodes / plan ----

// CSV `member_id,family_id,age,sex[,extra...]`. Families are derived in
// first-appearance order; extra columns are numeric when every value parses
// as a number, otherwise categorical with lexicographically sorted levels.
Portfolio load_portfolio_csv(const std::filesystem::path& path);
void save_portfolio_csv(const std::filesystem::path& path, const Portfolio& p);

// CSV `member_id,branch_id,expenditure`, resolved against the portfolio.
// Unknown member ids raise ValidationError listing the offenders.
std::vector<Episode> load_episodes_csv(const std::filesystem::path& path, const Portfolio& p);
void save_episodes_csv(const std::filesystem::path& path, const std::vector<Episode>& episodes,
                       const Portfolio& p);

struct PlanFile {
    PlanDesign plan;
    std::vector<Branch> branches;
};

// JSON plan design; `null` caps mean unbounded.
PlanFile load_plan_json(const std::filesystem::path& path);
void save_plan_json(const std::filesystem::path& path, const PlanDesign& plan,
                    const std::vector<Branch>& branches);

// ---- Fitted model ----

void save_model_json(const std::filesystem::path& path, const glm::ThreePartModel& model);
glm::ThreePartModel load_model_json(const std::filesystem::path& path);

// Per-model coefficients, standard errors and convergence diagnostics.
void save_fit_report_json(const std::filesystem::path& path, const glm::ThreePartModel& model);

// ---- Generator spec ----

engine::GeneratorSpec load_generator_spec_json(const std::filesystem::path& path);

// ---- Simulation outputs ----

void save_distribution_csv(const std::filesystem::path& path,
                           const engine::EmpiricalDistribution& dist);
engine::EmpiricalDistribution load_distribution_csv(const std::filesystem::path& path);

struct HistogramBin {
    double left = 0.0;
    double right = 0.0;
    int64_t count = 0;
};

// Freedman-Diaconis bin width; degenerate samples collapse to one bin.
std::vector<HistogramBin> freedman_diaconis_histogram(const std::vector<double>& sorted_values);
void save_histogram_csv(const std::filesystem::path& path,
                        const engine::EmpiricalDistribution& dist);

void save_simulation_summary_json(const std::filesystem::path& path,
                                  const engine::SimulationResult& result);

// ---- Expected-value report ----

void save_expected_report(const std::filesystem::path& json_path,
                          const std::filesystem::path& csv_path,
                          const engine::ExpectedExpenditureReport& report,
                          const Portfolio& portfolio);

// ---- Risk report ----

void save_risk_report_json(const std::filesystem::path& path, const risk::RiskReport& report,
                           std::optional<double> initial_capital = std::nullopt);

// ---- Adjudication output ----

void save_adjudication_csv(const std::filesystem::path& path,
                           const benefits::AdjudicationResult& result, const Portfolio& p);

// ---- Provenance ----

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_string(const std::string& data);

struct RunManifest {
    std::string command;
    std::string tool_version;
    uint64_t master_seed = 0;
    std::map<std::string, std::string> input_digests;  // filename -> sha256
    std::string config_digest;
    std::string created_utc;
};

// Builds and writes `manifest.json` into the output directory: command,
// input digests, effective config and its digest, seed, version, timestamp.
RunManifest write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                           uint64_t master_seed,
                           const std::vector<std::filesystem::path>& inputs,
                           const nlohmann::json& effective_config);

}  // namespace hpsim::io

#endif  // HPSIM_IO_HPP
