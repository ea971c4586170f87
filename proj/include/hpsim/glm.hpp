#ifndef HPSIM_GLM_HPP
#define HPSIM_GLM_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "hpsim/design.hpp"
#include "hpsim/domain.hpp"
#include "hpsim/rng.hpp"

namespace hpsim::glm {

struct FitControl {
    int max_iterations = 100;
    double rel_loglik_tol = 1e-10;
    double gradient_tol = 1e-6;
    double shape_floor = 1e-2;   // lower bound for estimated Gamma shapes
    double dispersion_max = 1e8; // upper bound for NegBin size / Gamma shape
};

struct FitDiagnostics {
    double log_likelihood = 0.0;
    double gradient_max = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Negative binomial count regression, log link. dispersion is the NegBin
// size parameter (variance = mu + mu^2 / dispersion).
struct CountModel {
    DesignLayout layout;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    double dispersion = 1.0;
    FitDiagnostics diagnostics;
};

// Multinomial logit over branches 1..J; branch 1 is the reference with
// implicit zero coefficients. coefficients row j-2 belongs to branch j.
struct TypeModel {
    DesignLayout layout;
    int branch_count = 0;
    Eigen::MatrixXd coefficients;    // (J-1) x p
    Eigen::MatrixXd standard_errors; // (J-1) x p
    FitDiagnostics diagnostics;
};

// Per-branch Gamma regression, log link, one coefficient vector per branch.
// A pooled fit (common slopes, branch offsets) is materialized into the same
// per-branch representation.
struct SeverityBranch {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    double shape = 1.0;
    int64_t observations = 0;
    bool intercept_only_fallback = false;
};

struct SeverityModel {
    DesignLayout layout;
    bool pooled = false;
    std::vector<SeverityBranch> branches;  // size J, index j-1
    int64_t zero_expenditures_excluded = 0;
    FitDiagnostics diagnostics;
};

struct ThreePartModel {
    CovariateSchema schema;
    std::vector<Branch> branches;
    CountModel count;
    TypeModel type;
    SeverityModel severity;

    int branch_count() const { return static_cast<int>(branches.size()); }
};

// ---- Fitters (matrix-level, matching the module operations) ----

// IRLS with the NegBin size profiled by Pearson moment matching between
// sweeps. Throws ConvergenceError on non-convergence or a degenerate
// response, ValidationError on shape mismatches.
CountModel fit_count_model(const DesignLayout& layout, const Eigen::MatrixXd& design,
                           const Eigen::VectorXd& counts,
                           const std::optional<Eigen::VectorXd>& exposure = std::nullopt,
                           const FitControl& control = {});

// Newton with step halving on the multinomial log-likelihood. Labels are
// branch ids 1..J; every branch must be observed at least once.
TypeModel fit_type_model(const DesignLayout& layout, const Eigen::MatrixXd& design,
                         const std::vector<int>& branch_labels, int branch_count,
                         const FitControl& control = {});

// Gamma IRLS per branch (or pooled with branch offsets); shapes by the
// Pearson moment estimator. Branches with fewer observations than
// coefficients fall back to intercept-only.
SeverityModel fit_severity_model(const DesignLayout& layout, const Eigen::MatrixXd& design,
                                 const std::vector<int>& branch_labels,
                                 const Eigen::VectorXd& expenditures, int branch_count,
                                 bool pooled = false, const FitControl& control = {});

// ---- Prediction ----

double predict_count_mean(const CountModel& m, const CovariateRecord& x);
Eigen::VectorXd predict_type_probs(const TypeModel& m, const CovariateRecord& x);
double predict_severity_mean(const SeverityModel& m, const CovariateRecord& x, int branch_id);

// Linear-predictor forms used by the engine's vectorized precompute.
Eigen::VectorXd count_means(const CountModel& m, const Eigen::MatrixXd& design);
Eigen::MatrixXd type_probabilities(const TypeModel& m, const Eigen::MatrixXd& design);
Eigen::MatrixXd severity_means(const SeverityModel& m, const Eigen::MatrixXd& design);

// ---- Sampling ----

int64_t sample_count(const CountModel& m, const CovariateRecord& x, rng::Stream& stream);
int sample_type(const TypeModel& m, const CovariateRecord& x, rng::Stream& stream);
double sample_severity(const SeverityModel& m, const CovariateRecord& x, int branch_id,
                       rng::Stream& stream);

// ---- Portfolio-level orchestration ----

struct ThreePartConfig {
    std::vector<std::string> count_terms{"age", "sex"};
    std::vector<std::string> type_terms{"age", "sex"};
    std::vector<std::string> severity_terms{"age", "sex"};
    bool pooled_severity = false;
    FitControl control;
};

// Builds counts per member and per-episode designs from raw episodes, then
// fits all three parts. Branch count comes from portfolio.branches.
ThreePartModel fit_three_part_model(const Portfolio& portfolio,
                                    const std::vector<Episode>& episodes,
                                    const ThreePartConfig& config = {});

}  // namespace hpsim::glm

#endif  // HPSIM_GLM_HPP
