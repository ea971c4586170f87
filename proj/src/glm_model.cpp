#include <cmath>

#include "hpsim/glm.hpp"

namespace hpsim::glm {

double predict_count_mean(const CountModel& m, const CovariateRecord& x) {
    const double eta = m.layout.row(x) * m.coefficients;
    return std::exp(eta);
}

Eigen::VectorXd predict_type_probs(const TypeModel& m, const CovariateRecord& x) {
    const Eigen::RowVectorXd xi = m.layout.row(x);
    Eigen::VectorXd probs(m.branch_count);
    const int jm1 = m.branch_count - 1;
    double mx = 0.0;
    Eigen::VectorXd eta(jm1);
    for (int j = 0; j < jm1; ++j) {
        eta(j) = xi * m.coefficients.row(j).transpose();
        mx = std::max(mx, eta(j));
    }
    double denom = std::exp(-mx);
    for (int j = 0; j < jm1; ++j) denom += std::exp(eta(j) - mx);
    const double lse = mx + std::log(denom);
    probs(0) = std::exp(-lse);
    for (int j = 0; j < jm1; ++j) probs(j + 1) = std::exp(eta(j) - lse);
    return probs;
}

double predict_severity_mean(const SeverityModel& m, const CovariateRecord& x, int branch_id) {
    if (branch_id < 1 || static_cast<std::size_t>(branch_id) > m.branches.size())
        throw ValidationError("unknown branch id " + std::to_string(branch_id));
    const double eta =
        m.layout.row(x) * m.branches[static_cast<std::size_t>(branch_id - 1)].coefficients;
    return std::exp(eta);
}

Eigen::VectorXd count_means(const CountModel& m, const Eigen::MatrixXd& design) {
    return (design * m.coefficients).array().exp();
}

Eigen::MatrixXd type_probabilities(const TypeModel& m, const Eigen::MatrixXd& design) {
    const Eigen::Index n = design.rows();
    const int jm1 = m.branch_count - 1;
    Eigen::MatrixXd eta = design * m.coefficients.transpose();  // n x (J-1)
    Eigen::MatrixXd probs(n, m.branch_count);
    for (Eigen::Index i = 0; i < n; ++i) {
        double mx = 0.0;
        for (int j = 0; j < jm1; ++j) mx = std::max(mx, eta(i, j));
        double denom = std::exp(-mx);
        for (int j = 0; j < jm1; ++j) denom += std::exp(eta(i, j) - mx);
        const double lse = mx + std::log(denom);
        probs(i, 0) = std::exp(-lse);
        for (int j = 0; j < jm1; ++j) probs(i, j + 1) = std::exp(eta(i, j) - lse);
    }
    return probs;
}

Eigen::MatrixXd severity_means(const SeverityModel& m, const Eigen::MatrixXd& design) {
    const Eigen::Index n = design.rows();
    const auto branch_count = static_cast<Eigen::Index>(m.branches.size());
    Eigen::MatrixXd means(n, branch_count);
    for (Eigen::Index j = 0; j < branch_count; ++j)
        means.col(j) =
            (design * m.branches[static_cast<std::size_t>(j)].coefficients).array().exp();
    return means;
}

int64_t sample_count(const CountModel& m, const CovariateRecord& x, rng::Stream& stream) {
    return rng::negbin_draw(stream, predict_count_mean(m, x), m.dispersion);
}

int sample_type(const TypeModel& m, const CovariateRecord& x, rng::Stream& stream) {
    const Eigen::VectorXd probs = predict_type_probs(m, x);
    std::vector<double> cum(static_cast<std::size_t>(probs.size()));
    double acc = 0.0;
    for (Eigen::Index j = 0; j < probs.size(); ++j) {
        acc += probs(j);
        cum[static_cast<std::size_t>(j)] = acc;
    }
    return rng::categorical_draw(stream, cum) + 1;
}

double sample_severity(const SeverityModel& m, const CovariateRecord& x, int branch_id,
                       rng::Stream& stream) {
    const double mean = predict_severity_mean(m, x, branch_id);
    const double shape = m.branches[static_cast<std::size_t>(branch_id - 1)].shape;
    return rng::gamma_draw(stream, shape) * (mean / shape);
}

ThreePartModel fit_three_part_model(const Portfolio& portfolio,
                                    const std::vector<Episode>& episodes,
                                    const ThreePartConfig& config) {
    const ValidationReport rep = validate_portfolio(portfolio);
    if (!rep.valid()) throw ValidationError("invalid portfolio: " + rep.summary());
    if (portfolio.branches.empty())
        throw ValidationError("portfolio carries no branch list; cannot fit");
    const int branch_count = static_cast<int>(portfolio.branches.size());
    const auto r = portfolio.member_count();

    Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r));
    std::vector<uint32_t> episode_rows;
    std::vector<int> labels;
    episode_rows.reserve(episodes.size());
    labels.reserve(episodes.size());
    for (const auto& e : episodes) {
        if (e.member_row >= r) throw ValidationError("episode references member row out of range");
        if (e.branch_id < 1 || e.branch_id > branch_count)
            throw ValidationError("episode branch id " + std::to_string(e.branch_id) +
                                  " outside 1.." + std::to_string(branch_count));
        if (!(e.expenditure >= 0.0)) throw ValidationError("episode expenditure must be >= 0");
        counts(static_cast<Eigen::Index>(e.member_row)) += 1.0;
        episode_rows.push_back(e.member_row);
        labels.push_back(e.branch_id);
    }

    ThreePartModel model;
    model.schema = portfolio.schema;
    model.branches = portfolio.branches;

    const DesignLayout count_layout = DesignLayout::build(portfolio.schema, config.count_terms);
    model.count = fit_count_model(count_layout, count_layout.matrix(portfolio.covariates),
                                  counts, std::nullopt, config.control);

    const DesignLayout type_layout = DesignLayout::build(portfolio.schema, config.type_terms);
    model.type = fit_type_model(type_layout,
                                type_layout.matrix_rows(portfolio.covariates, episode_rows),
                                labels, branch_count, config.control);

    // Zero-cost episodes carry no severity information; the count model
    // already owns utilization.
    std::vector<uint32_t> sev_rows;
    std::vector<int> sev_labels;
    std::vector<double> sev_y;
    int64_t zeros = 0;
    for (const auto& e : episodes) {
        if (e.expenditure > 0.0) {
            sev_rows.push_back(e.member_row);
            sev_labels.push_back(e.branch_id);
            sev_y.push_back(e.expenditure);
        } else {
            ++zeros;
        }
    }
    const DesignLayout sev_layout = DesignLayout::build(portfolio.schema, config.severity_terms);
    model.severity = fit_severity_model(
        sev_layout, sev_layout.matrix_rows(portfolio.covariates, sev_rows), sev_labels,
        Eigen::Map<const Eigen::VectorXd>(sev_y.data(), static_cast<Eigen::Index>(sev_y.size())),
        branch_count, config.pooled_severity, config.control);
    model.severity.zero_expenditures_excluded = zeros;
    return model;
}

}  // namespace hpsim::glm
