#include <algorithm>
#include <cmath>
#include <sstream>

#include "hpsim/glm.hpp"

namespace hpsim::glm {

namespace {

constexpr double kEtaClamp = 30.0;  // exp() guard for the log link

Eigen::VectorXd clamped_exp(const Eigen::VectorXd& eta) {
    return eta.array().min(kEtaClamp).max(-kEtaClamp).exp();
}

double negbin_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double kappa) {
    double ll = 0.0;
    const auto n = y.size();
    const double lgk = std::lgamma(kappa);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double yi = y(i);
        const double mi = mu(i);
        ll += std::lgamma(yi + kappa) - lgk - std::lgamma(yi + 1.0) +
              kappa * std::log(kappa / (kappa + mi)) + yi * std::log(mi / (kappa + mi));
    }
    return ll;
}

// Pearson moment equation for the NegBin size: increasing in kappa.
double pearson_gap(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double kappa,
                   double dof) {
    double chi2 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double mi = mu(i);
        const double var = mi + mi * mi / kappa;
        const double r = y(i) - mi;
        chi2 += r * r / var;
    }
    return chi2 - dof;
}

double solve_pearson_kappa(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double dof,
                           double kappa_min, double kappa_max) {
    if (pearson_gap(y, mu, kappa_max, dof) < 0.0) return kappa_max;
    if (pearson_gap(y, mu, kappa_min, dof) > 0.0) return kappa_min;
    double lo = std::log(kappa_min);
    double hi = std::log(kappa_max);
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (pearson_gap(y, mu, std::exp(mid), dof) > 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

}  // namespace

CountModel fit_count_model(const DesignLayout& layout, const Eigen::MatrixXd& design,
                           const Eigen::VectorXd& counts,
                           const std::optional<Eigen::VectorXd>& exposure,
                           const FitControl& control) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (counts.size() != n) throw ValidationError("count vector length differs from design rows");
    if ((counts.array() < 0).any()) throw ValidationError("counts must be nonnegative");
    if (counts.maxCoeff() <= 0.0) throw ConvergenceError("degenerate response: all zeros");

    Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
    if (exposure) {
        if (exposure->size() != n)
            throw ValidationError("exposure vector length differs from design rows");
        if ((exposure->array() <= 0).any()) throw ValidationError("exposure must be positive");
        offset = exposure->array().log();
    }

    const double ybar = counts.mean();
    Eigen::VectorXd mu = (counts.array() + ybar) / 2.0;
    Eigen::VectorXd eta = mu.array().log();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double kappa = 1.0;
    const double dof = std::max<double>(static_cast<double>(n - p), 1.0);
    const double kappa_min = 1e-4;

    double ll = negbin_loglik(counts, mu, kappa);
    FitDiagnostics diag;
    Eigen::MatrixXd info(p, p);

    for (int iter = 1; iter <= control.max_iterations; ++iter) {
        diag.iterations = iter;

        // IRLS sweep at fixed kappa.
        Eigen::VectorXd w = mu.array() * kappa / (kappa + mu.array());
        Eigen::VectorXd z = eta - offset + ((counts - mu).array() / mu.array()).matrix();
        info = design.transpose() * w.asDiagonal() * design;
        const Eigen::VectorXd rhs = design.transpose() * (w.asDiagonal() * z);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success)
            throw ConvergenceError("singular weighted normal equations in count fit");
        const Eigen::VectorXd beta_new = ldlt.solve(rhs);

        // Step halving keeps the likelihood nondecreasing.
        Eigen::VectorXd step = beta_new - beta;
        double t = 1.0;
        double ll_try = ll;
        Eigen::VectorXd beta_try = beta;
        for (int half = 0; half < 40; ++half) {
            beta_try = beta + t * step;
            eta = design * beta_try + offset;
            mu = clamped_exp(eta);
            ll_try = negbin_loglik(counts, mu, kappa);
            if (std::isfinite(ll_try) && ll_try >= ll - 1e-12) break;
            t *= 0.5;
        }
        beta = beta_try;
        eta = design * beta + offset;
        mu = clamped_exp(eta);

        // Profile the size parameter by Pearson moment matching, damped so
        // the likelihood cannot drop.
        const double kappa_target =
            solve_pearson_kappa(counts, mu, dof, kappa_min, control.dispersion_max);
        double log_step = std::log(kappa_target / kappa);
        double kappa_new = kappa_target;
        double ll_kappa = negbin_loglik(counts, mu, kappa_new);
        const double ll_at_old = negbin_loglik(counts, mu, kappa);
        for (int half = 0; half < 30 && ll_kappa < ll_at_old - 1e-8; ++half) {
            log_step *= 0.5;
            kappa_new = kappa * std::exp(log_step);
            ll_kappa = negbin_loglik(counts, mu, kappa_new);
        }
        if (ll_kappa >= ll_at_old - 1e-8) kappa = kappa_new;

        const double ll_new = negbin_loglik(counts, mu, kappa);
        const Eigen::VectorXd score =
            design.transpose() *
            ((counts - mu).array() * kappa / (kappa + mu.array())).matrix();
        diag.gradient_max = score.cwiseAbs().maxCoeff();
        const double rel = std::fabs(ll_new - ll) / (1.0 + std::fabs(ll_new));
        ll = ll_new;
        if (rel < control.rel_loglik_tol || diag.gradient_max < control.gradient_tol) {
            diag.converged = true;
            break;
        }
    }
    if (!diag.converged)
        throw ConvergenceError("count model did not converge in " +
                               std::to_string(control.max_iterations) + " iterations");

    diag.log_likelihood = ll;

    CountModel model;
    model.layout = layout;
    model.coefficients = beta;
    model.dispersion = kappa;
    model.diagnostics = diag;

    Eigen::VectorXd w = mu.array() * kappa / (kappa + mu.array());
    info = design.transpose() * w.asDiagonal() * design;
    const Eigen::MatrixXd cov =
        Eigen::LDLT<Eigen::MatrixXd>(info).solve(Eigen::MatrixXd::Identity(p, p));
    model.standard_errors = cov.diagonal().array().max(0.0).sqrt();
    return model;
}

TypeModel fit_type_model(const DesignLayout& layout, const Eigen::MatrixXd& design,
                         const std::vector<int>& branch_labels, int branch_count,
                         const FitControl& control) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (static_cast<Eigen::Index>(branch_labels.size()) != n)
        throw ValidationError("label vector length differs from design rows");
    if (branch_count < 2) throw ValidationError("type model needs at least two branches");

    std::vector<int64_t> seen(static_cast<std::size_t>(branch_count), 0);
    for (int lbl : branch_labels) {
        if (lbl < 1 || lbl > branch_count)
            throw ValidationError("branch label " + std::to_string(lbl) + " outside 1.." +
                                  std::to_string(branch_count));
        ++seen[static_cast<std::size_t>(lbl - 1)];
    }
    std::ostringstream missing;
    bool any_missing = false;
    for (int j = 0; j < branch_count; ++j) {
        if (seen[static_cast<std::size_t>(j)] == 0) {
            missing << (any_missing ? ", " : "") << (j + 1);
            any_missing = true;
        }
    }
    if (any_missing)
        throw ValidationError("branches never observed: " + missing.str());

    const int jm1 = branch_count - 1;
    const Eigen::Index dim = static_cast<Eigen::Index>(jm1) * p;
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(jm1, p);

    auto loglik_and_probs = [&](const Eigen::MatrixXd& b, Eigen::MatrixXd& probs) {
        // probs: n x J, reference branch 1 has linear predictor 0.
        Eigen::MatrixXd eta = design * b.transpose();  // n x (J-1)
        double ll = 0.0;
        probs.resize(n, branch_count);
        for (Eigen::Index i = 0; i < n; ++i) {
            double m = 0.0;
            for (int j = 0; j < jm1; ++j) m = std::max(m, eta(i, j));
            double denom = std::exp(-m);
            for (int j = 0; j < jm1; ++j) denom += std::exp(eta(i, j) - m);
            const double lse = m + std::log(denom);
            probs(i, 0) = std::exp(-lse);
            for (int j = 0; j < jm1; ++j) probs(i, j + 1) = std::exp(eta(i, j) - lse);
            const int lbl = branch_labels[static_cast<std::size_t>(i)];
            ll += (lbl == 1 ? 0.0 : eta(i, lbl - 2)) - lse;
        }
        return ll;
    };

    Eigen::MatrixXd probs;
    double ll = loglik_and_probs(coef, probs);
    FitDiagnostics diag;
    Eigen::MatrixXd hess(dim, dim);

    for (int iter = 1; iter <= control.max_iterations; ++iter) {
        diag.iterations = iter;

        Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
        hess.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            const int lbl = branch_labels[static_cast<std::size_t>(i)];
            const Eigen::RowVectorXd xi = design.row(i);
            const Eigen::MatrixXd xxt = xi.transpose() * xi;
            for (int j = 0; j < jm1; ++j) {
                const double pj = probs(i, j + 1);
                const double indicator = (lbl == j + 2) ? 1.0 : 0.0;
                grad.segment(j * p, p) += (indicator - pj) * xi.transpose();
                for (int k = j; k < jm1; ++k) {
                    const double pk = probs(i, k + 1);
                    const double wjk = pj * ((j == k ? 1.0 : 0.0) - pk);
                    hess.block(j * p, k * p, p, p) += wjk * xxt;
                }
            }
        }
        // mirror upper blocks
        for (int j = 0; j < jm1; ++j)
            for (int k = 0; k < j; ++k)
                hess.block(j * p, k * p, p, p) = hess.block(k * p, j * p, p, p).transpose();

        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        if (ldlt.info() != Eigen::Success)
            throw ConvergenceError("singular information matrix in type fit");
        const Eigen::VectorXd delta = ldlt.solve(grad);

        double t = 1.0;
        Eigen::MatrixXd coef_try = coef;
        double ll_try = ll;
        for (int half = 0; half < 40; ++half) {
            coef_try = coef;
            for (int j = 0; j < jm1; ++j)
                coef_try.row(j) += t * delta.segment(j * p, p).transpose();
            ll_try = loglik_and_probs(coef_try, probs);
            if (std::isfinite(ll_try) && ll_try >= ll - 1e-12) break;
            t *= 0.5;
        }
        coef = coef_try;
        ll_try = loglik_and_probs(coef, probs);

        diag.gradient_max = grad.cwiseAbs().maxCoeff();
        const double rel = std::fabs(ll_try - ll) / (1.0 + std::fabs(ll_try));
        ll = ll_try;
        if (rel < control.rel_loglik_tol || diag.gradient_max < control.gradient_tol) {
            diag.converged = true;
            break;
        }
    }
    if (!diag.converged)
        throw ConvergenceError("type model did not converge in " +
                               std::to_string(control.max_iterations) + " iterations");

    diag.log_likelihood = ll;

    TypeModel model;
    model.layout = layout;
    model.branch_count = branch_count;
    model.coefficients = coef;
    model.diagnostics = diag;

    const Eigen::MatrixXd cov =
        Eigen::LDLT<Eigen::MatrixXd>(hess).solve(Eigen::MatrixXd::Identity(dim, dim));
    model.standard_errors.resize(jm1, p);
    for (int j = 0; j < jm1; ++j)
        for (Eigen::Index k = 0; k < p; ++k)
            model.standard_errors(j, k) = std::sqrt(std::max(0.0, cov(j * p + k, j * p + k)));
    return model;
}

namespace {

struct GammaFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    double loglik_kernel = 0.0;  // -sum(y/mu + log mu)
    double gradient_max = 0.0;
    double pearson_chi2 = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Gamma IRLS with log link; Fisher weights are constant, so X'X factors once.
GammaFit fit_gamma_log_link(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const FitControl& control) {
    const Eigen::Index p = x.cols();
    GammaFit fit;
    Eigen::VectorXd eta = y.array().log();
    Eigen::VectorXd mu = y;
    fit.beta = Eigen::VectorXd::Zero(p);

    const Eigen::MatrixXd xtx = x.transpose() * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    if (ldlt.info() != Eigen::Success)
        throw ConvergenceError("singular normal equations in severity fit");

    auto kernel = [&](const Eigen::VectorXd& m) {
        return -((y.array() / m.array()) + m.array().log()).sum();
    };
    double q = kernel(mu);

    for (int iter = 1; iter <= control.max_iterations; ++iter) {
        fit.iterations = iter;
        const Eigen::VectorXd z = eta + ((y - mu).array() / mu.array()).matrix();
        const Eigen::VectorXd beta_new = ldlt.solve(x.transpose() * z);

        Eigen::VectorXd step = beta_new - fit.beta;
        double t = 1.0;
        Eigen::VectorXd beta_try = fit.beta;
        double q_try = q;
        for (int half = 0; half < 40; ++half) {
            beta_try = fit.beta + t * step;
            eta = x * beta_try;
            mu = clamped_exp(eta);
            q_try = kernel(mu);
            if (std::isfinite(q_try) && q_try >= q - 1e-12) break;
            t *= 0.5;
        }
        fit.beta = beta_try;
        eta = x * fit.beta;
        mu = clamped_exp(eta);
        q_try = kernel(mu);

        const Eigen::VectorXd score = x.transpose() * ((y - mu).array() / mu.array()).matrix();
        fit.gradient_max = score.cwiseAbs().maxCoeff();
        const double rel = std::fabs(q_try - q) / (1.0 + std::fabs(q_try));
        q = q_try;
        if (rel < control.rel_loglik_tol || fit.gradient_max < control.gradient_tol) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged)
        throw ConvergenceError("severity model did not converge in " +
                               std::to_string(control.max_iterations) + " iterations");

    fit.loglik_kernel = q;
    fit.pearson_chi2 = (((y - mu).array() / mu.array()).square()).sum();
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    fit.se = cov.diagonal().array().max(0.0).sqrt();  // scaled by sqrt(phi) later
    return fit;
}

double gamma_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double shape) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        ll += shape * std::log(shape) - std::lgamma(shape) + (shape - 1.0) * std::log(y(i)) -
              shape * y(i) / mu(i) - shape * std::log(mu(i));
    }
    return ll;
}

}  // namespace

SeverityModel fit_severity_model(const DesignLayout& layout, const Eigen::MatrixXd& design,
                                 const std::vector<int>& branch_labels,
                                 const Eigen::VectorXd& expenditures, int branch_count,
                                 bool pooled, const FitControl& control) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (static_cast<Eigen::Index>(branch_labels.size()) != n || expenditures.size() != n)
        throw ValidationError("severity inputs differ in length");
    if ((expenditures.array() <= 0.0).any()) throw ValidationError("nonpositive severity");
    for (int lbl : branch_labels) {
        if (lbl < 1 || lbl > branch_count)
            throw ValidationError("branch label " + std::to_string(lbl) + " outside 1.." +
                                  std::to_string(branch_count));
    }

    SeverityModel model;
    model.layout = layout;
    model.pooled = pooled;
    model.branches.resize(static_cast<std::size_t>(branch_count));

    std::vector<std::vector<Eigen::Index>> rows_of(static_cast<std::size_t>(branch_count));
    for (Eigen::Index i = 0; i < n; ++i)
        rows_of[static_cast<std::size_t>(branch_labels[static_cast<std::size_t>(i)] - 1)]
            .push_back(i);

    auto subset = [&](const std::vector<Eigen::Index>& rows, Eigen::Index cols,
                      Eigen::MatrixXd& xs, Eigen::VectorXd& ys) {
        xs.resize(static_cast<Eigen::Index>(rows.size()), cols);
        ys.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            xs.row(static_cast<Eigen::Index>(k)) = design.row(rows[k]);
            ys(static_cast<Eigen::Index>(k)) = expenditures(rows[k]);
        }
    };

    auto branch_shape = [&](const std::vector<Eigen::Index>& rows,
                            const Eigen::VectorXd& coef, double p_eff) {
        double chi2 = 0.0;
        for (Eigen::Index i : rows) {
            const double mu = std::exp(std::min(kEtaClamp, design.row(i) * coef));
            const double r = (expenditures(i) - mu) / mu;
            chi2 += r * r;
        }
        const double dof = std::max(static_cast<double>(rows.size()) - p_eff, 1.0);
        if (chi2 <= 0.0) return control.dispersion_max;
        return std::clamp(dof / chi2, control.shape_floor, control.dispersion_max);
    };

    double total_ll = 0.0;
    double grad_max = 0.0;
    int iter_max = 0;

    if (!pooled) {
        const double global_mean = expenditures.mean();
        for (int j = 1; j <= branch_count; ++j) {
            auto& out = model.branches[static_cast<std::size_t>(j - 1)];
            const auto& rows = rows_of[static_cast<std::size_t>(j - 1)];
            out.observations = static_cast<int64_t>(rows.size());

            if (static_cast<Eigen::Index>(rows.size()) < p) {
                // Not enough data for the full term list: intercept-only.
                out.intercept_only_fallback = true;
                out.coefficients = Eigen::VectorXd::Zero(p);
                if (rows.empty()) {
                    out.coefficients(0) = std::log(global_mean);
                    out.standard_errors = Eigen::VectorXd::Zero(p);
                    out.shape = control.shape_floor;
                    continue;
                }
                double mean = 0.0;
                for (Eigen::Index i : rows) mean += expenditures(i);
                mean /= static_cast<double>(rows.size());
                out.coefficients(0) = std::log(mean);
                out.standard_errors = Eigen::VectorXd::Zero(p);
                out.shape = branch_shape(rows, out.coefficients, 1.0);
                Eigen::VectorXd mu_b(static_cast<Eigen::Index>(rows.size()));
                Eigen::VectorXd y_b(static_cast<Eigen::Index>(rows.size()));
                for (std::size_t k = 0; k < rows.size(); ++k) {
                    mu_b(static_cast<Eigen::Index>(k)) = mean;
                    y_b(static_cast<Eigen::Index>(k)) = expenditures(rows[k]);
                }
                total_ll += gamma_loglik(y_b, mu_b, out.shape);
                continue;
            }

            Eigen::MatrixXd xs;
            Eigen::VectorXd ys;
            subset(rows, p, xs, ys);
            GammaFit fit = fit_gamma_log_link(xs, ys, control);
            out.coefficients = fit.beta;
            out.shape = branch_shape(rows, fit.beta, static_cast<double>(p));
            out.standard_errors = fit.se / std::sqrt(out.shape);
            grad_max = std::max(grad_max, fit.gradient_max);
            iter_max = std::max(iter_max, fit.iterations);
            const Eigen::VectorXd mu_b = clamped_exp(xs * fit.beta);
            total_ll += gamma_loglik(ys, mu_b, out.shape);
        }
    } else {
        // Common slopes, per-branch offsets relative to branch 1; branches
        // with no rows keep a zero offset and are flagged.
        std::vector<int> offset_col(static_cast<std::size_t>(branch_count), -1);
        Eigen::Index extra = 0;
        for (int j = 2; j <= branch_count; ++j)
            if (!rows_of[static_cast<std::size_t>(j - 1)].empty())
                offset_col[static_cast<std::size_t>(j - 1)] = static_cast<int>(extra++);
        Eigen::MatrixXd xp(n, p + extra);
        xp.leftCols(p) = design;
        xp.rightCols(extra).setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            const int j = branch_labels[static_cast<std::size_t>(i)];
            const int c = offset_col[static_cast<std::size_t>(j - 1)];
            if (c >= 0) xp(i, p + c) = 1.0;
        }
        GammaFit fit = fit_gamma_log_link(xp, expenditures, control);
        grad_max = fit.gradient_max;
        iter_max = fit.iterations;

        for (int j = 1; j <= branch_count; ++j) {
            auto& out = model.branches[static_cast<std::size_t>(j - 1)];
            const auto& rows = rows_of[static_cast<std::size_t>(j - 1)];
            out.observations = static_cast<int64_t>(rows.size());
            out.coefficients = fit.beta.head(p);
            const int c = offset_col[static_cast<std::size_t>(j - 1)];
            if (c >= 0) out.coefficients(0) += fit.beta(p + c);
            out.intercept_only_fallback = rows.empty() && j != 1;
            out.standard_errors = fit.se.head(p);  // slope errors; offsets folded in
            out.shape = rows.empty() ? control.shape_floor
                                     : branch_shape(rows, out.coefficients,
                                                    static_cast<double>(p));
            if (!rows.empty()) {
                Eigen::VectorXd mu_b(static_cast<Eigen::Index>(rows.size()));
                Eigen::VectorXd y_b(static_cast<Eigen::Index>(rows.size()));
                for (std::size_t k = 0; k < rows.size(); ++k) {
                    mu_b(static_cast<Eigen::Index>(k)) = std::exp(
                        std::min(kEtaClamp, design.row(rows[k]) * out.coefficients));
                    y_b(static_cast<Eigen::Index>(k)) = expenditures(rows[k]);
                }
                total_ll += gamma_loglik(y_b, mu_b, out.shape);
            }
        }
        // Pearson scale for slope standard errors (pooled dispersion).
        double chi2 = 0.0;
        const Eigen::VectorXd mu_all = clamped_exp(xp * fit.beta);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double r = (expenditures(i) - mu_all(i)) / mu_all(i);
            chi2 += r * r;
        }
        const double phi = chi2 / std::max(static_cast<double>(n - (p + extra)), 1.0);
        for (auto& b : model.branches) b.standard_errors *= std::sqrt(phi);
    }

    model.diagnostics.log_likelihood = total_ll;
    model.diagnostics.gradient_max = grad_max;
    model.diagnostics.iterations = iter_max;
    model.diagnostics.converged = true;
    return model;
}

}  // namespace hpsim::glm
