#include "hpsim/risk.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hpsim/rng.hpp"

namespace hpsim::risk {

void RiskConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
    if (bootstrap_resamples < 0) throw ValidationError("bootstrap_resamples must be >= 0");
}

namespace {

std::size_t var_index(std::size_t n, double alpha) {
    // 1-based ceil(alpha * n), clamped into the sample.
    auto idx = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n)));
    idx = std::max<std::size_t>(idx, 1);
    return std::min(idx, n);
}

}  // namespace

double var(std::span<const double> sorted_sample, double alpha) {
    if (sorted_sample.empty()) throw ValidationError("empty distribution");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
    return sorted_sample[var_index(sorted_sample.size(), alpha) - 1];
}

double tvar(std::span<const double> sorted_sample, double alpha) {
    if (sorted_sample.empty()) throw ValidationError("empty distribution");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
    const std::size_t n = sorted_sample.size();
    const std::size_t idx = var_index(n, alpha);
    if (idx >= n) return sorted_sample[n - 1];
    double sum = 0.0;
    for (std::size_t i = idx; i < n; ++i) sum += sorted_sample[i];
    return sum / static_cast<double>(n - idx);
}

RiskReport scr(std::span<const double> profit_sample, const RiskConfig& config) {
    config.validate();
    if (profit_sample.empty()) throw ValidationError("empty distribution");

    const std::size_t n = profit_sample.size();
    std::vector<double> loss(n);
    for (std::size_t i = 0; i < n; ++i) loss[i] = -profit_sample[i];
    std::sort(loss.begin(), loss.end());

    double mean_loss = 0.0;
    for (double v : loss) mean_loss += v;
    mean_loss /= static_cast<double>(n);

    RiskReport report;
    report.alpha = config.alpha;
    report.basis = to_string(config.basis);
    report.seed = config.bootstrap_seed;
    report.mean_profit = -mean_loss;
    report.value_at_risk = var(loss, config.alpha);
    report.tail_value_at_risk = tvar(loss, config.alpha);
    report.scr = config.basis == ScrBasis::QuantileOfLoss
                     ? report.value_at_risk
                     : report.value_at_risk - mean_loss;

    if (config.bootstrap_resamples > 1) {
        const int b = config.bootstrap_resamples;
        std::vector<double> var_b(static_cast<std::size_t>(b));
        std::vector<double> tvar_b(static_cast<std::size_t>(b));
#pragma omp parallel
        {
            std::vector<double> resample(n);
#pragma omp for schedule(static)
            for (int rep = 0; rep < b; ++rep) {
                auto stream = rng::Stream::derive(config.bootstrap_seed,
                                                  rng::Purpose::Bootstrap,
                                                  static_cast<uint64_t>(rep));
                for (std::size_t i = 0; i < n; ++i) {
                    auto pick = static_cast<std::size_t>(stream.uniform01() *
                                                         static_cast<double>(n));
                    resample[i] = loss[std::min(pick, n - 1)];
                }
                std::sort(resample.begin(), resample.end());
                var_b[static_cast<std::size_t>(rep)] = var(resample, config.alpha);
                tvar_b[static_cast<std::size_t>(rep)] = tvar(resample, config.alpha);
            }
        }
        auto sd = [](const std::vector<double>& v) {
            double m = 0.0;
            for (double x : v) m += x;
            m /= static_cast<double>(v.size());
            double s2 = 0.0;
            for (double x : v) s2 += (x - m) * (x - m);
            return std::sqrt(s2 / static_cast<double>(v.size() - 1));
        };
        report.se_var = sd(var_b);
        report.se_tvar = sd(tvar_b);
    }
    return report;
}

std::string to_string(ScrBasis basis) {
    return basis == ScrBasis::QuantileOfLoss ? "quantile_of_loss" : "unexpected_loss";
}

ScrBasis scr_basis_from_string(const std::string& name) {
    if (name == "quantile_of_loss") return ScrBasis::QuantileOfLoss;
    if (name == "unexpected_loss") return ScrBasis::UnexpectedLoss;
    throw ValidationError("unknown scr basis '" + name + "'");
}

}  // namespace hpsim::risk
