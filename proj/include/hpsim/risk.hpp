#ifndef HPSIM_RISK_HPP
#define HPSIM_RISK_HPP

#include <cstdint>
#include <span>
#include <string>

#include "hpsim/domain.hpp"

namespace hpsim::risk {

enum class ScrBasis {
    QuantileOfLoss,  // SCR = VaR_alpha(loss)
    UnexpectedLoss,  // SCR = VaR_alpha(loss) - mean(loss)
};

struct RiskConfig {
    double alpha = 0.995;
    ScrBasis basis = ScrBasis::QuantileOfLoss;
    int bootstrap_resamples = 200;
    uint64_t bootstrap_seed = 0;

    void validate() const;
};

// Empirical quantile, higher order statistic convention: the value at
// 1-based index ceil(alpha * n) of the sorted sample.
double var(std::span<const double> sorted_sample, double alpha);

// Mean of the order statistics strictly above the VaR index; the sample
// maximum when that set is empty.
double tvar(std::span<const double> sorted_sample, double alpha);

struct RiskReport {
    double alpha = 0.995;
    std::string basis;
    double value_at_risk = 0.0;   // VaR_alpha of loss = -profit
    double tail_value_at_risk = 0.0;
    double scr = 0.0;
    double mean_profit = 0.0;
    double se_var = 0.0;          // bootstrap standard errors
    double se_tvar = 0.0;
    uint64_t seed = 0;
};

// profit_sample need not be sorted; losses are -profit per the loss
// convention. Bootstrap resamples run on dedicated substreams and merge in
// index order, so the report is reproducible for a fixed seed.
RiskReport scr(std::span<const double> profit_sample, const RiskConfig& config);

std::string to_string(ScrBasis basis);
ScrBasis scr_basis_from_string(const std::string& name);

}  // namespace hpsim::risk

#endif  // HPSIM_RISK_HPP
