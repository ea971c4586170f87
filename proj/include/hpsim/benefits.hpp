#ifndef HPSIM_BENEFITS_HPP
#define HPSIM_BENEFITS_HPP

#include <algorithm>
#include <span>
#include <vector>

#include "hpsim/domain.hpp"

namespace hpsim::benefits {

// Plan payment for one episode: the expenditure net of the larger of
// coinsurance share and deductible, capped per episode, floored at zero
// (an episode below the deductible never produces a negative payment).
inline double episode_reimbursement(double expenditure, const BranchRules& rules) {
    if (!(expenditure >= 0.0)) throw ValidationError("episode expenditure must be >= 0");
    double paid = expenditure -
                  std::max(rules.coinsurance * expenditure, rules.deductible);
    if (rules.episode_cap) paid = std::min(paid, *rules.episode_cap);
    return std::max(0.0, paid);
}

// Year total for one member and branch; plain left-to-right sum.
double member_branch_reimbursement(std::span<const double> episode_payments);

struct FamilyBranchReimbursement {
    uint32_t family_pos = 0;
    int branch_id = 0;
    double amount = 0.0;
    bool capped = false;
};

// Applies the per-family-per-branch cap to the summed member amounts.
FamilyBranchReimbursement family_branch_reimbursement(std::span<const double> member_amounts,
                                                      std::optional<double> family_cap);

// Plan total over per-(family, branch) cells; duplicate cells are rejected.
double total_reimbursement(std::span<const FamilyBranchReimbursement> cells,
                           std::size_t family_count, std::size_t branch_count);

// Batch adjudication of a full episode set against a plan. Episodes are
// grouped per family preserving arrival order, families are evaluated in
// parallel, and the cells come back sorted by (family, branch). The total
// sums the cells in that order.
struct AdjudicationResult {
    std::vector<FamilyBranchReimbursement> cells;  // only (h,j) with activity
    double total = 0.0;
};

AdjudicationResult adjudicate(std::span<const Episode> episodes, const FamilyIndex& families,
                              const PlanDesign& plan, std::size_t branch_count,
                              int threads = 0);

}  // namespace hpsim::benefits

#endif  // HPSIM_BENEFITS_HPP
