#include "hpsim/benefits.hpp"

#include <omp.h>

#include <cmath>
#include <string>

namespace hpsim::benefits {

double member_branch_reimbursement(std::span<const double> episode_payments) {
    double sum = 0.0;
    for (double v : episode_payments) {
        if (!(v >= 0.0)) throw ValidationError("episode payment must be >= 0");
        sum += v;
    }
    return sum;
}

FamilyBranchReimbursement family_branch_reimbursement(std::span<const double> member_amounts,
                                                      std::optional<double> family_cap) {
    FamilyBranchReimbursement out;
    double sum = 0.0;
    for (double v : member_amounts) {
        if (!(v >= 0.0)) throw ValidationError("member amount must be >= 0");
        sum += v;
    }
    if (family_cap && sum > *family_cap) {
        out.amount = *family_cap;
        out.capped = true;
    } else {
        out.amount = sum;
        out.capped = false;
    }
    return out;
}

double total_reimbursement(std::span<const FamilyBranchReimbursement> cells,
                           std::size_t family_count, std::size_t branch_count) {
    std::vector<char> seen(family_count * branch_count, 0);
    double total = 0.0;
    for (const auto& c : cells) {
        if (c.family_pos >= family_count || c.branch_id < 1 ||
            static_cast<std::size_t>(c.branch_id) > branch_count)
            throw ValidationError("reimbursement cell outside portfolio dimensions");
        const std::size_t key =
            static_cast<std::size_t>(c.family_pos) * branch_count +
            static_cast<std::size_t>(c.branch_id - 1);
        if (seen[key]) throw ValidationError("duplicate (family, branch) reimbursement cell");
        seen[key] = 1;
        total += c.amount;
    }
    return total;
}

AdjudicationResult adjudicate(std::span<const Episode> episodes, const FamilyIndex& families,
                              const PlanDesign& plan, std::size_t branch_count, int threads) {
    const std::size_t family_count = families.members_of_family.size();
    plan.validate(branch_count);

    // Counting sort by family, arrival order preserved within each family:
    // the per-cell accumulation order then matches a naive episode-by-episode
    // pass exactly.
    std::vector<uint32_t> fam_of_episode(episodes.size());
    std::vector<std::size_t> offsets(family_count + 1, 0);
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        const auto& ep = episodes[e];
        if (ep.member_row >= families.family_of_member.size())
            throw ValidationError("episode references member row out of range");
        if (ep.branch_id < 1 || static_cast<std::size_t>(ep.branch_id) > branch_count)
            throw ValidationError("episode branch id " + std::to_string(ep.branch_id) +
                                  " outside 1.." + std::to_string(branch_count));
        if (!(ep.expenditure >= 0.0))
            throw ValidationError("episode expenditure must be >= 0");
        fam_of_episode[e] = families.family_of_member[ep.member_row];
        ++offsets[fam_of_episode[e] + 1];
    }
    for (std::size_t h = 0; h < family_count; ++h) offsets[h + 1] += offsets[h];
    std::vector<uint32_t> order(episodes.size());
    {
        std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
        for (std::size_t e = 0; e < episodes.size(); ++e)
            order[cursor[fam_of_episode[e]]++] = static_cast<uint32_t>(e);
    }

    std::vector<std::vector<FamilyBranchReimbursement>> per_family(family_count);
    const int nthreads = threads > 0 ? threads : omp_get_max_threads();

#pragma omp parallel num_threads(nthreads)
    {
        std::vector<double> acc(branch_count, 0.0);
        std::vector<char> active(branch_count, 0);

#pragma omp for schedule(dynamic, 64)
        for (std::int64_t h = 0; h < static_cast<std::int64_t>(family_count); ++h) {
            const auto hh = static_cast<std::size_t>(h);
            for (std::size_t k = offsets[hh]; k < offsets[hh + 1]; ++k) {
                const auto& ep = episodes[order[k]];
                const auto j = static_cast<std::size_t>(ep.branch_id - 1);
                active[j] = 1;
                acc[j] += episode_reimbursement(ep.expenditure, plan.rules_for(ep.branch_id));
            }
            auto& cells = per_family[hh];
            for (std::size_t j = 0; j < branch_count; ++j) {
                if (!active[j]) continue;
                const auto& rules = plan.rules[j];
                FamilyBranchReimbursement cell;
                cell.family_pos = static_cast<uint32_t>(h);
                cell.branch_id = static_cast<int>(j) + 1;
                if (rules.family_cap && acc[j] > *rules.family_cap) {
                    cell.amount = *rules.family_cap;
                    cell.capped = true;
                } else {
                    cell.amount = acc[j];
                }
                cells.push_back(cell);
                acc[j] = 0.0;
                active[j] = 0;
            }
        }
    }

    AdjudicationResult result;
    std::size_t total_cells = 0;
    for (const auto& v : per_family) total_cells += v.size();
    result.cells.reserve(total_cells);
    for (const auto& v : per_family)
        result.cells.insert(result.cells.end(), v.begin(), v.end());
    for (const auto& c : result.cells) result.total += c.amount;
    return result;
}

}  // namespace hpsim::benefits
