#include "hpsim/domain.hpp"

#include <sstream>
#include <unordered_set>

namespace hpsim {

int CovariateSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

void BranchRules::validate() const {
    if (!(deductible >= 0.0)) throw ValidationError("deductible must be >= 0");
    if (!(coinsurance >= 0.0 && coinsurance <= 1.0))
        throw ValidationError("coinsurance must be in [0,1]");
    if (episode_cap && !(*episode_cap > 0.0))
        throw ValidationError("episode cap must be > 0 when bounded");
    if (family_cap && !(*family_cap > 0.0))
        throw ValidationError("family cap must be > 0 when bounded");
}

BranchRules BranchRules::checked(double deductible, double coinsurance,
                                 std::optional<double> episode_cap,
                                 std::optional<double> family_cap) {
    BranchRules r{deductible, coinsurance, episode_cap, family_cap};
    r.validate();
    return r;
}

const BranchRules& PlanDesign::rules_for(int branch_id) const {
    if (branch_id < 1 || static_cast<std::size_t>(branch_id) > rules.size())
        throw ValidationError("unknown branch id " + std::to_string(branch_id));
    return rules[static_cast<std::size_t>(branch_id - 1)];
}

void PlanDesign::validate(std::size_t branch_count) const {
    if (!(contribution >= 0.0)) throw ValidationError("contribution must be >= 0");
    if (rules.size() != branch_count)
        throw ValidationError("plan must carry one rules entry per branch (expected " +
                              std::to_string(branch_count) + ", got " +
                              std::to_string(rules.size()) + ")");
    for (const auto& r : rules) r.validate();
}

CovariateRecord Portfolio::covariate_row(std::size_t row) const {
    CovariateRecord rec;
    rec.values.resize(schema.columns.size());
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        if (schema.columns[c].kind == CovariateKind::Numeric) {
            rec.values[c].number = covariates.columns[c].numeric[row];
        } else {
            rec.values[c].level = covariates.columns[c].level[row];
        }
    }
    return rec;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    os << violations.size() << " violation(s)";
    for (const auto& v : violations) os << "\n  [" << v.code << "] " << v.message;
    return os.str();
}

ValidationReport validate_portfolio(const Portfolio& p) {
    ValidationReport rep;
    auto add = [&rep](std::string code, std::string msg) {
        rep.violations.push_back({std::move(code), std::move(msg)});
    };

    if (p.members.empty()) add("empty portfolio", "portfolio has no members");
    if (p.families.empty() && !p.members.empty())
        add("empty families", "portfolio has no family groups");

    std::unordered_set<std::string> member_ids;
    for (const auto& m : p.members) {
        if (!member_ids.insert(m.member_id).second)
            add("duplicate member id", "member id '" + m.member_id + "' appears more than once");
    }

    std::unordered_map<std::string, std::size_t> family_pos;
    for (std::size_t f = 0; f < p.families.size(); ++f) {
        const auto& fam = p.families[f];
        if (!family_pos.emplace(fam.family_id, f).second)
            add("duplicate family id", "family id '" + fam.family_id + "' appears more than once");
        if (fam.member_rows.empty())
            add("empty family", "family '" + fam.family_id + "' has no members");
    }

    for (const auto& m : p.members) {
        if (family_pos.find(m.family_id) == family_pos.end())
            add("orphan family reference",
                "member '" + m.member_id + "' references unknown family '" + m.family_id + "'");
    }

    // Partition: each member row in exactly one family group, and the group
    // agrees with the member's own family_id.
    std::vector<int> seen(p.members.size(), 0);
    for (const auto& fam : p.families) {
        for (uint32_t row : fam.member_rows) {
            if (row >= p.members.size()) {
                add("bad member row", "family '" + fam.family_id + "' references row out of range");
                continue;
            }
            if (++seen[row] > 1)
                add("partition violation",
                    "member '" + p.members[row].member_id + "' appears in more than one family");
            if (p.members[row].family_id != fam.family_id)
                add("partition violation", "member '" + p.members[row].member_id +
                                               "' grouped under family '" + fam.family_id +
                                               "' but declares '" + p.members[row].family_id + "'");
        }
    }
    for (std::size_t row = 0; row < seen.size(); ++row) {
        if (seen[row] == 0 && family_pos.count(p.members[row].family_id))
            add("partition violation",
                "member '" + p.members[row].member_id + "' missing from its family group");
    }

    // Covariate schema conformance.
    if (p.covariates.columns.size() != p.schema.columns.size()) {
        add("covariate schema mismatch", "covariate table width differs from schema");
    } else {
        for (std::size_t c = 0; c < p.schema.columns.size(); ++c) {
            const auto& col = p.schema.columns[c];
            const auto& data = p.covariates.columns[c];
            const std::size_t n =
                col.kind == CovariateKind::Numeric ? data.numeric.size() : data.level.size();
            if (n != p.members.size()) {
                add("covariate schema mismatch",
                    "column '" + col.name + "' has " + std::to_string(n) + " rows, expected " +
                        std::to_string(p.members.size()));
                continue;
            }
            if (col.kind == CovariateKind::Categorical) {
                for (int32_t lv : data.level) {
                    if (lv < 0 || static_cast<std::size_t>(lv) >= col.levels.size()) {
                        add("covariate schema mismatch",
                            "column '" + col.name + "' holds a level index out of range");
                        break;
                    }
                }
            }
        }
    }

    for (std::size_t j = 0; j < p.branches.size(); ++j) {
        if (p.branches[j].branch_id != static_cast<int>(j) + 1) {
            add("branch ids not contiguous", "branch ids must be 1..J in order");
            break;
        }
    }

    return rep;
}

FamilyIndex group_by_family(const Portfolio& p) {
    ValidationReport rep = validate_portfolio(p);
    if (!rep.valid()) throw ValidationError("invalid portfolio: " + rep.summary());

    FamilyIndex idx;
    idx.members_of_family.resize(p.families.size());
    idx.family_of_member.assign(p.members.size(), 0);
    for (std::size_t f = 0; f < p.families.size(); ++f) {
        idx.family_pos.emplace(p.families[f].family_id, static_cast<uint32_t>(f));
        idx.members_of_family[f] = p.families[f].member_rows;
        for (uint32_t row : p.families[f].member_rows)
            idx.family_of_member[row] = static_cast<uint32_t>(f);
    }
    return idx;
}

}  // namespace hpsim
