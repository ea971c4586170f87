#ifndef HPSIM_DOMAIN_HPP
#define HPSIM_DOMAIN_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace hpsim {

// Input data failed a precondition (bad file contents, malformed portfolio, ...).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An iterative fitter ran out of iterations or hit a singular system.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / parse failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CovariateKind { Numeric, Categorical };

struct CovariateColumn {
    std::string name;
    CovariateKind kind = CovariateKind::Numeric;
    // Categorical only. Sorted; levels[0] is the reference level.
    std::vector<std::string> levels;

    bool operator==(const CovariateColumn&) const = default;
};

// Declared once per portfolio; every member row must conform.
struct CovariateSchema {
    std::vector<CovariateColumn> columns;

    int index_of(const std::string& name) const;
    bool operator==(const CovariateSchema&) const = default;
};

// One covariate value; `number` is set for numeric columns, `level` (index
// into the column's level list) for categorical ones.
struct CovariateValue {
    double number = 0.0;
    int32_t level = -1;
};

// A single member's covariates, aligned to the schema columns.
struct CovariateRecord {
    std::vector<CovariateValue> values;
};

// Column-major covariate storage; row order follows Portfolio::members.
struct CovariateColumnData {
    std::vector<double> numeric;  // Numeric columns
    std::vector<int32_t> level;   // Categorical columns
};

struct CovariateTable {
    std::vector<CovariateColumnData> columns;
    std::size_t rows = 0;
};

struct Member {
    std::string member_id;
    std::string family_id;
};

struct Family {
    std::string family_id;
    std::vector<uint32_t> member_rows;  // positions in Portfolio::members
};

struct Branch {
    int branch_id = 0;  // 1..J, contiguous
    std::string name;
};

// Per-branch benefit parameters. Caps are explicit optionals: nullopt means
// unbounded, never a sentinel number.
struct BranchRules {
    double deductible = 0.0;                 // amount subtracted per episode
    double coinsurance = 0.0;                // fraction retained by the member
    std::optional<double> episode_cap;       // max plan payment per episode
    std::optional<double> family_cap;        // max plan payment per family-branch-year

    void validate() const;  // throws ValidationError
    static BranchRules checked(double deductible, double coinsurance,
                               std::optional<double> episode_cap,
                               std::optional<double> family_cap);
};

struct PlanDesign {
    double contribution = 0.0;        // flat annual contribution per member
    std::vector<BranchRules> rules;   // index j-1 holds branch j, 1..J

    const BranchRules& rules_for(int branch_id) const;
    void validate(std::size_t branch_count) const;
};

// One resolved episode: member is a row index into the portfolio.
struct Episode {
    uint32_t member_row = 0;
    int branch_id = 0;
    double expenditure = 0.0;
};

struct Portfolio {
    std::vector<Member> members;
    std::vector<Family> families;
    std::vector<Branch> branches;  // may be empty when unknown at load time
    CovariateSchema schema;
    CovariateTable covariates;

    std::size_t member_count() const { return members.size(); }
    std::size_t family_count() const { return families.size(); }
    std::size_t branch_count() const { return branches.size(); }

    CovariateRecord covariate_row(std::size_t row) const;
};

struct Violation {
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool valid() const { return violations.empty(); }
    std::string summary() const;
};

// Reports every violation found; findings are data, not failures.
ValidationReport validate_portfolio(const Portfolio& p);

// Family grouping with fast lookups both ways. Groups are disjoint and
// cover the member set exactly.
struct FamilyIndex {
    std::unordered_map<std::string, uint32_t> family_pos;   // family_id -> index
    std::vector<std::vector<uint32_t>> members_of_family;   // aligned to families
    std::vector<uint32_t> family_of_member;                 // aligned to members
};

// Throws ValidationError if the portfolio does not validate.
FamilyIndex group_by_family(const Portfolio& p);

}  // namespace hpsim

#endif  // HPSIM_DOMAIN_HPP
