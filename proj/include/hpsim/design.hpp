#ifndef HPSIM_DESIGN_HPP
#define HPSIM_DESIGN_HPP

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "hpsim/domain.hpp"

namespace hpsim::glm {

enum class GlmFamily { NegBinomial, Multinomial, Gamma };

// Ordered term list; the intercept is always present and always first.
struct ModelSpec {
    GlmFamily family = GlmFamily::NegBinomial;
    std::vector<std::string> terms;  // covariate column names, in order

    bool operator==(const ModelSpec&) const = default;
};

// Expansion of a term list against a schema: one entry per design-matrix
// column. Numeric terms contribute one column, categorical terms one
// indicator per non-reference level (reference = first declared level).
struct DesignLayout {
    struct Column {
        std::string label;   // "(intercept)", "age", "sex=M", ...
        int schema_col = -1; // -1 for the intercept
        int level = -1;      // categorical level index, -1 for numeric
    };

    CovariateSchema schema;
    std::vector<std::string> terms;
    std::vector<Column> columns;

    std::size_t width() const { return columns.size(); }
    std::vector<std::string> labels() const;

    // Throws ValidationError on unknown term names.
    static DesignLayout build(const CovariateSchema& schema,
                              const std::vector<std::string>& terms);

    // One row per table row; first column all ones.
    Eigen::MatrixXd matrix(const CovariateTable& table) const;

    // One row per entry of `rows` (member covariates repeated per episode).
    Eigen::MatrixXd matrix_rows(const CovariateTable& table,
                                std::span<const uint32_t> rows) const;

    // Single-record row; throws ValidationError on schema mismatch.
    Eigen::RowVectorXd row(const CovariateRecord& record) const;
};

// Spec-level convenience: expand and evaluate in one step.
Eigen::MatrixXd build_design_matrix(const CovariateSchema& schema,
                                    const CovariateTable& table,
                                    const ModelSpec& spec);

}  // namespace hpsim::glm

#endif  // HPSIM_DESIGN_HPP
