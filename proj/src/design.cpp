#include "hpsim/design.hpp"

namespace hpsim::glm {

std::vector<std::string> DesignLayout::labels() const {
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.label);
    return out;
}

DesignLayout DesignLayout::build(const CovariateSchema& schema,
                                 const std::vector<std::string>& terms) {
    DesignLayout layout;
    layout.schema = schema;
    layout.terms = terms;
    layout.columns.push_back({"(intercept)", -1, -1});
    for (const auto& term : terms) {
        const int c = schema.index_of(term);
        if (c < 0) throw ValidationError("unknown covariate term '" + term + "'");
        const auto& col = schema.columns[static_cast<std::size_t>(c)];
        if (col.kind == CovariateKind::Numeric) {
            layout.columns.push_back({col.name, c, -1});
        } else {
            // Reference level (index 0) is dropped.
            for (std::size_t lv = 1; lv < col.levels.size(); ++lv) {
                layout.columns.push_back(
                    {col.name + "=" + col.levels[lv], c, static_cast<int>(lv)});
            }
        }
    }
    return layout;
}

Eigen::MatrixXd DesignLayout::matrix(const CovariateTable& table) const {
    const auto n = static_cast<Eigen::Index>(table.rows);
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const auto& col = columns[k];
        const auto kk = static_cast<Eigen::Index>(k);
        if (col.schema_col < 0) {
            x.col(kk).setOnes();
        } else if (col.level < 0) {
            const auto& v = table.columns[static_cast<std::size_t>(col.schema_col)].numeric;
            for (Eigen::Index i = 0; i < n; ++i) x(i, kk) = v[static_cast<std::size_t>(i)];
        } else {
            const auto& v = table.columns[static_cast<std::size_t>(col.schema_col)].level;
            for (Eigen::Index i = 0; i < n; ++i)
                x(i, kk) = v[static_cast<std::size_t>(i)] == col.level ? 1.0 : 0.0;
        }
    }
    return x;
}

Eigen::MatrixXd DesignLayout::matrix_rows(const CovariateTable& table,
                                          std::span<const uint32_t> rows) const {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const auto& col = columns[k];
        const auto kk = static_cast<Eigen::Index>(k);
        if (col.schema_col < 0) {
            x.col(kk).setOnes();
        } else if (col.level < 0) {
            const auto& v = table.columns[static_cast<std::size_t>(col.schema_col)].numeric;
            for (Eigen::Index i = 0; i < n; ++i) x(i, kk) = v[rows[static_cast<std::size_t>(i)]];
        } else {
            const auto& v = table.columns[static_cast<std::size_t>(col.schema_col)].level;
            for (Eigen::Index i = 0; i < n; ++i)
                x(i, kk) = v[rows[static_cast<std::size_t>(i)]] == col.level ? 1.0 : 0.0;
        }
    }
    return x;
}

Eigen::RowVectorXd DesignLayout::row(const CovariateRecord& record) const {
    if (record.values.size() != schema.columns.size())
        throw ValidationError("covariate record does not match schema width");
    Eigen::RowVectorXd x(static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const auto& col = columns[k];
        const auto kk = static_cast<Eigen::Index>(k);
        if (col.schema_col < 0) {
            x(kk) = 1.0;
        } else {
            const auto& val = record.values[static_cast<std::size_t>(col.schema_col)];
            if (col.level < 0) {
                x(kk) = val.number;
            } else {
                const auto& levels =
                    schema.columns[static_cast<std::size_t>(col.schema_col)].levels;
                if (val.level < 0 || static_cast<std::size_t>(val.level) >= levels.size())
                    throw ValidationError("categorical value out of range for '" +
                                          columns[k].label + "'");
                x(kk) = val.level == col.level ? 1.0 : 0.0;
            }
        }
    }
    return x;
}

Eigen::MatrixXd build_design_matrix(const CovariateSchema& schema, const CovariateTable& table,
                                    const ModelSpec& spec) {
    return DesignLayout::build(schema, spec.terms).matrix(table);
}

}  // namespace hpsim::glm
