#include "hpsim/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "hpsim/version.hpp"

namespace hpsim::io {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) {
        if (cur.back() == '\r') cur.pop_back();
        lines.push_back(cur);
    }
    return lines;
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

bool try_parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e && !s.empty();
}

double parse_double(const std::string& s, const std::string& what, std::size_t line_no) {
    double v;
    if (!try_parse_double(s, v))
        throw ValidationError("line " + std::to_string(line_no) + ": cannot parse " + what +
                              " from '" + s + "'");
    return v;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

json load_json_file(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::exception& ex) {
        throw IoError("bad JSON in '" + path.string() + "': " + ex.what());
    }
}

// ---- digests ----

namespace {

std::string sha256_bytes(const unsigned char* data, std::size_t len) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data, len) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &digest_len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw IoError("sha256 failure");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * digest_len);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

}  // namespace

std::string sha256_string(const std::string& data) {
    return sha256_bytes(reinterpret_cast<const unsigned char*>(data.data()), data.size());
}

std::string sha256_file(const std::filesystem::path& path) {
    return sha256_string(read_text(path));
}

// ---- portfolio ----

Portfolio load_portfolio_csv(const std::filesystem::path& path) {
    const auto lines = split_lines(read_text(path));
    if (lines.empty()) throw ValidationError("portfolio file '" + path.string() + "' is empty");

    const auto header = split_csv_row(lines[0]);
    if (header.size() < 4 || header[0] != "member_id" || header[1] != "family_id" ||
        header[2] != "age" || header[3] != "sex")
        throw ValidationError("portfolio header must start 'member_id,family_id,age,sex'");

    Portfolio p;
    p.schema.columns.push_back({"age", CovariateKind::Numeric, {}});
    p.schema.columns.push_back({"sex", CovariateKind::Categorical, {"F", "M"}});
    const std::size_t n_extra = header.size() - 4;
    std::vector<std::vector<std::string>> extra_raw(n_extra);

    std::vector<std::vector<std::string>> rows;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        auto fields = split_csv_row(lines[ln]);
        if (fields.size() != header.size())
            throw ValidationError("line " + std::to_string(ln + 1) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        rows.push_back(std::move(fields));
    }

    const std::size_t r = rows.size();
    p.covariates.rows = r;
    p.covariates.columns.resize(2 + n_extra);
    p.covariates.columns[0].numeric.resize(r);
    p.covariates.columns[1].level.resize(r);
    p.members.resize(r);

    std::unordered_map<std::string, uint32_t> family_pos;
    for (std::size_t i = 0; i < r; ++i) {
        const auto& f = rows[i];
        const std::size_t line_no = i + 2;
        p.members[i].member_id = f[0];
        p.members[i].family_id = f[1];
        const double age = parse_double(f[2], "age", line_no);
        if (!(age >= 0.0))
            throw ValidationError("line " + std::to_string(line_no) + ": age must be >= 0");
        p.covariates.columns[0].numeric[i] = age;
        if (f[3] == "F")
            p.covariates.columns[1].level[i] = 0;
        else if (f[3] == "M")
            p.covariates.columns[1].level[i] = 1;
        else
            throw ValidationError("line " + std::to_string(line_no) + ": sex must be M or F");
        for (std::size_t c = 0; c < n_extra; ++c) extra_raw[c].push_back(f[4 + c]);

        auto [it, inserted] =
            family_pos.emplace(f[1], static_cast<uint32_t>(p.families.size()));
        if (inserted) p.families.push_back({f[1], {}});
        p.families[it->second].member_rows.push_back(static_cast<uint32_t>(i));
    }

    // Extra columns: numeric when every value parses, else categorical with
    // sorted levels (first level is the reference).
    for (std::size_t c = 0; c < n_extra; ++c) {
        CovariateColumn col;
        col.name = header[4 + c];
        std::vector<double> numeric(r);
        bool all_numeric = true;
        for (std::size_t i = 0; i < r && all_numeric; ++i)
            all_numeric = try_parse_double(extra_raw[c][i], numeric[i]);
        if (all_numeric) {
            col.kind = CovariateKind::Numeric;
            p.covariates.columns[2 + c].numeric = std::move(numeric);
        } else {
            col.kind = CovariateKind::Categorical;
            std::set<std::string> levels(extra_raw[c].begin(), extra_raw[c].end());
            col.levels.assign(levels.begin(), levels.end());
            auto& data = p.covariates.columns[2 + c].level;
            data.resize(r);
            for (std::size_t i = 0; i < r; ++i) {
                const auto it = std::lower_bound(col.levels.begin(), col.levels.end(),
                                                 extra_raw[c][i]);
                data[i] = static_cast<int32_t>(it - col.levels.begin());
            }
        }
        p.schema.columns.push_back(std::move(col));
    }
    return p;
}

void save_portfolio_csv(const std::filesystem::path& path, const Portfolio& p) {
    std::ostringstream out;
    out << "member_id,family_id,age,sex";
    for (std::size_t c = 2; c < p.schema.columns.size(); ++c)
        out << ',' << p.schema.columns[c].name;
    out << '\n';
    for (std::size_t i = 0; i < p.members.size(); ++i) {
        out << p.members[i].member_id << ',' << p.members[i].family_id << ','
            << fmt_double(p.covariates.columns[0].numeric[i]) << ','
            << (p.covariates.columns[1].level[i] == 1 ? 'M' : 'F');
        for (std::size_t c = 2; c < p.schema.columns.size(); ++c) {
            const auto& col = p.schema.columns[c];
            out << ',';
            if (col.kind == CovariateKind::Numeric)
                out << fmt_double(p.covariates.columns[c].numeric[i]);
            else
                out << col.levels[static_cast<std::size_t>(p.covariates.columns[c].level[i])];
        }
        out << '\n';
    }
    write_text(path, out.str());
}

// ---- episodes ----

std::vector<Episode> load_episodes_csv(const std::filesystem::path& path, const Portfolio& p) {
    const auto lines = split_lines(read_text(path));
    if (lines.empty()) throw ValidationError("episodes file '" + path.string() + "' is empty");
    const auto header = split_csv_row(lines[0]);
    if (header.size() != 3 || header[0] != "member_id" || header[1] != "branch_id" ||
        header[2] != "expenditure")
        throw ValidationError("episodes header must be 'member_id,branch_id,expenditure'");

    std::unordered_map<std::string, uint32_t> row_of;
    row_of.reserve(p.members.size());
    for (std::size_t i = 0; i < p.members.size(); ++i)
        row_of.emplace(p.members[i].member_id, static_cast<uint32_t>(i));

    std::vector<Episode> episodes;
    std::set<std::string> unknown;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        const auto f = split_csv_row(lines[ln]);
        if (f.size() != 3)
            throw ValidationError("line " + std::to_string(ln + 1) + ": expected 3 fields");
        const auto it = row_of.find(f[0]);
        if (it == row_of.end()) {
            unknown.insert(f[0]);
            continue;
        }
        Episode e;
        e.member_row = it->second;
        e.branch_id = static_cast<int>(parse_double(f[1], "branch_id", ln + 1));
        e.expenditure = parse_double(f[2], "expenditure", ln + 1);
        if (e.branch_id < 1)
            throw ValidationError("line " + std::to_string(ln + 1) + ": branch_id must be >= 1");
        if (!(e.expenditure >= 0.0))
            throw ValidationError("line " + std::to_string(ln + 1) +
                                  ": expenditure must be >= 0");
        episodes.push_back(e);
    }
    if (!unknown.empty()) {
        std::string msg = "episodes reference unknown member ids:";
        for (const auto& id : unknown) msg += " '" + id + "'";
        throw ValidationError(msg);
    }
    return episodes;
}

void save_episodes_csv(const std::filesystem::path& path, const std::vector<Episode>& episodes,
                       const Portfolio& p) {
    std::ostringstream out;
    out << "member_id,branch_id,expenditure\n";
    for (const auto& e : episodes) {
        out << p.members[e.member_row].member_id << ',' << e.branch_id << ','
            << fmt_double(e.expenditure) << '\n';
    }
    write_text(path, out.str());
}

// ---- plan ----

PlanFile load_plan_json(const std::filesystem::path& path) {
    const json doc = load_json_file(path);
    PlanFile file;
    try {
        file.plan.contribution = doc.at("contribution").get<double>();
        const auto& branches = doc.at("branches");
        file.plan.rules.resize(branches.size());
        file.branches.resize(branches.size());
        for (const auto& b : branches) {
            const int id = b.at("id").get<int>();
            if (id < 1 || static_cast<std::size_t>(id) > branches.size())
                throw ValidationError("plan branch ids must be 1..J");
            auto& rules = file.plan.rules[static_cast<std::size_t>(id - 1)];
            rules.deductible = b.at("deductible").get<double>();
            rules.coinsurance = b.at("coinsurance").get<double>();
            if (!b.at("episode_oop_max").is_null())
                rules.episode_cap = b.at("episode_oop_max").get<double>();
            if (!b.at("family_oop_max").is_null())
                rules.family_cap = b.at("family_oop_max").get<double>();
            file.branches[static_cast<std::size_t>(id - 1)] = {
                id, b.value("name", "branch " + std::to_string(id))};
        }
    } catch (const json::exception& ex) {
        throw ValidationError("bad plan file '" + path.string() + "': " + ex.what());
    }
    for (std::size_t j = 0; j < file.branches.size(); ++j)
        if (file.branches[j].branch_id != static_cast<int>(j) + 1)
            throw ValidationError("plan branch ids must cover 1..J exactly once");
    file.plan.validate(file.plan.rules.size());
    return file;
}

void save_plan_json(const std::filesystem::path& path, const PlanDesign& plan,
                    const std::vector<Branch>& branches) {
    json doc;
    doc["contribution"] = plan.contribution;
    doc["branches"] = json::array();
    for (std::size_t j = 0; j < plan.rules.size(); ++j) {
        const auto& r = plan.rules[j];
        json b;
        b["id"] = static_cast<int>(j) + 1;
        b["name"] = j < branches.size() ? branches[j].name : "branch " + std::to_string(j + 1);
        b["deductible"] = r.deductible;
        b["coinsurance"] = r.coinsurance;
        b["episode_oop_max"] = r.episode_cap ? json(*r.episode_cap) : json(nullptr);
        b["family_oop_max"] = r.family_cap ? json(*r.family_cap) : json(nullptr);
        doc["branches"].push_back(b);
    }
    write_text(path, doc.dump(2) + "\n");
}

// ---- model ----

namespace {

json schema_to_json(const CovariateSchema& schema) {
    json arr = json::array();
    for (const auto& col : schema.columns) {
        json c;
        c["name"] = col.name;
        c["kind"] = col.kind == CovariateKind::Numeric ? "numeric" : "categorical";
        if (col.kind == CovariateKind::Categorical) c["levels"] = col.levels;
        arr.push_back(c);
    }
    return arr;
}

CovariateSchema schema_from_json(const json& arr) {
    CovariateSchema schema;
    for (const auto& c : arr) {
        CovariateColumn col;
        col.name = c.at("name").get<std::string>();
        const std::string kind = c.at("kind").get<std::string>();
        if (kind == "numeric") {
            col.kind = CovariateKind::Numeric;
        } else if (kind == "categorical") {
            col.kind = CovariateKind::Categorical;
            col.levels = c.at("levels").get<std::vector<std::string>>();
        } else {
            throw ValidationError("unknown covariate kind '" + kind + "'");
        }
        schema.columns.push_back(std::move(col));
    }
    return schema;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) arr.push_back(vector_to_json(m.row(i)));
    return arr;
}

Eigen::MatrixXd matrix_from_json(const json& arr, Eigen::Index cols_hint) {
    const auto rows = static_cast<Eigen::Index>(arr.size());
    Eigen::MatrixXd m(rows, rows > 0 ? static_cast<Eigen::Index>(arr[0].size()) : cols_hint);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Eigen::VectorXd row = vector_from_json(arr[static_cast<std::size_t>(i)]);
        if (row.size() != m.cols()) throw ValidationError("ragged coefficient matrix");
        m.row(i) = row;
    }
    return m;
}

json diagnostics_to_json(const glm::FitDiagnostics& d) {
    return json{{"log_likelihood", d.log_likelihood},
                {"gradient_max", d.gradient_max},
                {"iterations", d.iterations},
                {"converged", d.converged}};
}

glm::FitDiagnostics diagnostics_from_json(const json& j) {
    glm::FitDiagnostics d;
    d.log_likelihood = j.value("log_likelihood", 0.0);
    d.gradient_max = j.value("gradient_max", 0.0);
    d.iterations = j.value("iterations", 0);
    d.converged = j.value("converged", false);
    return d;
}

}  // namespace

void save_model_json(const std::filesystem::path& path, const glm::ThreePartModel& model) {
    json doc;
    doc["format_version"] = 1;
    doc["schema"] = schema_to_json(model.schema);
    doc["branches"] = json::array();
    for (const auto& b : model.branches)
        doc["branches"].push_back(json{{"id", b.branch_id}, {"name", b.name}});

    doc["count"] = {{"terms", model.count.layout.terms},
                    {"coefficients", vector_to_json(model.count.coefficients)},
                    {"standard_errors", vector_to_json(model.count.standard_errors)},
                    {"dispersion", model.count.dispersion},
                    {"diagnostics", diagnostics_to_json(model.count.diagnostics)}};

    doc["type"] = {{"terms", model.type.layout.terms},
                   {"reference_branch", 1},
                   {"coefficients", matrix_to_json(model.type.coefficients)},
                   {"standard_errors", matrix_to_json(model.type.standard_errors)},
                   {"diagnostics", diagnostics_to_json(model.type.diagnostics)}};

    json sev_branches = json::array();
    for (std::size_t j = 0; j < model.severity.branches.size(); ++j) {
        const auto& b = model.severity.branches[j];
        sev_branches.push_back(json{{"branch", static_cast<int>(j) + 1},
                                    {"coefficients", vector_to_json(b.coefficients)},
                                    {"standard_errors", vector_to_json(b.standard_errors)},
                                    {"shape", b.shape},
                                    {"observations", b.observations},
                                    {"intercept_only_fallback", b.intercept_only_fallback}});
    }
    doc["severity"] = {{"terms", model.severity.layout.terms},
                       {"pooled", model.severity.pooled},
                       {"zero_expenditures_excluded", model.severity.zero_expenditures_excluded},
                       {"branches", sev_branches},
                       {"diagnostics", diagnostics_to_json(model.severity.diagnostics)}};
    write_text(path, doc.dump(2) + "\n");
}

glm::ThreePartModel load_model_json(const std::filesystem::path& path) {
    const json doc = load_json_file(path);
    glm::ThreePartModel model;
    try {
        if (doc.at("format_version").get<int>() != 1)
            throw ValidationError("unsupported model format_version");
        model.schema = schema_from_json(doc.at("schema"));
        for (const auto& b : doc.at("branches"))
            model.branches.push_back(
                {b.at("id").get<int>(), b.at("name").get<std::string>()});

        const auto& count = doc.at("count");
        model.count.layout = glm::DesignLayout::build(
            model.schema, count.at("terms").get<std::vector<std::string>>());
        model.count.coefficients = vector_from_json(count.at("coefficients"));
        model.count.standard_errors = vector_from_json(count.at("standard_errors"));
        model.count.dispersion = count.at("dispersion").get<double>();
        model.count.diagnostics = diagnostics_from_json(count.value("diagnostics", json::object()));
        if (model.count.coefficients.size() !=
            static_cast<Eigen::Index>(model.count.layout.width()))
            throw ValidationError("count coefficient length does not match terms");

        const auto& type = doc.at("type");
        model.type.layout = glm::DesignLayout::build(
            model.schema, type.at("terms").get<std::vector<std::string>>());
        model.type.branch_count = static_cast<int>(model.branches.size());
        const auto width = static_cast<Eigen::Index>(model.type.layout.width());
        model.type.coefficients = matrix_from_json(type.at("coefficients"), width);
        model.type.standard_errors = matrix_from_json(type.at("standard_errors"), width);
        model.type.diagnostics = diagnostics_from_json(type.value("diagnostics", json::object()));
        if (model.type.coefficients.rows() != model.type.branch_count - 1 ||
            (model.type.branch_count > 1 && model.type.coefficients.cols() != width))
            throw ValidationError("type coefficient matrix does not match branches/terms");

        const auto& sev = doc.at("severity");
        model.severity.layout = glm::DesignLayout::build(
            model.schema, sev.at("terms").get<std::vector<std::string>>());
        model.severity.pooled = sev.value("pooled", false);
        model.severity.zero_expenditures_excluded =
            sev.value("zero_expenditures_excluded", static_cast<int64_t>(0));
        model.severity.diagnostics =
            diagnostics_from_json(sev.value("diagnostics", json::object()));
        model.severity.branches.resize(model.branches.size());
        for (const auto& b : sev.at("branches")) {
            const int id = b.at("branch").get<int>();
            if (id < 1 || static_cast<std::size_t>(id) > model.branches.size())
                throw ValidationError("severity branch id out of range");
            auto& out = model.severity.branches[static_cast<std::size_t>(id - 1)];
            out.coefficients = vector_from_json(b.at("coefficients"));
            out.standard_errors = vector_from_json(b.at("standard_errors"));
            out.shape = b.at("shape").get<double>();
            out.observations = b.value("observations", static_cast<int64_t>(0));
            out.intercept_only_fallback = b.value("intercept_only_fallback", false);
            if (out.coefficients.size() !=
                static_cast<Eigen::Index>(model.severity.layout.width()))
                throw ValidationError("severity coefficient length does not match terms");
            if (!(out.shape > 0.0)) throw ValidationError("severity shape must be > 0");
        }
    } catch (const json::exception& ex) {
        throw ValidationError("bad model file '" + path.string() + "': " + ex.what());
    }
    return model;
}

void save_fit_report_json(const std::filesystem::path& path, const glm::ThreePartModel& model) {
    json doc;
    auto coef_table = [](const std::vector<std::string>& labels, const Eigen::VectorXd& coef,
                         const Eigen::VectorXd& se) {
        json arr = json::array();
        for (Eigen::Index i = 0; i < coef.size(); ++i) {
            arr.push_back(json{{"term", labels[static_cast<std::size_t>(i)]},
                               {"estimate", coef(i)},
                               {"std_error", se(i)}});
        }
        return arr;
    };

    doc["count"] = {{"coefficients", coef_table(model.count.layout.labels(),
                                                model.count.coefficients,
                                                model.count.standard_errors)},
                    {"dispersion", model.count.dispersion},
                    {"diagnostics", diagnostics_to_json(model.count.diagnostics)}};

    json type_rows = json::array();
    for (Eigen::Index j = 0; j < model.type.coefficients.rows(); ++j) {
        type_rows.push_back(json{
            {"branch", static_cast<int>(j) + 2},
            {"coefficients", coef_table(model.type.layout.labels(),
                                        model.type.coefficients.row(j).transpose(),
                                        model.type.standard_errors.row(j).transpose())}});
    }
    doc["type"] = {{"reference_branch", 1},
                   {"branches", type_rows},
                   {"diagnostics", diagnostics_to_json(model.type.diagnostics)}};

    json sev_rows = json::array();
    for (std::size_t j = 0; j < model.severity.branches.size(); ++j) {
        const auto& b = model.severity.branches[j];
        sev_rows.push_back(json{{"branch", static_cast<int>(j) + 1},
                                {"coefficients", coef_table(model.severity.layout.labels(),
                                                            b.coefficients, b.standard_errors)},
                                {"shape", b.shape},
                                {"observations", b.observations},
                                {"intercept_only_fallback", b.intercept_only_fallback}});
    }
    doc["severity"] = {{"pooled", model.severity.pooled},
                       {"zero_expenditures_excluded", model.severity.zero_expenditures_excluded},
                       {"branches", sev_rows},
                       {"diagnostics", diagnostics_to_json(model.severity.diagnostics)}};
    write_text(path, doc.dump(2) + "\n");
}

// ---- generator spec ----

engine::GeneratorSpec load_generator_spec_json(const std::filesystem::path& path) {
    const json doc = load_json_file(path);
    engine::GeneratorSpec spec;
    try {
        spec.members = doc.at("members").get<int64_t>();
        spec.families = doc.at("families").get<int64_t>();
        spec.branches = doc.at("branches").get<int>();
        spec.age_min = doc.value("age_min", 18);
        spec.age_max = doc.value("age_max", 90);
        spec.male_fraction = doc.value("male_fraction", 0.5);
        spec.count_coefficients = doc.at("count").at("coefficients").get<std::vector<double>>();
        spec.count_dispersion = doc.at("count").at("dispersion").get<double>();
        spec.type_coefficients =
            doc.at("type").at("coefficients").get<std::vector<std::vector<double>>>();
        spec.severity_coefficients =
            doc.at("severity").at("coefficients").get<std::vector<std::vector<double>>>();
        spec.severity_shapes = doc.at("severity").at("shapes").get<std::vector<double>>();
        if (doc.contains("branch_names"))
            spec.branch_names = doc.at("branch_names").get<std::vector<std::string>>();
    } catch (const json::exception& ex) {
        throw ValidationError("bad generator spec '" + path.string() + "': " + ex.what());
    }
    spec.validate();
    return spec;
}

// ---- distributions ----

void save_distribution_csv(const std::filesystem::path& path,
                           const engine::EmpiricalDistribution& dist) {
    std::ostringstream out;
    out << "# hpsim distribution label=" << dist.label << " seed=" << dist.master_seed
        << " n=" << dist.values.size() << '\n';
    out << "scenario_index,value\n";
    for (std::size_t i = 0; i < dist.values.size(); ++i)
        out << dist.scenario_index[i] << ',' << fmt_double(dist.values[i]) << '\n';
    write_text(path, out.str());
}

engine::EmpiricalDistribution load_distribution_csv(const std::filesystem::path& path) {
    const auto lines = split_lines(read_text(path));
    engine::EmpiricalDistribution dist;
    std::size_t start = 0;
    if (!lines.empty() && lines[0].rfind("# hpsim distribution", 0) == 0) {
        std::istringstream hdr(lines[0]);
        std::string tok;
        while (hdr >> tok) {
            if (tok.rfind("label=", 0) == 0) dist.label = tok.substr(6);
            if (tok.rfind("seed=", 0) == 0) dist.master_seed = std::stoull(tok.substr(5));
        }
        start = 1;
    }
    if (start >= lines.size() || split_csv_row(lines[start]) !=
                                     std::vector<std::string>{"scenario_index", "value"})
        throw ValidationError("distribution file must have header 'scenario_index,value'");
    for (std::size_t ln = start + 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        const auto f = split_csv_row(lines[ln]);
        if (f.size() != 2)
            throw ValidationError("line " + std::to_string(ln + 1) + ": expected 2 fields");
        dist.scenario_index.push_back(
            static_cast<int64_t>(parse_double(f[0], "scenario_index", ln + 1)));
        dist.values.push_back(parse_double(f[1], "value", ln + 1));
    }
    if (!std::is_sorted(dist.values.begin(), dist.values.end()))
        throw ValidationError("distribution file values are not sorted");
    return dist;
}

std::vector<HistogramBin> freedman_diaconis_histogram(const std::vector<double>& sorted) {
    std::vector<HistogramBin> bins;
    if (sorted.empty()) return bins;
    const double lo = sorted.front();
    const double hi = sorted.back();
    const auto n = sorted.size();
    const auto q = [&](double p) {
        const auto idx = static_cast<std::size_t>(
            std::ceil(p * static_cast<double>(n)));
        return sorted[std::min(std::max<std::size_t>(idx, 1), n) - 1];
    };
    const double iqr = q(0.75) - q(0.25);
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(n));
    if (!(width > 0.0) || hi == lo) {
        bins.push_back({lo, hi, static_cast<int64_t>(n)});
        return bins;
    }
    const auto n_bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
    bins.resize(std::max<std::size_t>(n_bins, 1));
    for (std::size_t b = 0; b < bins.size(); ++b) {
        bins[b].left = lo + width * static_cast<double>(b);
        bins[b].right = lo + width * static_cast<double>(b + 1);
    }
    for (double v : sorted) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        b = std::min(b, bins.size() - 1);
        ++bins[b].count;
    }
    return bins;
}

void save_histogram_csv(const std::filesystem::path& path,
                        const engine::EmpiricalDistribution& dist) {
    const auto bins = freedman_diaconis_histogram(dist.values);
    std::ostringstream out;
    out << "# hpsim histogram label=" << dist.label << " seed=" << dist.master_seed
        << " n=" << dist.values.size() << '\n';
    out << "bin_left,bin_right,count\n";
    for (const auto& b : bins)
        out << fmt_double(b.left) << ',' << fmt_double(b.right) << ',' << b.count << '\n';
    write_text(path, out.str());
}

void save_simulation_summary_json(const std::filesystem::path& path,
                                  const engine::SimulationResult& result) {
    auto stats = [](const engine::SummaryStats& s) {
        return json{{"mean", s.mean}, {"std_error", s.std_error}, {"min", s.min},
                    {"max", s.max}};
    };
    json doc;
    doc["seed"] = result.master_seed;
    doc["n_scenarios"] = result.n_scenarios;
    doc["contributions"] = result.total_contributions;
    doc["expenditure"] = stats(result.expenditure_stats);
    doc["reimbursement"] = stats(result.reimbursement_stats);
    doc["profit"] = stats(result.profit_stats);
    write_text(path, doc.dump(2) + "\n");
}

// ---- expected report ----

void save_expected_report(const std::filesystem::path& json_path,
                          const std::filesystem::path& csv_path,
                          const engine::ExpectedExpenditureReport& report,
                          const Portfolio& portfolio) {
    json doc;
    doc["total"] = report.total;
    json fam = json::array();
    for (std::size_t f = 0; f < report.per_family.size(); ++f)
        fam.push_back(json{{"family_id", portfolio.families[f].family_id},
                           {"expected", report.per_family[f]}});
    doc["per_family"] = fam;
    write_text(json_path, doc.dump(2) + "\n");

    std::ostringstream out;
    out << "member_id,expected_total";
    const std::size_t branch_count =
        report.per_member_branch.empty() ? 0 : report.per_member_branch[0].size();
    for (std::size_t j = 1; j <= branch_count; ++j) out << ",expected_branch_" << j;
    out << '\n';
    for (std::size_t i = 0; i < report.per_member.size(); ++i) {
        out << portfolio.members[i].member_id << ',' << fmt_double(report.per_member[i]);
        for (std::size_t j = 0; j < branch_count; ++j)
            out << ',' << fmt_double(report.per_member_branch[i][j]);
        out << '\n';
    }
    write_text(csv_path, out.str());
}

// ---- risk report ----

void save_risk_report_json(const std::filesystem::path& path, const risk::RiskReport& report,
                           std::optional<double> initial_capital) {
    json doc;
    doc["alpha"] = report.alpha;
    doc["var"] = report.value_at_risk;
    doc["tvar"] = report.tail_value_at_risk;
    doc["scr_basis"] = report.basis;
    doc["scr"] = report.scr;
    doc["mean_u"] = report.mean_profit;
    doc["se_var"] = report.se_var;
    doc["se_tvar"] = report.se_tvar;
    doc["seed"] = report.seed;
    if (initial_capital) {
        // Reporting-only offset; the profit definition itself never includes
        // initial capital.
        doc["initial_capital"] = *initial_capital;
        doc["mean_net_asset_value"] = *initial_capital + report.mean_profit;
    }
    write_text(path, doc.dump(2) + "\n");
}

// ---- adjudication ----

void save_adjudication_csv(const std::filesystem::path& path,
                           const benefits::AdjudicationResult& result, const Portfolio& p) {
    std::ostringstream out;
    out << "family_id,branch_id,k_hj,capped\n";
    for (const auto& c : result.cells) {
        out << p.families[c.family_pos].family_id << ',' << c.branch_id << ','
            << fmt_double(c.amount) << ',' << (c.capped ? 1 : 0) << '\n';
    }
    write_text(path, out.str());
}

// ---- manifest ----

RunManifest write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                           uint64_t master_seed,
                           const std::vector<std::filesystem::path>& inputs,
                           const json& effective_config) {
    RunManifest manifest;
    manifest.command = command;
    manifest.tool_version = kToolVersion;
    manifest.master_seed = master_seed;
    for (const auto& in : inputs)
        manifest.input_digests[in.filename().string()] = sha256_file(in);
    manifest.config_digest = sha256_string(effective_config.dump());
    manifest.created_utc = utc_now();

    json doc;
    doc["command"] = manifest.command;
    doc["tool_version"] = manifest.tool_version;
    doc["master_seed"] = manifest.master_seed;
    doc["inputs"] = manifest.input_digests;
    doc["config"] = effective_config;
    doc["config_digest"] = manifest.config_digest;
    doc["created_utc"] = manifest.created_utc;
    write_text(out_dir / "manifest.json", doc.dump(2) + "\n");
    return manifest;
}

}  // namespace hpsim::io
