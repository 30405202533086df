#include "splitdist/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace splitdist {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line, std::size_t lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw DataError("line " + std::to_string(lineno) + ": unterminated quote");
    out.push_back(trim(cur));
    return out;
}

bool parse_count(const std::string& s, Count& v) {
    if (s.empty()) return false;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    return ec == std::errc() && p == end && v >= 0;
}

bool parse_real(const std::string& s, double& v) {
    if (s.empty()) return false;
    std::istringstream is(s);
    is >> v;
    return !is.fail() && is.eof() && std::isfinite(v);
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw DataError("unknown column '" + name + "'");
}

Table read_csv(std::istream& in) {
    Table t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto fields = split_line(line, lineno);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line.push_back(lineno);
    }
    if (t.rows.empty()) throw DataError("no observations");
    return t;
}

Table read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv(in);
}

std::vector<std::string> integer_columns(const Table& t) {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        bool all = true;
        Count v;
        for (const auto& r : t.rows)
            if (!parse_count(r[c], v)) {
                all = false;
                break;
            }
        if (all) out.push_back(t.header[c]);
    }
    return out;
}

std::vector<CountVector> extract_counts(const Table& t, const std::vector<std::string>& columns) {
    const std::vector<std::string> cols = columns.empty() ? integer_columns(t) : columns;
    if (cols.size() < 2) throw DataError("need at least two count columns");
    std::vector<std::size_t> idx;
    for (const auto& c : cols) idx.push_back(t.column(c));
    std::vector<CountVector> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CountVector y(idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j)
            if (!parse_count(t.rows[i][idx[j]], y[j]))
                throw DataError("line " + std::to_string(t.line[i]) + ": column '" + cols[j] +
                                "' is not a non-negative integer");
        out.push_back(std::move(y));
    }
    return out;
}

RegressionDataset extract_regression(const Table& t, const std::vector<std::string>& response,
                                     const std::vector<std::string>& covariates) {
    RegressionDataset d;
    d.Y = extract_counts(t, response);
    std::vector<std::size_t> idx;
    for (const auto& c : covariates) idx.push_back(t.column(c));
    d.X.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t j = 0; j < idx.size(); ++j) {
            double v;
            if (!parse_real(t.rows[i][idx[j]], v))
                throw DataError("line " + std::to_string(t.line[i]) + ": column '" + covariates[j] +
                                "' is not a finite number");
            d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    return d;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ------------------------------------------------------------------ JSON

Json number_to_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double number_from_json(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return kNegInf;
        if (s == "nan") return std::nan("");
    }
    throw DataError("expected a number in model document");
}

Json to_json(const SumModel& m) {
    const FamilyTag tag = family_tag(m);
    Json params = Json::object();
    const auto names = parameter_names(tag);
    const auto values = parameters(m.family);
    for (std::size_t i = 0; i < names.size(); ++i) params[names[i]] = number_to_json(values[i]);
    return {{"family", family_name(tag)}, {"params", params}, {"shift", m.shift}};
}

SumModel sum_model_from_json(const Json& j) {
    const FamilyTag tag = parse_family(j.at("family").get<std::string>());
    std::vector<double> values;
    for (const auto& n : parameter_names(tag)) values.push_back(number_from_json(j.at("params").at(n)));
    SumModel m{make_family(tag, values), j.value("shift", Count{0})};
    validate(m);
    return m;
}

Json to_json(const SingularModel& m) {
    Json j{{"kind", singular_name(singular_tag(m))}};
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, sing::Multinomial>) j["pi"] = s.pi;
            else if constexpr (std::is_same_v<T, sing::DirichletMultinomial>) j["alpha"] = s.alpha;
            else j["k"] = s.k;
        },
        m);
    return j;
}

SingularModel singular_model_from_json(const Json& j) {
    SingularModel m;
    switch (parse_singular(j.at("kind").get<std::string>())) {
        case SingularTag::Multinomial:
            m = sing::Multinomial{j.at("pi").get<std::vector<double>>()};
            break;
        case SingularTag::DirichletMultinomial:
            m = sing::DirichletMultinomial{j.at("alpha").get<std::vector<double>>()};
            break;
        case SingularTag::MultivariateHypergeometric:
            m = sing::MultivariateHypergeometric{j.at("k").get<CountVector>()};
            break;
    }
    validate(m);
    return m;
}

Json to_json(const SplittingModel& m) { return {{"singular", to_json(m.singular)}, {"sum", to_json(m.sum)}}; }

SplittingModel splitting_model_from_json(const Json& j) {
    SplittingModel m{singular_model_from_json(j.at("singular")), sum_model_from_json(j.at("sum"))};
    validate(m);
    return m;
}

Json to_json(const MixtureModel& m) {
    Json comps = Json::array();
    for (const auto& c : m.components) comps.push_back(to_json(c));
    return {{"weights", m.weights}, {"components", comps}};
}

MixtureModel mixture_model_from_json(const Json& j) {
    MixtureModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& c : j.at("components")) m.components.push_back(splitting_model_from_json(c));
    validate(m);
    return m;
}

Json to_json(const RegressionSpec& s) {
    Json B = Json::array();
    for (Eigen::Index r = 0; r < s.B.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < s.B.cols(); ++c) row.push_back(s.B(r, c));
        B.push_back(row);
    }
    std::vector<double> beta(s.beta.data(), s.beta.data() + s.beta.size());
    return {{"B", B}, {"sum_family", family_name(s.sum_family)}, {"beta", beta}, {"sum_aux", s.sum_aux}};
}

RegressionSpec regression_spec_from_json(const Json& j) {
    RegressionSpec s;
    const auto& B = j.at("B");
    const auto rows = static_cast<Eigen::Index>(B.size());
    const auto cols = rows ? static_cast<Eigen::Index>(B[0].size()) : 0;
    s.B.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(B[r].size()) != cols) throw DataError("ragged coefficient matrix");
        for (Eigen::Index c = 0; c < cols; ++c) s.B(r, c) = B[r][c].get<double>();
    }
    const auto beta = j.at("beta").get<std::vector<double>>();
    s.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    s.sum_family = parse_family(j.at("sum_family").get<std::string>());
    s.sum_aux = j.value("sum_aux", 0.0);
    validate(s);
    return s;
}

Json to_json(const FitStats& s) {
    return {{"loglik", number_to_json(s.loglik)},
            {"n_params", s.n_params},
            {"n_obs", s.n_obs},
            {"bic", number_to_json(s.bic())},
            {"aic", number_to_json(s.aic())},
            {"converged", s.converged},
            {"iterations", s.iterations},
            {"flags", s.flags.names()}};
}

Json to_json(const FitReport& r) {
    return {{"loglik", number_to_json(r.loglik)},
            {"n_params", r.n_params},
            {"n_obs", r.n_obs},
            {"bic", number_to_json(r.bic)},
            {"aic", number_to_json(r.aic)},
            {"converged", r.converged},
            {"iterations", r.iterations},
            {"flags", r.flags.names()},
            {"singular_part", to_json(r.singular_part)},
            {"sum_part", to_json(r.sum_part)}};
}

Json to_json(const ModelDocument& d) {
    Json j;
    j["schema_version"] = d.schema_version;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SplittingModel>) j["kind"] = "splitting";
            else if constexpr (std::is_same_v<T, MixtureModel>) j["kind"] = "mixture";
            else j["kind"] = "regression";
            j["model"] = to_json(m);
        },
        d.model);
    j["fit"] = d.fit;
    Json prov{{"data_hash", d.provenance.data_hash}, {"command_line", d.provenance.command_line}};
    prov["seed"] = d.provenance.seed ? Json(*d.provenance.seed) : Json(nullptr);
    j["provenance"] = prov;
    return j;
}

ModelDocument document_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("schema_version"))
        throw SchemaMismatch("model document has no schema_version");
    const auto v = j.at("schema_version").get<std::string>();
    if (v != kSchemaVersion)
        throw SchemaMismatch("schema_version " + v + " is not supported (expected " + kSchemaVersion + ")");
    ModelDocument d;
    d.schema_version = v;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "splitting") d.model = splitting_model_from_json(j.at("model"));
    else if (kind == "mixture") d.model = mixture_model_from_json(j.at("model"));
    else if (kind == "regression") d.model = regression_spec_from_json(j.at("model"));
    else throw SchemaMismatch("unknown model kind '" + kind + "'");
    d.fit = j.value("fit", Json::object());
    if (j.contains("provenance")) {
        const auto& p = j.at("provenance");
        d.provenance.data_hash = p.value("data_hash", std::string{});
        d.provenance.command_line = p.value("command_line", std::string{});
        if (p.contains("seed") && !p.at("seed").is_null()) d.provenance.seed = p.at("seed").get<std::uint64_t>();
    }
    return d;
}

ModelDocument read_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw SchemaMismatch(std::string("model document is not valid JSON: ") + e.what());
    }
    return document_from_json(j);
}

}  // namespace splitdist
