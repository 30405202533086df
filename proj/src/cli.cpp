#include "splitdist/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "splitdist/inference.hpp"
#include "splitdist/io.hpp"
#include "splitdist/regression.hpp"

namespace splitdist {

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

CountVector parse_counts(const std::string& s) {
    CountVector out;
    for (const auto& item : split_list(s)) {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(item, &pos);
            if (pos != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw InvalidParameter("'" + item + "' is not an integer");
        }
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string fmt_short(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

struct Context {
    std::ostream& out;
    std::ostream& err;
    std::string command_line;
};

void emit(const Context& ctx, const Json& j, const std::string& path) {
    const std::string text = j.dump(2) + "\n";
    if (path.empty()) {
        ctx.out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write '" + path + "'");
    f << text;
}

struct Loaded {
    std::vector<CountVector> data;
    std::string hash;
    Table table;
};

Loaded load_counts(const std::string& path, const std::string& columns) {
    const std::string bytes = read_file(path);
    std::istringstream in(bytes);
    Loaded l;
    l.table = read_csv(in);
    l.data = extract_counts(l.table, split_list(columns));
    l.hash = fnv1a_hex(bytes);
    return l;
}

FitOptions fit_options(Count shift, bool estimate_shift, const std::string& urn, long long binomial_n, int threads) {
    FitOptions o;
    o.sum.shift = shift;
    o.sum.estimate_shift = estimate_shift;
    if (!urn.empty()) o.urn = parse_counts(urn);
    if (binomial_n >= 0) o.sum.n = binomial_n;
    o.threads = threads;
    return o;
}

// ---------------------------------------------------------------- commands

struct FitArgs {
    std::string data, columns, singular = "multinomial", sum, constraint = "none", urn, out;
    long long shift = 0, binomial_n = -1;
    bool estimate_shift = false;
    std::uint64_t seed = 1;
};

int cmd_fit(const Context& ctx, const FitArgs& a, int threads) {
    const SingularTag st = parse_singular(a.singular);
    const FamilyTag ft = parse_family(a.sum);
    if (a.constraint != "none" && a.constraint != "canonical")
        throw InvalidParameter("--constraint must be none or canonical");
    Loaded l = load_counts(a.data, a.columns);
    FitOptions o = fit_options(a.shift, a.estimate_shift, a.urn, a.binomial_n, threads);
    o.canonical = a.constraint == "canonical";
    FitReport r = fit_splitting(st, ft, l.data, o);
    ModelDocument doc;
    doc.model = r.model;
    doc.fit = to_json(r);
    doc.provenance = {l.hash, a.seed, ctx.command_line};
    emit(ctx, to_json(doc), a.out);
    if (!a.out.empty()) ctx.out << describe(r.model) << "\nloglik " << fmt(r.loglik) << "  bic " << fmt(r.bic) << "\n";
    if (!r.converged) {
        ctx.err << "splitdist: fit did not converge\n";
        return exit_code::convergence;
    }
    return exit_code::ok;
}

struct SelectArgs {
    std::string data, columns, singulars = "multinomial,dirichlet-multinomial", sums, criterion = "bic", urn, out;
    long long shift = 0, binomial_n = -1;
};

int cmd_select(const Context& ctx, const SelectArgs& a, int threads) {
    std::vector<SingularTag> sing;
    for (const auto& s : split_list(a.singulars)) sing.push_back(parse_singular(s));
    std::vector<FamilyTag> sums;
    if (a.sums.empty()) {
        sums = all_families();
    } else {
        for (const auto& s : split_list(a.sums)) sums.push_back(parse_family(s));
    }
    Criterion crit;
    if (a.criterion == "bic") crit = Criterion::Bic;
    else if (a.criterion == "aic") crit = Criterion::Aic;
    else throw InvalidParameter("--criterion must be bic or aic");

    Loaded l = load_counts(a.data, a.columns);
    Selection sel = select_model(l.data, sing, sums, crit, fit_options(a.shift, false, a.urn, a.binomial_n, threads));

    const std::string label = crit == Criterion::Bic ? "BIC" : "AIC";
    ctx.out << std::left << std::setw(6) << "rank" << std::setw(24) << "singular" << std::setw(36) << "sum"
            << std::right << std::setw(8) << "params" << std::setw(16) << "loglik" << std::setw(16) << label << "\n";
    Json cells = Json::array();
    std::size_t rank = 0;
    for (const auto& c : sel.ranked) {
        Json cell{{"singular", singular_name(c.singular)}, {"sum", family_name(c.sum)}};
        if (c.report) {
            ++rank;
            ctx.out << std::left << std::setw(6) << rank << std::setw(24) << singular_name(c.singular)
                    << std::setw(36) << family_name(c.sum) << std::right << std::setw(8) << c.report->n_params
                    << std::setw(16) << fmt_short(c.report->loglik) << std::setw(16) << fmt_short(c.score) << "\n";
            cell["score"] = number_to_json(c.score);
            cell["model"] = to_json(c.report->model);
            cell["fit"] = to_json(*c.report);
        } else {
            ctx.out << std::left << std::setw(6) << "-" << std::setw(24) << singular_name(c.singular) << std::setw(36)
                    << family_name(c.sum) << "failed: " << c.error << "\n";
            cell["error"] = c.error;
        }
        cells.push_back(cell);
    }
    Json report{{"schema_version", kSchemaVersion},
                {"kind", "selection"},
                {"criterion", a.criterion},
                {"singular_fits", sel.singular_fits},
                {"sum_fits", sel.sum_fits},
                {"cells", cells},
                {"provenance", {{"data_hash", l.hash}, {"seed", nullptr}, {"command_line", ctx.command_line}}}};
    if (!a.out.empty()) emit(ctx, report, a.out);
    return rank > 0 ? exit_code::ok : exit_code::data_error;
}

struct SampleArgs {
    std::string model, out;
    std::size_t n = 100;
    std::uint64_t seed = 1;
};

int cmd_sample(const Context& ctx, const SampleArgs& a) {
    ModelDocument doc = read_document(a.model);
    Rng rng(a.seed);
    std::vector<CountVector> rows;
    if (const auto* m = std::get_if<SplittingModel>(&doc.model)) {
        rows = splitting_sample(*m, rng, a.n);
    } else if (const auto* mix = std::get_if<MixtureModel>(&doc.model)) {
        std::discrete_distribution<std::size_t> pick(mix->weights.begin(), mix->weights.end());
        for (std::size_t i = 0; i < a.n; ++i) rows.push_back(splitting_sample_one(mix->components[pick(rng)], rng));
    } else {
        throw InvalidParameter("sampling needs a splitting or mixture model");
    }
    std::ostringstream os;
    const std::size_t J = rows.empty() ? 0 : rows.front().size();
    for (std::size_t j = 0; j < J; ++j) os << (j ? "," : "") << "y" << (j + 1);
    os << "\n";
    for (const auto& y : rows) {
        for (std::size_t j = 0; j < y.size(); ++j) os << (j ? "," : "") << y[j];
        os << "\n";
    }
    if (a.out.empty()) {
        ctx.out << os.str();
    } else {
        std::ofstream f(a.out, std::ios::binary);
        if (!f) throw DataError("cannot write '" + a.out + "'");
        f << os.str();
    }
    return exit_code::ok;
}

int cmd_pmf(const Context& ctx, const std::string& model, const std::string& at, const std::string& x) {
    ModelDocument doc = read_document(model);
    const CountVector y = parse_counts(at);
    double lp;
    if (const auto* m = std::get_if<SplittingModel>(&doc.model)) {
        if (y.size() != dimension(*m)) throw DimensionMismatch("--at has the wrong number of coordinates");
        lp = joint_log_pmf(*m, y);
    } else if (const auto* mix = std::get_if<MixtureModel>(&doc.model)) {
        if (y.size() != dimension(mix->components.front()))
            throw DimensionMismatch("--at has the wrong number of coordinates");
        lp = mixture_log_pmf(*mix, y);
    } else {
        const auto& spec = std::get<RegressionSpec>(doc.model);
        std::vector<double> xv;
        for (const auto& item : split_list(x)) xv.push_back(std::stod(item));
        if (xv.size() != spec.n_covariates()) throw DimensionMismatch("--x has the wrong number of covariates");
        const Eigen::VectorXd xe = Eigen::Map<Eigen::VectorXd>(xv.data(), static_cast<Eigen::Index>(xv.size()));
        SplittingModel m = model_at(spec, xe);
        if (y.size() != dimension(m)) throw DimensionMismatch("--at has the wrong number of coordinates");
        lp = joint_log_pmf(m, y);
    }
    ctx.out << fmt(lp) << "\n";
    return exit_code::ok;
}

void describe_splitting(std::ostream& out, const SplittingModel& m, const std::string& indent) {
    const std::size_t J = dimension(m);
    out << indent << "model: " << describe(m) << "\n";
    out << indent << "dimension: " << J << "\n";
    const auto smax = support_max(m.sum);
    out << indent << "support: |y| in [" << support_min(m.sum) << ", " << (smax ? std::to_string(*smax) : "inf")
        << "]\n";
    try {
        Moments mo = moments(m);
        out << indent << "mean:";
        for (Eigen::Index j = 0; j < mo.mean.size(); ++j) out << " " << fmt_short(mo.mean(j));
        out << "\n" << indent << "covariance:\n";
        for (Eigen::Index r = 0; r < mo.cov.rows(); ++r) {
            out << indent << " ";
            for (Eigen::Index c = 0; c < mo.cov.cols(); ++c) out << " " << fmt_short(mo.cov(r, c));
            out << "\n";
        }
    } catch (const UndefinedMoment& e) {
        out << indent << "moments: undefined (" << e.what() << ")\n";
    }
    out << indent << "graph: " << graph_class_name(graph_class(m)) << "\n";
    out << indent << "marginals:\n";
    for (std::size_t j = 0; j < J; ++j) {
        const std::size_t idx[1] = {j};
        out << indent << "  y" << (j + 1) << ": " << describe(marginal(m, idx)) << "\n";
    }
}

int cmd_describe(const Context& ctx, const std::string& model) {
    ModelDocument doc = read_document(model);
    if (const auto* m = std::get_if<SplittingModel>(&doc.model)) {
        describe_splitting(ctx.out, *m, "");
    } else if (const auto* mix = std::get_if<MixtureModel>(&doc.model)) {
        ctx.out << "mixture of " << mix->components.size() << " splitting components\n";
        for (std::size_t k = 0; k < mix->components.size(); ++k) {
            ctx.out << "component " << (k + 1) << " (weight " << fmt_short(mix->weights[k]) << ")\n";
            describe_splitting(ctx.out, mix->components[k], "  ");
        }
    } else {
        const auto& s = std::get<RegressionSpec>(doc.model);
        ctx.out << "regression: multinomial logit with " << family_name(s.sum_family) << " total\n";
        ctx.out << "categories: " << s.dimension() << ", covariates: " << s.n_covariates() << "\n";
        for (Eigen::Index j = 0; j < s.B.rows(); ++j) {
            ctx.out << "B[" << (j + 1) << "]:";
            for (Eigen::Index q = 0; q < s.B.cols(); ++q) ctx.out << " " << fmt_short(s.B(j, q));
            ctx.out << "\n";
        }
        ctx.out << "beta:";
        for (Eigen::Index q = 0; q < s.beta.size(); ++q) ctx.out << " " << fmt_short(s.beta(q));
        ctx.out << "\n";
        if (s.sum_family != FamilyTag::Poisson) ctx.out << "aux: " << fmt_short(s.sum_aux) << "\n";
    }
    return exit_code::ok;
}

struct MixtureArgs {
    std::string data, columns, components = "1,2,3", allowed, shift_rule, singular = "multinomial", out;
    std::uint64_t seed = 1;
    int restarts = 5;
};

int cmd_mixture(const Context& ctx, const MixtureArgs& a, int threads) {
    MixtureOptions mo;
    mo.singular = parse_singular(a.singular);
    if (!a.allowed.empty()) {
        mo.families.clear();
        for (const auto& s : split_list(a.allowed)) mo.families.push_back(parse_family(s));
    }
    for (const auto& rule : split_list(a.shift_rule)) {
        const auto eq = rule.find('=');
        if (eq == std::string::npos) throw InvalidParameter("--shift-rule entries look like family=shift");
        mo.shifts[parse_family(rule.substr(0, eq))] = std::stoll(rule.substr(eq + 1));
    }
    mo.seed = a.seed;
    mo.restarts = a.restarts;
    mo.threads = threads;
    std::vector<std::size_t> Ks;
    for (const auto& s : split_list(a.components)) {
        const long long k = std::stoll(s);
        if (k < 1) throw InvalidParameter("--components must be positive");
        Ks.push_back(static_cast<std::size_t>(k));
    }
    if (Ks.empty()) throw InvalidParameter("--components is empty");

    Loaded l = load_counts(a.data, a.columns);
    std::optional<MixtureFit> best;
    std::size_t best_k = 0;
    Json table = Json::array();
    ctx.out << std::setw(4) << "K" << std::setw(18) << "loglik" << std::setw(8) << "params" << std::setw(18) << "BIC"
            << "\n";
    for (std::size_t K : Ks) {
        try {
            MixtureFit f = fit_mixture(l.data, K, mo);
            ctx.out << std::setw(4) << K << std::setw(18) << fmt_short(f.stats.loglik) << std::setw(8)
                    << f.stats.n_params << std::setw(18) << fmt_short(f.stats.bic()) << "\n";
            table.push_back({{"components", K}, {"fit", to_json(f.stats)}});
            if (!best || f.stats.bic() < best->stats.bic()) {
                best = std::move(f);
                best_k = K;
            }
        } catch (const DegenerateComponent& e) {
            ctx.out << std::setw(4) << K << "  failed: " << e.what() << "\n";
            table.push_back({{"components", K}, {"error", e.what()}});
        }
    }
    if (!best) {
        ctx.err << "splitdist: no mixture could be fitted\n";
        return exit_code::convergence;
    }
    ModelDocument doc;
    doc.model = best->model;
    doc.fit = to_json(best->stats);
    doc.fit["components"] = best_k;
    doc.fit["by_components"] = table;
    doc.fit["monotone"] = best->monotone;
    doc.provenance = {l.hash, a.seed, ctx.command_line};
    if (!a.out.empty()) emit(ctx, to_json(doc), a.out);
    if (!best->stats.converged) {
        ctx.err << "splitdist: EM did not converge\n";
        return exit_code::convergence;
    }
    return exit_code::ok;
}

struct RegressArgs {
    std::string data, response, covariates, sum = "poisson", out;
    long long binomial_n = -1;
};

int cmd_regress(const Context& ctx, const RegressArgs& a) {
    const FamilyTag ft = parse_family(a.sum);
    if (!is_regression_family(ft)) throw InvalidParameter("--sum must be poisson, binomial or negative-binomial");
    const std::string bytes = read_file(a.data);
    std::istringstream in(bytes);
    Table t = read_csv(in);
    const auto response = split_list(a.response);
    const auto covariates = split_list(a.covariates);
    std::vector<std::string> resp = response;
    if (resp.empty()) {
        for (const auto& c : integer_columns(t))
            if (std::find(covariates.begin(), covariates.end(), c) == covariates.end()) resp.push_back(c);
    }
    RegressionDataset d = extract_regression(t, resp, covariates);
    RegressionFitOptions o;
    if (a.binomial_n >= 0) o.binomial_n = a.binomial_n;
    RegressionFit f = fit_regression(d, ft, o);

    Json fit = to_json(f.stats);
    fit["singular_part"] = to_json(f.singular_part);
    fit["sum_part"] = to_json(f.sum_part);
    Json bse = Json::array();
    for (Eigen::Index j = 0; j < f.B_se.rows(); ++j) {
        Json row = Json::array();
        for (Eigen::Index q = 0; q < f.B_se.cols(); ++q) row.push_back(number_to_json(f.B_se(j, q)));
        bse.push_back(row);
    }
    Json tse = Json::array();
    for (Eigen::Index q = 0; q < f.beta_se.size(); ++q) tse.push_back(number_to_json(f.beta_se(q)));
    fit["B_se"] = bse;
    fit["beta_se"] = tse;
    fit["response"] = resp;
    fit["covariates"] = covariates;

    ModelDocument doc;
    doc.model = f.spec;
    doc.fit = fit;
    doc.provenance = {fnv1a_hex(bytes), std::nullopt, ctx.command_line};
    emit(ctx, to_json(doc), a.out);
    if (!a.out.empty()) ctx.out << "loglik " << fmt(f.stats.loglik) << "  bic " << fmt(f.stats.bic()) << "\n";
    if (f.stats.flags.has(FitFlag::Separation)) ctx.err << "splitdist: separation detected (|coef| > 30)\n";
    if (!f.stats.converged) {
        ctx.err << "splitdist: regression did not converge\n";
        return exit_code::convergence;
    }
    return exit_code::ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Splitting distributions for multivariate counts", "splitdist"};
    app.require_subcommand(1);
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    app.add_option("--threads", threads, "Worker threads for independent fits")->check(CLI::PositiveNumber);

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit one splitting model");
    fit->add_option("--data", fa.data, "CSV file")->required();
    fit->add_option("--columns", fa.columns, "Comma-separated count columns (default: all integer columns)");
    fit->add_option("--singular", fa.singular, "multinomial | dirichlet-multinomial | hypergeometric");
    fit->add_option("--sum", fa.sum, "Sum family")->required();
    fit->add_option("--shift", fa.shift, "Shift of the sum");
    fit->add_flag("--estimate-shift", fa.estimate_shift, "Estimate the shift");
    fit->add_option("--constraint", fa.constraint, "none | canonical");
    fit->add_option("--urn", fa.urn, "Urn composition for the hypergeometric singular");
    fit->add_option("--binomial-n", fa.binomial_n, "Known bound n of binomial-type sums");
    fit->add_option("--out", fa.out, "Write the model document here");
    fit->add_option("--seed", fa.seed, "Recorded in the provenance");

    SelectArgs sa;
    auto* select = app.add_subcommand("select", "Rank a grid of splitting models");
    select->add_option("--data", sa.data, "CSV file")->required();
    select->add_option("--columns", sa.columns, "Comma-separated count columns");
    select->add_option("--singulars", sa.singulars, "Comma-separated singular kinds");
    select->add_option("--sums", sa.sums, "Comma-separated sum families (default: all)");
    select->add_option("--criterion", sa.criterion, "bic | aic");
    select->add_option("--urn", sa.urn, "Urn composition for the hypergeometric singular");
    select->add_option("--shift", sa.shift, "Shift of every sum");
    select->add_option("--binomial-n", sa.binomial_n, "Known bound n of binomial-type sums");
    select->add_option("--out", sa.out, "Write the JSON report here");

    SampleArgs pa;
    auto* sample = app.add_subcommand("sample", "Draw from a fitted model");
    sample->add_option("--model", pa.model, "Model document")->required();
    sample->add_option("--n", pa.n, "Number of draws");
    sample->add_option("--seed", pa.seed, "Random seed");
    sample->add_option("--out", pa.out, "CSV output path");

    std::string pmf_model, pmf_at, pmf_x;
    auto* pmf = app.add_subcommand("pmf", "Evaluate the log-pmf");
    pmf->add_option("--model", pmf_model, "Model document")->required();
    pmf->add_option("--at", pmf_at, "Point y1,...,yJ")->required();
    pmf->add_option("--x", pmf_x, "Covariates for a regression model");

    std::string describe_model;
    auto* desc = app.add_subcommand("describe", "Moments, graph class and marginals");
    desc->add_option("--model", describe_model, "Model document")->required();

    MixtureArgs ma;
    auto* mixture = app.add_subcommand("mixture", "Fit mixtures of splitting models");
    mixture->add_option("--data", ma.data, "CSV file")->required();
    mixture->add_option("--columns", ma.columns, "Comma-separated count columns");
    mixture->add_option("--components", ma.components, "Comma-separated numbers of components");
    mixture->add_option("--allowed-sums", ma.allowed, "Comma-separated sum families per component");
    mixture->add_option("--shift-rule", ma.shift_rule, "Overrides such as poisson=1,geometric=0");
    mixture->add_option("--singular", ma.singular, "multinomial | dirichlet-multinomial");
    mixture->add_option("--seed", ma.seed, "Seed of the k-means++ initialization");
    mixture->add_option("--restarts", ma.restarts, "EM restarts")->check(CLI::PositiveNumber);
    mixture->add_option("--out", ma.out, "Write the best model document here");

    RegressArgs ra;
    auto* regress = app.add_subcommand("regress", "Fit a splitting regression");
    regress->add_option("--data", ra.data, "CSV file")->required();
    regress->add_option("--response-cols", ra.response, "Comma-separated response columns");
    regress->add_option("--covariate-cols", ra.covariates, "Comma-separated covariate columns");
    regress->add_option("--sum", ra.sum, "poisson | binomial | negative-binomial");
    regress->add_option("--binomial-n", ra.binomial_n, "Known bound n of the binomial total");
    regress->add_option("--out", ra.out, "Write the model document here");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_code::ok : exit_code::usage;
    }

    std::string command_line = "splitdist";
    for (const auto& s : args) command_line += " " + s;
    Context ctx{out, err, command_line};
    try {
        if (*fit) return cmd_fit(ctx, fa, threads);
        if (*select) return cmd_select(ctx, sa, threads);
        if (*sample) return cmd_sample(ctx, pa);
        if (*pmf) return cmd_pmf(ctx, pmf_model, pmf_at, pmf_x);
        if (*desc) return cmd_describe(ctx, describe_model);
        if (*mixture) return cmd_mixture(ctx, ma, threads);
        if (*regress) return cmd_regress(ctx, ra);
    } catch (const SchemaMismatch& e) {
        err << "splitdist: " << e.what() << "\n";
        return exit_code::schema;
    } catch (const InvalidParameter& e) {
        err << "splitdist: " << e.what() << "\n";
        return exit_code::usage;
    } catch (const NoFiniteMle& e) {
        err << "splitdist: " << e.what() << "\n";
        return exit_code::convergence;
    } catch (const ConvergenceError& e) {
        err << "splitdist: " << e.what() << "\n";
        return exit_code::convergence;
    } catch (const DegenerateComponent& e) {
        err << "splitdist: " << e.what() << "\n";
        return exit_code::convergence;
    } catch (const std::exception& e) {
        err << "splitdist: " << e.what() << "\n";
        return exit_code::data_error;
    }
    return exit_code::usage;
}

}  // namespace splitdist
