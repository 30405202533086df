#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "splitdist/cli.hpp"
#include "splitdist/io.hpp"

using namespace splitdist;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("splitdist_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_csv(const std::string& path, const std::vector<CountVector>& rows) {
    std::ofstream f(path);
    for (std::size_t j = 0; j < rows.front().size(); ++j) f << (j ? "," : "") << "c" << j;
    f << "\n";
    for (const auto& y : rows) {
        for (std::size_t j = 0; j < y.size(); ++j) f << (j ? "," : "") << y[j];
        f << "\n";
    }
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Json load_json(const std::string& path) { return Json::parse(slurp(path)); }

}  // namespace

TEST_CASE("fit example and exit codes") {
    TempDir tmp;
    write_csv(tmp.file("t.csv"), {{1, 0}, {0, 1}});
    Run r = run({"fit", "--data", tmp.file("t.csv"), "--sum", "poisson", "--out", tmp.file("m.json")});
    CHECK(r.code == 0);
    Json j = load_json(tmp.file("m.json"));
    CHECK(j["schema_version"] == "1");
    CHECK(j["model"]["singular"]["pi"][0].get<double>() == 0.5);
    CHECK(j["model"]["singular"]["pi"][1].get<double>() == 0.5);
    CHECK(j["model"]["sum"]["params"]["lambda"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(j["provenance"]["data_hash"] == fnv1a_hex(slurp(tmp.file("t.csv"))));

    std::ofstream(tmp.file("empty.csv")).close();
    r = run({"fit", "--data", tmp.file("empty.csv"), "--sum", "poisson"});
    CHECK(r.code == 2);
    CHECK(r.err.find("no observations") != std::string::npos);

    {
        std::ofstream f(tmp.file("bad.csv"));
        f << "a,b\n1,2\n3,4,5\n";
    }
    r = run({"fit", "--data", tmp.file("bad.csv"), "--sum", "poisson"});
    CHECK(r.code == 2);
    CHECK(r.err.find("line 3") != std::string::npos);

    CHECK(run({"fit", "--data", tmp.file("t.csv"), "--sum", "no-such-family"}).code == 64);
    CHECK(run({"frobnicate"}).code == 64);
    CHECK(run({"fit", "--sum", "poisson"}).code == 64);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("fit document bic and determinism") {
    TempDir tmp;
    SplittingModel truth{sing::Multinomial{{0.4, 0.6}}, {fam::NegativeBinomial{3.0, 0.4}, 0}};
    Rng rng(10);
    write_csv(tmp.file("nb.csv"), splitting_sample(truth, rng, 10000));
    Run a = run({"fit", "--data", tmp.file("nb.csv"), "--sum", "negative-binomial"});
    REQUIRE(a.code == 0);
    Json j = Json::parse(a.out);
    const double ll = j["fit"]["loglik"].get<double>();
    const int k = j["fit"]["n_params"].get<int>();
    CHECK(k == 3);
    CHECK(std::abs(j["fit"]["bic"].get<double>() - (-2.0 * ll + k * std::log(1e4))) <= 1e-6);
    Run b = run({"fit", "--data", tmp.file("nb.csv"), "--sum", "negative-binomial"});
    CHECK(a.out == b.out);
}

TEST_CASE("binomial sum on overdispersed totals exits with the no-finite-n signal") {
    TempDir tmp;
    SplittingModel truth{sing::Multinomial{{0.5, 0.5}}, {fam::NegativeBinomial{2.0, 0.6}, 0}};
    Rng rng(2);
    write_csv(tmp.file("over.csv"), splitting_sample(truth, rng, 2000));
    Run r = run({"fit", "--data", tmp.file("over.csv"), "--sum", "binomial"});
    CHECK(r.code == 3);
    CHECK(r.err.find("no finite") != std::string::npos);
}

TEST_CASE("select matches fit and honors the criterion") {
    TempDir tmp;
    SplittingModel truth{sing::Multinomial{{0.3, 0.7}}, {fam::NegativeBinomial{3.0, 0.4}, 0}};
    Rng rng(6);
    write_csv(tmp.file("d.csv"), splitting_sample(truth, rng, 10000));
    Run one = run({"select", "--data", tmp.file("d.csv"), "--singulars", "multinomial", "--sums", "poisson",
                   "--out", tmp.file("sel.json")});
    REQUIRE(one.code == 0);
    Run fit = run({"fit", "--data", tmp.file("d.csv"), "--sum", "poisson"});
    Json sel = load_json(tmp.file("sel.json"));
    Json fj = Json::parse(fit.out);
    CHECK(sel["cells"][0]["fit"]["loglik"] == fj["fit"]["loglik"]);
    CHECK(sel["cells"][0]["fit"]["bic"] == fj["fit"]["bic"]);

    Run grid = run({"select", "--data", tmp.file("d.csv"), "--singulars", "multinomial,dirichlet-multinomial",
                    "--sums", "poisson,negative-binomial,binomial", "--out", tmp.file("grid.json")});
    CHECK(grid.code == 0);
    Json g = load_json(tmp.file("grid.json"));
    CHECK(g["singular_fits"] == 2);
    CHECK(g["sum_fits"] == 3);
    CHECK(g["cells"][0]["singular"] == "multinomial");
    CHECK(g["cells"][0]["sum"] == "negative-binomial");
    CHECK(grid.out.find("failed") != std::string::npos);  // binomial on overdispersed totals

    Run aic = run({"select", "--data", tmp.file("d.csv"), "--singulars", "multinomial,dirichlet-multinomial",
                   "--sums", "poisson,negative-binomial", "--criterion", "aic", "--out", tmp.file("aic.json")});
    CHECK(aic.code == 0);
    for (const auto& c : load_json(tmp.file("aic.json"))["cells"]) {
        const double ll = c["fit"]["loglik"].get<double>();
        const int k = c["fit"]["n_params"].get<int>();
        CHECK(c["score"].get<double>() == doctest::Approx(-2.0 * ll + 2.0 * k).epsilon(1e-12));
    }
    CHECK(run({"select", "--data", tmp.file("d.csv"), "--criterion", "hqc"}).code == 64);
}

TEST_CASE("sample, pmf and describe") {
    TempDir tmp;
    write_csv(tmp.file("t.csv"), {{1, 0}, {0, 1}, {2, 1}, {0, 0}});
    REQUIRE(run({"fit", "--data", tmp.file("t.csv"), "--sum", "poisson", "--out", tmp.file("m.json")}).code == 0);

    Run s1 = run({"sample", "--model", tmp.file("m.json"), "--n", "1000", "--seed", "7"});
    Run s2 = run({"sample", "--model", tmp.file("m.json"), "--n", "1000", "--seed", "7"});
    CHECK(s1.code == 0);
    CHECK(s1.out == s2.out);
    CHECK(std::count(s1.out.begin(), s1.out.end(), '\n') == 1001);

    Run d = run({"describe", "--model", tmp.file("m.json")});
    CHECK(d.code == 0);
    CHECK(d.out.find("graph: empty") != std::string::npos);
    CHECK(d.out.find("y1: Poisson(") != std::string::npos);

    write_csv(tmp.file("b.csv"), {{1, 1}, {2, 1}, {0, 2}, {1, 0}});
    REQUIRE(run({"fit", "--data", tmp.file("b.csv"), "--sum", "binomial", "--binomial-n", "3", "--out",
                 tmp.file("b.json")})
                .code == 0);
    Run off = run({"pmf", "--model", tmp.file("b.json"), "--at", "4,1"});
    CHECK(off.code == 0);
    CHECK(off.out == "-inf\n");
    Run on = run({"pmf", "--model", tmp.file("b.json"), "--at", "1,1"});
    ModelDocument doc = read_document(tmp.file("b.json"));
    CHECK(std::stod(on.out) == joint_log_pmf(std::get<SplittingModel>(doc.model), CountVector{1, 1}));

    Json j = load_json(tmp.file("m.json"));
    j["schema_version"] = "99";
    std::ofstream(tmp.file("old.json")) << j.dump();
    CHECK(run({"describe", "--model", tmp.file("old.json")}).code == 65);
    CHECK(run({"pmf", "--model", tmp.file("old.json"), "--at", "1,1"}).code == 65);
}

TEST_CASE("mixture and regress commands") {
    TempDir tmp;
    SplittingModel a{sing::Multinomial{{0.6, 0.4}}, {fam::Poisson{1.0}, 1}};
    SplittingModel b{sing::Multinomial{{0.2, 0.8}}, {fam::Poisson{14.0}, 1}};
    Rng rng(12);
    std::vector<CountVector> rows;
    for (int i = 0; i < 1500; ++i) rows.push_back(splitting_sample_one(i % 3 == 0 ? a : b, rng));
    write_csv(tmp.file("mix.csv"), rows);

    Run one = run({"mixture", "--data", tmp.file("mix.csv"), "--components", "1", "--allowed-sums", "poisson",
                   "--shift-rule", "poisson=1", "--out", tmp.file("one.json")});
    REQUIRE(one.code == 0);
    Run fit = run({"fit", "--data", tmp.file("mix.csv"), "--sum", "poisson", "--shift", "1"});
    CHECK(load_json(tmp.file("one.json"))["fit"]["loglik"].get<double>() ==
          doctest::Approx(Json::parse(fit.out)["fit"]["loglik"].get<double>()).epsilon(1e-12));

    Run many = run({"mixture", "--data", tmp.file("mix.csv"), "--components", "1,2,3", "--allowed-sums",
                    "poisson,negative-binomial", "--seed", "3", "--out", tmp.file("many.json")});
    CHECK(many.code == 0);
    Json mj = load_json(tmp.file("many.json"));
    CHECK(mj["kind"] == "mixture");
    CHECK(mj["fit"]["components"] == 2);
    CHECK(mj["fit"]["by_components"].size() == 3);

    {
        std::ofstream f(tmp.file("reg.csv"));
        f << "y1,y2,x\n";
        for (std::size_t i = 0; i < rows.size(); ++i) f << rows[i][0] << "," << rows[i][1] << "," << 0.5 << "\n";
    }
    Run reg0 = run({"regress", "--data", tmp.file("mix.csv"), "--response-cols", "c0,c1", "--sum", "poisson"});
    REQUIRE(reg0.code == 0);
    Run fit0 = run({"fit", "--data", tmp.file("mix.csv"), "--sum", "poisson"});
    CHECK(Json::parse(reg0.out)["fit"]["loglik"].get<double>() ==
          doctest::Approx(Json::parse(fit0.out)["fit"]["loglik"].get<double>()).epsilon(1e-10));
    // A constant covariate duplicates the intercept.
    CHECK(run({"regress", "--data", tmp.file("reg.csv"), "--covariate-cols", "x"}).code == 2);
    CHECK(run({"regress", "--data", tmp.file("reg.csv"), "--covariate-cols", "x", "--sum", "geometric"}).code == 64);
}
