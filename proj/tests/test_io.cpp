#include <cmath>
#include <sstream>

#include "doctest.h"
#include "splitdist/io.hpp"

using namespace splitdist;

namespace {

Json reparse(const Json& j) { return Json::parse(j.dump()); }

}  // namespace

TEST_CASE("csv parsing") {
    std::istringstream in("a, b ,c\n1,2,x\n\n3,4,\"y,z\"\n");
    Table t = read_csv(in);
    REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][2] == "y,z");
    CHECK(t.line[1] == 4);
    CHECK(integer_columns(t) == std::vector<std::string>{"a", "b"});
    auto y = extract_counts(t);
    CHECK(y == std::vector<CountVector>{{1, 2}, {3, 4}});
    CHECK_THROWS_AS(t.column("missing"), DataError);
}

TEST_CASE("csv errors carry line numbers") {
    std::istringstream ragged("a,b\n1,2\n3\n");
    try {
        read_csv(ragged);
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    std::istringstream empty("");
    CHECK_THROWS_WITH_AS(read_csv(empty), "no observations", DataError);
    std::istringstream header_only("a,b\n");
    CHECK_THROWS_WITH_AS(read_csv(header_only), "no observations", DataError);

    std::istringstream negative("a,b\n1,2\n-1,2\n");
    Table t = read_csv(negative);
    try {
        extract_counts(t, {"a", "b"});
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    std::istringstream one("a,x\n1,0.5\n");
    CHECK_THROWS_AS(extract_counts(read_csv(one)), DataError);
}

TEST_CASE("regression dataset extraction") {
    std::istringstream in("y1,y2,x1,x2\n1,2,0.5,-1\n0,3,1.5,2e-1\n");
    RegressionDataset d = extract_regression(read_csv(in), {"y1", "y2"}, {"x1", "x2"});
    CHECK(d.X.rows() == 2);
    CHECK(d.X(1, 1) == doctest::Approx(0.2));
    CHECK(d.Y[1] == CountVector{0, 3});
}

TEST_CASE("fnv1a reference vectors") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("sum model json round trip") {
    std::vector<SumModel> models{
        {fam::Dirac{4}, 0},
        {fam::Binomial{7, 0.35}, 1},
        {fam::NegativeBinomial{2.5, 0.4}, 0},
        {fam::Poisson{0.1 + 0.2}, 2},
        {fam::Geometric{0.45}, 0},
        {fam::Logarithmic{0.6}, 0},
        {fam::ZeroModifiedLogarithmic{0.5, 0.3}, 0},
        {fam::BetaBinomial{9, 1.7, 2.4}, 0},
        {fam::BetaNegativeBinomial{2.0, 12.0, 3.0}, 0},
        {fam::BetaPoisson{4.0, 1.5, 2.5}, 0},
        {fam::GeneralizedBetaBinomial{8, 2.2, 1.3, 0.6}, 0},
        {fam::GeneralizedBetaNegativeBinomial{1.5, 11.0, 4.0, 0.7}, 0},
        {fam::BetaSquareBinomial{6, 2.0, 1.5, 3.0, 0.8}, 0},
        {fam::BetaSquareNegativeBinomial{2.0, 9.0, 1.5, 8.0, 1.2}, 0},
        {fam::BetaSquarePoisson{5.0, 2.0, 1.0, 1.5, 0.7}, 0},
    };
    for (const auto& m : models) {
        CAPTURE(describe(m));
        SumModel back = sum_model_from_json(reparse(to_json(m)));
        CHECK(family_tag(back) == family_tag(m));
        CHECK(back.shift == m.shift);
        CHECK(parameters(back.family) == parameters(m.family));
        CHECK(to_json(back) == to_json(m));
    }
}

TEST_CASE("model json round trips") {
    SplittingModel s{sing::DirichletMultinomial{{0.7, 1.0 / 3.0, 2.2}}, {fam::NegativeBinomial{2.5, 0.4}, 1}};
    SplittingModel back = splitting_model_from_json(reparse(to_json(s)));
    CHECK(std::get<sing::DirichletMultinomial>(back.singular).alpha ==
          std::get<sing::DirichletMultinomial>(s.singular).alpha);
    const CountVector y{1, 0, 3};
    CHECK(joint_log_pmf(back, y) == joint_log_pmf(s, y));

    SplittingModel h{sing::MultivariateHypergeometric{{4, 3, 5}}, {fam::Binomial{6, 0.5}, 0}};
    CHECK(to_json(splitting_model_from_json(reparse(to_json(h)))) == to_json(h));

    MixtureModel mix{{0.25, 0.75},
                     {{sing::Multinomial{{0.5, 0.5}}, {fam::Poisson{1.0}, 1}},
                      {sing::Multinomial{{0.1, 0.9}}, {fam::Geometric{0.3}, 0}}}};
    MixtureModel mback = mixture_model_from_json(reparse(to_json(mix)));
    CHECK(mback.weights == mix.weights);
    CHECK(mixture_log_pmf(mback, CountVector{1, 2}) == mixture_log_pmf(mix, CountVector{1, 2}));

    RegressionSpec r;
    r.B.resize(2, 2);
    r.B << 0.1, -0.2, 1.0 / 7.0, 0.4;
    r.beta = Eigen::Vector2d(0.3, -0.1);
    r.sum_family = FamilyTag::NegativeBinomial;
    r.sum_aux = 2.75;
    RegressionSpec rback = regression_spec_from_json(reparse(to_json(r)));
    CHECK(rback.B == r.B);
    CHECK(rback.beta == r.beta);
    CHECK(rback.sum_aux == r.sum_aux);
    CHECK(rback.sum_family == r.sum_family);
}

TEST_CASE("documents and schema checks") {
    ModelDocument d;
    d.model = SplittingModel{sing::Multinomial{{0.5, 0.5}}, {fam::Poisson{1.0}, 0}};
    FitStats st;
    st.loglik = kNegInf;
    d.fit = to_json(st);
    d.provenance = {"abc", 7, "splitdist fit"};
    Json j = reparse(to_json(d));
    CHECK(j["fit"]["loglik"] == "-inf");
    CHECK(number_from_json(j["fit"]["loglik"]) == kNegInf);
    ModelDocument back = document_from_json(j);
    CHECK(back.provenance.seed == 7u);
    CHECK(back.provenance.data_hash == "abc");
    CHECK(to_json(back) == to_json(d));

    j["schema_version"] = "2";
    CHECK_THROWS_AS(document_from_json(j), SchemaMismatch);
    j.erase("schema_version");
    CHECK_THROWS_AS(document_from_json(j), SchemaMismatch);
    CHECK(std::isnan(number_from_json(number_to_json(std::nan("")))));
}

TEST_CASE("csv to fit to json to loglik pipeline") {
    SplittingModel truth{sing::Multinomial{{0.3, 0.7}}, {fam::NegativeBinomial{2.0, 0.5}, 0}};
    Rng rng(4);
    auto data = splitting_sample(truth, rng, 500);
    std::ostringstream csv;
    csv << "a,b\n";
    for (const auto& y : data) csv << y[0] << "," << y[1] << "\n";
    std::istringstream in(csv.str());
    auto parsed = extract_counts(read_csv(in));
    FitReport r = fit_splitting(SingularTag::Multinomial, FamilyTag::NegativeBinomial, parsed);
    ModelDocument doc;
    doc.model = r.model;
    doc.fit = to_json(r);
    ModelDocument back = document_from_json(Json::parse(to_json(doc).dump(2)));
    const auto& m = std::get<SplittingModel>(back.model);
    double ll = 0.0;
    for (const auto& y : parsed) ll += joint_log_pmf(m, y);
    CHECK(std::abs(ll - r.loglik) <= 1e-12 * std::abs(r.loglik));
    CHECK(number_from_json(back.fit["loglik"]) == r.loglik);
}
