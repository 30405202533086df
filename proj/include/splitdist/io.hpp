#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "splitdist/inference.hpp"
#include "splitdist/regression.hpp"
#include "splitdist/splitting.hpp"

namespace splitdist {

using Json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1";

class SchemaMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------- CSV

/// Comma-separated table with a mandatory header row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line;  // 1-based source line of each row

    std::size_t column(const std::string& name) const;
};

/// Throws DataError (with the line number) on ragged rows, "no observations"
/// when there is no data row.
Table read_csv(std::istream& in);
Table read_csv_file(const std::string& path);

/// Columns whose every entry is a non-negative integer.
std::vector<std::string> integer_columns(const Table& t);

/// Count vectors from the given columns, or from all integer columns.
std::vector<CountVector> extract_counts(const Table& t, const std::vector<std::string>& columns = {});

RegressionDataset extract_regression(const Table& t, const std::vector<std::string>& response,
                                     const std::vector<std::string>& covariates);

/// 64-bit FNV-1a hash as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

// ------------------------------------------------------------------ JSON

Json to_json(const SumModel& m);
Json to_json(const SingularModel& m);
Json to_json(const SplittingModel& m);
Json to_json(const MixtureModel& m);
Json to_json(const RegressionSpec& s);
Json to_json(const FitStats& s);
Json to_json(const FitReport& r);

SumModel sum_model_from_json(const Json& j);
SingularModel singular_model_from_json(const Json& j);
SplittingModel splitting_model_from_json(const Json& j);
MixtureModel mixture_model_from_json(const Json& j);
RegressionSpec regression_spec_from_json(const Json& j);

/// Non-finite values are written as the strings "inf", "-inf", "nan".
Json number_to_json(double v);
double number_from_json(const Json& j);

using AnyModel = std::variant<SplittingModel, MixtureModel, RegressionSpec>;

struct Provenance {
    std::string data_hash;
    std::optional<std::uint64_t> seed;
    std::string command_line;
};

struct ModelDocument {
    std::string schema_version = kSchemaVersion;
    AnyModel model;
    Json fit = Json::object();
    Provenance provenance;
};

Json to_json(const ModelDocument& d);
/// Throws SchemaMismatch when schema_version differs.
ModelDocument document_from_json(const Json& j);
ModelDocument read_document(const std::string& path);

}  // namespace splitdist
