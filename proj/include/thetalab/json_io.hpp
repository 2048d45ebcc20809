#pragma once

// JSON encodings of the library types. Complex numbers are {"re", "im"}
// objects, absent optionals are null, non-finite reals are null. Every report
// carries a "schema" id and the readers reject a mismatched one.

#include <string>
#include <string_view>

#include "json.hpp"

#include "thetalab/bilinear.hpp"
#include "thetalab/divisor.hpp"
#include "thetalab/error.hpp"
#include "thetalab/kummer.hpp"
#include "thetalab/search.hpp"
#include "thetalab/theta.hpp"

namespace thetalab::io {

using Json = nlohmann::json;

inline constexpr std::string_view kResidualSchema = "thetalab.residual_report/1";
inline constexpr std::string_view kFlexSchema = "thetalab.flex_report/1";
inline constexpr std::string_view kPointsSchema = "thetalab.divisor_points/1";
inline constexpr std::string_view kSearchSchema = "thetalab.search_result/1";
inline constexpr std::string_view kProblemSchema = "thetalab.search_problem/1";
inline constexpr std::string_view kDecompSchema = "thetalab.decomposability/1";
inline constexpr std::string_view kThetaEvalSchema = "thetalab.theta_eval/1";

Json to_json(Complex x);
Json to_json(const CVector& v);
Json real_to_json(double x);

// All readers throw Error{kParseError} naming the offending field.
Complex complex_from_json(const Json& j, std::string_view field);
CVector vector_from_json(const Json& j, std::string_view field);
double real_from_json(const Json& j, std::string_view field);

// {"g", "tau_re", "tau_im"}; validation errors of the matrix propagate.
Json tau_to_json(const RiemannMatrix& tau);
RiemannMatrix tau_from_json(const Json& j);

Json jet_to_json(const DirectionJet& jet);
DirectionJet jet_from_json(const Json& j);

Json report_to_json(const ResidualReport& r);
ResidualReport report_from_json(const Json& j);

Json flex_to_json(const FlexReport& r);
FlexReport flex_from_json(const Json& j);

Json points_to_json(const DivisorSample& s);
DivisorSample points_from_json(const Json& j);

Json problem_to_json(const SearchProblem& p);
SearchProblem problem_from_json(const Json& j);

Json search_to_json(const SearchResult& r);
SearchResult search_from_json(const Json& j);

Json decomposability_to_json(const DecomposabilityReport& r);
DecomposabilityReport decomposability_from_json(const Json& j);

// Throws kIoError / kParseError.
Json read_json_file(const std::string& path);
// "-" writes to standard output.
void write_json_file(const std::string& path, const Json& j);
void write_text_file(const std::string& path, const std::string& text);

// {"error": {"code": "TAU_NOT_SYMMETRIC", "message": ...}}
Json error_to_json(const Error& e);

}  // namespace thetalab::io
