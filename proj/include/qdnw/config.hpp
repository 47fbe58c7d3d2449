#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdnw/geometry.hpp"
#include "qdnw/nullform.hpp"
#include "qdnw/obsets.hpp"
#include "qdnw/wavesolver.hpp"

namespace qdnw {

using Json = nlohmann::json;

/// Scenario file contents after schema validation. Sections stay as JSON and
/// are turned into library objects by the build_* helpers on demand.
struct ScenarioConfig {
    Json raw;
    std::string origin;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    /// Multiplies every tolerance read from the file.
    double tol_scale = 1.0;

    bool has(const std::string& section) const { return raw.contains(section); }
    const Json& section(const std::string& name) const;
    /// Tolerance from the "tolerances" section (or the default), times tol_scale.
    double tolerance(const std::string& name, double fallback) const;
    /// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
    std::string hash() const;
};

/// Parses and validates; ParseError carries line and column, SchemaError the offending key path.
ScenarioConfig parse_config(const std::string& text, const std::string& origin = "<string>");
ScenarioConfig load_config(const std::string& path);

/// Every schema problem found, empty when valid.
std::vector<std::string> schema_errors(const Json& raw);

std::string fnv1a_hex(const std::string& bytes);

/// Number, or {"kind": "constant" | "affine" | "gaussian", ...}.
ScalarField build_scalar(const Json& spec, int n);
MetricSpec build_metric(const Json& spec);
NonlinearTerm build_nonlinearity(const Json& spec, const MetricSpec& m);
Grid build_grid(const Json& spec, const MetricSpec& m);
Bump build_bump(const Json& spec);
/// Source profiles sampled on the grid, one field per entry.
std::vector<GridField> build_sources(const Json& spec, const Grid& grid);
Point json_point(const Json& v);
ObservationRegion build_region(const Json& spec, int d);

}  // namespace qdnw
