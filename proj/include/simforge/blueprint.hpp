#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace simforge {

enum class MetricDirection { LowerBetter, HigherBetter };

// One whitelisted evaluation metric: key, optimization direction, and its
// weight in the calibration objective.
struct MetricDef {
    std::string key;
    MetricDirection direction = MetricDirection::LowerBetter;
    double weight = 1.0;
    std::string definition;
};

enum class ParamKind { Real, Integer, RealMap };

// Box constraint for one calibratable parameter. RealMap bounds apply the
// same [low, high] interval independently to every listed map key.
struct ParamBound {
    std::string name;
    ParamKind kind = ParamKind::Real;
    double low = 0.0;
    double high = 1.0;
    std::vector<std::string> map_keys;
};

struct HoldoutPlan {
    double train_fraction = 0.8;
    std::string rule = "temporal";
};

// The static task specification anchoring a run: metric whitelist,
// calibratable parameter bounds, holdout plan, and free-text schema sections
// carried verbatim for prompt assembly. Immutable after construction; edits
// produce a new value with a bumped version.
struct Blueprint {
    std::string project_name;
    std::string version = "v1";
    std::vector<MetricDef> metrics;
    std::vector<ParamBound> parameters;
    HoldoutPlan holdout;
    std::vector<std::pair<std::string, std::string>> schema_sections;  // insertion order preserved
};

// A single review edit. Section edits replace a schema section's text;
// metric/parameter edits set one field of the named entry.
struct EditCommand {
    enum class Kind { Section, Metric, Parameter };
    Kind kind = Kind::Section;
    std::string target;
    std::string field;  // unused for Section
    std::string value;
};

// Throws SchemaViolation naming the offending path on the first violation.
void validate_blueprint(const Blueprint& bp);

// Throws MalformedDocument if text is not JSON, SchemaViolation otherwise.
Blueprint parse_blueprint(const std::string& text);

// Canonical serialization; parse_blueprint(serialize_blueprint(bp)) == bp.
std::string serialize_blueprint(const Blueprint& bp);

std::set<std::string> metric_whitelist(const Blueprint& bp);

// Applies the edits to a copy, bumps the version, re-validates. The input
// blueprint is untouched. Throws UnknownTarget or SchemaViolation.
Blueprint review_blueprint(const Blueprint& bp, const std::vector<EditCommand>& edits);

std::string bump_version(const std::string& version);

std::map<std::string, MetricDirection> metric_directions(const Blueprint& bp);
std::map<std::string, double> metric_weights(const Blueprint& bp);

std::string to_string(MetricDirection d);
std::string to_string(ParamKind k);

bool operator==(const MetricDef& a, const MetricDef& b);
bool operator==(const ParamBound& a, const ParamBound& b);
bool operator==(const HoldoutPlan& a, const HoldoutPlan& b);
bool operator==(const Blueprint& a, const Blueprint& b);

}  // namespace simforge
