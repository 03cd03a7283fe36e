#include "simforge/blueprint.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "simforge/errors.hpp"

namespace simforge {

namespace {

using ordered_json = nlohmann::ordered_json;

MetricDirection parse_direction(const std::string& s, const std::string& path) {
    if (s == "lower_better") return MetricDirection::LowerBetter;
    if (s == "higher_better") return MetricDirection::HigherBetter;
    throw SchemaViolation(path + ": unknown direction '" + s + "'");
}

ParamKind parse_kind(const std::string& s, const std::string& path) {
    if (s == "real") return ParamKind::Real;
    if (s == "integer") return ParamKind::Integer;
    if (s == "real_map") return ParamKind::RealMap;
    throw SchemaViolation(path + ": unknown kind '" + s + "'");
}

const ordered_json& require(const ordered_json& obj, const std::string& key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaViolation(path + ": missing required field '" + key + "'");
    return *it;
}

std::string require_string(const ordered_json& obj, const std::string& key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_string()) throw SchemaViolation(path + "." + key + ": expected a string");
    return v.get<std::string>();
}

double require_number(const ordered_json& obj, const std::string& key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_number()) throw SchemaViolation(path + "." + key + ": expected a number");
    return v.get<double>();
}

bool is_integral(double x) { return std::floor(x) == x; }

}  // namespace

void validate_blueprint(const Blueprint& bp) {
    if (bp.metrics.empty()) throw SchemaViolation("metrics: must be non-empty");
    if (bp.parameters.empty()) throw SchemaViolation("calibratable_parameters: must be non-empty");

    std::set<std::string> metric_keys;
    for (std::size_t i = 0; i < bp.metrics.size(); ++i) {
        const auto& m = bp.metrics[i];
        const std::string path = "metrics[" + std::to_string(i) + "]";
        if (m.key.empty()) throw SchemaViolation(path + ".key: must be non-empty");
        if (!metric_keys.insert(m.key).second)
            throw SchemaViolation(path + ".key: duplicate metric key '" + m.key + "'");
        if (!(m.weight >= 0.0)) throw SchemaViolation(path + ".weight: must be >= 0");
    }

    std::set<std::string> param_names;
    for (std::size_t i = 0; i < bp.parameters.size(); ++i) {
        const auto& p = bp.parameters[i];
        const std::string path = "calibratable_parameters[" + std::to_string(i) + "]";
        if (p.name.empty()) throw SchemaViolation(path + ".name: must be non-empty");
        if (!param_names.insert(p.name).second)
            throw SchemaViolation(path + ".name: duplicate parameter name '" + p.name + "'");
        if (!(p.low < p.high))
            throw SchemaViolation(path + " ('" + p.name + "'): low must be < high");
        if (p.kind == ParamKind::Integer && (!is_integral(p.low) || !is_integral(p.high)))
            throw SchemaViolation(path + " ('" + p.name + "'): integer bounds must be integral");
        if (p.kind == ParamKind::RealMap) {
            if (p.map_keys.empty())
                throw SchemaViolation(path + " ('" + p.name + "'): real_map requires non-empty map_keys");
            std::set<std::string> seen;
            for (const auto& k : p.map_keys)
                if (!seen.insert(k).second)
                    throw SchemaViolation(path + " ('" + p.name + "'): duplicate map key '" + k + "'");
        } else if (!p.map_keys.empty()) {
            throw SchemaViolation(path + " ('" + p.name + "'): map_keys only valid for real_map");
        }
    }

    if (!(bp.holdout.train_fraction > 0.0 && bp.holdout.train_fraction < 1.0))
        throw SchemaViolation("holdout.train_fraction: must lie in (0, 1)");
}

Blueprint parse_blueprint(const std::string& text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedDocument(std::string("blueprint is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaViolation("top level: expected a JSON object");

    static const std::set<std::string> known = {"project_name", "version",          "metrics",
                                                "holdout",      "schema_sections", "calibratable_parameters"};
    for (const auto& item : doc.items())
        if (!known.count(item.key()))
            throw SchemaViolation("top level: unknown field '" + item.key() + "'");

    Blueprint bp;
    bp.project_name = require_string(doc, "project_name", "top level");
    bp.version = doc.contains("version") ? require_string(doc, "version", "top level") : "v1";

    const auto& metrics = require(doc, "metrics", "top level");
    if (!metrics.is_array()) throw SchemaViolation("metrics: expected an array");
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        const std::string path = "metrics[" + std::to_string(i) + "]";
        const auto& mj = metrics[i];
        if (!mj.is_object()) throw SchemaViolation(path + ": expected an object");
        MetricDef m;
        m.key = require_string(mj, "key", path);
        m.direction = parse_direction(require_string(mj, "direction", path), path);
        m.weight = require_number(mj, "weight", path);
        m.definition = mj.contains("definition") ? require_string(mj, "definition", path) : "";
        bp.metrics.push_back(std::move(m));
    }

    const auto& params = require(doc, "calibratable_parameters", "top level");
    if (!params.is_array()) throw SchemaViolation("calibratable_parameters: expected an array");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string path = "calibratable_parameters[" + std::to_string(i) + "]";
        const auto& pj = params[i];
        if (!pj.is_object()) throw SchemaViolation(path + ": expected an object");
        ParamBound p;
        p.name = require_string(pj, "name", path);
        p.kind = parse_kind(require_string(pj, "kind", path), path);
        p.low = require_number(pj, "low", path);
        p.high = require_number(pj, "high", path);
        if (pj.contains("map_keys")) {
            const auto& mk = pj.at("map_keys");
            if (!mk.is_array()) throw SchemaViolation(path + ".map_keys: expected an array");
            for (const auto& k : mk) {
                if (!k.is_string()) throw SchemaViolation(path + ".map_keys: expected strings");
                p.map_keys.push_back(k.get<std::string>());
            }
        }
        bp.parameters.push_back(std::move(p));
    }

    if (doc.contains("holdout")) {
        const auto& hj = doc.at("holdout");
        if (!hj.is_object()) throw SchemaViolation("holdout: expected an object");
        if (hj.contains("train_fraction")) bp.holdout.train_fraction = require_number(hj, "train_fraction", "holdout");
        if (hj.contains("rule")) bp.holdout.rule = require_string(hj, "rule", "holdout");
    }

    if (doc.contains("schema_sections")) {
        const auto& sj = doc.at("schema_sections");
        if (!sj.is_object()) throw SchemaViolation("schema_sections: expected an object");
        for (const auto& item : sj.items()) {
            if (!item.value().is_string())
                throw SchemaViolation("schema_sections." + item.key() + ": expected a string");
            bp.schema_sections.emplace_back(item.key(), item.value().get<std::string>());
        }
    }

    validate_blueprint(bp);
    return bp;
}

std::string serialize_blueprint(const Blueprint& bp) {
    ordered_json doc;
    doc["project_name"] = bp.project_name;
    doc["version"] = bp.version;
    doc["metrics"] = ordered_json::array();
    for (const auto& m : bp.metrics) {
        ordered_json mj;
        mj["key"] = m.key;
        mj["direction"] = to_string(m.direction);
        mj["weight"] = m.weight;
        mj["definition"] = m.definition;
        doc["metrics"].push_back(std::move(mj));
    }
    doc["calibratable_parameters"] = ordered_json::array();
    for (const auto& p : bp.parameters) {
        ordered_json pj;
        pj["name"] = p.name;
        pj["kind"] = to_string(p.kind);
        pj["low"] = p.low;
        pj["high"] = p.high;
        if (p.kind == ParamKind::RealMap) pj["map_keys"] = p.map_keys;
        doc["calibratable_parameters"].push_back(std::move(pj));
    }
    doc["holdout"] = {{"train_fraction", bp.holdout.train_fraction}, {"rule", bp.holdout.rule}};
    doc["schema_sections"] = ordered_json::object();
    for (const auto& [name, text] : bp.schema_sections) doc["schema_sections"][name] = text;
    return doc.dump(2) + "\n";
}

std::set<std::string> metric_whitelist(const Blueprint& bp) {
    std::set<std::string> keys;
    for (const auto& m : bp.metrics) keys.insert(m.key);
    return keys;
}

std::string bump_version(const std::string& version) {
    std::size_t end = version.size();
    while (end > 0 && std::isdigit(static_cast<unsigned char>(version[end - 1]))) --end;
    if (end == version.size()) return version + ".1";
    const std::string digits = version.substr(end);
    return version.substr(0, end) + std::to_string(std::stoll(digits) + 1);
}

Blueprint review_blueprint(const Blueprint& bp, const std::vector<EditCommand>& edits) {
    Blueprint out = bp;
    for (const auto& edit : edits) {
        switch (edit.kind) {
            case EditCommand::Kind::Section: {
                auto it = std::find_if(out.schema_sections.begin(), out.schema_sections.end(),
                                       [&](const auto& s) { return s.first == edit.target; });
                if (it == out.schema_sections.end())
                    throw UnknownTarget("no schema section named '" + edit.target + "'");
                it->second = edit.value;
                break;
            }
            case EditCommand::Kind::Metric: {
                auto it = std::find_if(out.metrics.begin(), out.metrics.end(),
                                       [&](const MetricDef& m) { return m.key == edit.target; });
                if (it == out.metrics.end()) throw UnknownTarget("no metric named '" + edit.target + "'");
                if (edit.field == "key")
                    it->key = edit.value;
                else if (edit.field == "direction")
                    it->direction = parse_direction(edit.value, "metric '" + edit.target + "'");
                else if (edit.field == "weight")
                    it->weight = std::stod(edit.value);
                else if (edit.field == "definition")
                    it->definition = edit.value;
                else
                    throw UnknownTarget("metric field '" + edit.field + "' is not editable");
                break;
            }
            case EditCommand::Kind::Parameter: {
                auto it = std::find_if(out.parameters.begin(), out.parameters.end(),
                                       [&](const ParamBound& p) { return p.name == edit.target; });
                if (it == out.parameters.end()) throw UnknownTarget("no parameter named '" + edit.target + "'");
                if (edit.field == "name")
                    it->name = edit.value;
                else if (edit.field == "low")
                    it->low = std::stod(edit.value);
                else if (edit.field == "high")
                    it->high = std::stod(edit.value);
                else
                    throw UnknownTarget("parameter field '" + edit.field + "' is not editable");
                break;
            }
        }
    }
    out.version = bump_version(bp.version);
    validate_blueprint(out);
    return out;
}

std::map<std::string, MetricDirection> metric_directions(const Blueprint& bp) {
    std::map<std::string, MetricDirection> out;
    for (const auto& m : bp.metrics) out[m.key] = m.direction;
    return out;
}

std::map<std::string, double> metric_weights(const Blueprint& bp) {
    std::map<std::string, double> out;
    for (const auto& m : bp.metrics) out[m.key] = m.weight;
    return out;
}

std::string to_string(MetricDirection d) {
    return d == MetricDirection::LowerBetter ? "lower_better" : "higher_better";
}

std::string to_string(ParamKind k) {
    switch (k) {
        case ParamKind::Real: return "real";
        case ParamKind::Integer: return "integer";
        case ParamKind::RealMap: return "real_map";
    }
    return "real";
}

bool operator==(const MetricDef& a, const MetricDef& b) {
    return a.key == b.key && a.direction == b.direction && a.weight == b.weight && a.definition == b.definition;
}

bool operator==(const ParamBound& a, const ParamBound& b) {
    return a.name == b.name && a.kind == b.kind && a.low == b.low && a.high == b.high && a.map_keys == b.map_keys;
}

bool operator==(const HoldoutPlan& a, const HoldoutPlan& b) {
    return a.train_fraction == b.train_fraction && a.rule == b.rule;
}

bool operator==(const Blueprint& a, const Blueprint& b) {
    return a.project_name == b.project_name && a.version == b.version && a.metrics == b.metrics &&
           a.parameters == b.parameters && a.holdout == b.holdout && a.schema_sections == b.schema_sections;
}

}  // namespace simforge
