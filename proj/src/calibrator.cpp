#include "simforge/calibrator.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "simforge/errors.hpp"

namespace simforge {

namespace {

nlohmann::json param_value_to_json(const ParamValue& v) {
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    if (std::holds_alternative<long long>(v)) return std::get<long long>(v);
    return std::get<std::map<std::string, double>>(v);
}

}  // namespace

ParamVector sample_params(const ParamSpace& space, SplitMix64& rng) {
    ParamVector out;
    for (const auto& bound : space.bounds) {
        switch (bound.kind) {
            case ParamKind::Real:
                out.values[bound.name] = bound.low + rng.next_double() * (bound.high - bound.low);
                break;
            case ParamKind::Integer:
                out.values[bound.name] =
                    rng.next_int(static_cast<long long>(bound.low), static_cast<long long>(bound.high));
                break;
            case ParamKind::RealMap: {
                std::map<std::string, double> entries;
                for (const auto& key : bound.map_keys)
                    entries[key] = bound.low + rng.next_double() * (bound.high - bound.low);
                out.values[bound.name] = std::move(entries);
                break;
            }
        }
    }
    return out;
}

double objective_value(const MetricReport& report, const std::map<std::string, double>& weights,
                       const std::map<std::string, MetricDirection>& directions) {
    double out = 0.0;
    for (const auto& [key, weight] : weights) {
        const auto it = report.values.find(key);
        if (it == report.values.end()) throw MissingMetric("weighted metric '" + key + "' missing from report");
        const auto dit = directions.find(key);
        const MetricDirection dir = dit == directions.end() ? MetricDirection::LowerBetter : dit->second;
        out += dir == MetricDirection::LowerBetter ? weight * it->second : weight * (1.0 - it->second);
    }
    return out;
}

CalibrationResult calibrate(const SimulateFn& simulate, const ParamSpace& space, int n_trials,
                            std::uint64_t seed, const std::map<std::string, double>& weights,
                            const std::map<std::string, MetricDirection>& directions) {
    if (n_trials < 1) throw Error("calibrate requires n_trials >= 1");
    CalibrationResult result;
    result.log.reserve(static_cast<std::size_t>(n_trials));

    int best_index = -1;
    for (int i = 0; i < n_trials; ++i) {
        Trial trial;
        trial.index = i;
        trial.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
        SplitMix64 rng(trial.seed);
        trial.params = sample_params(space, rng);
        try {
            trial.report = simulate(trial.params, trial.seed);
            trial.objective = objective_value(trial.report, weights, directions);
        } catch (const Error& e) {
            trial.failed = true;
            trial.error = e.what();
            trial.objective = std::numeric_limits<double>::infinity();
        }
        if (!trial.failed && (best_index < 0 || trial.objective < result.log[best_index].objective))
            best_index = i;
        result.log.push_back(std::move(trial));
    }

    if (best_index < 0) throw AllTrialsFailed("all " + std::to_string(n_trials) + " calibration trials failed");
    result.best = result.log[best_index];
    return result;
}

std::string param_vector_to_json(const ParamVector& params) {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [name, value] : params.values) doc[name] = param_value_to_json(value);
    return doc.dump();
}

ParamVector param_vector_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedDocument(std::string("parameter vector is not valid JSON: ") + e.what());
    }
    ParamVector out;
    for (const auto& item : doc.items()) {
        const auto& v = item.value();
        if (v.is_number_integer())
            out.values[item.key()] = v.get<long long>();
        else if (v.is_number())
            out.values[item.key()] = v.get<double>();
        else if (v.is_object())
            out.values[item.key()] = v.get<std::map<std::string, double>>();
        else
            throw SchemaViolation("parameter '" + item.key() + "' has an unsupported value type");
    }
    return out;
}

std::string trial_to_json_line(const Trial& trial, int iteration) {
    nlohmann::json doc;
    doc["iteration"] = iteration;
    doc["index"] = trial.index;
    doc["seed"] = trial.seed;
    doc["params"] = nlohmann::json::parse(param_vector_to_json(trial.params));
    if (trial.failed) {
        doc["failed"] = true;
        doc["error"] = trial.error;
        doc["objective"] = nullptr;
    } else {
        doc["objective"] = trial.objective;
        doc["metrics"] = trial.report.values;
    }
    return doc.dump();
}

bool operator==(const ParamVector& a, const ParamVector& b) { return a.values == b.values; }

}  // namespace simforge
