#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "simforge/blueprint.hpp"
#include "simforge/metrics.hpp"
#include "simforge/rng.hpp"

namespace simforge {

using ParamValue = std::variant<double, long long, std::map<std::string, double>>;

struct ParamVector {
    std::map<std::string, ParamValue> values;
};

struct ParamSpace {
    std::vector<ParamBound> bounds;
};

struct Trial {
    int index = 0;
    ParamVector params;
    MetricReport report;
    double objective = 0.0;  // +infinity for failed trials
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
};

// best is the earliest trial attaining the minimum objective over the log.
struct CalibrationResult {
    Trial best;
    std::vector<Trial> log;
};

// The simulation hook: (parameter vector, derived trial seed) -> report.
using SimulateFn = std::function<MetricReport(const ParamVector&, std::uint64_t)>;

// Uniform draw inside every bound: reals in [low, high], integers over the
// inclusive integer range, map bounds independently per key.
ParamVector sample_params(const ParamSpace& space, SplitMix64& rng);

// Minimization target: sum of w_k * m_k over lower-better keys plus
// w_k * (1 - m_k) over higher-better keys. Throws MissingMetric.
double objective_value(const MetricReport& report, const std::map<std::string, double>& weights,
                       const std::map<std::string, MetricDirection>& directions);

// Random search over the space: n_trials evaluations with per-trial seeds
// derived from (seed, index), bit-identical across reruns. Failing trials
// are logged with an infinite objective; AllTrialsFailed when none succeed.
CalibrationResult calibrate(const SimulateFn& simulate, const ParamSpace& space, int n_trials,
                            std::uint64_t seed, const std::map<std::string, double>& weights,
                            const std::map<std::string, MetricDirection>& directions);

std::string param_vector_to_json(const ParamVector& params);
ParamVector param_vector_from_json(const std::string& text);

// One JSON line per trial, for the calibration log.
std::string trial_to_json_line(const Trial& trial, int iteration);

bool operator==(const ParamVector& a, const ParamVector& b);

}  // namespace simforge
