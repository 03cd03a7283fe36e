#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simforge/blueprint.hpp"
#include "simforge/orchestrator.hpp"

namespace simforge::refsim {

// A synthetic population with three undirected tie layers: family cliques
// plus sparse work and community graphs.
struct Population {
    int n = 100;
    std::vector<std::vector<int>> family;
    std::vector<std::vector<int>> work;
    std::vector<std::vector<int>> community;
    std::vector<int> initial_adopters;
};

struct MaskParams {
    double beta_family = 0.0;
    double beta_work = 0.0;
    double beta_community = 0.0;
    double broadcast = 0.0;
    double risk = 0.0;
    double bias = 0.0;
};

enum class LayerMode { PerLayerSlopes, PooledSingleSlope };

// One point in the discrete structure space: which mechanisms the simulator
// includes and how neighbor shares are computed.
struct StructureVariant {
    std::string id;
    bool include_broadcast = false;
    bool include_risk = false;
    LayerMode layer_mode = LayerMode::PooledSingleSlope;
    bool lagged_share = false;
};

struct World {
    Population pop;
    MaskParams truth;
    std::vector<double> truth_series;  // 40 daily adoption shares
    int calibration_days = 30;
    std::uint64_t sim_seed = 0;
};

// Deterministic world: population, fixed true parameters, and the ground
// truth produced by the full-structure variant. Days 0-29 calibrate,
// days 30-39 evaluate.
World generate_world(std::uint64_t seed);

// Daily adoption shares. Non-adopters adopt with probability
// sigmoid(bias + sum of enabled terms); adopters persist. Adoption draws
// are a hash of (seed, day, agent), so trajectories vary smoothly with the
// parameters and are independent of evaluation order.
std::vector<double> simulate(const StructureVariant& variant, const MaskParams& params,
                             const Population& pop, int days, std::uint64_t seed);

// Report with rmse_calibration over days [0, split) and rmse_evaluation
// over [split, end). Throws LengthMismatch.
MetricReport evaluate(const std::vector<double>& sim_series, const std::vector<double>& truth_series,
                      int split);

// All 16 flag combinations ordered from most broken (pooled, no broadcast,
// no risk, unlagged shares) to the full structure.
std::vector<StructureVariant> variant_catalog();

const StructureVariant& full_variant();

// Canonical text form of a variant; doubles as the program artifact.
std::string variant_text(const StructureVariant& variant);

// Recovers a variant from a program artifact. Throws UnknownTarget.
StructureVariant variant_from_program(const std::string& program);

MaskParams params_from_vector(const ParamVector& params);

// Deterministic generator policy: honor flag tokens named by the selected
// strategies' remediations, skip catalog entries whose fingerprint is
// recurrent against the registry, and otherwise emit the first usable
// variant. Throws CatalogExhausted.
GeneratorResponse mock_generate(const std::vector<StructureVariant>& catalog,
                                const std::vector<Strategy>& selected, const FailureRegistry& registry,
                                const CalibratorSpec& spec);

// Deterministic diagnosis: one issue per structural flag absent from the
// variant while rmse_evaluation exceeds that flag's trigger; silent once
// rmse_evaluation is at or below the convergence threshold.
std::string mock_feedback(const StructureVariant& variant, const MetricReport& report, const Blueprint& bp);

class MockGenerator : public GeneratorInterface {
public:
    MockGenerator(std::vector<StructureVariant> catalog, CalibratorSpec spec)
        : catalog_(std::move(catalog)), spec_(std::move(spec)) {}

    GeneratorResponse generate(const GeneratorRequest& request) override;

private:
    std::vector<StructureVariant> catalog_;
    CalibratorSpec spec_;
};

ExecutorFn make_executor(const World& world, std::vector<StructureVariant> catalog);
FeedbackFn make_feedback(std::vector<StructureVariant> catalog);

std::string world_to_json(const World& world);

}  // namespace simforge::refsim
