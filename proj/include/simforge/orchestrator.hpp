#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "simforge/blueprint.hpp"
#include "simforge/calibrator.hpp"
#include "simforge/diagnostics.hpp"
#include "simforge/metrics.hpp"
#include "simforge/playbook.hpp"
#include "simforge/selection.hpp"

namespace simforge {

// One validated diagnostic finding with the four abstraction levels and
// whitelisted metric links.
struct Issue {
    std::string symptom;
    std::string mechanism_hypothesis;
    std::string remediation;
    Severity severity = Severity::Medium;
    std::set<std::string> metric_links;
    std::string issue_type;
    std::vector<CodeRef> code_refs;
};

struct Diagnosis {
    int iteration = 0;
    std::vector<Issue> issues;  // may be empty: a clean bill
};

struct RejectedEntry {
    std::string entry;
    std::string reason;
};

struct CalibratorSpec {
    std::map<std::string, double> weights;
    int n_trials = 200;
};

struct GeneratorRequest {
    std::string blueprint_text;
    std::string previous_program;
    std::vector<Strategy> selected;
    PromptLayout layout;
    const FailureRegistry* registry = nullptr;
};

struct GeneratorResponse {
    std::string program;  // opaque program artifact, non-empty
    std::string program_id;
    std::optional<CalibratorSpec> calibrator_spec;
};

class GeneratorInterface {
public:
    virtual ~GeneratorInterface() = default;
    virtual GeneratorResponse generate(const GeneratorRequest& request) = 0;
};

// One outer-loop step. Extra bookkeeping beyond the core fields (admitted
// strategy ids, recurrence counts) feeds the diagnose subcommands.
struct IterationRecord {
    int t = 0;
    bool failed = false;
    std::string error;
    std::string program_id;
    std::string program;
    ParamVector theta_star;
    double objective = 0.0;
    MetricReport report;
    Diagnosis diagnosis;
    std::vector<std::string> admitted_ids;
    std::vector<std::pair<std::string, EventKind>> events;
    int cre_programs = 0;
    int cre_strategies = 0;
};

struct RunConfig {
    std::uint64_t seed = 0;
    int max_iter = 9;
    int patience = 2;
    double tau = 0.03;
    double tau_stop = 0.03;
    long long recency_budget = 1000;
    int n_trials = 200;
    double merge_threshold = 0.8;
    double epsilon = 1e-9;
    std::string playbook_path;
    std::string history_path;
    std::string calib_log_path;
    std::string system_prompt = "You construct simulators that match observed data distributions.";
};

using ExecutorFn = std::function<MetricReport(const std::string& program, const ParamVector& params)>;
using FeedbackFn =
    std::function<std::string(const std::string& program, const MetricReport& report, const Blueprint& bp)>;

struct RunResult {
    IterationRecord best;
    std::vector<IterationRecord> history;
    Playbook playbook;
};

// Parses a raw structured-feedback document (a JSON array of entries, or an
// object with an "issues" array). Entries that violate the schema (unknown
// metric key, empty required field, bad severity) land in rejected with the
// first failed check; only MalformedDocument aborts.
std::pair<std::vector<Issue>, std::vector<RejectedEntry>> validate_diagnosis(
    const std::string& raw, const std::set<std::string>& whitelist);

// Fires the metric-driven event for every INPROGRESS strategy from the
// change prev -> cur over its metric links. A missing link or an absent
// previous report yields Uncertain. Returns the events in id order.
std::vector<std::pair<std::string, EventKind>> dispatch_events(
    Playbook& pb, const MetricReport* prev, const MetricReport& cur, double tau,
    const std::map<std::string, MetricDirection>& directions, double eps = 1e-9);

// Converts each issue to a reflection and runs it through merge_or_insert;
// evidence is filled from the report when provided. Returns the strategy id
// per issue, in issue order.
std::vector<std::string> admit_diagnosis(Playbook& pb, const Diagnosis& diag, double merge_threshold = 0.8,
                                         const MetricReport* report = nullptr);

// True once the history reaches max_iter entries, or when the best-so-far
// objective has failed to improve by more than tau_stop for patience
// consecutive entries. Failed iterations enter the history as +infinity.
bool should_stop(const std::vector<double>& history, double tau_stop, int patience, int max_iter = 9);

// Algorithm body: selection -> generation -> calibration -> evaluation ->
// event dispatch -> diagnosis -> admission -> stop check, persisting the
// playbook and history after every iteration. Generator/executor failures
// abort the iteration and count toward max_iter; three consecutive aborts
// raise LoopAborted.
RunResult run_loop(const Blueprint& bp, GeneratorInterface& generator, const ExecutorFn& executor,
                   const FeedbackFn& feedback, const RunConfig& config);

std::string record_to_json_line(const IterationRecord& record);
IterationRecord record_from_json_line(const std::string& line);
std::vector<IterationRecord> load_history(const std::string& path);

}  // namespace simforge
