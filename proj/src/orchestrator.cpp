#include "simforge/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "simforge/errors.hpp"
#include "simforge/rng.hpp"

namespace simforge {

namespace {

using nlohmann::json;

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::optional<Issue> parse_issue(const json& entry, const std::set<std::string>& whitelist,
                                 std::string& reason) {
    if (!entry.is_object()) {
        reason = "NotAnObject";
        return std::nullopt;
    }
    Issue issue;
    for (const char* field : {"symptom", "mechanism_hypothesis", "remediation"}) {
        if (!entry.contains(field) || !entry.at(field).is_string() ||
            entry.at(field).get<std::string>().empty()) {
            reason = std::string("EmptyField:") + field;
            return std::nullopt;
        }
    }
    issue.symptom = entry.at("symptom").get<std::string>();
    issue.mechanism_hypothesis = entry.at("mechanism_hypothesis").get<std::string>();
    issue.remediation = entry.at("remediation").get<std::string>();

    if (!entry.contains("severity") || !entry.at("severity").is_string()) {
        reason = "BadSeverity";
        return std::nullopt;
    }
    try {
        issue.severity = severity_from_string(entry.at("severity").get<std::string>());
    } catch (const SchemaViolation&) {
        reason = "BadSeverity";
        return std::nullopt;
    }

    if (!entry.contains("metric_links") || !entry.at("metric_links").is_array() ||
        entry.at("metric_links").empty()) {
        reason = "EmptyMetricLinks";
        return std::nullopt;
    }
    for (const auto& link : entry.at("metric_links")) {
        if (!link.is_string()) {
            reason = "UnknownMetricKey";
            return std::nullopt;
        }
        const std::string key = link.get<std::string>();
        if (!whitelist.count(key)) {
            reason = "UnknownMetricKey:" + key;
            return std::nullopt;
        }
        issue.metric_links.insert(key);
    }

    if (entry.contains("issue_type") && entry.at("issue_type").is_string())
        issue.issue_type = entry.at("issue_type").get<std::string>();
    if (entry.contains("code_refs") && entry.at("code_refs").is_array()) {
        for (const auto& ref : entry.at("code_refs")) {
            if (!ref.is_object()) continue;
            issue.code_refs.push_back({ref.value("symbol", ""), ref.value("lines", "unknown")});
        }
    }
    return issue;
}

std::string format_evidence(const MetricReport& report, const std::set<std::string>& links) {
    std::ostringstream out;
    bool first = true;
    for (const auto& key : links) {
        const auto it = report.values.find(key);
        if (it == report.values.end()) continue;
        if (!first) out << "; ";
        out << key << "=" << it->second;
        first = false;
    }
    return out.str();
}

json severity_json(Severity s) { return to_string(s); }

json issue_to_json(const Issue& issue) {
    json j;
    j["symptom"] = issue.symptom;
    j["mechanism_hypothesis"] = issue.mechanism_hypothesis;
    j["remediation"] = issue.remediation;
    j["severity"] = severity_json(issue.severity);
    j["metric_links"] = std::vector<std::string>(issue.metric_links.begin(), issue.metric_links.end());
    j["issue_type"] = issue.issue_type;
    j["code_refs"] = json::array();
    for (const auto& ref : issue.code_refs)
        j["code_refs"].push_back({{"symbol", ref.symbol}, {"lines", ref.lines}});
    return j;
}

Issue issue_from_json(const json& j) {
    Issue issue;
    issue.symptom = j.value("symptom", "");
    issue.mechanism_hypothesis = j.value("mechanism_hypothesis", "");
    issue.remediation = j.value("remediation", "");
    issue.severity = severity_from_string(j.value("severity", "medium"));
    if (j.contains("metric_links"))
        for (const auto& link : j.at("metric_links")) issue.metric_links.insert(link.get<std::string>());
    issue.issue_type = j.value("issue_type", "");
    if (j.contains("code_refs"))
        for (const auto& ref : j.at("code_refs"))
            issue.code_refs.push_back({ref.value("symbol", ""), ref.value("lines", "unknown")});
    return issue;
}

void append_line(const std::string& path, const std::string& line) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error("cannot open '" + path + "' for appending");
    out << line << "\n";
}

void write_file(const std::string& path, const std::string& content) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << content;
}

}  // namespace

std::pair<std::vector<Issue>, std::vector<RejectedEntry>> validate_diagnosis(
    const std::string& raw, const std::set<std::string>& whitelist) {
    json doc;
    try {
        doc = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw MalformedDocument(std::string("diagnosis is not valid JSON: ") + e.what());
    }
    const json* entries = nullptr;
    if (doc.is_array()) {
        entries = &doc;
    } else if (doc.is_object() && doc.contains("issues") && doc.at("issues").is_array()) {
        entries = &doc.at("issues");
    } else {
        throw MalformedDocument("diagnosis must be a JSON array or an object with an 'issues' array");
    }

    std::vector<Issue> accepted;
    std::vector<RejectedEntry> rejected;
    for (const auto& entry : *entries) {
        std::string reason;
        if (auto issue = parse_issue(entry, whitelist, reason))
            accepted.push_back(std::move(*issue));
        else
            rejected.push_back({entry.dump(), reason});
    }
    return {std::move(accepted), std::move(rejected)};
}

std::vector<std::pair<std::string, EventKind>> dispatch_events(
    Playbook& pb, const MetricReport* prev, const MetricReport& cur, double tau,
    const std::map<std::string, MetricDirection>& directions, double eps) {
    std::vector<std::pair<std::string, EventKind>> events;
    for (auto& [id, strategy] : pb.strategies) {
        if (strategy.state != StrategyState::InProgress) continue;
        EventKind kind = EventKind::Uncertain;
        if (prev != nullptr) {
            try {
                const auto improvements =
                    link_improvements(*prev, cur, strategy.reflection.metric_links, directions, eps);
                kind = classify_link_improvements(improvements, tau);
            } catch (const MissingLink&) {
                kind = EventKind::Uncertain;
            } catch (const EmptyLinks&) {
                kind = EventKind::Uncertain;
            }
        }
        StrategyEvent event = StrategyEvent::Uncertain;
        if (kind == EventKind::Resolved) event = StrategyEvent::Resolved;
        if (kind == EventKind::Falsified) event = StrategyEvent::Falsified;
        strategy = apply_event(std::move(strategy), event);
        events.emplace_back(id, kind);
    }
    return events;
}

std::vector<std::string> admit_diagnosis(Playbook& pb, const Diagnosis& diag, double merge_threshold,
                                         const MetricReport* report) {
    std::vector<std::string> admitted;
    admitted.reserve(diag.issues.size());
    for (const auto& issue : diag.issues) {
        Reflection reflection;
        reflection.issue_type = issue.issue_type.empty() ? "STRUCTURAL" : issue.issue_type;
        reflection.severity = issue.severity;
        reflection.code_refs = issue.code_refs;
        reflection.error_identification = issue.symptom;
        reflection.root_cause_analysis = issue.mechanism_hypothesis;
        reflection.correct_approach = issue.remediation;
        reflection.metric_links = issue.metric_links;
        if (report != nullptr) reflection.evidence.metrics = format_evidence(*report, issue.metric_links);
        admitted.push_back(merge_or_insert(pb, reflection, merge_threshold).id);
    }
    return admitted;
}

bool should_stop(const std::vector<double>& history, double tau_stop, int patience, int max_iter) {
    if (history.empty()) return false;
    if (static_cast<int>(history.size()) >= max_iter) return true;
    // An entry improves when it beats the best-so-far by more than tau_stop
    // in relative terms (tau_stop mirrors the relative event threshold).
    double best = history.front();
    int streak = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        bool improved;
        if (!std::isfinite(best))
            improved = std::isfinite(history[i]);
        else
            improved = (best - history[i]) / (std::fabs(best) + 1e-9) > tau_stop;
        if (improved)
            streak = 0;
        else
            ++streak;
        best = std::min(best, history[i]);
    }
    return patience > 0 && streak >= patience;
}

RunResult run_loop(const Blueprint& bp, GeneratorInterface& generator, const ExecutorFn& executor,
                   const FeedbackFn& feedback, const RunConfig& config) {
    RunResult result;
    Playbook& pb = result.playbook;
    pb.metadata.project_name = bp.project_name;
    if (!config.playbook_path.empty()) {
        std::ifstream in(config.playbook_path);
        if (in) {
            std::ostringstream buf;
            buf << in.rdbuf();
            pb = load_playbook(buf.str());
        }
    }
    if (!config.history_path.empty()) write_file(config.history_path, "");
    if (!config.calib_log_path.empty()) write_file(config.calib_log_path, "");

    const std::string blueprint_text = serialize_blueprint(bp);
    const auto whitelist = metric_whitelist(bp);
    const auto directions = metric_directions(bp);
    const auto default_weights = metric_weights(bp);
    ParamSpace space{bp.parameters};

    FailureRegistry registry;
    std::vector<double> objectives;
    std::optional<MetricReport> prev_report;
    std::string previous_program;
    int consecutive_failures = 0;
    int best_index = -1;

    auto persist = [&](int t) {
        pb.metadata.last_updated_iteration = std::to_string(t);
        pb.metadata.last_updated_time = utc_timestamp();
        if (pb.metadata.finalized_at.empty()) pb.metadata.finalized_at = pb.metadata.last_updated_time;
        write_file(config.playbook_path, save_playbook(pb));
    };

    for (int t = 0; t < config.max_iter; ++t) {
        IterationRecord record;
        record.t = t;
        try {
            // Phase 1: knapsack scheduling over the OPEN/QUEUED pool.
            const auto pool = candidate_pool(pb);
            std::vector<KnapsackItem> items;
            items.reserve(pool.size());
            for (const auto& s : pool)
                items.push_back({s.id, valuation(s), token_count(render_strategy(s))});
            const auto selection = select_knapsack(items, config.recency_budget);
            mark_selection(pb, selection);

            std::vector<Strategy> selected;
            for (const auto& id : selection.chosen) selected.push_back(pb.strategies.at(id));

            std::string background = previous_program.empty()
                                         ? std::string("(no previous program)")
                                         : "Previous program:\n" + previous_program;
            if (prev_report) background += "\nPrevious metrics: " + report_to_json(*prev_report);
            const auto layout = layout_prompt(config.system_prompt, background, blueprint_text, selected,
                                              config.recency_budget);

            GeneratorRequest request;
            request.blueprint_text = blueprint_text;
            request.previous_program = previous_program;
            request.selected = selected;
            request.layout = layout;
            request.registry = &registry;

            GeneratorResponse response;
            try {
                response = generator.generate(request);
            } catch (const AuthMissing&) {
                throw;  // configuration problem, not an iteration failure
            } catch (const Error& e) {
                throw GeneratorFailure(e.what());
            }
            if (response.program.empty()) throw GeneratorFailure("generator returned an empty program");
            record.program = response.program;
            record.program_id = response.program_id;
            record.cre_programs = count_recurrent({response.program}, registry);

            CalibratorSpec spec;
            spec.weights = default_weights;
            spec.n_trials = config.n_trials;
            if (response.calibrator_spec) {
                spec.n_trials = response.calibrator_spec->n_trials;
                if (!response.calibrator_spec->weights.empty()) {
                    spec.weights.clear();
                    for (const auto& [key, w] : response.calibrator_spec->weights)
                        if (whitelist.count(key)) spec.weights[key] = w;
                    if (spec.weights.empty()) spec.weights = default_weights;
                }
            }

            CalibrationResult calib;
            try {
                calib = calibrate(
                    [&](const ParamVector& params, std::uint64_t) {
                        return executor(response.program, params);
                    },
                    space, spec.n_trials, mix_seed(config.seed, static_cast<std::uint64_t>(t)),
                    spec.weights, directions);
            } catch (const Error& e) {
                throw ExecutorFailure(e.what());
            }
            if (!config.calib_log_path.empty())
                for (const auto& trial : calib.log)
                    append_line(config.calib_log_path, trial_to_json_line(trial, t));

            record.theta_star = calib.best.params;
            record.objective = calib.best.objective;
            record.report = calib.best.report;
            record.report.iteration = t;
            validate_report(record.report, whitelist);

            record.events = dispatch_events(pb, prev_report ? &*prev_report : nullptr, record.report,
                                            config.tau, directions, config.epsilon);
            for (const auto& [id, kind] : record.events)
                if (kind == EventKind::Falsified)
                    registry.add(pb.strategies.at(id).reflection.correct_approach,
                                 "iteration " + std::to_string(t) + " strategy " + id);

            Diagnosis diag;
            diag.iteration = t;
            try {
                const std::string raw = feedback(response.program, record.report, bp);
                auto [accepted, rejected] = validate_diagnosis(raw, whitelist);
                diag.issues = std::move(accepted);
            } catch (const MalformedDocument&) {
                // Unparseable feedback is treated as an empty diagnosis.
            }
            record.diagnosis = diag;

            std::vector<std::string> strategy_texts;
            for (const auto& issue : diag.issues) strategy_texts.push_back(issue.remediation);
            record.cre_strategies = count_recurrent(strategy_texts, registry);

            record.admitted_ids = admit_diagnosis(pb, diag, config.merge_threshold, &record.report);

            objectives.push_back(record.objective);
            prev_report = record.report;
            previous_program = response.program;
            consecutive_failures = 0;
            if (best_index < 0 || record.objective < result.history[best_index].objective ||
                result.history[best_index].failed)
                best_index = static_cast<int>(result.history.size());
        } catch (const GeneratorFailure& e) {
            record.failed = true;
            record.error = std::string("generator failure: ") + e.what();
        } catch (const ExecutorFailure& e) {
            record.failed = true;
            record.error = std::string("executor failure: ") + e.what();
        }

        if (record.failed) {
            record.objective = std::numeric_limits<double>::infinity();
            objectives.push_back(record.objective);
            if (!record.program.empty())
                registry.add(record.program, "iteration " + std::to_string(t) + " aborted program");
            // A non-running program is the canonical blocker; admit the
            // failure itself as evidence linked to every metric.
            Diagnosis diag;
            diag.iteration = t;
            Issue issue;
            issue.symptom = "iteration aborted: " + record.error;
            issue.mechanism_hypothesis = "the generated program or its execution failed before evaluation";
            issue.remediation = "repair the failure before refining structure: " + record.error;
            issue.severity = Severity::Blocker;
            issue.issue_type = "EXECUTION";
            issue.metric_links = whitelist;
            diag.issues.push_back(std::move(issue));
            record.diagnosis = diag;
            record.admitted_ids = admit_diagnosis(pb, diag, config.merge_threshold, nullptr);
            ++consecutive_failures;
        }

        result.history.push_back(record);
        persist(t);
        append_line(config.history_path, record_to_json_line(record));

        if (consecutive_failures >= 3)
            throw LoopAborted("three consecutive iterations failed; last error: " + record.error);
        if (should_stop(objectives, config.tau_stop, config.patience, config.max_iter)) break;
    }

    if (best_index < 0) throw LoopAborted("no iteration completed successfully");
    result.best = result.history[best_index];
    return result;
}

std::string record_to_json_line(const IterationRecord& record) {
    json doc;
    doc["t"] = record.t;
    doc["status"] = record.failed ? "failed" : "ok";
    if (record.failed) doc["error"] = record.error;
    doc["program_id"] = record.program_id;
    doc["program"] = record.program;
    doc["theta_star"] = json::parse(param_vector_to_json(record.theta_star));
    doc["objective"] = record.failed ? json(nullptr) : json(record.objective);
    doc["report"] = {{"iteration", record.report.iteration}, {"values", record.report.values}};
    doc["diagnosis"] = {{"iteration", record.diagnosis.iteration}, {"issues", json::array()}};
    for (const auto& issue : record.diagnosis.issues) doc["diagnosis"]["issues"].push_back(issue_to_json(issue));
    doc["admitted"] = record.admitted_ids;
    doc["events"] = json::array();
    for (const auto& [id, kind] : record.events) doc["events"].push_back({id, to_string(kind)});
    doc["cre"] = {{"programs", record.cre_programs}, {"strategies", record.cre_strategies}};
    return doc.dump();
}

IterationRecord record_from_json_line(const std::string& line) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        throw MalformedDocument(std::string("history line is not valid JSON: ") + e.what());
    }
    IterationRecord record;
    record.t = doc.value("t", 0);
    record.failed = doc.value("status", "ok") == "failed";
    record.error = doc.value("error", "");
    record.program_id = doc.value("program_id", "");
    record.program = doc.value("program", "");
    if (doc.contains("theta_star")) record.theta_star = param_vector_from_json(doc.at("theta_star").dump());
    record.objective = doc.contains("objective") && !doc.at("objective").is_null()
                           ? doc.at("objective").get<double>()
                           : std::numeric_limits<double>::infinity();
    if (doc.contains("report")) {
        record.report.iteration = doc.at("report").value("iteration", 0);
        if (doc.at("report").contains("values"))
            record.report.values = doc.at("report").at("values").get<std::map<std::string, double>>();
    }
    if (doc.contains("diagnosis")) {
        record.diagnosis.iteration = doc.at("diagnosis").value("iteration", 0);
        if (doc.at("diagnosis").contains("issues"))
            for (const auto& j : doc.at("diagnosis").at("issues"))
                record.diagnosis.issues.push_back(issue_from_json(j));
    }
    if (doc.contains("admitted")) record.admitted_ids = doc.at("admitted").get<std::vector<std::string>>();
    if (doc.contains("events")) {
        for (const auto& e : doc.at("events")) {
            const std::string kind = e.at(1).get<std::string>();
            EventKind k = EventKind::Uncertain;
            if (kind == "resolved") k = EventKind::Resolved;
            if (kind == "falsified") k = EventKind::Falsified;
            record.events.emplace_back(e.at(0).get<std::string>(), k);
        }
    }
    if (doc.contains("cre")) {
        record.cre_programs = doc.at("cre").value("programs", 0);
        record.cre_strategies = doc.at("cre").value("strategies", 0);
    }
    return record;
}

std::vector<IterationRecord> load_history(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open history file '" + path + "'");
    std::vector<IterationRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json_line(line));
    }
    return records;
}

}  // namespace simforge
