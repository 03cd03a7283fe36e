#include "simforge/playbook.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <json.hpp>

#include "simforge/diagnostics.hpp"
#include "simforge/errors.hpp"

namespace simforge {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

ordered_json reflection_to_json(const Reflection& r) {
    ordered_json j;
    j["issue_type"] = r.issue_type;
    j["severity"] = to_string(r.severity);
    j["from_user_feedback"] = r.from_user_feedback;
    j["blueprint_refs"] = r.blueprint_refs;
    j["code_refs"] = ordered_json::array();
    for (const auto& ref : r.code_refs) j["code_refs"].push_back({{"symbol", ref.symbol}, {"lines", ref.lines}});
    j["evidence"] = ordered_json::object();
    j["evidence"]["user_feedback"] =
        r.evidence.user_feedback ? ordered_json(*r.evidence.user_feedback) : ordered_json(nullptr);
    j["evidence"]["error_logs"] =
        r.evidence.error_logs ? ordered_json(*r.evidence.error_logs) : ordered_json(nullptr);
    j["evidence"]["metrics"] = r.evidence.metrics;
    j["error_identification"] = r.error_identification;
    j["root_cause_analysis"] = r.root_cause_analysis;
    j["correct_approach"] = r.correct_approach;
    j["key_insight"] = r.key_insight ? ordered_json(*r.key_insight) : ordered_json(nullptr);
    j["metric_links"] = std::vector<std::string>(r.metric_links.begin(), r.metric_links.end());
    return j;
}

Reflection reflection_from_json(const ordered_json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaViolation(path + ": expected an object");
    Reflection r;
    for (const char* field : {"issue_type", "severity", "error_identification", "root_cause_analysis",
                              "correct_approach", "metric_links"}) {
        if (!j.contains(field)) throw SchemaViolation(path + ": missing required field '" + field + "'");
    }
    r.issue_type = j.at("issue_type").get<std::string>();
    r.severity = severity_from_string(j.at("severity").get<std::string>());
    r.from_user_feedback = j.value("from_user_feedback", false);
    if (j.contains("blueprint_refs")) r.blueprint_refs = j.at("blueprint_refs").get<std::vector<std::string>>();
    if (j.contains("code_refs")) {
        for (const auto& ref : j.at("code_refs"))
            r.code_refs.push_back({ref.value("symbol", ""), ref.value("lines", "unknown")});
    }
    if (j.contains("evidence")) {
        const auto& e = j.at("evidence");
        r.evidence.metrics = e.value("metrics", "");
        if (e.contains("error_logs") && !e.at("error_logs").is_null())
            r.evidence.error_logs = e.at("error_logs").get<std::string>();
        if (e.contains("user_feedback") && !e.at("user_feedback").is_null())
            r.evidence.user_feedback = e.at("user_feedback").get<std::string>();
    }
    r.error_identification = j.at("error_identification").get<std::string>();
    r.root_cause_analysis = j.at("root_cause_analysis").get<std::string>();
    r.correct_approach = j.at("correct_approach").get<std::string>();
    if (j.contains("key_insight") && !j.at("key_insight").is_null())
        r.key_insight = j.at("key_insight").get<std::string>();
    const auto links = j.at("metric_links").get<std::vector<std::string>>();
    r.metric_links = std::set<std::string>(links.begin(), links.end());
    if (r.error_identification.empty() || r.root_cause_analysis.empty() || r.correct_approach.empty())
        throw SchemaViolation(path + ": diagnosis fields must be non-empty");
    if (r.metric_links.empty()) throw SchemaViolation(path + ": metric_links must be non-empty");
    return r;
}

}  // namespace

std::string to_string(StrategyState s) {
    switch (s) {
        case StrategyState::Open: return "OPEN";
        case StrategyState::Queued: return "QUEUED";
        case StrategyState::InProgress: return "INPROGRESS";
        case StrategyState::Resolved: return "RESOLVED";
    }
    return "OPEN";
}

std::string to_string(Severity s) {
    switch (s) {
        case Severity::Blocker: return "blocker";
        case Severity::High: return "high";
        case Severity::Medium: return "medium";
        case Severity::Low: return "low";
    }
    return "medium";
}

StrategyState state_from_string(const std::string& s) {
    if (s == "OPEN") return StrategyState::Open;
    if (s == "QUEUED") return StrategyState::Queued;
    if (s == "INPROGRESS") return StrategyState::InProgress;
    if (s == "RESOLVED") return StrategyState::Resolved;
    throw SchemaViolation("unknown strategy state '" + s + "'");
}

Severity severity_from_string(const std::string& s) {
    const std::string v = lower(s);
    if (v == "blocker") return Severity::Blocker;
    if (v == "high") return Severity::High;
    if (v == "medium") return Severity::Medium;
    if (v == "low") return Severity::Low;
    throw SchemaViolation("unknown severity '" + s + "'");
}

Strategy apply_event(Strategy strategy, StrategyEvent event) {
    const StrategyState state = strategy.state;
    switch (event) {
        case StrategyEvent::New:
            throw IllegalTransition("New is only legal for strategies that do not exist yet");
        case StrategyEvent::Merge:
            strategy.state = StrategyState::Open;
            return strategy;
        case StrategyEvent::Selected:
            if (state != StrategyState::Open && state != StrategyState::Queued)
                throw IllegalTransition("Selected requires OPEN or QUEUED, got " + to_string(state));
            strategy.state = StrategyState::InProgress;
            strategy.meta.usage_count += 1;
            return strategy;
        case StrategyEvent::NotSelected:
            if (state != StrategyState::Open && state != StrategyState::Queued)
                throw IllegalTransition("NotSelected requires OPEN or QUEUED, got " + to_string(state));
            strategy.state = StrategyState::Queued;
            strategy.meta.unusage_count += 1;
            return strategy;
        case StrategyEvent::Resolved:
            if (state != StrategyState::InProgress)
                throw IllegalTransition("Resolved requires INPROGRESS, got " + to_string(state));
            strategy.state = StrategyState::Resolved;
            strategy.meta.success_attribution += 1;
            return strategy;
        case StrategyEvent::Falsified:
            if (state != StrategyState::InProgress)
                throw IllegalTransition("Falsified requires INPROGRESS, got " + to_string(state));
            strategy.state = StrategyState::Open;
            strategy.meta.failure_attribution += 1;
            return strategy;
        case StrategyEvent::Uncertain:
            if (state != StrategyState::InProgress)
                throw IllegalTransition("Uncertain requires INPROGRESS, got " + to_string(state));
            strategy.state = StrategyState::Open;
            return strategy;
    }
    throw IllegalTransition("unknown event");
}

double reliability(const MetaInfo& meta) {
    return static_cast<double>(meta.success_attribution + 1) /
           static_cast<double>(meta.success_attribution + meta.failure_attribution + 2);
}

double severity_weight(Severity s) {
    switch (s) {
        case Severity::Blocker: return 1.0;
        case Severity::High: return 0.8;
        case Severity::Medium: return 0.4;
        case Severity::Low: return 0.2;
    }
    return 0.4;
}

double valuation(const Strategy& strategy, double lambda, long long backlog_cap) {
    const double backlog = 1.0 + lambda * static_cast<double>(std::min(strategy.meta.unusage_count, backlog_cap));
    return severity_weight(strategy.reflection.severity) * backlog * reliability(strategy.meta);
}

long long token_count(const std::string& text) {
    return static_cast<long long>((text.size() + 3) / 4);
}

std::string render_reflection(const Reflection& reflection) {
    return reflection_to_json(reflection).dump(2);
}

std::string normalized_reflection_text(const Reflection& reflection) {
    return fingerprint(reflection.error_identification + " " + reflection.root_cause_analysis + " " +
                       reflection.correct_approach);
}

std::string slug_from_text(const std::string& text, const Playbook& pb) {
    std::string slug;
    bool pending_hyphen = false;
    for (char raw : text) {
        if (slug.size() >= 64) break;
        const auto c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            if (pending_hyphen && !slug.empty()) slug.push_back('-');
            pending_hyphen = false;
            slug.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_hyphen = true;
        }
    }
    if (slug.empty()) slug = "strategy";
    if (!pb.strategies.count(slug)) return slug;
    for (int suffix = 2;; ++suffix) {
        const std::string candidate = slug + "-" + std::to_string(suffix);
        if (!pb.strategies.count(candidate)) return candidate;
    }
}

MergeResult merge_or_insert(Playbook& pb, const Reflection& incoming, double similarity_threshold) {
    const std::string incoming_text = normalized_reflection_text(incoming);
    std::string best_id;
    double best_similarity = -1.0;
    for (const auto& [id, strategy] : pb.strategies) {
        const double s = similarity(incoming_text, normalized_reflection_text(strategy.reflection));
        if (s >= similarity_threshold && s > best_similarity) {
            best_similarity = s;
            best_id = id;  // map iteration is id-ascending, so ties keep the smallest id
        }
    }
    if (!best_id.empty()) {
        Strategy& hit = pb.strategies.at(best_id);
        hit = apply_event(std::move(hit), StrategyEvent::Merge);
        hit.reflection = incoming;
        hit.meta.token_count = token_count(render_reflection(incoming));
        return {best_id, true};
    }
    Strategy fresh;
    fresh.id = slug_from_text(incoming.error_identification, pb);
    fresh.reflection = incoming;
    fresh.meta.token_count = token_count(render_reflection(incoming));
    fresh.state = StrategyState::Open;
    pb.strategies.emplace(fresh.id, fresh);
    return {fresh.id, false};
}

std::string save_playbook(const Playbook& pb) {
    long long total_tokens = 0;
    long long solved = 0;
    for (const auto& [id, s] : pb.strategies) {
        total_tokens += s.meta.token_count;
        if (s.state == StrategyState::Resolved) ++solved;
    }
    const auto total = static_cast<long long>(pb.strategies.size());

    ordered_json meta;
    meta["version"] = pb.metadata.version;
    meta["project_name"] = pb.metadata.project_name;
    meta["last_updated_time"] = pb.metadata.last_updated_time;
    meta["last_updated_iteration"] = pb.metadata.last_updated_iteration;
    meta["total_token_count"] = total_tokens;
    meta["total_insights"] = total;
    meta["solved_count"] = solved;
    meta["unsolved_count"] = total - solved;
    meta["deleted_count"] = 0;
    meta["finalized_at"] = pb.metadata.finalized_at;

    ordered_json strategies = ordered_json::object();
    for (const auto& [id, s] : pb.strategies) {
        ordered_json mi;
        mi["token_count"] = s.meta.token_count;
        mi["status"] = s.state == StrategyState::Resolved ? "resolved" : "unresolved";
        mi["state"] = to_string(s.state);
        mi["usage_count"] = s.meta.usage_count;
        mi["unusage_count"] = s.meta.unusage_count;
        mi["success_attribution"] = s.meta.success_attribution;
        mi["failure_attribution"] = s.meta.failure_attribution;
        ordered_json entry;
        entry["meta_info"] = std::move(mi);
        entry["reflection"] = reflection_to_json(s.reflection);
        strategies[id] = std::move(entry);
    }

    ordered_json doc;
    doc["playbook_metadata"] = std::move(meta);
    doc["strategies"] = std::move(strategies);
    return doc.dump(2) + "\n";
}

Playbook load_playbook(const std::string& text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedDocument(std::string("playbook is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("playbook_metadata") || !doc.contains("strategies"))
        throw SchemaViolation("playbook requires 'playbook_metadata' and 'strategies'");

    Playbook pb;
    const auto& meta = doc.at("playbook_metadata");
    pb.metadata.version = meta.value("version", "v0.1");
    pb.metadata.project_name = meta.value("project_name", "");
    pb.metadata.last_updated_time = meta.value("last_updated_time", "");
    pb.metadata.last_updated_iteration =
        meta.contains("last_updated_iteration") && meta.at("last_updated_iteration").is_string()
            ? meta.at("last_updated_iteration").get<std::string>()
            : "0";
    pb.metadata.finalized_at = meta.value("finalized_at", "");

    const auto& strategies = doc.at("strategies");
    if (!strategies.is_object()) throw SchemaViolation("strategies: expected an object");
    for (const auto& item : strategies.items()) {
        const std::string path = "strategies." + item.key();
        const auto& entry = item.value();
        if (!entry.is_object() || !entry.contains("meta_info") || !entry.contains("reflection"))
            throw SchemaViolation(path + ": requires 'meta_info' and 'reflection'");
        Strategy s;
        s.id = item.key();
        const auto& mi = entry.at("meta_info");
        s.meta.token_count = mi.value("token_count", 0LL);
        s.meta.usage_count = mi.value("usage_count", 0LL);
        s.meta.unusage_count = mi.value("unusage_count", 0LL);
        s.meta.success_attribution = mi.value("success_attribution", 0LL);
        s.meta.failure_attribution = mi.value("failure_attribution", 0LL);
        if (s.meta.token_count < 0 || s.meta.usage_count < 0 || s.meta.unusage_count < 0 ||
            s.meta.success_attribution < 0 || s.meta.failure_attribution < 0)
            throw SchemaViolation(path + ": counters must be non-negative");
        if (mi.contains("state")) {
            s.state = state_from_string(mi.at("state").get<std::string>());
        } else if (mi.contains("status")) {
            s.state = mi.at("status").get<std::string>() == "resolved" ? StrategyState::Resolved
                                                                       : StrategyState::Open;
        } else {
            throw SchemaViolation(path + ".meta_info: missing 'state'");
        }
        if (mi.contains("status")) {
            const bool resolved = mi.at("status").get<std::string>() == "resolved";
            if (resolved != (s.state == StrategyState::Resolved))
                throw SchemaViolation(path + ".meta_info: status disagrees with state");
        }
        s.reflection = reflection_from_json(entry.at("reflection"), path + ".reflection");
        pb.strategies.emplace(s.id, std::move(s));
    }
    return pb;
}

bool operator==(const MetaInfo& a, const MetaInfo& b) {
    return a.token_count == b.token_count && a.usage_count == b.usage_count &&
           a.unusage_count == b.unusage_count && a.success_attribution == b.success_attribution &&
           a.failure_attribution == b.failure_attribution;
}

bool operator==(const CodeRef& a, const CodeRef& b) { return a.symbol == b.symbol && a.lines == b.lines; }

bool operator==(const Evidence& a, const Evidence& b) {
    return a.metrics == b.metrics && a.error_logs == b.error_logs && a.user_feedback == b.user_feedback;
}

bool operator==(const Reflection& a, const Reflection& b) {
    return a.issue_type == b.issue_type && a.severity == b.severity &&
           a.from_user_feedback == b.from_user_feedback && a.blueprint_refs == b.blueprint_refs &&
           a.code_refs == b.code_refs && a.evidence == b.evidence &&
           a.error_identification == b.error_identification &&
           a.root_cause_analysis == b.root_cause_analysis && a.correct_approach == b.correct_approach &&
           a.key_insight == b.key_insight && a.metric_links == b.metric_links;
}

bool operator==(const Strategy& a, const Strategy& b) {
    return a.id == b.id && a.reflection == b.reflection && a.meta == b.meta && a.state == b.state;
}

bool operator==(const PlaybookMetadata& a, const PlaybookMetadata& b) {
    return a.version == b.version && a.project_name == b.project_name &&
           a.last_updated_time == b.last_updated_time &&
           a.last_updated_iteration == b.last_updated_iteration && a.finalized_at == b.finalized_at;
}

bool operator==(const Playbook& a, const Playbook& b) {
    return a.metadata == b.metadata && a.strategies == b.strategies;
}

}  // namespace simforge
