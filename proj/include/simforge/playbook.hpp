#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace simforge {

// Evolutionary bookkeeping for one strategy: prompt footprint plus the
// usage / unusage / success / failure counters that drive retrieval.
struct MetaInfo {
    long long token_count = 0;
    long long usage_count = 0;
    long long unusage_count = 0;
    long long success_attribution = 0;
    long long failure_attribution = 0;
};

enum class Severity { Blocker, High, Medium, Low };

struct CodeRef {
    std::string symbol;
    std::string lines = "unknown";
};

struct Evidence {
    std::string metrics;
    std::optional<std::string> error_logs;
    std::optional<std::string> user_feedback;
};

// The substantive content of a strategy: a repair hypothesis bound to
// whitelisted metrics through metric_links.
struct Reflection {
    std::string issue_type;
    Severity severity = Severity::Medium;
    bool from_user_feedback = false;
    std::vector<std::string> blueprint_refs;
    std::vector<CodeRef> code_refs;
    Evidence evidence;
    std::string error_identification;
    std::string root_cause_analysis;
    std::string correct_approach;
    std::optional<std::string> key_insight;
    std::set<std::string> metric_links;
};

enum class StrategyState { Open, Queued, InProgress, Resolved };

// Lifecycle events. New only creates strategies (it is illegal on an
// existing one); Merge reopens any state keeping the counters.
enum class StrategyEvent { New, Merge, Selected, NotSelected, Resolved, Falsified, Uncertain };

struct Strategy {
    std::string id;
    Reflection reflection;
    MetaInfo meta;
    StrategyState state = StrategyState::Open;
};

struct PlaybookMetadata {
    std::string version = "v0.1";
    std::string project_name;
    std::string last_updated_time;
    std::string last_updated_iteration = "0";
    std::string finalized_at;
};

// The dynamic strategy repository. Single-writer: the orchestrator owns
// mutation, read-only snapshots may be shared freely.
struct Playbook {
    PlaybookMetadata metadata;
    std::map<std::string, Strategy> strategies;
};

struct MergeResult {
    std::string id;
    bool merged = false;
};

std::string to_string(StrategyState s);
std::string to_string(Severity s);
StrategyState state_from_string(const std::string& s);
Severity severity_from_string(const std::string& s);

// Applies one lifecycle event and its counter side effect, returning the
// updated strategy. Throws IllegalTransition for any pair outside the
// transition table:
//   OPEN/QUEUED   + Selected    -> INPROGRESS, usage_count + 1
//   OPEN/QUEUED   + NotSelected -> QUEUED,     unusage_count + 1
//   INPROGRESS    + Resolved    -> RESOLVED,   success_attribution + 1
//   INPROGRESS    + Falsified   -> OPEN,       failure_attribution + 1
//   INPROGRESS    + Uncertain   -> OPEN,       counters unchanged
//   any state     + Merge       -> OPEN,       counters retained
Strategy apply_event(Strategy strategy, StrategyEvent event);

// Posterior mean of a Beta-Bernoulli model with uniform prior:
// (s + 1) / (s + f + 2). Always in (0, 1).
double reliability(const MetaInfo& meta);

double severity_weight(Severity s);

// Utility for knapsack retrieval: severity weight x backlog bonus x
// reliability, with the backlog bonus 1 + lambda * min(unusage, cap).
double valuation(const Strategy& strategy, double lambda = 0.05, long long backlog_cap = 10);

// ceil(character count / 4); the kernel's deterministic token estimate.
long long token_count(const std::string& text);

// Canonical serialized form of a reflection; token_count of this string is
// stored in MetaInfo::token_count.
std::string render_reflection(const Reflection& reflection);

// Concatenated diagnosis text used for merge similarity.
std::string normalized_reflection_text(const Reflection& reflection);

// Lowercased, hyphenated id derived from the error identification,
// truncated to 64 chars, with a numeric suffix on collision.
std::string slug_from_text(const std::string& text, const Playbook& pb);

// If an existing strategy's normalized reflection text matches the incoming
// one at or above the similarity threshold, refresh that strategy (state
// OPEN, counters retained); otherwise insert a new OPEN strategy with a
// fresh slug. Ties break by highest similarity, then smallest id.
MergeResult merge_or_insert(Playbook& pb, const Reflection& incoming, double similarity_threshold = 0.8);

std::string save_playbook(const Playbook& pb);
Playbook load_playbook(const std::string& text);

bool operator==(const MetaInfo& a, const MetaInfo& b);
bool operator==(const CodeRef& a, const CodeRef& b);
bool operator==(const Evidence& a, const Evidence& b);
bool operator==(const Reflection& a, const Reflection& b);
bool operator==(const Strategy& a, const Strategy& b);
bool operator==(const PlaybookMetadata& a, const PlaybookMetadata& b);
bool operator==(const Playbook& a, const Playbook& b);

}  // namespace simforge
