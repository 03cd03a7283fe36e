#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "simforge/playbook.hpp"

namespace simforge {

// Normalized record of one failed artifact (program or strategy text).
struct FailureEntry {
    std::string fingerprint;
    std::string origin;
};

// Insertion-ordered failure history; duplicates allowed since recurrence
// frequency matters for reporting.
struct FailureRegistry {
    std::vector<FailureEntry> entries;

    void add(std::string_view text, std::string origin);
    bool empty() const { return entries.empty(); }
};

// Text normalization: lowercase, comment lines (# or //) stripped,
// whitespace runs collapsed, punctuation dropped except underscores.
// Idempotent.
std::string fingerprint(std::string_view text);

// Ratcliff-Obershelp ratio: 2 * (total length of longest matching blocks) /
// (|a| + |b|). 1 iff the strings are equal, 0 when they share no character.
double similarity(const std::string& a, const std::string& b);

// Number of outputs whose fingerprint matches at least one registry entry
// at or above the threshold; each output counts at most once.
int count_recurrent(const std::vector<std::string>& outputs, const FailureRegistry& registry,
                    double threshold = 0.95);

// Fraction of iteration-t issues whose strategy is RESOLVED at t+1; 1 when
// there were no issues.
double irr(const std::vector<std::pair<std::string, std::string>>& issues_prev,
           const std::map<std::string, StrategyState>& states_next);

}  // namespace simforge
