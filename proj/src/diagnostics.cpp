#include "simforge/diagnostics.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "simforge/errors.hpp"

namespace simforge {

namespace {

bool is_comment_line(const std::string& line) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) return false;
    if (line[i] == '#') return true;
    return line[i] == '/' && i + 1 < line.size() && line[i + 1] == '/';
}

// Longest common contiguous block between a[alo, ahi) and b[blo, bhi);
// ties prefer the earliest start in a, then in b.
struct Match {
    std::size_t a = 0, b = 0, length = 0;
};

Match longest_match(const std::string& a, std::size_t alo, std::size_t ahi, const std::string& b,
                    std::size_t blo, std::size_t bhi) {
    Match best;
    std::vector<std::size_t> runs(bhi - blo + 1, 0);
    for (std::size_t i = alo; i < ahi; ++i) {
        std::vector<std::size_t> next(bhi - blo + 1, 0);
        for (std::size_t j = blo; j < bhi; ++j) {
            if (a[i] != b[j]) continue;
            const std::size_t run = runs[j - blo] + 1;
            next[j - blo + 1] = run;
            if (run > best.length) {
                best.length = run;
                best.a = i - run + 1;
                best.b = j - run + 1;
            }
        }
        runs = std::move(next);
    }
    return best;
}

std::size_t matching_total(const std::string& a, std::size_t alo, std::size_t ahi, const std::string& b,
                           std::size_t blo, std::size_t bhi) {
    if (alo >= ahi || blo >= bhi) return 0;
    const Match m = longest_match(a, alo, ahi, b, blo, bhi);
    if (m.length == 0) return 0;
    return m.length + matching_total(a, alo, m.a, b, blo, m.b) +
           matching_total(a, m.a + m.length, ahi, b, m.b + m.length, bhi);
}

}  // namespace

void FailureRegistry::add(std::string_view text, std::string origin) {
    entries.push_back({fingerprint(text), std::move(origin)});
}

std::string fingerprint(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::istringstream lines{std::string(text)};
    std::string line;
    bool pending_space = false;
    while (std::getline(lines, line)) {
        if (is_comment_line(line)) continue;
        for (char raw : line) {
            const auto c = static_cast<unsigned char>(raw);
            if (std::isalnum(c) || raw == '_') {
                if (pending_space && !out.empty()) out.push_back(' ');
                pending_space = false;
                out.push_back(static_cast<char>(std::tolower(c)));
            } else {
                pending_space = true;
            }
        }
        pending_space = true;
    }
    return out;
}

double similarity(const std::string& a, const std::string& b) {
    if (a.empty() && b.empty()) return 1.0;
    if (a.empty() || b.empty()) return 0.0;
    const std::size_t matched = matching_total(a, 0, a.size(), b, 0, b.size());
    return 2.0 * static_cast<double>(matched) / static_cast<double>(a.size() + b.size());
}

int count_recurrent(const std::vector<std::string>& outputs, const FailureRegistry& registry, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw Error("count_recurrent threshold must lie in (0, 1]");
    int count = 0;
    for (const auto& output : outputs) {
        const std::string fp = fingerprint(output);
        for (const auto& entry : registry.entries) {
            if (similarity(fp, entry.fingerprint) >= threshold) {
                ++count;
                break;
            }
        }
    }
    return count;
}

double irr(const std::vector<std::pair<std::string, std::string>>& issues_prev,
           const std::map<std::string, StrategyState>& states_next) {
    if (issues_prev.empty()) return 1.0;
    std::size_t resolved = 0;
    for (const auto& [issue_id, strategy_id] : issues_prev) {
        const auto it = states_next.find(strategy_id);
        if (it == states_next.end())
            throw Error("strategy '" + strategy_id + "' referenced by issue '" + issue_id +
                        "' has no recorded state");
        if (it->second == StrategyState::Resolved) ++resolved;
    }
    return static_cast<double>(resolved) / static_cast<double>(issues_prev.size());
}

}  // namespace simforge
