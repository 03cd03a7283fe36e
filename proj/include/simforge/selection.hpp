#pragma once

#include <string>
#include <vector>

#include "simforge/playbook.hpp"

namespace simforge {

struct KnapsackItem {
    std::string id;
    double value = 0.0;
    long long cost = 0;
};

struct SelectionResult {
    std::vector<std::string> chosen;  // candidate-pool order (valuation descending)
    long long total_cost = 0;
    double total_value = 0.0;
};

// Three-zone prompt: role text first, logs and previous code in the middle,
// blueprint plus selected strategies last.
struct PromptLayout {
    std::string system_zone;
    std::string background_zone;
    std::string instruction_zone;
};

// Strategies in state OPEN or QUEUED, ordered by descending valuation then
// ascending id.
std::vector<Strategy> candidate_pool(const Playbook& pb);

// Exact 0-1 knapsack by dynamic programming over the token budget. Values
// are quantized to round(value * 1e6) so the argmax is compared on integers;
// ties break by smaller total cost, then by the lexicographically smallest
// sorted id-tuple. Items costing more than the budget are never chosen.
SelectionResult select_knapsack(const std::vector<KnapsackItem>& candidates, long long budget);

// Chosen pool members receive Selected (-> INPROGRESS, usage + 1); every
// other pool member receives NotSelected (-> QUEUED, unusage + 1). Throws
// IllegalTransition if a chosen id is not in the pool.
void mark_selection(Playbook& pb, const SelectionResult& result);

// Prompt text form of one strategy (header plus serialized reflection).
std::string render_strategy(const Strategy& strategy);

// Assembles the three zones. The recency budget applies to the rendered
// strategies only; the blueprint text is always included whole. Throws
// BudgetExceeded when the rendered strategies overflow the budget.
PromptLayout layout_prompt(const std::string& system, const std::string& background,
                           const std::string& blueprint_text, const std::vector<Strategy>& selected,
                           long long recency_budget = 1000);

}  // namespace simforge
