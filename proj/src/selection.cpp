#include "simforge/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "simforge/errors.hpp"

namespace simforge {

namespace {

constexpr double kValueQuantum = 1e6;

long long quantize(double value) { return std::llround(value * kValueQuantum); }

}  // namespace

std::vector<Strategy> candidate_pool(const Playbook& pb) {
    std::vector<Strategy> pool;
    for (const auto& [id, s] : pb.strategies)
        if (s.state == StrategyState::Open || s.state == StrategyState::Queued) pool.push_back(s);
    std::stable_sort(pool.begin(), pool.end(), [](const Strategy& a, const Strategy& b) {
        const double va = valuation(a), vb = valuation(b);
        if (va != vb) return va > vb;
        return a.id < b.id;
    });
    return pool;
}

SelectionResult select_knapsack(const std::vector<KnapsackItem>& candidates, long long budget) {
    SelectionResult result;
    if (candidates.empty() || budget < 0) return result;

    // Items sorted by id so the reconstruction below can prefer smaller ids.
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return candidates[a].id < candidates[b].id; });

    // Budgets beyond the total item cost are equivalent to it.
    long long cost_sum = 0;
    for (const auto& item : candidates) cost_sum += std::max(item.cost, 0LL);
    const long long effective_budget = std::min(budget, cost_sum);

    const std::size_t n = order.size();
    const std::size_t width = static_cast<std::size_t>(effective_budget) + 1;

    // Suffix DP: value[i][c] is the best quantized value using items i..n-1
    // within budget c; cost[i][c] the minimum cost attaining that value.
    std::vector<std::vector<long long>> value(n + 1, std::vector<long long>(width, 0));
    std::vector<std::vector<long long>> cost(n + 1, std::vector<long long>(width, 0));
    for (std::size_t i = n; i-- > 0;) {
        const auto& item = candidates[order[i]];
        const long long v = quantize(item.value);
        for (std::size_t c = 0; c < width; ++c) {
            long long best_v = value[i + 1][c];
            long long best_c = cost[i + 1][c];
            if (item.cost >= 0 && item.cost <= static_cast<long long>(c)) {
                const std::size_t rest = c - static_cast<std::size_t>(item.cost);
                const long long take_v = v + value[i + 1][rest];
                const long long take_c = item.cost + cost[i + 1][rest];
                if (take_v > best_v || (take_v == best_v && take_c < best_c)) {
                    best_v = take_v;
                    best_c = take_c;
                }
            }
            value[i][c] = best_v;
            cost[i][c] = best_c;
        }
    }

    // Reconstruction in ascending id order. Including the current item
    // whenever it stays on the (value, cost) optimum yields the
    // lexicographically smallest sorted id-tuple; once the remaining target
    // is (0, 0) the empty completion is the smallest.
    std::vector<bool> taken(candidates.size(), false);
    std::size_t c = width - 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (value[i][c] == 0 && cost[i][c] == 0) break;
        const auto& item = candidates[order[i]];
        if (item.cost <= static_cast<long long>(c)) {
            const std::size_t rest = c - static_cast<std::size_t>(item.cost);
            const long long take_v = quantize(item.value) + value[i + 1][rest];
            const long long take_c = item.cost + cost[i + 1][rest];
            if (take_v == value[i][c] && take_c == cost[i][c]) {
                taken[order[i]] = true;
                c = rest;
            }
        }
    }

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!taken[i]) continue;
        result.chosen.push_back(candidates[i].id);
        result.total_cost += candidates[i].cost;
        result.total_value += candidates[i].value;
    }
    return result;
}

void mark_selection(Playbook& pb, const SelectionResult& result) {
    std::set<std::string> chosen(result.chosen.begin(), result.chosen.end());
    for (const auto& id : chosen) {
        const auto it = pb.strategies.find(id);
        if (it == pb.strategies.end() ||
            (it->second.state != StrategyState::Open && it->second.state != StrategyState::Queued))
            throw IllegalTransition("chosen strategy '" + id + "' is not in the OPEN/QUEUED pool");
    }
    for (auto& [id, s] : pb.strategies) {
        if (s.state != StrategyState::Open && s.state != StrategyState::Queued) continue;
        s = apply_event(std::move(s),
                        chosen.count(id) ? StrategyEvent::Selected : StrategyEvent::NotSelected);
    }
}

std::string render_strategy(const Strategy& strategy) {
    return "### Strategy " + strategy.id + " [" + to_string(strategy.reflection.severity) + "]\n" +
           render_reflection(strategy.reflection) + "\n";
}

PromptLayout layout_prompt(const std::string& system, const std::string& background,
                           const std::string& blueprint_text, const std::vector<Strategy>& selected,
                           long long recency_budget) {
    std::string rendered;
    for (const auto& s : selected) rendered += render_strategy(s);
    const long long tokens = token_count(rendered);
    if (tokens > recency_budget)
        throw BudgetExceeded("rendered strategies need " + std::to_string(tokens) +
                             " tokens, recency budget is " + std::to_string(recency_budget));
    PromptLayout layout;
    layout.system_zone = system;
    layout.background_zone = background;
    layout.instruction_zone = blueprint_text;
    if (!rendered.empty()) layout.instruction_zone += "\n" + rendered;
    return layout;
}

}  // namespace simforge
