#include "simforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "simforge/errors.hpp"

namespace simforge {

namespace {

constexpr double kNormalizationTolerance = 1e-9;

void check_pair(const std::vector<double>& predictions, const std::vector<double>& targets) {
    if (predictions.empty() || targets.empty()) throw EmptyInput("metric inputs must be non-empty");
    if (predictions.size() != targets.size())
        throw LengthMismatch("metric inputs differ in length: " + std::to_string(predictions.size()) + " vs " +
                             std::to_string(targets.size()));
}

void check_distribution_pair(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size())
        throw SupportMismatch("distributions differ in support size: " + std::to_string(p.size()) + " vs " +
                              std::to_string(q.size()));
    if (p.empty()) throw SupportMismatch("distributions must have non-empty support");
    for (const auto* dist : {&p, &q}) {
        double sum = 0.0;
        for (double x : *dist) {
            if (x < 0.0) throw NotNormalized("distribution entries must be non-negative");
            sum += x;
        }
        if (std::fabs(sum - 1.0) > kNormalizationTolerance)
            throw NotNormalized("distribution sums to " + std::to_string(sum) + ", expected 1");
    }
}

double log2_ratio_term(double p, double m) {
    if (p == 0.0) return 0.0;
    return p * std::log2(p / m);
}

}  // namespace

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::Resolved: return "resolved";
        case EventKind::Falsified: return "falsified";
        case EventKind::Uncertain: return "uncertain";
    }
    return "uncertain";
}

void validate_report(const MetricReport& report, const std::set<std::string>& whitelist) {
    for (const auto& [key, value] : report.values) {
        if (!whitelist.count(key))
            throw SchemaViolation("report key '" + key + "' is not in the metric whitelist");
        if (!std::isfinite(value)) throw SchemaViolation("report value for '" + key + "' is not finite");
    }
}

std::string report_to_json(const MetricReport& report) {
    nlohmann::json doc;
    doc["iteration"] = report.iteration;
    doc["values"] = report.values;
    return doc.dump();
}

MetricReport report_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedDocument(std::string("report is not valid JSON: ") + e.what());
    }
    MetricReport report;
    if (!doc.is_object() || !doc.contains("iteration") || !doc.contains("values"))
        throw SchemaViolation("report requires 'iteration' and 'values'");
    report.iteration = doc.at("iteration").get<int>();
    report.values = doc.at("values").get<std::map<std::string, double>>();
    return report;
}

double mae(const std::vector<double>& predictions, const std::vector<double>& targets) {
    check_pair(predictions, targets);
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) sum += std::fabs(predictions[i] - targets[i]);
    return sum / static_cast<double>(predictions.size());
}

double rmse(const std::vector<double>& predictions, const std::vector<double>& targets) {
    check_pair(predictions, targets);
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(predictions.size()));
}

double jsd(const std::vector<double>& p, const std::vector<double>& q) {
    check_distribution_pair(p, q);
    double out = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        out += 0.5 * log2_ratio_term(p[i], m) + 0.5 * log2_ratio_term(q[i], m);
    }
    return std::max(0.0, out);
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw EmptyInput("wasserstein_1d requires non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // Sweep the shared quantile axis; between breakpoints the two quantile
    // functions are the constants a[ia] and b[ib].
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double u = 0.0, total = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double next_a = static_cast<double>(ia + 1) / na;
        const double next_b = static_cast<double>(ib + 1) / nb;
        const double next = std::min(next_a, next_b);
        total += (next - u) * std::fabs(a[ia] - b[ib]);
        u = next;
        if (next_a <= next) ++ia;
        if (next_b <= next) ++ib;
    }
    return total;
}

double kl_smoothed(const std::vector<double>& p, const std::vector<double>& q, double eps) {
    check_distribution_pair(p, q);
    double denom = 0.0;
    for (double x : q) denom += x + eps;
    double out = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        const double qi = (q[i] + eps) / denom;
        if (qi == 0.0) return std::numeric_limits<double>::infinity();
        out += p[i] * std::log2(p[i] / qi);
    }
    return std::max(0.0, out);
}

double recall_at_k(const std::set<std::string>& truth, const std::vector<std::string>& predicted, int k) {
    if (truth.empty()) return 1.0;
    const std::size_t take = std::min<std::size_t>(predicted.size(), static_cast<std::size_t>(std::max(k, 0)));
    std::size_t hits = 0;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < take; ++i) {
        if (truth.count(predicted[i]) && seen.insert(predicted[i]).second) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<double> link_improvements(const MetricReport& prev, const MetricReport& cur,
                                      const std::set<std::string>& links,
                                      const std::map<std::string, MetricDirection>& directions, double eps) {
    if (links.empty()) throw EmptyLinks("metric link set is empty");
    std::vector<double> out;
    out.reserve(links.size());
    for (const auto& key : links) {
        const auto pit = prev.values.find(key);
        const auto cit = cur.values.find(key);
        const auto dit = directions.find(key);
        if (pit == prev.values.end() || cit == cur.values.end() || dit == directions.end())
            throw MissingLink("linked metric '" + key + "' is missing from a report or has no direction");
        const double sign = dit->second == MetricDirection::LowerBetter ? 1.0 : -1.0;
        out.push_back(sign * (pit->second - cit->second) / (std::fabs(pit->second) + eps));
    }
    return out;
}

double directed_improvement(const MetricReport& prev, const MetricReport& cur, const std::set<std::string>& links,
                            const std::map<std::string, MetricDirection>& directions, double eps) {
    const auto improvements = link_improvements(prev, cur, links, directions, eps);
    const double sum = std::accumulate(improvements.begin(), improvements.end(), 0.0);
    return sum / static_cast<double>(improvements.size());
}

EventKind classify_event(double improvement, double tau) {
    if (improvement > tau) return EventKind::Resolved;
    if (improvement < -tau) return EventKind::Falsified;
    return EventKind::Uncertain;
}

EventKind classify_link_improvements(const std::vector<double>& improvements, double tau) {
    bool any_up = false, any_down = false;
    double sum = 0.0;
    for (double v : improvements) {
        any_up = any_up || v > tau;
        any_down = any_down || v < -tau;
        sum += v;
    }
    if (any_up && any_down) return EventKind::Uncertain;
    if (improvements.empty()) return EventKind::Uncertain;
    return classify_event(sum / static_cast<double>(improvements.size()), tau);
}

}  // namespace simforge
