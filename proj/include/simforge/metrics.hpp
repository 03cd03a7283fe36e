#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "simforge/blueprint.hpp"

namespace simforge {

// One iteration's evaluation: whitelisted metric key -> finite value.
struct MetricReport {
    int iteration = 0;
    std::map<std::string, double> values;
};

enum class EventKind { Resolved, Falsified, Uncertain };

std::string to_string(EventKind k);

// Throws SchemaViolation if a key is outside the whitelist or a value is
// not finite.
void validate_report(const MetricReport& report, const std::set<std::string>& whitelist);

std::string report_to_json(const MetricReport& report);
MetricReport report_from_json(const std::string& text);

// Mean absolute error. Throws LengthMismatch / EmptyInput.
double mae(const std::vector<double>& predictions, const std::vector<double>& targets);

// Root mean square error. Throws LengthMismatch / EmptyInput.
double rmse(const std::vector<double>& predictions, const std::vector<double>& targets);

// Jensen-Shannon divergence, base-2 logarithm, so the value lies in [0, 1].
// Inputs must be same-length distributions summing to 1 within 1e-9 with no
// negative entries. Throws SupportMismatch / NotNormalized.
double jsd(const std::vector<double>& p, const std::vector<double>& q);

// 1-Wasserstein distance between the empirical distributions of two sample
// multisets, computed exactly via the quantile-function integral (for equal
// sizes this reduces to the mean sorted-pair distance). Throws EmptyInput.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

// KL(p || q') with q' = (q + eps) / sum(q + eps), base-2 logarithm. Returns
// +infinity when eps == 0 and q lacks support where p has mass.
double kl_smoothed(const std::vector<double>& p, const std::vector<double>& q, double eps);

// |truth intersect first-k(predicted)| / |truth|; 1 when truth is empty.
double recall_at_k(const std::set<std::string>& truth, const std::vector<std::string>& predicted, int k);

// Signed per-link relative changes, one per link in sorted order; positive
// means the metric moved in its preferred direction. Each term is
// d * (prev - cur) / (|prev| + eps) with d = +1 for lower-better metrics
// and -1 for higher-better ones. Throws EmptyLinks / MissingLink.
std::vector<double> link_improvements(const MetricReport& prev, const MetricReport& cur,
                                      const std::set<std::string>& links,
                                      const std::map<std::string, MetricDirection>& directions,
                                      double eps = 1e-9);

// Mean of link_improvements.
double directed_improvement(const MetricReport& prev, const MetricReport& cur,
                            const std::set<std::string>& links,
                            const std::map<std::string, MetricDirection>& directions, double eps = 1e-9);

// Resolved if improvement > tau, Falsified if improvement < -tau, Uncertain
// otherwise. Partitions the reals for every finite input.
EventKind classify_event(double improvement, double tau);

// Event classification with the inconsistency rule: when the per-link
// improvements contain both a value > tau and a value < -tau the outcome is
// Uncertain regardless of the mean; otherwise the mean is classified.
EventKind classify_link_improvements(const std::vector<double>& improvements, double tau);

}  // namespace simforge
