// Acceptance suite: one test case per criterion, each printing a single
// [PASS]/[FAIL] line. Everything runs offline against the bundled
// reference world and the mock backend.
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "simforge/blueprint.hpp"
#include "simforge/calibrator.hpp"
#include "simforge/diagnostics.hpp"
#include "simforge/errors.hpp"
#include "simforge/metrics.hpp"
#include "simforge/orchestrator.hpp"
#include "simforge/playbook.hpp"
#include "simforge/refsim.hpp"
#include "simforge/rng.hpp"
#include "simforge/selection.hpp"

using namespace simforge;

namespace {

void report_criterion(int number, const char* summary, bool ok) {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", number, summary);
    std::fflush(stdout);
    REQUIRE(ok);
}

Blueprint load_reference_blueprint() {
    std::ifstream in(SIMFORGE_DATA_DIR "/mask_blueprint.json");
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_blueprint(buf.str());
}

Strategy fresh_strategy(StrategyState state) {
    Strategy s;
    s.id = "probe";
    s.reflection.issue_type = "STRUCTURAL";
    s.reflection.severity = Severity::High;
    s.reflection.error_identification = "e";
    s.reflection.root_cause_analysis = "r";
    s.reflection.correct_approach = "c";
    s.reflection.metric_links = {"rmse"};
    s.meta = {10, 2, 3, 4, 5};
    s.state = state;
    return s;
}

struct E2eRun {
    std::vector<IterationRecord> history;
    IterationRecord best;
    std::string history_bytes;
};

E2eRun run_reference_loop(std::uint64_t seed, const Blueprint& bp, const std::string& tag) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "simforge-acceptance";
    fs::create_directories(dir);
    RunConfig config;
    config.seed = seed;
    config.history_path = (dir / ("history-" + tag + ".jsonl")).string();
    config.playbook_path = (dir / ("playbook-" + tag + ".json")).string();
    std::error_code ec;
    fs::remove(config.history_path, ec);
    fs::remove(config.playbook_path, ec);

    const auto world = refsim::generate_world(seed);
    const auto catalog = refsim::variant_catalog();
    auto executor = refsim::make_executor(world, catalog);
    auto feedback = refsim::make_feedback(catalog);
    CalibratorSpec spec;
    spec.weights = metric_weights(bp);
    spec.n_trials = config.n_trials;
    refsim::MockGenerator generator(catalog, spec);

    E2eRun out;
    const auto result = run_loop(bp, generator, executor, feedback, config);
    out.history = result.history;
    out.best = result.best;
    std::ifstream in(config.history_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    out.history_bytes = buf.str();
    return out;
}

}  // namespace

TEST_CASE("criterion 1: lifecycle transition table is exact") {
    bool ok = true;
    const StrategyState states[] = {StrategyState::Open, StrategyState::Queued, StrategyState::InProgress,
                                    StrategyState::Resolved};
    const StrategyEvent events[] = {StrategyEvent::New,      StrategyEvent::Merge,
                                    StrategyEvent::Selected, StrategyEvent::NotSelected,
                                    StrategyEvent::Resolved, StrategyEvent::Falsified,
                                    StrategyEvent::Uncertain};
    int legal_pairs = 0;
    for (const auto state : states) {
        for (const auto event : events) {
            const Strategy before = fresh_strategy(state);
            bool legal = true;
            Strategy after = before;
            try {
                after = apply_event(before, event);
            } catch (const IllegalTransition&) {
                legal = false;
            }
            const bool pool_state = state == StrategyState::Open || state == StrategyState::Queued;
            switch (event) {
                case StrategyEvent::New:
                    ok &= !legal;  // only creates strategies that do not exist
                    break;
                case StrategyEvent::Merge:
                    ok &= legal && after.state == StrategyState::Open && after.meta == before.meta;
                    ++legal_pairs;
                    break;
                case StrategyEvent::Selected:
                    ok &= legal == pool_state;
                    if (legal) {
                        ok &= after.state == StrategyState::InProgress &&
                              after.meta.usage_count == before.meta.usage_count + 1 &&
                              after.meta.unusage_count == before.meta.unusage_count &&
                              after.meta.success_attribution == before.meta.success_attribution &&
                              after.meta.failure_attribution == before.meta.failure_attribution;
                        ++legal_pairs;
                    }
                    break;
                case StrategyEvent::NotSelected:
                    ok &= legal == pool_state;
                    if (legal) {
                        ok &= after.state == StrategyState::Queued &&
                              after.meta.unusage_count == before.meta.unusage_count + 1 &&
                              after.meta.usage_count == before.meta.usage_count;
                        ++legal_pairs;
                    }
                    break;
                case StrategyEvent::Resolved:
                    ok &= legal == (state == StrategyState::InProgress);
                    if (legal) {
                        ok &= after.state == StrategyState::Resolved &&
                              after.meta.success_attribution == before.meta.success_attribution + 1;
                        ++legal_pairs;
                    }
                    break;
                case StrategyEvent::Falsified:
                    ok &= legal == (state == StrategyState::InProgress);
                    if (legal) {
                        ok &= after.state == StrategyState::Open &&
                              after.meta.failure_attribution == before.meta.failure_attribution + 1;
                        ++legal_pairs;
                    }
                    break;
                case StrategyEvent::Uncertain:
                    ok &= legal == (state == StrategyState::InProgress);
                    if (legal) {
                        ok &= after.state == StrategyState::Open && after.meta == before.meta;
                        ++legal_pairs;
                    }
                    break;
            }
        }
    }
    // Table rows: Merge from all four states collapses into one row; the
    // others contribute 2+2+1+1+1 rows, for 8 legal rows over 11 pairs.
    ok &= legal_pairs == 11;
    report_criterion(1, "state machine matches the transition table exactly", ok);
}

TEST_CASE("criterion 2: reliability closed form over [0,50]^2") {
    bool ok = true;
    for (long long s = 0; s <= 50; ++s)
        for (long long f = 0; f <= 50; ++f) {
            const double expected = static_cast<double>(s + 1) / static_cast<double>(s + f + 2);
            ok &= std::fabs(reliability({0, 0, 0, s, f}) - expected) <= 1e-12;
        }
    report_criterion(2, "reliability equals (s+1)/(s+f+2) to 1e-12", ok);
}

TEST_CASE("criterion 3: knapsack optimality and valuation worked examples") {
    bool ok = true;
    SplitMix64 rng(303);
    for (int round = 0; round < 1000; ++round) {
        const int n = static_cast<int>(rng.next_int(1, 15));
        std::vector<KnapsackItem> items;
        for (int i = 0; i < n; ++i)
            items.push_back({"i" + std::to_string(i), rng.next_double() * 2.0, rng.next_int(0, 60)});
        const long long budget = rng.next_int(0, 120);
        const auto result = select_knapsack(items, budget);
        long long value = 0, cost = 0;
        for (const auto& item : items) {
            if (std::find(result.chosen.begin(), result.chosen.end(), item.id) == result.chosen.end())
                continue;
            value += std::llround(item.value * 1e6);
            cost += item.cost;
        }
        ok &= cost <= budget;
        ok &= value == oracles::brute_knapsack_value(items, budget);
    }

    Strategy blocker = fresh_strategy(StrategyState::Open);
    blocker.reflection.severity = Severity::Blocker;
    blocker.meta = {0, 0, 0, 0, 0};
    ok &= std::fabs(valuation(blocker) - 0.5) <= 1e-12;
    Strategy high = fresh_strategy(StrategyState::Open);
    high.reflection.severity = Severity::High;
    high.meta = {0, 0, 2, 1, 0};
    ok &= std::fabs(valuation(high) - 0.8 * 1.1 * (2.0 / 3.0)) <= 1e-12;
    Strategy low = fresh_strategy(StrategyState::Open);
    low.reflection.severity = Severity::Low;
    low.meta = {0, 0, 25, 0, 0};
    ok &= std::fabs(valuation(low) - 0.15) <= 1e-12;

    report_criterion(3, "exact knapsack matches brute force; valuation matches worked examples", ok);
}

TEST_CASE("criterion 4: event classification sweep") {
    bool ok = true;
    const double tau = 0.03;
    for (int i = -200; i <= 200; ++i) {
        const double improvement = static_cast<double>(i) / 1000.0;
        const EventKind kind = classify_event(improvement, tau);
        EventKind expected = EventKind::Uncertain;
        if (improvement > tau) expected = EventKind::Resolved;
        if (improvement < -tau) expected = EventKind::Falsified;
        ok &= kind == expected;
    }
    ok &= classify_event(0.030000001, tau) == EventKind::Resolved;
    ok &= classify_event(-0.030000001, tau) == EventKind::Falsified;
    report_criterion(4, "classify_event reproduces the threshold partition on the sweep", ok);
}

TEST_CASE("criterion 5: metric implementations match independent oracles") {
    bool ok = true;
    SplitMix64 rng(505);
    for (int round = 0; round < 500; ++round) {
        std::vector<double> a(static_cast<std::size_t>(rng.next_int(1, 6)));
        std::vector<double> b(static_cast<std::size_t>(rng.next_int(1, 6)));
        for (auto& x : a) x = rng.next_double() * 20.0 - 10.0;
        for (auto& x : b) x = rng.next_double() * 20.0 - 10.0;
        ok &= std::fabs(wasserstein_1d(a, b) - oracles::mcmf_wasserstein(a, b)) <= 1e-9;
    }
    for (int round = 0; round < 500; ++round) {
        const int support = static_cast<int>(rng.next_int(2, 9));
        std::vector<double> p(static_cast<std::size_t>(support)), q(static_cast<std::size_t>(support));
        double ps = 0, qs = 0;
        for (auto& x : p) ps += (x = rng.next_double() + 1e-9);
        for (auto& x : q) qs += (x = rng.next_double() + 1e-9);
        for (auto& x : p) x /= ps;
        for (auto& x : q) x /= qs;
        ok &= std::fabs(jsd(p, q) - oracles::direct_jsd(p, q)) <= 1e-9;
        const double eps = rng.next_double() * 1e-4;
        ok &= std::fabs(kl_smoothed(p, q, eps) - oracles::direct_kl_smoothed(p, q, eps)) <= 1e-9;
    }
    ok &= std::fabs(mae({1, 3}, {2, 5}) - 1.5) <= 1e-12;
    ok &= std::fabs(rmse({0, 0}, {3, 4}) - 2.5 * std::sqrt(2.0)) <= 1e-12;
    report_criterion(5, "wasserstein/jsd/kl/mae/rmse match their oracles", ok);
}

TEST_CASE("criterion 6: calibrator recovery on the scalar objective and the reference simulator") {
    bool ok = true;
    const std::map<std::string, MetricDirection> lower = {{"loss", MetricDirection::LowerBetter}};
    const std::map<std::string, double> unit = {{"loss", 1.0}};
    ParamSpace scalar;
    scalar.bounds = {{"theta", ParamKind::Real, 0.0, 1.0, {}}};
    auto parabola = [](const ParamVector& params, std::uint64_t) {
        const double theta = std::get<double>(params.values.at("theta"));
        MetricReport report;
        report.values["loss"] = (theta - 0.5) * (theta - 0.5);
        return report;
    };
    double grid_best = 1e9;
    for (int i = 0; i < 200; ++i) {
        const double theta = static_cast<double>(i) / 199.0;
        grid_best = std::min(grid_best, (theta - 0.5) * (theta - 0.5));
    }
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto result = calibrate(parabola, scalar, 200, seed, unit, lower);
        ok &= result.best.objective <= grid_best + 1e-3;
    }

    const Blueprint bp = load_reference_blueprint();
    const auto start = std::chrono::steady_clock::now();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto world = refsim::generate_world(seed);
        const auto catalog = refsim::variant_catalog();
        auto executor = refsim::make_executor(world, catalog);
        const std::string program = refsim::variant_text(refsim::full_variant());
        const auto result =
            calibrate([&](const ParamVector& params, std::uint64_t) { return executor(program, params); },
                      ParamSpace{bp.parameters}, 200, seed, metric_weights(bp), metric_directions(bp));
        ok &= result.best.report.values.at("rmse_calibration") <= 0.05;
    }
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - start);
    ok &= elapsed.count() < 60;
    report_criterion(6, "random-search calibration recovers the optimum within tolerance", ok);
}

TEST_CASE("criterion 7: end-to-end loop on the reference task") {
    bool ok = true;
    const Blueprint bp = load_reference_blueprint();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto run = run_reference_loop(seed, bp, "seed" + std::to_string(seed));
        ok &= run.history.size() <= 9;
        ok &= run.best.program_id == refsim::full_variant().id;
        ok &= run.best.report.values.at("rmse_evaluation") <= 0.05;
        for (const auto& record : run.history) ok &= !record.failed;

        const auto rerun = run_reference_loop(seed, bp, "rerun" + std::to_string(seed));
        ok &= rerun.history_bytes == run.history_bytes;  // no timestamps in history files
        ok &= !run.history_bytes.empty();
    }
    report_criterion(7, "loop converges to the full structure within 9 iterations, byte-identically", ok);
}

TEST_CASE("criterion 8: recurrent-error trend over the end-to-end runs") {
    bool ok = true;
    const Blueprint bp = load_reference_blueprint();
    double mean_at_1 = 0.0, mean_at_final = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto run = run_reference_loop(seed, bp, "cre" + std::to_string(seed));
        REQUIRE(run.history.size() >= 2);
        std::vector<int> cre;
        for (const auto& record : run.history) cre.push_back(record.cre_programs + record.cre_strategies);
        mean_at_1 += cre[1];
        mean_at_final += cre.back();
        // non-increasing after the (first) maximum
        const auto max_at =
            static_cast<std::size_t>(std::distance(cre.begin(), std::max_element(cre.begin(), cre.end())));
        for (std::size_t i = max_at; i + 1 < cre.size(); ++i) ok &= cre[i + 1] <= cre[i];
    }
    mean_at_1 /= 5.0;
    mean_at_final /= 5.0;
    ok &= mean_at_final <= 0.5 * mean_at_1 + 1e-12;
    report_criterion(8, "recurrent errors decay to at most half of their first-iteration mean", ok);
}

TEST_CASE("criterion 9: diagnosis filter soundness under fuzzing") {
    bool ok = true;
    SplitMix64 rng(909);
    const std::set<std::string> whitelist = {"rmse", "jsd", "wd"};
    const std::vector<std::string> key_pool = {"rmse", "jsd",  "wd",   "RMSE", "rmse2", "bogus",
                                               "",     "wd ",  " jsd", "mae",  "r",     "evaluation"};
    const std::vector<std::string> severity_pool = {"HIGH", "LOW", "blocker", "medium", "critical", "", "hi"};
    int admitted = 0;
    for (int round = 0; round < 10000; ++round) {
        nlohmann::json doc = nlohmann::json::array();
        const int n = static_cast<int>(rng.next_int(0, 4));
        for (int i = 0; i < n; ++i) {
            if (rng.next_double() < 0.1) {
                doc.push_back(rng.next_int(0, 100));  // junk entry
                continue;
            }
            nlohmann::json entry;
            auto maybe = [&](const char* field) {
                if (rng.next_double() < 0.85)
                    entry[field] =
                        rng.next_double() < 0.15 ? "" : "text " + std::to_string(rng.next_int(0, 9));
            };
            maybe("symptom");
            maybe("mechanism_hypothesis");
            maybe("remediation");
            if (rng.next_double() < 0.9)
                entry["severity"] = severity_pool[static_cast<std::size_t>(
                    rng.next_int(0, static_cast<long long>(severity_pool.size()) - 1))];
            nlohmann::json links = nlohmann::json::array();
            const int n_links = static_cast<int>(rng.next_int(0, 3));
            for (int k = 0; k < n_links; ++k)
                links.push_back(key_pool[static_cast<std::size_t>(
                    rng.next_int(0, static_cast<long long>(key_pool.size()) - 1))]);
            if (rng.next_double() < 0.9) entry["metric_links"] = links;
            doc.push_back(entry);
        }
        const auto [accepted, rejected] = validate_diagnosis(doc.dump(), whitelist);
        for (const auto& issue : accepted) {
            ++admitted;
            ok &= !issue.symptom.empty();
            ok &= !issue.mechanism_hypothesis.empty();
            ok &= !issue.remediation.empty();
            ok &= !issue.metric_links.empty();
            for (const auto& link : issue.metric_links) ok &= whitelist.count(link) == 1;
        }
    }
    ok &= admitted > 0;  // the fuzzer must actually exercise the accept path
    report_criterion(9, "no fuzzed diagnosis entry bypasses the whitelist or empty-field checks", ok);
}

TEST_CASE("criterion 10: persistence round-trips") {
    bool ok = true;
    SplitMix64 rng(1010);
    for (int round = 0; round < 1000; ++round) {
        Blueprint bp;
        bp.project_name = "p" + std::to_string(rng.next_int(0, 999));
        bp.version = "v" + std::to_string(rng.next_int(1, 5));
        const int nm = static_cast<int>(rng.next_int(1, 3));
        for (int i = 0; i < nm; ++i)
            bp.metrics.push_back({"m" + std::to_string(i),
                                  rng.next_double() < 0.5 ? MetricDirection::LowerBetter
                                                          : MetricDirection::HigherBetter,
                                  rng.next_double(), "d"});
        const int np = static_cast<int>(rng.next_int(1, 3));
        for (int i = 0; i < np; ++i) {
            ParamBound bound;
            bound.name = "b" + std::to_string(i);
            bound.low = rng.next_double();
            bound.high = bound.low + 0.5;
            bp.parameters.push_back(bound);
        }
        bp.schema_sections = {{"roles", "r" + std::to_string(rng.next_int(0, 99))}};
        ok &= parse_blueprint(serialize_blueprint(bp)) == bp;

        Playbook pb;
        pb.metadata.project_name = bp.project_name;
        pb.metadata.last_updated_time = "2026-02-01T00:00:00Z";
        pb.metadata.finalized_at = "2026-02-01T00:00:00Z";
        const int ns = static_cast<int>(rng.next_int(0, 4));
        for (int i = 0; i < ns; ++i) {
            Reflection r;
            r.issue_type = "STRUCTURAL";
            r.severity = static_cast<Severity>(rng.next_int(0, 3));
            r.error_identification = "issue " + std::to_string(rng.next_int(0, 1 << 30));
            r.root_cause_analysis = "cause " + std::to_string(rng.next_int(0, 1 << 30));
            r.correct_approach = "fix " + std::to_string(rng.next_int(0, 1 << 30));
            r.metric_links = {"m0"};
            if (rng.next_double() < 0.5) r.key_insight = "insight";
            if (rng.next_double() < 0.5) r.evidence.error_logs = "log";
            merge_or_insert(pb, r);
        }
        const std::string saved = save_playbook(pb);
        const Playbook loaded = load_playbook(saved);
        ok &= loaded == pb;
        ok &= save_playbook(loaded) == saved;
    }

    std::ifstream in(SIMFORGE_FIXTURE_DIR "/playbook_fixture.json");
    std::ostringstream buf;
    buf << in.rdbuf();
    ok &= save_playbook(load_playbook(buf.str())) == buf.str();
    report_criterion(10, "playbook and blueprint persistence are identities; fixture is bit-stable", ok);
}

TEST_CASE("criterion 11: issue resolution rate fixtures") {
    bool ok = true;
    std::vector<std::pair<std::string, std::string>> seven, five;
    std::map<std::string, StrategyState> states7, states5;
    for (int i = 0; i < 7; ++i) {
        seven.emplace_back("i" + std::to_string(i), "s" + std::to_string(i));
        states7["s" + std::to_string(i)] = StrategyState::Resolved;
    }
    for (int i = 0; i < 5; ++i) {
        five.emplace_back("i" + std::to_string(i), "s" + std::to_string(i));
        states5["s" + std::to_string(i)] = i < 2 ? StrategyState::Resolved : StrategyState::Open;
    }
    ok &= irr(seven, states7) == 1.0;
    ok &= irr(five, states5) == 0.4;
    ok &= irr({}, {}) == 1.0;
    report_criterion(11, "issue resolution rate reproduces 7/7, 2/5, and the vacuous case", ok);
}
