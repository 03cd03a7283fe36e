// Command-line surface for the simforge kernel: blueprint validation and
// review, the optimization loop, playbook inspection, failure diagnostics,
// and reference-world generation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "simforge/blueprint.hpp"
#include "simforge/diagnostics.hpp"
#include "simforge/errors.hpp"
#include "simforge/llmclient.hpp"
#include "simforge/orchestrator.hpp"
#include "simforge/playbook.hpp"
#include "simforge/refsim.hpp"
#include "simforge/selection.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitAuth = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::ios_base::failure("cannot write '" + path + "'");
    out << content;
}

int cmd_blueprint_validate(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::ios_base::failure& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    }
    try {
        simforge::parse_blueprint(text);
    } catch (const simforge::Error& e) {
        std::cout << "invalid: " << e.what() << "\n";
        return kExitValidation;
    }
    std::cout << "valid\n";
    return kExitOk;
}

// Reads edit commands from stdin, one per line:
//   set-section <name> <replacement text>
//   set-metric <key> <field> <value>
//   set-param <name> <field> <value>
//   done
// Invalid edits re-prompt; the original file is never touched.
int cmd_blueprint_review(const std::string& path, std::string out_path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::ios_base::failure& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    }
    simforge::Blueprint bp;
    try {
        bp = simforge::parse_blueprint(text);
    } catch (const simforge::Error& e) {
        std::cout << "invalid: " << e.what() << "\n";
        return kExitValidation;
    }

    std::cout << "Reviewing blueprint '" << bp.project_name << "' (version " << bp.version << ")\n";
    std::cout << "Sections:";
    for (const auto& [name, unused] : bp.schema_sections) std::cout << " " << name;
    std::cout << "\nCommands: set-section <name> <text> | set-metric <key> <field> <value> | "
                 "set-param <name> <field> <value> | done\n";

    std::vector<simforge::EditCommand> edits;
    std::string line;
    std::cout << "edit> " << std::flush;
    while (std::getline(std::cin, line)) {
        std::istringstream words(line);
        std::string verb;
        words >> verb;
        if (verb.empty()) {
            std::cout << "edit> " << std::flush;
            continue;
        }
        if (verb == "done") break;
        simforge::EditCommand edit;
        bool ok = true;
        if (verb == "set-section") {
            edit.kind = simforge::EditCommand::Kind::Section;
            words >> edit.target;
            std::getline(words, edit.value);
            if (!edit.value.empty() && edit.value.front() == ' ') edit.value.erase(0, 1);
            ok = !edit.target.empty();
        } else if (verb == "set-metric" || verb == "set-param") {
            edit.kind = verb == "set-metric" ? simforge::EditCommand::Kind::Metric
                                             : simforge::EditCommand::Kind::Parameter;
            words >> edit.target >> edit.field;
            std::getline(words, edit.value);
            if (!edit.value.empty() && edit.value.front() == ' ') edit.value.erase(0, 1);
            ok = !edit.target.empty() && !edit.field.empty();
        } else {
            ok = false;
        }
        if (!ok) {
            std::cout << "unrecognized command\nedit> " << std::flush;
            continue;
        }
        // Validate the running edit list; a bad edit is dropped and re-prompted.
        edits.push_back(edit);
        try {
            simforge::review_blueprint(bp, edits);
            std::cout << "ok\n";
        } catch (const simforge::Error& e) {
            edits.pop_back();
            std::cout << "rejected: " << e.what() << "\n";
        }
        std::cout << "edit> " << std::flush;
    }

    const simforge::Blueprint reviewed = simforge::review_blueprint(bp, edits);
    if (out_path.empty()) {
        std::filesystem::path p(path);
        out_path = (p.parent_path() / (p.stem().string() + ".reviewed.json")).string();
    }
    try {
        write_file(out_path, simforge::serialize_blueprint(reviewed));
    } catch (const std::ios_base::failure& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    }
    std::cout << "wrote " << out_path << " (version " << reviewed.version << ")\n";
    return kExitOk;
}

int cmd_run(const simforge::RunConfig& config, const std::string& blueprint_path,
            const std::string& generator_kind, const simforge::EndpointConfig& endpoint,
            const std::string& feedback_instructions) {
    std::string text;
    try {
        text = read_file(blueprint_path);
    } catch (const std::ios_base::failure& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    }
    simforge::Blueprint bp;
    try {
        bp = simforge::parse_blueprint(text);
    } catch (const simforge::Error& e) {
        std::cerr << "blueprint invalid: " << e.what() << "\n";
        return kExitValidation;
    }

    const auto world = simforge::refsim::generate_world(config.seed);
    const auto catalog = simforge::refsim::variant_catalog();
    auto executor = simforge::refsim::make_executor(world, catalog);
    auto feedback = simforge::refsim::make_feedback(catalog);

    std::unique_ptr<simforge::GeneratorInterface> generator;
    if (generator_kind == "mock") {
        simforge::CalibratorSpec spec;
        spec.weights = simforge::metric_weights(bp);
        spec.n_trials = config.n_trials;
        generator = std::make_unique<simforge::refsim::MockGenerator>(catalog, spec);
    } else {
        generator = std::make_unique<simforge::LlmGenerator>(endpoint);
        feedback = simforge::make_llm_feedback(endpoint, feedback_instructions);
    }

    try {
        const auto result = simforge::run_loop(bp, *generator, executor, feedback, config);
        std::cout << "best iteration " << result.best.t << ": program " << result.best.program_id
                  << ", objective " << result.best.objective << "\n";
        for (const auto& [key, value] : result.best.report.values)
            std::cout << "  " << key << " = " << value << "\n";
        return kExitOk;
    } catch (const simforge::AuthMissing& e) {
        std::cerr << "auth: " << e.what() << "\n";
        return kExitAuth;
    } catch (const simforge::HttpError& e) {
        std::cerr << "http: " << e.what() << "\n";
        return kExitAuth;
    } catch (const simforge::Timeout& e) {
        std::cerr << "network: " << e.what() << "\n";
        return kExitAuth;
    } catch (const simforge::Error& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return kExitValidation;
    }
}

int cmd_playbook_show(const std::string& path, const std::string& state_filter) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::ios_base::failure& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    }
    simforge::Playbook pb;
    try {
        pb = simforge::load_playbook(text);
    } catch (const simforge::Error& e) {
        std::cerr << "playbook invalid: " << e.what() << "\n";
        return kExitValidation;
    }
    std::cout << "id\tstate\tseverity\tu\tun\ts\tf\treliability\tvaluation\n";
    for (const auto& [id, s] : pb.strategies) {
        if (!state_filter.empty() && simforge::to_string(s.state) != state_filter) continue;
        std::cout << id << "\t" << simforge::to_string(s.state) << "\t"
                  << simforge::to_string(s.reflection.severity) << "\t" << s.meta.usage_count << "\t"
                  << s.meta.unusage_count << "\t" << s.meta.success_attribution << "\t"
                  << s.meta.failure_attribution << "\t" << simforge::reliability(s.meta) << "\t"
                  << simforge::valuation(s) << "\n";
    }
    return kExitOk;
}

int cmd_diagnose(const std::string& kind, const std::string& history_path) {
    std::vector<simforge::IterationRecord> history;
    try {
        history = simforge::load_history(history_path);
    } catch (const simforge::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    }
    if (kind == "cre") {
        std::cout << "iteration,programs,strategies\n";
        for (const auto& record : history)
            std::cout << record.t << "," << record.cre_programs << "," << record.cre_strategies << "\n";
        return kExitOk;
    }
    // irr: issues admitted at t resolved by the events of t+1
    std::cout << "iteration,value\n";
    for (std::size_t i = 0; i + 1 < history.size(); ++i) {
        std::vector<std::pair<std::string, std::string>> issues;
        for (std::size_t k = 0; k < history[i].admitted_ids.size(); ++k)
            issues.emplace_back("issue-" + std::to_string(k), history[i].admitted_ids[k]);
        std::map<std::string, simforge::StrategyState> states;
        for (const auto& [id, strategy_id] : issues) states[strategy_id] = simforge::StrategyState::Open;
        for (const auto& [id, event] : history[i + 1].events)
            if (event == simforge::EventKind::Resolved && states.count(id))
                states[id] = simforge::StrategyState::Resolved;
        std::cout << history[i].t << "," << simforge::irr(issues, states) << "\n";
    }
    return kExitOk;
}

int cmd_refsim_generate(std::uint64_t seed, const std::string& out_dir) {
    const auto world = simforge::refsim::generate_world(seed);
    try {
        std::filesystem::create_directories(out_dir);
        write_file((std::filesystem::path(out_dir) / "world.json").string(),
                   simforge::refsim::world_to_json(world));
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    }
    std::cout << "wrote " << (std::filesystem::path(out_dir) / "world.json").string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simforge: dual-anchored simulator construction kernel"};
    app.require_subcommand(1);

    // blueprint validate / review
    auto* blueprint_cmd = app.add_subcommand("blueprint", "blueprint operations");
    blueprint_cmd->require_subcommand(1);
    std::string bp_path;
    auto* validate_cmd = blueprint_cmd->add_subcommand("validate", "check a blueprint file");
    validate_cmd->add_option("path", bp_path, "blueprint JSON file")->required();
    std::string review_path, review_out;
    auto* review_cmd = blueprint_cmd->add_subcommand("review", "interactively edit a blueprint");
    review_cmd->add_option("path", review_path, "blueprint JSON file")->required();
    review_cmd->add_option("--out", review_out, "output path (default <stem>.reviewed.json)");

    // run
    auto* run_cmd = app.add_subcommand("run", "run the optimization loop");
    std::string run_blueprint, config_path, generator_kind = "mock";
    simforge::RunConfig config;
    simforge::EndpointConfig endpoint;
    run_cmd->add_option("--blueprint", run_blueprint, "blueprint JSON file")->required();
    run_cmd->add_option("--playbook", config.playbook_path, "playbook persistence path");
    run_cmd->add_option("--history", config.history_path, "iteration history (JSON lines)");
    run_cmd->add_option("--calib-log", config.calib_log_path, "calibration trial log (JSON lines)");
    auto* seed_opt = run_cmd->add_option("--seed", config.seed, "run seed");
    auto* max_iter_opt = run_cmd->add_option("--max-iter", config.max_iter, "iteration cap");
    auto* patience_opt = run_cmd->add_option("--patience", config.patience, "plateau patience");
    auto* tau_opt = run_cmd->add_option("--tau", config.tau, "event threshold");
    auto* tau_stop_opt = run_cmd->add_option("--tau-stop", config.tau_stop, "plateau threshold");
    auto* budget_opt = run_cmd->add_option("--recency-budget", config.recency_budget,
                                           "token budget for selected strategies");
    auto* trials_opt = run_cmd->add_option("--n-trials", config.n_trials, "calibration trials");
    run_cmd->add_option("--config", config_path, "JSON config file (flags win over it)");
    run_cmd->add_option("--generator", generator_kind, "mock or llm")
        ->check(CLI::IsMember({"mock", "llm"}));
    run_cmd->add_option("--endpoint", endpoint.base_url, "OpenAI-compatible base URL");
    run_cmd->add_option("--model", endpoint.model, "model name");
    run_cmd->add_option("--api-key-env", endpoint.api_key_env, "environment variable with the API key");
    std::string system_prompt_file, feedback_prompt_file;
    run_cmd->add_option("--system-prompt-file", system_prompt_file,
                        "generator system-zone template (e.g. data/prompts/generator_system.txt)");
    run_cmd->add_option("--feedback-prompt-file", feedback_prompt_file,
                        "diagnosis instructions template (e.g. data/prompts/feedback_instructions.txt)");

    // playbook show
    auto* playbook_cmd = app.add_subcommand("playbook", "playbook operations");
    playbook_cmd->require_subcommand(1);
    auto* show_cmd = playbook_cmd->add_subcommand("show", "tabulate strategies");
    std::string show_path, state_filter;
    show_cmd->add_option("path", show_path, "playbook JSON file")->required();
    show_cmd->add_option("--state", state_filter, "filter by state (OPEN/QUEUED/INPROGRESS/RESOLVED)");

    // diagnose cre / irr
    auto* diagnose_cmd = app.add_subcommand("diagnose", "cross-run failure accounting");
    diagnose_cmd->require_subcommand(1);
    std::string cre_history, irr_history;
    auto* cre_cmd = diagnose_cmd->add_subcommand("cre", "cumulative recurrent errors per iteration");
    cre_cmd->add_option("--history", cre_history, "history JSON-lines file")->required();
    auto* irr_cmd = diagnose_cmd->add_subcommand("irr", "issue resolution rate per transition");
    irr_cmd->add_option("--history", irr_history, "history JSON-lines file")->required();

    // refsim generate
    auto* refsim_cmd = app.add_subcommand("refsim", "reference world operations");
    refsim_cmd->require_subcommand(1);
    auto* generate_cmd = refsim_cmd->add_subcommand("generate", "write a reference world");
    std::uint64_t refsim_seed = 0;
    std::string refsim_out = "refsim-world";
    generate_cmd->add_option("--seed", refsim_seed, "world seed");
    generate_cmd->add_option("--out", refsim_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (validate_cmd->parsed()) return cmd_blueprint_validate(bp_path);
    if (review_cmd->parsed()) return cmd_blueprint_review(review_path, review_out);
    if (run_cmd->parsed()) {
        if (!config_path.empty()) {
            std::string text;
            try {
                text = read_file(config_path);
            } catch (const std::ios_base::failure& e) {
                std::cerr << e.what() << "\n";
                return kExitIo;
            }
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(text);
            } catch (const nlohmann::json::parse_error& e) {
                std::cerr << "config is not valid JSON: " << e.what() << "\n";
                return kExitValidation;
            }
            // Flags beat the config file, which beats the defaults.
            if (seed_opt->count() == 0 && doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
            if (max_iter_opt->count() == 0 && doc.contains("max_iter")) config.max_iter = doc["max_iter"];
            if (patience_opt->count() == 0 && doc.contains("patience")) config.patience = doc["patience"];
            if (tau_opt->count() == 0 && doc.contains("tau")) config.tau = doc["tau"];
            if (tau_stop_opt->count() == 0 && doc.contains("tau_stop")) config.tau_stop = doc["tau_stop"];
            if (budget_opt->count() == 0 && doc.contains("recency_budget"))
                config.recency_budget = doc["recency_budget"];
            if (trials_opt->count() == 0 && doc.contains("n_trials")) config.n_trials = doc["n_trials"];
        }
        if (generator_kind == "llm") {
            config.system_prompt =
                "You refine a mask-adoption simulator. Reply with one fenced code block whose first "
                "line is 'simulator-variant: <id>' choosing a catalog variant, and one fenced json "
                "block {\"weights\": {...}, \"n_trials\": N} for the calibrator.";
        }
        std::string feedback_instructions;
        try {
            if (!system_prompt_file.empty()) config.system_prompt = read_file(system_prompt_file);
            if (!feedback_prompt_file.empty()) feedback_instructions = read_file(feedback_prompt_file);
        } catch (const std::ios_base::failure& e) {
            std::cerr << e.what() << "\n";
            return kExitIo;
        }
        return cmd_run(config, run_blueprint, generator_kind, endpoint, feedback_instructions);
    }
    if (show_cmd->parsed()) return cmd_playbook_show(show_path, state_filter);
    if (cre_cmd->parsed()) return cmd_diagnose("cre", cre_history);
    if (irr_cmd->parsed()) return cmd_diagnose("irr", irr_history);
    if (generate_cmd->parsed()) return cmd_refsim_generate(refsim_seed, refsim_out);
    return kExitOk;
}
