// End-to-end command-line checks against the built binary.
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "simforge/playbook.hpp"

namespace fs = std::filesystem;

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

CommandResult run_command(const std::string& command) {
    CommandResult result;
    FILE* pipe = popen((command + " 2>&1").c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> chunk{};
    while (fgets(chunk.data(), chunk.size(), pipe) != nullptr) result.output += chunk.data();
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string cli() { return SIMFORGE_CLI_PATH; }

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "simforge-cli-test";
    fs::create_directories(dir);
    return dir;
}

std::string blueprint_path() { return SIMFORGE_DATA_DIR "/mask_blueprint.json"; }

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    REQUIRE(out.good());
    out << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("blueprint validate: valid, invalid, and missing files") {
    const auto valid = run_command(cli() + " blueprint validate " + blueprint_path());
    CHECK(valid.exit_code == 0);
    CHECK(valid.output.find("valid") != std::string::npos);

    const fs::path bad = work_dir() / "bad_blueprint.json";
    write_file(bad, R"({
      "project_name": "x",
      "metrics": [{"key": "m", "direction": "lower_better", "weight": 1.0}],
      "calibratable_parameters": [{"name": "p", "kind": "real", "low": 4, "high": 0.25}]
    })");
    const auto invalid = run_command(cli() + " blueprint validate " + bad.string());
    CHECK(invalid.exit_code == 1);
    CHECK(invalid.output.find("low must be < high") != std::string::npos);

    const auto missing = run_command(cli() + " blueprint validate /nonexistent/path.json");
    CHECK(missing.exit_code == 2);
}

TEST_CASE("blueprint review: accept-all bumps the version; bad edits re-prompt") {
    const fs::path dir = work_dir();
    const fs::path source = dir / "review_source.json";
    write_file(source, read_file(blueprint_path()));

    const fs::path out = dir / "reviewed.json";
    const auto accept = run_command("echo done | " + cli() + " blueprint review " + source.string() +
                                    " --out " + out.string());
    CHECK(accept.exit_code == 0);
    const auto reviewed = nlohmann::json::parse(read_file(out));
    CHECK(reviewed.at("version") == "v2");

    // one good edit plus one invalid edit that must be rejected, not written
    const auto edited =
        run_command("printf 'set-param beta_family high 2.5\\nset-param beta_family low 9\\ndone\\n' | " +
                    cli() + " blueprint review " + source.string() + " --out " + out.string());
    CHECK(edited.exit_code == 0);
    CHECK(edited.output.find("rejected") != std::string::npos);
    const auto twice = nlohmann::json::parse(read_file(out));
    CHECK(twice.at("calibratable_parameters").at(0).at("high") == 2.5);
    CHECK(twice.at("calibratable_parameters").at(0).at("low") == 0.5);
    // the original is untouched
    CHECK(nlohmann::json::parse(read_file(source)).at("version") == "v1");
}

TEST_CASE("run: mock loop writes history, playbook, and calibration log") {
    const fs::path dir = work_dir();
    const fs::path history = dir / "history.jsonl";
    const fs::path playbook = dir / "playbook.json";
    const fs::path calib = dir / "trials.jsonl";
    std::error_code ec;
    fs::remove(history, ec);
    fs::remove(playbook, ec);
    fs::remove(calib, ec);

    const auto run = run_command(cli() + " run --blueprint " + blueprint_path() + " --seed 3 --history " +
                                 history.string() + " --playbook " + playbook.string() + " --calib-log " +
                                 calib.string());
    CHECK(run.exit_code == 0);
    CHECK(run.output.find("best iteration") != std::string::npos);

    int lines = 0;
    std::ifstream in(history);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines >= 1);
    CHECK(lines <= 9);

    const auto pb = simforge::load_playbook(read_file(playbook));
    CHECK(pb.strategies.size() >= 1);
    CHECK(read_file(calib).find("\"objective\"") != std::string::npos);

    const auto missing = run_command(cli() + " run --blueprint /nonexistent.json");
    CHECK(missing.exit_code == 2);
}

TEST_CASE("run: config file fills defaults but flags win") {
    const fs::path dir = work_dir();
    const fs::path config = dir / "config.json";
    const fs::path h1 = dir / "config_h1.jsonl";
    const fs::path h2 = dir / "config_h2.jsonl";
    write_file(config, R"({"seed": 5, "max_iter": 2, "n_trials": 8})");

    const auto from_config = run_command(cli() + " run --blueprint " + blueprint_path() + " --config " +
                                         config.string() + " --history " + h1.string());
    CHECK(from_config.exit_code == 0);
    int lines = 0;
    std::string line;
    std::ifstream in(h1);
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 2);  // max_iter from the config file

    const auto flag_wins = run_command(cli() + " run --blueprint " + blueprint_path() + " --config " +
                                       config.string() + " --max-iter 1 --history " + h2.string());
    CHECK(flag_wins.exit_code == 0);
    lines = 0;
    std::ifstream in2(h2);
    while (std::getline(in2, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 1);
}

TEST_CASE("run: llm generator without an API key exits with the auth code") {
    const auto result = run_command("env -u OPENAI_API_KEY " + cli() + " run --blueprint " +
                                    blueprint_path() + " --generator llm --max-iter 1");
    CHECK(result.exit_code == 3);
}

TEST_CASE("playbook show: filters by state and recomputes reliability") {
    const fs::path dir = work_dir();
    const fs::path history = dir / "show_history.jsonl";
    const fs::path playbook = dir / "show_playbook.json";
    std::error_code ec;
    fs::remove(playbook, ec);
    const auto run = run_command(cli() + " run --blueprint " + blueprint_path() + " --seed 2 --history " +
                                 history.string() + " --playbook " + playbook.string());
    REQUIRE(run.exit_code == 0);

    const auto all = run_command(cli() + " playbook show " + playbook.string());
    CHECK(all.exit_code == 0);
    CHECK(all.output.find("reliability") != std::string::npos);

    const auto resolved = run_command(cli() + " playbook show " + playbook.string() + " --state RESOLVED");
    CHECK(resolved.exit_code == 0);
    CHECK(resolved.output.find("OPEN\t") == std::string::npos);
    // each row's reliability column matches the posterior-mean recomputation
    std::istringstream rows(resolved.output);
    std::string row;
    std::getline(rows, row);  // header
    int checked = 0;
    while (std::getline(rows, row)) {
        if (row.empty()) continue;
        std::istringstream cells(row);
        std::string id, state, severity;
        long long u, un, s, f;
        double reliability_cell, valuation_cell;
        cells >> id >> state >> severity >> u >> un >> s >> f >> reliability_cell >> valuation_cell;
        REQUIRE(cells);
        CHECK(reliability_cell ==
              doctest::Approx(static_cast<double>(s + 1) / static_cast<double>(s + f + 2)).epsilon(1e-4));
        ++checked;
    }
    CHECK(checked >= 1);

    const auto empty_pb = dir / "empty_playbook.json";
    write_file(empty_pb, simforge::save_playbook(simforge::Playbook{}));
    const auto empty = run_command(cli() + " playbook show " + empty_pb.string());
    CHECK(empty.exit_code == 0);
    CHECK(empty.output.find("OPEN") == std::string::npos);
}

TEST_CASE("diagnose: cre and irr emit per-iteration CSV") {
    const fs::path dir = work_dir();
    const fs::path history = dir / "diag_history.jsonl";
    const auto run = run_command(cli() + " run --blueprint " + blueprint_path() + " --seed 4 --history " +
                                 history.string());
    REQUIRE(run.exit_code == 0);

    const auto cre = run_command(cli() + " diagnose cre --history " + history.string());
    CHECK(cre.exit_code == 0);
    std::istringstream cre_lines(cre.output);
    std::string line;
    std::getline(cre_lines, line);
    CHECK(line == "iteration,programs,strategies");
    int rows = 0;
    while (std::getline(cre_lines, line))
        if (!line.empty()) ++rows;
    CHECK(rows >= 1);

    const auto irr = run_command(cli() + " diagnose irr --history " + history.string());
    CHECK(irr.exit_code == 0);
    std::istringstream irr_lines(irr.output);
    std::getline(irr_lines, line);
    CHECK(line == "iteration,value");
    // issues admitted at t0 resolve at t1 in the reference trajectory
    std::getline(irr_lines, line);
    CHECK(line == "0,1");

    const auto missing = run_command(cli() + " diagnose cre --history /nonexistent.jsonl");
    CHECK(missing.exit_code == 2);
}

TEST_CASE("refsim generate writes a deterministic world file") {
    const fs::path dir = work_dir();
    const fs::path out_a = dir / "world_a";
    const fs::path out_b = dir / "world_b";
    const auto a = run_command(cli() + " refsim generate --seed 11 --out " + out_a.string());
    const auto b = run_command(cli() + " refsim generate --seed 11 --out " + out_b.string());
    CHECK(a.exit_code == 0);
    CHECK(b.exit_code == 0);
    const auto world_a = read_file(out_a / "world.json");
    CHECK(world_a == read_file(out_b / "world.json"));

    const auto doc = nlohmann::json::parse(world_a);
    CHECK(doc.at("truth_series").size() == 40);
    CHECK(doc.at("calibration_days") == 30);
    CHECK(doc.at("population").at("n") == 100);
    for (const auto& value : doc.at("truth_series")) {
        CHECK(value.get<double>() >= 0.0);
        CHECK(value.get<double>() <= 1.0);
    }
}
