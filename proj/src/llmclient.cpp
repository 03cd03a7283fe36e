#include "simforge/llmclient.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "simforge/errors.hpp"

namespace simforge {

namespace {

using nlohmann::json;

struct ParsedUrl {
    std::string origin;  // scheme://host:port
    std::string path_prefix;
};

ParsedUrl split_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw Error("base_url must include a scheme: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

bool transient_status(int status) { return status == 429 || status == 408 || status >= 500; }

std::string fetch_api_key(const std::string& env_name) {
    const char* key = std::getenv(env_name.c_str());
    if (key == nullptr || *key == '\0')
        throw AuthMissing("environment variable '" + env_name + "' is not set");
    return key;
}

}  // namespace

std::string chat_complete(const EndpointConfig& cfg, const std::vector<ChatMessage>& messages) {
    const std::string api_key = fetch_api_key(cfg.api_key_env);
    const ParsedUrl url = split_url(cfg.base_url);

    json body;
    body["model"] = cfg.model;
    body["messages"] = json::array();
    for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    if (cfg.reasoning_effort) body["reasoning_effort"] = *cfg.reasoning_effort;
    const std::string payload = body.dump();

    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_s));
    client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_s));
    client.set_write_timeout(std::chrono::duration<double>(cfg.timeout_s));
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key}};

    const std::string path = url.path_prefix + "/chat/completions";
    int last_status = 0;
    bool timed_out = false;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long long>(cfg.backoff_base_ms) << (attempt - 1)));
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                        res.error() == httplib::Error::Read || res.error() == httplib::Error::Write;
            last_status = 0;
            continue;  // connection-level failure, retry
        }
        if (transient_status(res->status)) {
            last_status = res->status;
            continue;
        }
        if (res->status != 200) throw HttpError(res->status, "chat completion returned HTTP " +
                                                                 std::to_string(res->status));
        json doc;
        try {
            doc = json::parse(res->body);
        } catch (const json::parse_error&) {
            throw MalformedResponse("chat completion body is not JSON");
        }
        if (!doc.contains("choices") || !doc.at("choices").is_array() || doc.at("choices").empty())
            throw MalformedResponse("chat completion lacks choices");
        const auto& first = doc.at("choices").at(0);
        if (!first.contains("message") || !first.at("message").contains("content"))
            throw MalformedResponse("chat completion choice lacks message content");
        return first.at("message").at("content").get<std::string>();
    }
    if (last_status != 0)
        throw HttpError(last_status, "chat completion failed after " + std::to_string(cfg.max_retries + 1) +
                                         " attempts with HTTP " + std::to_string(last_status));
    if (timed_out) throw Timeout("chat completion timed out after retries");
    throw Timeout("chat completion could not reach " + cfg.base_url);
}

std::vector<FencedBlock> extract_fenced_blocks(const std::string& text) {
    std::vector<FencedBlock> blocks;
    std::size_t at = 0;
    while (true) {
        const auto open = text.find("```", at);
        if (open == std::string::npos) break;
        const auto tag_end = text.find('\n', open + 3);
        if (tag_end == std::string::npos) break;
        const auto close = text.find("```", tag_end + 1);
        if (close == std::string::npos) break;
        FencedBlock block;
        block.tag = text.substr(open + 3, tag_end - open - 3);
        while (!block.tag.empty() && (block.tag.back() == '\r' || block.tag.back() == ' '))
            block.tag.pop_back();
        block.body = text.substr(tag_end + 1, close - tag_end - 1);
        blocks.push_back(std::move(block));
        at = close + 3;
    }
    return blocks;
}

GeneratorResponse LlmGenerator::generate(const GeneratorRequest& request) {
    const std::vector<ChatMessage> messages = {
        {"system", request.layout.system_zone},
        {"user", request.layout.background_zone},
        {"user", request.layout.instruction_zone},
    };
    const std::string reply = chat_complete(cfg_, messages);

    const auto blocks = extract_fenced_blocks(reply);
    const FencedBlock* program = nullptr;
    const FencedBlock* spec = nullptr;
    for (const auto& block : blocks) {
        if (block.tag == "json") {
            if (spec == nullptr) spec = &block;
        } else if (program == nullptr) {
            program = &block;
        }
    }
    if (program == nullptr || program->body.empty())
        throw ExtractionFailed("model reply contains no fenced code block");

    GeneratorResponse response;
    response.program = program->body;
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the program text
    for (unsigned char c : response.program) h = (h ^ c) * 1099511628211ULL;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "prog-%016llx", static_cast<unsigned long long>(h));
    response.program_id = buf;

    if (spec != nullptr) {
        try {
            const json doc = json::parse(spec->body);
            CalibratorSpec out;
            if (doc.contains("weights"))
                out.weights = doc.at("weights").get<std::map<std::string, double>>();
            out.n_trials = doc.value("n_trials", 200);
            if (out.n_trials >= 1) response.calibrator_spec = out;
        } catch (const json::exception&) {
            // A broken spec block falls back to blueprint defaults.
        }
    }
    return response;
}

FeedbackFn make_llm_feedback(EndpointConfig cfg, std::string instructions) {
    cfg.reasoning_effort = "low";
    if (instructions.empty())
        instructions =
            "You diagnose simulator defects from metric evidence. Reply with a JSON array of issues; "
            "each issue has the fields symptom, mechanism_hypothesis, remediation, severity "
            "(BLOCKER/HIGH/MEDIUM/LOW), metric_links (subset of the metric whitelist), issue_type, and "
            "optional code_refs. Reply with JSON only.";
    return [cfg, instructions](const std::string& program, const MetricReport& report, const Blueprint& bp) {
        std::string whitelist_text;
        for (const auto& key : metric_whitelist(bp)) {
            if (!whitelist_text.empty()) whitelist_text += ", ";
            whitelist_text += key;
        }
        const std::string user = "Metric whitelist: " + whitelist_text + "\nMetrics: " +
                                 report_to_json(report) + "\nProgram under evaluation:\n" + program;
        return chat_complete(cfg, {{"system", instructions}, {"user", user}});
    };
}

}  // namespace simforge
