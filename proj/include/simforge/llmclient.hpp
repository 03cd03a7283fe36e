#pragma once

#include <optional>
#include <string>
#include <vector>

#include "simforge/blueprint.hpp"
#include "simforge/orchestrator.hpp"

namespace simforge {

struct EndpointConfig {
    std::string base_url = "http://127.0.0.1:8080/v1";
    std::string model = "default";
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout_s = 120.0;
    int max_retries = 3;
    std::optional<std::string> reasoning_effort;  // "low" or "medium"
    int backoff_base_ms = 1000;                   // doubled per retry
};

struct ChatMessage {
    std::string role;
    std::string content;
};

struct FencedBlock {
    std::string tag;
    std::string body;
};

// POSTs a chat completion and returns the first choice's message content.
// Retries transient failures (connect errors, timeouts, 5xx/429) with
// exponential backoff. Throws AuthMissing, HttpError, Timeout,
// MalformedResponse.
std::string chat_complete(const EndpointConfig& cfg, const std::vector<ChatMessage>& messages);

std::vector<FencedBlock> extract_fenced_blocks(const std::string& text);

// Code-generation backend: sends the three prompt zones as ordered messages
// (system, background, instruction last) with medium reasoning effort, then
// extracts the first fenced code block as the program and the first fenced
// JSON block as the calibrator spec.
class LlmGenerator : public GeneratorInterface {
public:
    explicit LlmGenerator(EndpointConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.reasoning_effort = "medium";
    }

    GeneratorResponse generate(const GeneratorRequest& request) override;

private:
    EndpointConfig cfg_;
};

// Diagnosis backend with low reasoning effort; returns the raw model output
// for validate_diagnosis, which owns the whitelist check. An empty
// instructions string selects the built-in template.
FeedbackFn make_llm_feedback(EndpointConfig cfg, std::string instructions = "");

}  // namespace simforge
