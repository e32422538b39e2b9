#include "kwrec/llm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "kwrec/rerank.hpp"

namespace kwrec {

namespace {

std::string ids_as_json(const std::vector<std::string>& ids) {
    return nlohmann::json(ids).dump();
}

std::string env_or(const char* name, std::string fallback) {
    const char* value = std::getenv(name);
    return value ? std::string(value) : std::move(fallback);
}

}  // namespace

std::string IdentityMockClient::complete(const PromptBundle& bundle) {
    return ids_as_json(bundle.candidate_ids);
}

std::string ReverseMockClient::complete(const PromptBundle& bundle) {
    std::vector<std::string> ids(bundle.candidate_ids.rbegin(), bundle.candidate_ids.rend());
    return ids_as_json(ids);
}

std::string TranscriptMockClient::complete(const PromptBundle&) {
    if (next_ >= entries_.size()) {
        throw TransportError("transcript exhausted");
    }
    const Entry& entry = entries_[next_++];
    if (entry.fail) {
        throw TransportError(entry.text.empty() ? "scripted failure" : entry.text);
    }
    return entry.text;
}

std::string RetryingClient::complete(const PromptBundle& bundle) {
    int attempt = 0;
    for (;;) {
        try {
            return inner_.complete(bundle);
        } catch (const TransportError&) {
            if (++attempt >= max_attempts_) throw;
            if (backoff_ms_ > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms_ << (attempt - 1)));
            }
        }
    }
}

HttpLlmClient::HttpLlmClient(Options options) : options_(std::move(options)) {
    if (options_.endpoint.empty()) {
        options_.endpoint = env_or("KWREC_LLM_ENDPOINT", "");
    }
    if (options_.api_key.empty()) {
        options_.api_key = env_or("KWREC_LLM_API_KEY", "");
    }
    if (options_.endpoint.empty()) {
        throw std::runtime_error(
            "http client: no endpoint configured (set KWREC_LLM_ENDPOINT or pass --endpoint)");
    }
}

std::string HttpLlmClient::complete(const PromptBundle& bundle) {
    std::string base = options_.endpoint;
    std::string path = "/";
    std::size_t host_start = base.find("://");
    host_start = host_start == std::string::npos ? 0 : host_start + 3;
    if (auto slash = base.find('/', host_start); slash != std::string::npos) {
        path = base.substr(slash);
        base = base.substr(0, slash);
    }

    httplib::Client client(base);
    client.set_connection_timeout(options_.timeout_sec);
    client.set_read_timeout(options_.timeout_sec);
    if (!options_.api_key.empty()) {
        client.set_bearer_token_auth(options_.api_key);
    }

    nlohmann::json body;
    body["prompt"] = bundle.text;
    if (!options_.model.empty()) body["model"] = options_.model;

    httplib::Result res = client.Post(path, body.dump(), "application/json");
    if (!res) {
        throw TransportError("http client: " + httplib::to_string(res.error()));
    }
    if (res->status >= 500) {
        throw TransportError("http client: server returned " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw std::runtime_error("http client: unexpected status " + std::to_string(res->status));
    }
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("text") ||
        !reply["text"].is_string()) {
        throw TransportError("http client: response is not {\"text\": ...}");
    }
    return reply["text"].get<std::string>();
}

}  // namespace kwrec
