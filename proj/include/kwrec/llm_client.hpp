#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace kwrec {

struct PromptBundle;  // rerank.hpp

// Retryable transport-level failure (timeout, connection refused, 5xx).
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One completion backend. The HTTP client only reads bundle.text; mocks may
// look at the candidate ids so they stay valid under any prompt template.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const PromptBundle& bundle) = 0;

    // whether complete() may be called from several threads at once
    virtual bool concurrent_safe() const { return false; }
};

// Echoes the candidate order as a JSON array; re-ranking becomes a no-op.
class IdentityMockClient : public LlmClient {
public:
    std::string complete(const PromptBundle& bundle) override;
    bool concurrent_safe() const override { return true; }
};

class ReverseMockClient : public LlmClient {
public:
    std::string complete(const PromptBundle& bundle) override;
    bool concurrent_safe() const override { return true; }
};

// Scripted responses consumed in order; an entry marked fail throws
// TransportError instead of returning text.
class TranscriptMockClient : public LlmClient {
public:
    struct Entry {
        bool fail = false;
        std::string text;
    };

    explicit TranscriptMockClient(std::vector<Entry> entries) : entries_(std::move(entries)) {}

    std::string complete(const PromptBundle& bundle) override;

private:
    std::vector<Entry> entries_;
    std::size_t next_ = 0;
};

// Retry decorator: up to max_attempts calls, exponential backoff between
// TransportError failures. Leaves non-transport exceptions alone.
class RetryingClient : public LlmClient {
public:
    RetryingClient(LlmClient& inner, int max_attempts, int backoff_ms = 0)
        : inner_(inner), max_attempts_(max_attempts), backoff_ms_(backoff_ms) {}

    std::string complete(const PromptBundle& bundle) override;
    bool concurrent_safe() const override { return inner_.concurrent_safe(); }

private:
    LlmClient& inner_;
    int max_attempts_;
    int backoff_ms_;
};

// POST {"prompt": text[, "model": m]} to endpoint, expects {"text": ...}.
// Endpoint falls back to KWREC_LLM_ENDPOINT, key to KWREC_LLM_API_KEY
// (sent as a bearer token).
class HttpLlmClient : public LlmClient {
public:
    struct Options {
        std::string endpoint;  // http://host:port/path
        std::string model;
        std::string api_key;
        int timeout_sec = 60;
    };

    explicit HttpLlmClient(Options options);

    std::string complete(const PromptBundle& bundle) override;
    bool concurrent_safe() const override { return true; }

private:
    Options options_;
};

}  // namespace kwrec
