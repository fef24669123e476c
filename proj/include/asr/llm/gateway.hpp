#pragma once

#include "asr/convo.hpp"
#include "asr/error.hpp"
#include "asr/llm/embedding.hpp"
#include "asr/llm/prompts.hpp"
#include "asr/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

namespace asr {

struct GenerationRequest
{
    std::string system_prompt;
    std::vector<Message> context;
    int max_tokens = 128;
    double temperature = 0.7;
    std::optional<std::int64_t> seed;
};

/// Evaluation runs use temperature 0 and a fixed seed so they are reproducible.
inline GenerationRequest evaluation_request(std::string system_prompt, std::vector<Message> context)
{
    return GenerationRequest{std::move(system_prompt), std::move(context), 128, 0.0, 0};
}

/// Stable key over the (role, text) sequence of a request context.
inline std::uint64_t context_key(std::vector<Message> const & context)
{
    std::string joined;
    for (auto const & m : context) {
        joined += to_string(m.role);
        joined += '\x1f';
        joined += m.text;
        joined += '\x1e';
    }
    return text::fnv1a(joined);
}

// ---------------------------------------------------------------------------
// Scripted chat behaviour

/// Offline chat behaviour. Implementations must be pure functions of the
/// request (including its seed).
class ChatScript
{
public:
    virtual ~ChatScript() = default;
    [[nodiscard]] virtual std::string reply(GenerationRequest const & request) const = 0;
};

/// Always answers from a fixed list; the choice depends only on the context and seed.
class FixedReplyScript final : public ChatScript
{
public:
    explicit FixedReplyScript(std::vector<std::string> replies)
    : replies_(std::move(replies))
    {
        require(!replies_.empty(), ErrorCode::ConfigError, "fixed reply script needs at least one reply");
    }

    [[nodiscard]] std::string reply(GenerationRequest const & request) const override
    {
        if (replies_.size() == 1) {
            return replies_.front();
        }
        auto h = text::mix64(context_key(request.context) ^ static_cast<std::uint64_t>(request.seed.value_or(0)));
        return replies_[h % replies_.size()];
    }

private:
    std::vector<std::string> replies_;
};

/// Looks the context up in a reply table; misses go to the fallback script.
class ReplayScript final : public ChatScript
{
public:
    ReplayScript(std::unordered_map<std::uint64_t, std::string> table, std::shared_ptr<ChatScript const> fallback)
    : table_(std::move(table))
    , fallback_(std::move(fallback))
    { }

    /// Table mapping the 2-turn context of every Counterpart turn to the reply
    /// that actually followed it in the corpus.
    static std::unordered_map<std::uint64_t, std::string>
    table_from(std::vector<Conversation> const & conversations, std::size_t n_turns = 2)
    {
        std::unordered_map<std::uint64_t, std::string> table;
        for (auto const & c : conversations) {
            for (auto const & m : c.messages) {
                if (m.role != Role::Counterpart) {
                    continue;
                }
                auto ctx = context_window(c, m.index, n_turns);
                if (ctx.empty()) {
                    continue;
                }
                table.try_emplace(context_key(ctx), m.text);
            }
        }
        return table;
    }

    [[nodiscard]] std::string reply(GenerationRequest const & request) const override
    {
        if (auto it = table_.find(context_key(request.context)); it != table_.end()) {
            return it->second;
        }
        if (fallback_) {
            return fallback_->reply(request);
        }
        return {};
    }

    [[nodiscard]] std::size_t size() const noexcept { return table_.size(); }

private:
    std::unordered_map<std::uint64_t, std::string> table_;
    std::shared_ptr<ChatScript const> fallback_;
};

/// Returns the text of the last context message.
class EchoScript final : public ChatScript
{
public:
    [[nodiscard]] std::string reply(GenerationRequest const & request) const override
    {
        return request.context.empty() ? std::string{} : request.context.back().text;
    }
};

class FunctionScript final : public ChatScript
{
public:
    explicit FunctionScript(std::function<std::string(GenerationRequest const &)> fn)
    : fn_(std::move(fn))
    { }

    [[nodiscard]] std::string reply(GenerationRequest const & request) const override { return fn_(request); }

private:
    std::function<std::string(GenerationRequest const &)> fn_;
};

// ---------------------------------------------------------------------------
// Backend descriptors

enum class BackendKind { RemoteChat, RemoteEmbed, ScriptedChat, HashEmbed };

constexpr std::string_view to_string(BackendKind k) noexcept
{
    switch (k) {
    case BackendKind::RemoteChat: return "remote_chat";
    case BackendKind::RemoteEmbed: return "remote_embed";
    case BackendKind::ScriptedChat: return "scripted_chat";
    case BackendKind::HashEmbed: return "hash_embed";
    }
    return "scripted_chat";
}

inline BackendKind parse_backend_kind(std::string_view s)
{
    for (auto k : {BackendKind::RemoteChat, BackendKind::RemoteEmbed, BackendKind::ScriptedChat, BackendKind::HashEmbed}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    fail(ErrorCode::ConfigError, "unknown backend kind '" + std::string(s) + "'");
}

struct BackendDescriptor
{
    BackendKind kind = BackendKind::ScriptedChat;
    std::optional<std::string> base_url;
    std::string model_name;
    /// Name of the environment variable holding the API key.
    std::string api_key_ref;
    /// Behaviour of ScriptedChat backends.
    std::shared_ptr<ChatScript const> script;
    /// Expected embedding dimension; 0 accepts whatever a remote backend returns.
    std::size_t dim = 0;
    std::uint64_t hash_seed = 0;

    [[nodiscard]] bool is_chat() const noexcept
    {
        return kind == BackendKind::RemoteChat || kind == BackendKind::ScriptedChat;
    }
};

inline void validate(BackendDescriptor const & b)
{
    if (b.kind == BackendKind::RemoteChat || b.kind == BackendKind::RemoteEmbed) {
        require(b.base_url && !b.base_url->empty(), ErrorCode::ConfigError,
                std::string(to_string(b.kind)) + " backend '" + b.model_name + "' requires base_url");
    }
    if (b.kind == BackendKind::ScriptedChat) {
        require(b.script != nullptr, ErrorCode::ConfigError, "scripted backend '" + b.model_name + "' has no script");
    }
    if (b.kind == BackendKind::HashEmbed) {
        require(b.dim >= 2, ErrorCode::ConfigError, "hash embedding dimension must be at least 2");
    }
}

inline BackendDescriptor scripted_chat(std::string model_name, std::shared_ptr<ChatScript const> script)
{
    BackendDescriptor b;
    b.kind = BackendKind::ScriptedChat;
    b.model_name = std::move(model_name);
    b.script = std::move(script);
    return b;
}

inline BackendDescriptor hash_embed(std::size_t dim = 256, std::uint64_t seed = 0)
{
    BackendDescriptor b;
    b.kind = BackendKind::HashEmbed;
    b.model_name = "hash-embed";
    b.dim = dim;
    b.hash_seed = seed;
    return b;
}

inline BackendDescriptor remote_chat(std::string base_url, std::string model, std::string api_key_ref = "ASR_LLM_API_KEY")
{
    BackendDescriptor b;
    b.kind = BackendKind::RemoteChat;
    b.base_url = std::move(base_url);
    b.model_name = std::move(model);
    b.api_key_ref = std::move(api_key_ref);
    return b;
}

inline BackendDescriptor remote_embed(std::string base_url, std::string model, std::string api_key_ref = "ASR_EMBED_API_KEY")
{
    BackendDescriptor b;
    b.kind = BackendKind::RemoteEmbed;
    b.base_url = std::move(base_url);
    b.model_name = std::move(model);
    b.api_key_ref = std::move(api_key_ref);
    return b;
}

// ---------------------------------------------------------------------------
// Gateway

struct RetryPolicy
{
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{250};
};

struct GatewayOptions
{
    std::ptrdiff_t max_inflight = 4;
    std::chrono::milliseconds timeout{30000};
    RetryPolicy retry;

    /// Reads ASR_MAX_INFLIGHT and ASR_TIMEOUT_MS over the defaults.
    static GatewayOptions from_env()
    {
        GatewayOptions o;
        if (char const * v = std::getenv("ASR_MAX_INFLIGHT"); v && *v) {
            o.max_inflight = std::max<std::ptrdiff_t>(1, std::atoll(v));
        }
        if (char const * v = std::getenv("ASR_TIMEOUT_MS"); v && *v) {
            o.timeout = std::chrono::milliseconds(std::max<long long>(1, std::atoll(v)));
        }
        return o;
    }
};

namespace detail {

struct ParsedUrl
{
    std::string origin; // scheme://host[:port]
    std::string path_prefix;
};

inline ParsedUrl parse_base_url(std::string_view url)
{
    auto scheme_end = url.find("://");
    require(scheme_end != std::string_view::npos, ErrorCode::ConfigError,
            "base_url '" + std::string(url) + "' has no scheme");
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string_view::npos) {
        out.origin = std::string(url);
    } else {
        out.origin = std::string(url.substr(0, path_start));
        out.path_prefix = std::string(url.substr(path_start));
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
            out.path_prefix.pop_back();
        }
    }
    return out;
}

inline std::string_view chat_role(Role r) noexcept
{
    // The simulated model speaks as the counterpart.
    return r == Role::Counterpart ? "assistant" : "user";
}

} // namespace detail

/// Uniform entry point for generation and embedding. Remote calls share one
/// in-flight cap, a per-call timeout, and retry transport failures and 5xx
/// responses with exponential backoff.
class Gateway
{
public:
    explicit Gateway(GatewayOptions options = {})
    : options_(options)
    , inflight_(std::make_unique<std::counting_semaphore<>>(std::max<std::ptrdiff_t>(1, options.max_inflight)))
    { }

    /// Process-wide gateway configured from the environment.
    static Gateway & shared()
    {
        static Gateway instance(GatewayOptions::from_env());
        return instance;
    }

    [[nodiscard]] GatewayOptions const & options() const noexcept { return options_; }

    std::string generate_reply(BackendDescriptor const & backend, GenerationRequest const & request)
    {
        validate(backend);
        std::string raw;
        switch (backend.kind) {
        case BackendKind::ScriptedChat:
            raw = backend.script->reply(request);
            break;
        case BackendKind::RemoteChat:
            raw = remote_chat_call(backend, request);
            break;
        default:
            fail(ErrorCode::ConfigError, "backend '" + backend.model_name + "' cannot generate text");
        }
        auto trimmed = text::trim(raw);
        require(!trimmed.empty(), ErrorCode::EmptyGeneration,
                "backend '" + backend.model_name + "' returned an empty completion");
        return std::string(trimmed);
    }

    EmbeddingVector embed(BackendDescriptor const & backend, std::string_view input)
    {
        validate(backend);
        require(!text::is_blank(input), ErrorCode::InvalidInput, "cannot embed empty text");
        std::vector<double> values;
        switch (backend.kind) {
        case BackendKind::HashEmbed:
            values = hash_embed_values(input, backend.dim, backend.hash_seed);
            break;
        case BackendKind::RemoteEmbed:
            values = remote_embed_call(backend, input);
            break;
        default:
            fail(ErrorCode::ConfigError, "backend '" + backend.model_name + "' cannot embed text");
        }
        if (backend.dim != 0) {
            require(values.size() == backend.dim, ErrorCode::DimensionError,
                    "backend '" + backend.model_name + "' returned dimension " + std::to_string(values.size())
                        + ", run expects " + std::to_string(backend.dim));
        }
        return EmbeddingVector(std::move(values));
    }

private:
    struct Permit
    {
        explicit Permit(std::counting_semaphore<> & s)
        : sem(s)
        {
            sem.acquire();
        }
        ~Permit() { sem.release(); }
        Permit(Permit const &) = delete;
        Permit & operator=(Permit const &) = delete;
        std::counting_semaphore<> & sem;
    };

    nlohmann::json post_json(BackendDescriptor const & backend, std::string const & endpoint, nlohmann::json const & body)
    {
        auto url = detail::parse_base_url(*backend.base_url);
        httplib::Headers headers;
        if (!backend.api_key_ref.empty()) {
            if (char const * key = std::getenv(backend.api_key_ref.c_str()); key && *key) {
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
        }
        auto const payload = body.dump();
        auto const path = url.path_prefix + endpoint;
        auto const timeout_s = static_cast<time_t>(options_.timeout.count() / 1000);
        auto const timeout_us = static_cast<time_t>((options_.timeout.count() % 1000) * 1000);

        std::string last_error;
        auto backoff = options_.retry.initial_backoff;
        for (int attempt = 1; attempt <= options_.retry.attempts; ++attempt) {
            {
                Permit permit(*inflight_);
                httplib::Client client(url.origin);
                client.set_connection_timeout(timeout_s, timeout_us);
                client.set_read_timeout(timeout_s, timeout_us);
                client.set_write_timeout(timeout_s, timeout_us);
                auto res = client.Post(path, headers, payload, "application/json");
                if (!res) {
                    last_error = "transport error: " + httplib::to_string(res.error());
                } else if (res->status >= 500) {
                    last_error = "HTTP " + std::to_string(res->status);
                } else if (res->status >= 400) {
                    fail(ErrorCode::BackendUnavailable,
                         backend.model_name + " rejected the request with HTTP " + std::to_string(res->status));
                } else {
                    try {
                        return nlohmann::json::parse(res->body);
                    } catch (nlohmann::json::exception const & e) {
                        fail(ErrorCode::BackendUnavailable, backend.model_name + " returned malformed JSON: " + e.what());
                    }
                }
            }
            spdlog::warn("{} attempt {}/{} failed: {}", backend.model_name, attempt, options_.retry.attempts, last_error);
            if (attempt < options_.retry.attempts) {
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
        }
        fail(ErrorCode::BackendUnavailable,
             backend.model_name + " unreachable after " + std::to_string(options_.retry.attempts) + " attempts ("
                 + last_error + ")");
    }

    std::string remote_chat_call(BackendDescriptor const & backend, GenerationRequest const & request)
    {
        nlohmann::json messages = nlohmann::json::array();
        if (!request.system_prompt.empty()) {
            messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
        }
        for (auto const & m : request.context) {
            if (m.role == Role::Interjection) {
                continue;
            }
            messages.push_back({{"role", detail::chat_role(m.role)}, {"content", m.text}});
        }
        nlohmann::json body{
            {"model", backend.model_name},
            {"messages", std::move(messages)},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens},
        };
        if (request.seed) {
            body["seed"] = *request.seed;
        }
        auto reply = post_json(backend, "/v1/chat/completions", body);
        try {
            auto const & content = reply.at("choices").at(0).at("message").at("content");
            return content.is_null() ? std::string{} : content.get<std::string>();
        } catch (nlohmann::json::exception const & e) {
            fail(ErrorCode::BackendUnavailable, backend.model_name + " reply has no message content: " + e.what());
        }
    }

    std::vector<double> remote_embed_call(BackendDescriptor const & backend, std::string_view input)
    {
        nlohmann::json body{{"model", backend.model_name}, {"input", std::string(input)}};
        auto reply = post_json(backend, "/v1/embeddings", body);
        try {
            return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
        } catch (nlohmann::json::exception const & e) {
            fail(ErrorCode::BackendUnavailable, backend.model_name + " reply has no embedding: " + e.what());
        }
    }

    GatewayOptions options_;
    std::unique_ptr<std::counting_semaphore<>> inflight_;
};

inline std::string generate_reply(BackendDescriptor const & backend, GenerationRequest const & request)
{
    return Gateway::shared().generate_reply(backend, request);
}

inline EmbeddingVector embed(BackendDescriptor const & backend, std::string_view input)
{
    return Gateway::shared().embed(backend, input);
}

/// The verdict request: instruction, parse trailer, and a Person A/B transcript.
inline GenerationRequest reason_prompt(Conversation const & conversation)
{
    auto transcript = render_transcript(conversation);
    require(!text::is_blank(transcript), ErrorCode::InvalidConversation,
            "cannot reason about an empty conversation");
    GenerationRequest req;
    req.system_prompt = std::string(prompts::reason_instruction) + "\n\n" + std::string(prompts::verdict_trailer);
    Message attached;
    attached.index = 0;
    attached.role = Role::SelfUser;
    attached.text = std::move(transcript);
    req.context.push_back(std::move(attached));
    req.temperature = 0.0;
    req.max_tokens = 512;
    req.seed = 0;
    return req;
}

} // namespace asr
