#pragma once

#include "asr/convo.hpp"
#include "asr/error.hpp"
#include "asr/llm/gateway.hpp"
#include "asr/text.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>

namespace asr::config {

// ---------------------------------------------------------------------------
// asr.toml: the subset used by the config file (tables, and string,
// integer, float, and boolean values; `#` comments).

using TomlValue = std::variant<std::string, long long, double, bool>;
using TomlTable = std::map<std::string, TomlValue>; // keys are "section.key"

inline TomlTable parse_toml(std::string_view content, std::string const & source = "asr.toml")
{
    TomlTable out;
    std::string section;
    std::size_t line_no = 0;
    auto error = [&](std::string const & msg) {
        fail(ErrorCode::ConfigError, source + " line " + std::to_string(line_no) + ": " + msg);
    };
    for (auto raw : text::split_lines(content)) {
        ++line_no;
        std::string line(text::trim(raw));
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == '[') {
            auto close = line.find(']');
            if (close == std::string::npos) error("unterminated table header");
            section = std::string(text::trim(std::string_view(line).substr(1, close - 1)));
            if (section.empty()) error("empty table name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) error("expected key = value");
        auto key = std::string(text::trim(std::string_view(line).substr(0, eq)));
        auto rest = std::string(text::trim(std::string_view(line).substr(eq + 1)));
        if (key.empty()) error("empty key");
        TomlValue value;
        if (!rest.empty() && rest[0] == '"') {
            std::string s;
            std::size_t i = 1;
            bool closed = false;
            for (; i < rest.size(); ++i) {
                char c = rest[i];
                if (c == '\\' && i + 1 < rest.size()) {
                    char n = rest[++i];
                    s += n == 'n' ? '\n' : n == 't' ? '\t' : n;
                } else if (c == '"') {
                    closed = true;
                    ++i;
                    break;
                } else {
                    s += c;
                }
            }
            if (!closed) error("unterminated string");
            auto tail = text::trim(std::string_view(rest).substr(i));
            if (!tail.empty() && tail[0] != '#') error("unexpected text after string");
            value = s;
        } else {
            if (auto hash = rest.find('#'); hash != std::string::npos) {
                rest = std::string(text::trim(std::string_view(rest).substr(0, hash)));
            }
            if (rest == "true") value = true;
            else if (rest == "false") value = false;
            else {
                char * end = nullptr;
                auto i = std::strtoll(rest.c_str(), &end, 10);
                if (!rest.empty() && *end == '\0') {
                    value = i;
                } else {
                    auto d = std::strtod(rest.c_str(), &end);
                    if (rest.empty() || *end != '\0') error("unsupported value '" + rest + "'");
                    value = d;
                }
            }
        }
        out[section.empty() ? key : section + "." + key] = value;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Global configuration: flags > environment > asr.toml > defaults.

struct EndpointConfig
{
    std::string base_url;
    std::string model;
    std::string api_key_env;
};

struct GlobalConfig
{
    std::string data_dir = ".";
    std::string log_level = "info";
    int port = 8080;
    std::uint64_t seed = 0;
    EndpointConfig llm{"", "gpt-j", "ASR_LLM_API_KEY"};
    EndpointConfig embed{"", "sentence-bert", "ASR_EMBED_API_KEY"};
    GatewayOptions gateway;

    [[nodiscard]] std::string dataset_path() const { return (std::filesystem::path(data_dir) / "dataset.jsonl").string(); }
    [[nodiscard]] std::string audit_path() const { return (std::filesystem::path(data_dir) / "audit.jsonl").string(); }
    [[nodiscard]] std::string events_path() const { return (std::filesystem::path(data_dir) / "events.jsonl").string(); }
};

/// Values given explicitly on the command line.
struct FlagOverrides
{
    std::optional<std::string> data_dir;
    std::optional<std::string> log_level;
    std::optional<int> port;
};

using Env = std::function<std::optional<std::string>(std::string const &)>;

inline Env process_env()
{
    return [](std::string const & name) -> std::optional<std::string> {
        char const * v = std::getenv(name.c_str());
        if (v == nullptr || *v == '\0') return std::nullopt;
        return std::string(v);
    };
}

namespace detail {

inline long long as_int(TomlValue const & v, std::string const & key)
{
    if (auto const * i = std::get_if<long long>(&v)) return *i;
    fail(ErrorCode::ConfigError, "asr.toml: '" + key + "' must be an integer");
}

inline std::string as_string(TomlValue const & v, std::string const & key)
{
    if (auto const * s = std::get_if<std::string>(&v)) return *s;
    fail(ErrorCode::ConfigError, "asr.toml: '" + key + "' must be a string");
}

inline long long env_int(std::string const & name, std::string const & value)
{
    char * end = nullptr;
    auto v = std::strtoll(value.c_str(), &end, 10);
    require(*end == '\0' && v > 0, ErrorCode::ConfigError, name + " must be a positive integer");
    return v;
}

} // namespace detail

inline void apply_toml(GlobalConfig & cfg, TomlTable const & t)
{
    static std::set<std::string> const known{
        "log_level",      "port",           "seed",          "llm.base_url",     "llm.model",
        "llm.api_key_env", "embed.base_url", "embed.model",   "embed.api_key_env", "gateway.max_inflight",
        "gateway.timeout_ms"};
    for (auto const & [key, value] : t) {
        require(known.contains(key), ErrorCode::ConfigError, "asr.toml: unknown key '" + key + "'");
        if (key == "log_level") cfg.log_level = detail::as_string(value, key);
        else if (key == "port") cfg.port = static_cast<int>(detail::as_int(value, key));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::as_int(value, key));
        else if (key == "llm.base_url") cfg.llm.base_url = detail::as_string(value, key);
        else if (key == "llm.model") cfg.llm.model = detail::as_string(value, key);
        else if (key == "llm.api_key_env") cfg.llm.api_key_env = detail::as_string(value, key);
        else if (key == "embed.base_url") cfg.embed.base_url = detail::as_string(value, key);
        else if (key == "embed.model") cfg.embed.model = detail::as_string(value, key);
        else if (key == "embed.api_key_env") cfg.embed.api_key_env = detail::as_string(value, key);
        else if (key == "gateway.max_inflight") cfg.gateway.max_inflight = detail::as_int(value, key);
        else if (key == "gateway.timeout_ms") cfg.gateway.timeout = std::chrono::milliseconds(detail::as_int(value, key));
    }
}

inline void apply_env(GlobalConfig & cfg, Env const & env)
{
    if (auto v = env("ASR_DATA_DIR")) cfg.data_dir = *v;
    if (auto v = env("ASR_LOG_LEVEL")) cfg.log_level = *v;
    if (auto v = env("ASR_LLM_BASE_URL")) cfg.llm.base_url = *v;
    if (auto v = env("ASR_LLM_MODEL")) cfg.llm.model = *v;
    if (auto v = env("ASR_EMBED_BASE_URL")) cfg.embed.base_url = *v;
    if (auto v = env("ASR_EMBED_MODEL")) cfg.embed.model = *v;
    if (auto v = env("ASR_MAX_INFLIGHT")) cfg.gateway.max_inflight = detail::env_int("ASR_MAX_INFLIGHT", *v);
    if (auto v = env("ASR_TIMEOUT_MS")) {
        cfg.gateway.timeout = std::chrono::milliseconds(detail::env_int("ASR_TIMEOUT_MS", *v));
    }
}

/// Resolves the configuration. The data directory is settled first (flag,
/// then env, then default) because asr.toml lives inside it.
inline GlobalConfig resolve(FlagOverrides const & flags, Env const & env = process_env())
{
    GlobalConfig cfg;
    if (auto v = env("ASR_DATA_DIR")) cfg.data_dir = *v;
    if (flags.data_dir) cfg.data_dir = *flags.data_dir;
    auto const toml_path = std::filesystem::path(cfg.data_dir) / "asr.toml";
    if (std::filesystem::exists(toml_path)) {
        std::ifstream in(toml_path);
        std::stringstream ss;
        ss << in.rdbuf();
        apply_toml(cfg, parse_toml(ss.str(), toml_path.string()));
    }
    apply_env(cfg, env);
    if (flags.data_dir) cfg.data_dir = *flags.data_dir;
    if (flags.log_level) cfg.log_level = *flags.log_level;
    if (flags.port) cfg.port = *flags.port;
    require(cfg.gateway.max_inflight >= 1, ErrorCode::ConfigError, "max_inflight must be at least 1");
    return cfg;
}

// ---------------------------------------------------------------------------
// Backend descriptor files (JSON), e.g.
//   {"kind": "scripted_chat", "model_name": "tuned",
//    "script": {"type": "replay", "corpus": "dataset.jsonl", "ids": [...],
//               "fallback": {"type": "fixed", "replies": ["..."]}}}
//   {"kind": "remote_chat", "base_url": "http://host:8000", "model_name": "gpt-j"}
//   {"kind": "hash_embed", "dim": 256, "seed": 0}

namespace detail {

inline std::shared_ptr<ChatScript const> build_script(nlohmann::json const & s, std::filesystem::path const & base)
{
    require(s.is_object() && s.contains("type"), ErrorCode::ConfigError, "script needs a 'type'");
    auto const type = s["type"].get<std::string>();
    if (type == "fixed") {
        auto replies = s.at("replies").get<std::vector<std::string>>();
        require(!replies.empty(), ErrorCode::ConfigError, "fixed script needs at least one reply");
        return std::make_shared<FixedReplyScript>(std::move(replies));
    }
    if (type == "echo") {
        return std::make_shared<EchoScript>();
    }
    if (type == "replay") {
        auto corpus = std::filesystem::path(s.at("corpus").get<std::string>());
        if (corpus.is_relative()) corpus = base / corpus;
        auto records = read_dataset(corpus.string());
        std::optional<std::set<std::string>> ids;
        if (s.contains("ids")) ids = s["ids"].get<std::set<std::string>>();
        std::vector<Conversation> conversations;
        for (auto const & r : records) {
            if (!ids || ids->contains(r.id())) conversations.push_back(r.conversation);
        }
        std::shared_ptr<ChatScript const> fallback;
        if (s.contains("fallback")) fallback = build_script(s["fallback"], base);
        return std::make_shared<ReplayScript>(ReplayScript::table_from(conversations), std::move(fallback));
    }
    fail(ErrorCode::ConfigError, "unknown script type '" + type + "'");
}

} // namespace detail

inline BackendDescriptor backend_from_json(nlohmann::json const & j, std::filesystem::path const & base = ".")
{
    try {
        auto kind = parse_backend_kind(j.at("kind").get<std::string>());
        BackendDescriptor b;
        switch (kind) {
        case BackendKind::RemoteChat:
            b = remote_chat(j.at("base_url").get<std::string>(), j.value("model_name", "gpt-j"),
                            j.value("api_key_env", "ASR_LLM_API_KEY"));
            break;
        case BackendKind::RemoteEmbed:
            b = remote_embed(j.at("base_url").get<std::string>(), j.value("model_name", "sentence-bert"),
                             j.value("api_key_env", "ASR_EMBED_API_KEY"));
            if (j.contains("dim")) b.dim = j["dim"].get<std::size_t>();
            break;
        case BackendKind::ScriptedChat:
            b = scripted_chat(j.value("model_name", "scripted"), detail::build_script(j.at("script"), base));
            break;
        case BackendKind::HashEmbed:
            b = hash_embed(j.value("dim", std::size_t{256}), j.value("seed", std::uint64_t{0}));
            break;
        }
        validate(b);
        return b;
    } catch (nlohmann::json::exception const & e) {
        fail(ErrorCode::ConfigError, std::string("backend config: ") + e.what());
    }
}

inline BackendDescriptor load_backend(std::string const & path)
{
    std::ifstream in(path);
    require(in.good(), ErrorCode::ConfigError, "cannot open backend config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (nlohmann::json::exception const & e) {
        fail(ErrorCode::ConfigError, path + ": " + e.what());
    }
    return backend_from_json(j, std::filesystem::path(path).parent_path());
}

/// Backend from a config file path, or the keywords "llm"/"embed" for the
/// endpoints in the global configuration.
inline BackendDescriptor resolve_backend(std::string const & spec, GlobalConfig const & cfg)
{
    if (spec == "llm") return remote_chat(cfg.llm.base_url, cfg.llm.model, cfg.llm.api_key_env);
    if (spec == "embed") return remote_embed(cfg.embed.base_url, cfg.embed.model, cfg.embed.api_key_env);
    if (spec == "hash") return hash_embed();
    return load_backend(spec);
}

} // namespace asr::config
