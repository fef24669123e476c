#pragma once

#include "asr/clock.hpp"
#include "asr/convo.hpp"
#include "asr/csv.hpp"
#include "asr/engine.hpp"
#include "asr/error.hpp"
#include "asr/llm/gateway.hpp"
#include "asr/survey/scenarios.hpp"
#include "asr/text.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace asr::survey {

using json = nlohmann::ordered_json;

enum class Arm { Treatment, Control };
enum class ModelArm { Tuned, Untuned };

constexpr std::string_view to_string(Arm a) noexcept
{
    return a == Arm::Treatment ? "treatment" : "control";
}

constexpr std::string_view to_string(ModelArm m) noexcept
{
    return m == ModelArm::Tuned ? "tuned" : "untuned";
}

inline Arm parse_arm(std::string_view s)
{
    if (s == "treatment") return Arm::Treatment;
    if (s == "control") return Arm::Control;
    fail(ErrorCode::SchemaError, "unknown arm '" + std::string(s) + "'");
}

/// Unpadded URL-safe base64 (RFC 4648 section 5).
inline std::string base64url(std::span<std::uint8_t const> bytes)
{
    static constexpr char alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
    std::string out;
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        for (int s = 18; s >= 0; s -= 6) out += alphabet[(v >> s) & 63];
    }
    if (auto rest = bytes.size() - i; rest > 0) {
        std::uint32_t v = bytes[i] << 16;
        if (rest == 2) v |= bytes[i + 1] << 8;
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        if (rest == 2) out += alphabet[(v >> 6) & 63];
    }
    return out;
}

using TokenBytes = std::array<std::uint8_t, 16>;
using TokenSource = std::function<TokenBytes()>;

inline TokenSource system_token_source()
{
    return [] {
        static std::random_device rd;
        static std::mutex m;
        std::lock_guard lock(m);
        TokenBytes b{};
        for (std::size_t i = 0; i < b.size(); i += 4) {
            auto v = rd();
            for (std::size_t j = 0; j < 4; ++j) b[i + j] = static_cast<std::uint8_t>(v >> (8 * j));
        }
        return b;
    };
}

/// Deterministic source for tests and replayable demos.
inline TokenSource seeded_token_source(std::uint64_t seed)
{
    auto rng = std::make_shared<std::mt19937_64>(seed);
    return [rng] {
        TokenBytes b{};
        for (std::size_t i = 0; i < b.size(); i += 8) {
            auto v = (*rng)();
            for (std::size_t j = 0; j < 8; ++j) b[i + j] = static_cast<std::uint8_t>(v >> (8 * j));
        }
        return b;
    };
}

// ---------------------------------------------------------------------------
// Event storage

/// Append-only event storage seam; a hosted store can implement this.
class EventStore
{
public:
    virtual ~EventStore() = default;
    virtual void append(json const & event) = 0;
    [[nodiscard]] virtual std::vector<json> load() const = 0;
};

class MemoryEventStore final : public EventStore
{
public:
    void append(json const & event) override { events_.push_back(event); }
    [[nodiscard]] std::vector<json> load() const override { return events_; }

private:
    std::vector<json> events_;
};

/// One event object per line, flushed on every append.
class FileEventStore final : public EventStore
{
public:
    explicit FileEventStore(std::string path)
    : path_(std::move(path))
    { }

    void append(json const & event) override
    {
        std::ofstream out(path_, std::ios::app);
        require(out.good(), ErrorCode::StorageError, "cannot open event log '" + path_ + "'");
        out << event.dump() << '\n';
        out.flush();
        require(out.good(), ErrorCode::StorageError, "failed writing event log '" + path_ + "'");
    }

    [[nodiscard]] std::vector<json> load() const override
    {
        std::vector<json> events;
        std::ifstream in(path_);
        if (!in.good()) return events;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (text::is_blank(line)) continue;
            try {
                events.push_back(json::parse(line));
            } catch (json::exception const & e) {
                fail(ErrorCode::StorageError, path_ + " line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        return events;
    }

private:
    std::string path_;
};

// ---------------------------------------------------------------------------
// Service state

struct SurveyKey
{
    std::string token;
    std::string issued_at;
    bool used = false;
};

struct GeneratedReply
{
    std::size_t turn = 0;
    std::string actual;
    std::string generated;
};

struct Upload
{
    std::string conversation_type; // "scam" | "normal"
    std::string transcript;
    std::vector<GeneratedReply> replies;
};

struct Session
{
    std::string key;
    Component component = Component::Anticipate;
    Arm arm = Arm::Control;
    std::optional<ModelArm> model_arm;
    std::string started_at;
    std::map<std::string, Choice> responses;
    std::map<std::string, int> revisions;
    std::map<int, Upload> uploads;
    std::map<int, bool> judgments;
    std::optional<int> usefulness;
};

inline constexpr int simulate_uploads = 3;

struct ServiceOptions
{
    std::uint64_t seed = 0;
    /// Simulate backends; participants never see which one served them.
    std::optional<BackendDescriptor> tuned;
    std::optional<BackendDescriptor> untuned;
};

class Service
{
public:
    Service(ServiceOptions options, std::unique_ptr<EventStore> store, Clock clock = utc_now,
            TokenSource tokens = system_token_source(), Gateway & gateway = Gateway::shared())
    : options_(std::move(options))
    , store_(std::move(store))
    , clock_(std::move(clock))
    , tokens_(std::move(tokens))
    , gateway_(&gateway)
    {
        require(store_ != nullptr, ErrorCode::ConfigError, "survey service needs an event store");
        for (auto const & e : store_->load()) apply(e);
    }

    /// Rebuilds service state from an event sequence without side effects.
    static Service replay(std::vector<json> const & events, ServiceOptions options = {})
    {
        auto store = std::make_unique<MemoryEventStore>();
        for (auto const & e : events) store->append(e);
        return Service(std::move(options), std::move(store));
    }

    [[nodiscard]] std::vector<json> events() const
    {
        std::lock_guard lock(mutex_);
        return store_->load();
    }

    // Admin -----------------------------------------------------------------

    std::vector<SurveyKey> issue_keys(std::size_t n)
    {
        require(n >= 1, ErrorCode::PreconditionFailed, "issue_keys needs n >= 1");
        std::lock_guard lock(mutex_);
        json tokens = json::array();
        std::set<std::string> fresh;
        while (fresh.size() < n) {
            auto bytes = tokens_();
            auto token = base64url(bytes);
            if (keys_.contains(token) || !fresh.insert(token).second) continue;
            tokens.push_back(token);
        }
        json event{{"type", "keys_issued"}, {"at", clock_()}, {"tokens", tokens}};
        commit(event);
        std::vector<SurveyKey> out;
        for (auto const & t : tokens) out.push_back(keys_.at(t.get<std::string>()));
        return out;
    }

    // Participant -----------------------------------------------------------

    /// Consumes the key, fixes the arm, and returns the participant manifest.
    json start_session(std::string const & key, Component component)
    {
        std::lock_guard lock(mutex_);
        auto it = keys_.find(key);
        require(it != keys_.end(), ErrorCode::Unauthorized, "unknown survey key");
        require(!it->second.used, ErrorCode::KeyConsumed, "survey key already used");
        auto const ordinal = starts_[component];
        auto arm = assign_arm(component, ordinal);
        json event{{"type", "session_started"}, {"at", clock_()},        {"key", key},
                   {"component", to_string(component)}, {"arm", to_string(arm)}, {"ordinal", ordinal}};
        if (component == Component::Simulate) {
            event["model_arm"] = to_string(model_arm_for(arm));
        }
        commit(event);
        return manifest(sessions_.at(key));
    }

    json submit_response(std::string const & key, json const & payload)
    {
        std::lock_guard lock(mutex_);
        auto const & s = active_session(key);
        require(payload.is_object(), ErrorCode::ValidationError, "response body must be an object");
        if (s.component == Component::Simulate) {
            require(payload.contains("slot") && payload["slot"].is_number_integer(), ErrorCode::ValidationError,
                    "simulate judgment needs an integer 'slot'");
            require(payload.contains("context_suited") && payload["context_suited"].is_boolean(),
                    ErrorCode::ValidationError, "simulate judgment needs a boolean 'context_suited'");
            int slot = payload["slot"].get<int>();
            require(s.uploads.contains(slot), ErrorCode::NotFound, "no upload in slot " + std::to_string(slot));
            json event{{"type", "simulate_judgment"}, {"at", clock_()}, {"key", key}, {"slot", slot},
                       {"context_suited", payload["context_suited"].get<bool>()}};
            commit(event);
            return json{{"status", "ok"}, {"slot", slot}};
        }
        require(payload.contains("scenario_id") && payload["scenario_id"].is_string(), ErrorCode::ValidationError,
                "response needs a string 'scenario_id'");
        require(payload.contains("choice") && payload["choice"].is_string(), ErrorCode::ValidationError,
                "response needs a string 'choice'");
        auto const scenario_id = payload["scenario_id"].get<std::string>();
        scenario_by_id(scenario_id);
        auto choice = parse_choice(payload["choice"].get<std::string>());
        require(is_four_option(choice) == (s.arm == Arm::Treatment), ErrorCode::ProtocolError,
                "choice '" + std::string(to_string(choice)) + "' is not offered in this session");
        json event{{"type", "response"},        {"at", clock_()},
                   {"key", key},                {"scenario_id", scenario_id},
                   {"choice", to_string(choice)}};
        commit(event);
        return json{{"status", "ok"}, {"scenario_id", scenario_id},
                    {"revision", sessions_.at(key).revisions.at(scenario_id)}};
    }

    json submit_usefulness(std::string const & key, json const & score)
    {
        std::lock_guard lock(mutex_);
        auto const & s = active_session(key);
        require(s.component == Component::Simulate, ErrorCode::ProtocolError,
                "usefulness is rated in the simulate session only");
        require(score.is_number_integer(), ErrorCode::ValidationError, "usefulness score must be an integer");
        int v = score.get<int>();
        require(v >= 1 && v <= 5, ErrorCode::ValidationError, "usefulness score must be within 1..5");
        commit(json{{"type", "usefulness"}, {"at", clock_()}, {"key", key}, {"score", v}});
        return json{{"status", "ok"}};
    }

    /// Runs an uploaded conversation log through the session's model and
    /// returns the generated replies, one per counterpart turn.
    json upload_conversation(std::string const & key, int slot, std::string const & conversation_type,
                             std::string const & transcript)
    {
        BackendDescriptor backend;
        Conversation conversation;
        {
            std::lock_guard lock(mutex_);
            auto const & s = active_session(key);
            check_upload(s, slot, conversation_type);
            auto turns = parse_dialogue(transcript);
            require(!turns.empty(), ErrorCode::ValidationError,
                    "transcript has no 'Person A:'/'Person B:' (or 'Scammer:'/'Victim:') lines");
            conversation = merge_consecutive_turns(make_conversation("upload", std::move(turns)));
            auto const & chosen = *s.model_arm == ModelArm::Tuned ? options_.tuned : options_.untuned;
            require(chosen.has_value(), ErrorCode::ConfigError, "simulate backends are not configured");
            backend = *chosen;
        }
        json replies = json::array();
        for (auto const & m : conversation.messages) {
            if (m.role != Role::Counterpart) continue;
            auto generated = simulate_turn(conversation, m.index, backend, *gateway_);
            replies.push_back(json{{"turn", m.index}, {"actual", m.text}, {"generated", generated}});
        }
        require(!replies.empty(), ErrorCode::ValidationError, "transcript has no Person A turn to simulate");
        std::lock_guard lock(mutex_);
        check_upload(active_session(key), slot, conversation_type);
        json event{{"type", "simulate_upload"},
                   {"at", clock_()},
                   {"key", key},
                   {"slot", slot},
                   {"conversation_type", conversation_type},
                   {"transcript", transcript},
                   {"replies", replies}};
        commit(event);
        return json{{"slot", slot}, {"replies", replies}};
    }

    // Analyst ---------------------------------------------------------------

    [[nodiscard]] std::string pseudonym(std::string const & key) const
    {
        return "p" + text::hex64(text::mix64(text::fnv1a(key, options_.seed))).substr(0, 12);
    }

    /// Anonymized CSV; deterministic for a given state.
    [[nodiscard]] std::string export_csv(Component component) const
    {
        std::lock_guard lock(mutex_);
        std::vector<std::pair<std::string, Session const *>> rows;
        for (auto const & [key, s] : sessions_) {
            if (s.component == component) rows.emplace_back(pseudonym(key), &s);
        }
        std::sort(rows.begin(), rows.end(), [](auto const & a, auto const & b) { return a.first < b.first; });
        std::string out;
        if (component == Component::Simulate) {
            out = "participant,model_arm,slot,conversation_type,context_suited,usefulness\n";
            for (auto const & [pid, s] : rows) {
                for (auto const & [slot, upload] : s->uploads) {
                    auto j = s->judgments.find(slot);
                    out += csv::join({pid, std::string(to_string(*s->model_arm)), std::to_string(slot),
                                      upload.conversation_type,
                                      j == s->judgments.end() ? "" : (j->second ? "1" : "0"),
                                      s->usefulness ? std::to_string(*s->usefulness) : ""})
                           + "\n";
                }
            }
            return out;
        }
        out = "participant,arm,component,scenario_id,scenario_number,category,ground_truth,choice,revisions\n";
        for (auto const & [pid, s] : rows) {
            for (auto const & sc : fixture_scenarios()) {
                auto it = s->responses.find(sc.id());
                if (it == s->responses.end()) continue;
                out += csv::join({pid, std::string(to_string(s->arm)), std::string(to_string(component)), sc.id(),
                                  std::to_string(sc.number), sc.category ? std::string(to_string(*sc.category)) : "",
                                  sc.is_scam() ? "scam" : "not_scam", std::string(to_string(it->second)),
                                  std::to_string(s->revisions.at(sc.id()))})
                       + "\n";
            }
        }
        return out;
    }

    /// Response history for one key, oldest first.
    [[nodiscard]] std::vector<json> audit(std::string const & key) const
    {
        std::lock_guard lock(mutex_);
        std::vector<json> out;
        for (auto const & e : store_->load()) {
            if (e.value("key", "") == key && e["type"] != "session_started") out.push_back(e);
        }
        return out;
    }

    [[nodiscard]] std::optional<Session> session(std::string const & key) const
    {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(key);
        if (it == sessions_.end()) return std::nullopt;
        return it->second;
    }

    /// Canonical dump of the full service state; replay must reproduce it byte for byte.
    [[nodiscard]] std::string state_json() const
    {
        std::lock_guard lock(mutex_);
        json st;
        st["events"] = event_count_;
        json keys = json::array();
        for (auto const & [token, k] : keys_) {
            keys.push_back(json{{"token", token}, {"issued_at", k.issued_at}, {"used", k.used}});
        }
        st["keys"] = keys;
        json starts = json::object();
        for (auto const & [c, n] : starts_) starts[std::string(to_string(c))] = n;
        st["starts"] = starts;
        json sessions = json::array();
        for (auto const & [key, s] : sessions_) {
            json j{{"key", key},
                   {"component", to_string(s.component)},
                   {"arm", to_string(s.arm)},
                   {"started_at", s.started_at}};
            if (s.model_arm) j["model_arm"] = to_string(*s.model_arm);
            json resp = json::object();
            for (auto const & [id, c] : s.responses) {
                resp[id] = json{{"choice", to_string(c)}, {"revisions", s.revisions.at(id)}};
            }
            j["responses"] = resp;
            json uploads = json::object();
            for (auto const & [slot, u] : s.uploads) {
                json r = json::array();
                for (auto const & g : u.replies) {
                    r.push_back(json{{"turn", g.turn}, {"actual", g.actual}, {"generated", g.generated}});
                }
                json uj{{"conversation_type", u.conversation_type}, {"transcript", u.transcript}, {"replies", r}};
                if (auto jt = s.judgments.find(slot); jt != s.judgments.end()) uj["context_suited"] = jt->second;
                uploads[std::to_string(slot)] = uj;
            }
            j["uploads"] = uploads;
            if (s.usefulness) j["usefulness"] = *s.usefulness;
            sessions.push_back(j);
        }
        st["sessions"] = sessions;
        return st.dump(2);
    }

    /// Participant-facing view of a session; never carries arm identifiers.
    [[nodiscard]] static json manifest(Session const & s)
    {
        json m{{"component", to_string(s.component)}};
        if (s.component == Component::Simulate) {
            m["protocol"] = json{
                {"uploads", simulate_uploads},
                {"min_scam", 1},
                {"min_normal", 1},
                {"instructions",
                 "Upload logs of three distinct conversations from your messaging apps, including at least one known "
                 "scam conversation and one legitimate conversation. Label lines 'Person A:' (the other party) and "
                 "'Person B:' (you). For each conversation, judge whether the generated replies are believable and "
                 "suited to its context, then rate the tool's usefulness from 1 to 5."},
            };
            return m;
        }
        bool const adorned = s.arm == Arm::Treatment;
        json scenarios = json::array();
        for (auto const & sc : fixture_scenarios()) {
            json transcript = json::array();
            for (auto const & [role, t] : sc.turns) {
                transcript.push_back(json{{"speaker", role == Role::Counterpart ? "Person A" : "Person B"}, {"text", t}});
            }
            json item{{"scenario_id", sc.id()}, {"number", sc.number}, {"transcript", transcript}};
            if (adorned && s.component == Component::Anticipate) {
                item["scam_score"] = sc.scam_score;
                item["predicted_reply"] = sc.predicted_reply;
            } else if (adorned) {
                item["conclusion"] = json{{"verdict", sc.verdict == prompts::Verdict::Scam ? "SCAM" : "NOT_SCAM"},
                                          {"reasoning", sc.reasoning}};
            }
            json options = json::array();
            auto opts = !adorned                                ? two_options()
                        : s.component == Component::Anticipate ? anticipate_options()
                                                                : reason_options();
            for (auto const & o : opts) {
                json oj{{"choice", to_string(o.choice)}, {"label", o.label}};
                if (o.read_note) oj["read_note"] = true;
                options.push_back(oj);
            }
            item["options"] = options;
            scenarios.push_back(item);
        }
        m["scenarios"] = scenarios;
        if (adorned && s.component == Component::Anticipate) m["note"] = read_note;
        return m;
    }

private:
    [[nodiscard]] Arm assign_arm(Component component, std::size_t ordinal) const
    {
        // Shuffled blocks of two: each block holds one of each arm, in an order
        // drawn from a hash of (seed, component, block).
        auto const block = ordinal / 2;
        auto h = text::mix64(text::fnv1a(std::string(to_string(component)) + ":" + std::to_string(block),
                                         options_.seed));
        Arm first = (h & 1) ? Arm::Treatment : Arm::Control;
        if (ordinal % 2 == 0) return first;
        return first == Arm::Treatment ? Arm::Control : Arm::Treatment;
    }

    static ModelArm model_arm_for(Arm arm) noexcept
    {
        return arm == Arm::Treatment ? ModelArm::Tuned : ModelArm::Untuned;
    }

    Session const & active_session(std::string const & key) const
    {
        require(keys_.contains(key), ErrorCode::Unauthorized, "unknown survey key");
        auto it = sessions_.find(key);
        require(it != sessions_.end(), ErrorCode::ProtocolError, "session has not been started");
        return it->second;
    }

    static void check_upload(Session const & s, int slot, std::string const & conversation_type)
    {
        require(s.component == Component::Simulate, ErrorCode::ProtocolError,
                "conversation uploads belong to the simulate session");
        require(slot >= 1 && slot <= simulate_uploads, ErrorCode::ValidationError,
                "slot must be within 1.." + std::to_string(simulate_uploads));
        require(conversation_type == "scam" || conversation_type == "normal", ErrorCode::ValidationError,
                "conversation_type must be 'scam' or 'normal'");
        std::map<int, std::string> types;
        for (auto const & [k, u] : s.uploads) types[k] = u.conversation_type;
        types[slot] = conversation_type;
        if (types.size() == simulate_uploads) {
            bool scam = false;
            bool normal = false;
            for (auto const & [k, t] : types) (t == "scam" ? scam : normal) = true;
            require(scam && normal, ErrorCode::ProtocolError,
                    "the three uploads must include at least one scam and one legitimate conversation");
        }
    }

    void commit(json event)
    {
        event["seq"] = event_count_ + 1;
        store_->append(event);
        apply(event);
    }

    void apply(json const & e)
    {
        auto const type = e.at("type").get<std::string>();
        if (type == "keys_issued") {
            for (auto const & t : e.at("tokens")) {
                auto token = t.get<std::string>();
                keys_[token] = SurveyKey{token, e.at("at").get<std::string>(), false};
            }
        } else if (type == "session_started") {
            auto key = e.at("key").get<std::string>();
            Session s;
            s.key = key;
            s.component = parse_component(e.at("component").get<std::string>());
            s.arm = parse_arm(e.at("arm").get<std::string>());
            if (e.contains("model_arm")) {
                s.model_arm = e["model_arm"] == "tuned" ? ModelArm::Tuned : ModelArm::Untuned;
            }
            s.started_at = e.at("at").get<std::string>();
            keys_.at(key).used = true;
            ++starts_[s.component];
            sessions_[key] = std::move(s);
        } else if (type == "response") {
            auto & s = sessions_.at(e.at("key").get<std::string>());
            auto id = e.at("scenario_id").get<std::string>();
            s.responses[id] = parse_choice(e.at("choice").get<std::string>());
            ++s.revisions[id];
        } else if (type == "simulate_upload") {
            auto & s = sessions_.at(e.at("key").get<std::string>());
            Upload u;
            u.conversation_type = e.at("conversation_type").get<std::string>();
            u.transcript = e.at("transcript").get<std::string>();
            for (auto const & r : e.at("replies")) {
                u.replies.push_back(GeneratedReply{r.at("turn").get<std::size_t>(), r.at("actual").get<std::string>(),
                                                   r.at("generated").get<std::string>()});
            }
            auto slot = e.at("slot").get<int>();
            s.uploads[slot] = std::move(u);
            s.judgments.erase(slot);
        } else if (type == "simulate_judgment") {
            auto & s = sessions_.at(e.at("key").get<std::string>());
            s.judgments[e.at("slot").get<int>()] = e.at("context_suited").get<bool>();
        } else if (type == "usefulness") {
            sessions_.at(e.at("key").get<std::string>()).usefulness = e.at("score").get<int>();
        } else {
            fail(ErrorCode::StorageError, "unknown event type '" + type + "'");
        }
        ++event_count_;
    }

    ServiceOptions options_;
    std::unique_ptr<EventStore> store_;
    Clock clock_;
    TokenSource tokens_;
    Gateway * gateway_;
    mutable std::mutex mutex_;
    std::map<std::string, SurveyKey> keys_;
    std::map<std::string, Session> sessions_;
    std::map<Component, std::size_t> starts_;
    std::size_t event_count_ = 0;
};

// ---------------------------------------------------------------------------
// Simulate tallies

struct ArmTally
{
    int scam_suited = 0;
    int scam_not_suited = 0;
    int normal_suited = 0;
    int normal_not_suited = 0;
    double usefulness_sum = 0.0;
    int usefulness_n = 0;

    [[nodiscard]] int total() const noexcept
    {
        return scam_suited + scam_not_suited + normal_suited + normal_not_suited;
    }
    [[nodiscard]] double mean_usefulness() const noexcept
    {
        return usefulness_n == 0 ? 0.0 : usefulness_sum / usefulness_n;
    }
};

struct SimulateTally
{
    ArmTally tuned;
    ArmTally untuned;
};

/// Context-suited counts per model arm and conversation type from a simulate export.
inline SimulateTally tally_simulate(csv::Table const & t)
{
    SimulateTally out;
    std::set<std::string> rated;
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto const & arm = t.at(i, "model_arm");
        require(arm == "tuned" || arm == "untuned", ErrorCode::SchemaError, "unknown model_arm '" + arm + "'");
        auto & a = arm == "tuned" ? out.tuned : out.untuned;
        auto const & suited = t.at(i, "context_suited");
        auto const & type = t.at(i, "conversation_type");
        if (!suited.empty()) {
            bool ok = suited == "1";
            if (type == "scam") (ok ? a.scam_suited : a.scam_not_suited)++;
            else if (type == "normal") (ok ? a.normal_suited : a.normal_not_suited)++;
            else fail(ErrorCode::SchemaError, "unknown conversation_type '" + type + "'");
        }
        auto const & pid = t.at(i, "participant");
        auto const & u = t.at(i, "usefulness");
        if (!u.empty() && rated.insert(pid).second) {
            a.usefulness_sum += std::stod(u);
            ++a.usefulness_n;
        }
    }
    return out;
}

inline std::string render_tally_md(SimulateTally const & t)
{
    auto row = [](std::string label, int a, int b) {
        return "| " + label + " | " + std::to_string(a) + " | " + std::to_string(b) + " |\n";
    };
    char tu[16];
    char un[16];
    std::snprintf(tu, sizeof tu, "%.1f", t.tuned.mean_usefulness());
    std::snprintf(un, sizeof un, "%.1f", t.untuned.mean_usefulness());
    std::string out = "| | Tuned | Untuned |\n|---|---|---|\n";
    out += row("Scam, context-suited", t.tuned.scam_suited, t.untuned.scam_suited);
    out += row("Scam, not context-suited", t.tuned.scam_not_suited, t.untuned.scam_not_suited);
    out += row("Normal, context-suited", t.tuned.normal_suited, t.untuned.normal_suited);
    out += row("Normal, not context-suited", t.tuned.normal_not_suited, t.untuned.normal_not_suited);
    out += row("Total", t.tuned.total(), t.untuned.total());
    out += "| Average usefulness (out of 5) | " + std::string(tu) + " | " + std::string(un) + " |\n";
    return out;
}

inline json to_json(SimulateTally const & t)
{
    auto arm = [](ArmTally const & a) {
        return json{{"scam_context_suited", a.scam_suited},
                    {"scam_not_context_suited", a.scam_not_suited},
                    {"normal_context_suited", a.normal_suited},
                    {"normal_not_context_suited", a.normal_not_suited},
                    {"total", a.total()},
                    {"average_usefulness", a.mean_usefulness()}};
    };
    return json{{"tuned", arm(t.tuned)}, {"untuned", arm(t.untuned)}};
}

} // namespace asr::survey
