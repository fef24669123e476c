#pragma once

#include "asr/convo.hpp"
#include "asr/error.hpp"
#include "asr/llm/gateway.hpp"
#include "asr/llm/prompts.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>

namespace asr {

/// One EMA step of the scam-likelihood score. Negative similarity counts as
/// no evidence rather than evidence against.
inline double update_scam_score(double score, double similarity, double alpha) noexcept
{
    return alpha * std::max(0.0, similarity) + (1.0 - alpha) * score;
}

inline constexpr double neutral_scam_score = 0.5;

struct ScoringParams
{
    double alpha = 0.3;
    double warn_threshold = 0.7;
};

inline void validate(ScoringParams const & p)
{
    require(p.alpha > 0.0 && p.alpha <= 1.0, ErrorCode::ConfigError, "alpha must lie in (0, 1]");
    require(p.warn_threshold >= 0.0 && p.warn_threshold <= 1.0, ErrorCode::ConfigError,
            "warn_threshold must lie in [0, 1]");
}

struct Interjection
{
    std::size_t for_turn = 0;
    std::optional<std::string> predicted_reply;
    std::optional<double> observed_similarity;
    double scam_score = neutral_scam_score;
};

inline nlohmann::json to_json(Interjection const & i)
{
    return {
        {"for_turn", i.for_turn},
        {"predicted_reply", i.predicted_reply ? nlohmann::json(*i.predicted_reply) : nlohmann::json(nullptr)},
        {"observed_similarity", i.observed_similarity ? nlohmann::json(*i.observed_similarity) : nlohmann::json(nullptr)},
        {"scam_score", i.scam_score},
    };
}

struct EngineState
{
    Conversation conversation;
    std::optional<std::string> last_prediction;
    double scam_score = neutral_scam_score;
    ScoringParams params;
};

inline EngineState make_engine_state(std::string conversation_id, ScoringParams params = {})
{
    validate(params);
    EngineState s;
    s.conversation.id = std::move(conversation_id);
    s.params = params;
    return s;
}

enum class ReasonTrigger { AutoWarning, UserRequested };

constexpr std::string_view to_string(ReasonTrigger t) noexcept
{
    return t == ReasonTrigger::AutoWarning ? "auto_warning" : "user_requested";
}

struct ReasonReport
{
    prompts::Verdict verdict = prompts::Verdict::Unparsed;
    std::string reasoning_text;
    ReasonTrigger trigger = ReasonTrigger::UserRequested;
};

inline nlohmann::json to_json(ReasonReport const & r)
{
    return {
        {"verdict", std::string(prompts::to_string(r.verdict))},
        {"reasoning_text", r.reasoning_text},
        {"trigger", std::string(to_string(r.trigger))},
    };
}

/// Prediction request for the scammer's next reply given the messages before
/// `upto_index`.
inline GenerationRequest scammer_request(Conversation const & conversation, std::size_t upto_index, bool evaluation)
{
    auto ctx = context_window(conversation, upto_index, 2);
    if (evaluation) {
        return evaluation_request(std::string(prompts::scammer_system), std::move(ctx));
    }
    GenerationRequest req;
    req.system_prompt = std::string(prompts::scammer_system);
    req.context = std::move(ctx);
    return req;
}

/// Handles a new counterpart message: scores the previous prediction against
/// it, then predicts the counterpart's next reply from the last two turns.
/// The input state is untouched; on error nothing changes.
inline std::pair<EngineState, Interjection> on_counterpart_message(
    EngineState const & state,
    std::string text,
    BackendDescriptor const & gen,
    BackendDescriptor const & emb,
    Gateway & gateway = Gateway::shared())
{
    require(!text::is_blank(text), ErrorCode::InvalidInput, "message text is blank");
    EngineState next = state;
    auto const & msg = next.conversation.append(Role::Counterpart, std::move(text));
    auto const turn = msg.index;

    Interjection out;
    out.for_turn = turn;
    if (state.last_prediction) {
        auto observed = gateway.embed(emb, msg.text);
        auto predicted = gateway.embed(emb, *state.last_prediction);
        double s = cosine_similarity(observed, predicted);
        out.observed_similarity = s;
        next.scam_score = update_scam_score(state.scam_score, s, state.params.alpha);
    }

    std::vector<Message> ctx;
    for (auto it = next.conversation.messages.rbegin(); it != next.conversation.messages.rend() && ctx.size() < 2; ++it) {
        if (it->role != Role::Interjection) {
            ctx.push_back(*it);
        }
    }
    std::reverse(ctx.begin(), ctx.end());
    GenerationRequest req;
    req.system_prompt = std::string(prompts::scammer_system);
    req.context = std::move(ctx);
    auto prediction = gateway.generate_reply(gen, req);

    next.last_prediction = prediction;
    out.predicted_reply = prediction;
    out.scam_score = next.scam_score;
    next.conversation.append(Role::Interjection, prediction);
    return {std::move(next), std::move(out)};
}

inline std::pair<EngineState, Interjection> on_counterpart_message(
    EngineState const & state,
    Message const & msg,
    BackendDescriptor const & gen,
    BackendDescriptor const & emb,
    Gateway & gateway = Gateway::shared())
{
    require(msg.role == Role::Counterpart, ErrorCode::PreconditionFailed,
            "on_counterpart_message needs a counterpart message");
    return on_counterpart_message(state, msg.text, gen, emb, gateway);
}

/// Records the user's own message. No model call; reports the pending
/// prediction and current score.
inline std::pair<EngineState, Interjection> on_self_message(EngineState const & state, std::string text)
{
    require(!text::is_blank(text), ErrorCode::InvalidInput, "message text is blank");
    EngineState next = state;
    auto const & msg = next.conversation.append(Role::SelfUser, std::move(text));
    Interjection out;
    out.for_turn = msg.index;
    out.predicted_reply = next.last_prediction;
    out.scam_score = next.scam_score;
    return {std::move(next), std::move(out)};
}

[[nodiscard]] inline bool should_auto_warn(EngineState const & state) noexcept
{
    return state.scam_score >= state.params.warn_threshold;
}

/// Asks the reasoning backend for a verdict. An AutoWarning request only runs
/// when the score has reached the warning threshold; otherwise returns nullopt.
inline std::optional<ReasonReport> reason(
    EngineState const & state,
    ReasonTrigger trigger,
    BackendDescriptor const & gen,
    Gateway & gateway = Gateway::shared())
{
    auto req = reason_prompt(state.conversation);
    if (trigger == ReasonTrigger::AutoWarning && !should_auto_warn(state)) {
        return std::nullopt;
    }
    ReasonReport report;
    report.trigger = trigger;
    report.reasoning_text = gateway.generate_reply(gen, req);
    report.verdict = prompts::parse_verdict(report.reasoning_text);
    return report;
}

/// Generates the scammer's reply at `upto_index` (a Counterpart turn) from the
/// two preceding turns, with evaluation settings (temperature 0, fixed seed).
inline std::string simulate_turn(
    Conversation const & conversation,
    std::size_t upto_index,
    BackendDescriptor const & gen,
    Gateway & gateway = Gateway::shared())
{
    auto const & target = message_at(conversation, upto_index);
    require(target.role == Role::Counterpart, ErrorCode::PreconditionFailed,
            "turn " + std::to_string(upto_index) + " of '" + conversation.id + "' is not a counterpart turn");
    return gateway.generate_reply(gen, scammer_request(conversation, upto_index, true));
}

/// Live conversations for the service layer. Each conversation is serialized
/// by its own mutex; distinct conversations proceed concurrently.
class ConversationHub
{
public:
    ConversationHub(BackendDescriptor gen, BackendDescriptor emb, BackendDescriptor reasoner,
                    ScoringParams params = {}, Gateway & gateway = Gateway::shared())
    : gen_(std::move(gen))
    , emb_(std::move(emb))
    , reasoner_(std::move(reasoner))
    , params_(params)
    , gateway_(gateway)
    {
        validate(params_);
    }

    std::string create()
    {
        std::unique_lock lock(mutex_);
        auto id = "c" + std::to_string(++counter_);
        auto slot = std::make_shared<Slot>();
        slot->state = make_engine_state(id, params_);
        slots_.emplace(id, std::move(slot));
        return id;
    }

    Interjection post_message(std::string const & id, Role role, std::string text)
    {
        auto slot = find(id);
        std::lock_guard lock(slot->mutex);
        std::pair<EngineState, Interjection> result;
        if (role == Role::Counterpart) {
            result = on_counterpart_message(slot->state, std::move(text), gen_, emb_, gateway_);
        } else if (role == Role::SelfUser) {
            result = on_self_message(slot->state, std::move(text));
        } else {
            fail(ErrorCode::InvalidInput, "interjections cannot be posted");
        }
        slot->state = std::move(result.first);
        return result.second;
    }

    ReasonReport analyze(std::string const & id, ReasonTrigger trigger = ReasonTrigger::UserRequested)
    {
        auto slot = find(id);
        std::lock_guard lock(slot->mutex);
        auto report = reason(slot->state, trigger, reasoner_, gateway_);
        require(report.has_value(), ErrorCode::PreconditionFailed, "score is below the warning threshold");
        return *report;
    }

    EngineState snapshot(std::string const & id)
    {
        auto slot = find(id);
        std::lock_guard lock(slot->mutex);
        return slot->state;
    }

private:
    struct Slot
    {
        std::mutex mutex;
        EngineState state;
    };

    std::shared_ptr<Slot> find(std::string const & id)
    {
        std::shared_lock lock(mutex_);
        auto it = slots_.find(id);
        require(it != slots_.end(), ErrorCode::NotFound, "no conversation '" + id + "'");
        return it->second;
    }

    BackendDescriptor gen_;
    BackendDescriptor emb_;
    BackendDescriptor reasoner_;
    ScoringParams params_;
    Gateway & gateway_;
    std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
    std::size_t counter_ = 0;
};

} // namespace asr
