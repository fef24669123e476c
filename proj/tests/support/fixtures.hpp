#pragma once

#include "asr/convo.hpp"
#include "asr/llm/gateway.hpp"

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace fixtures {

using asr::Role;

inline std::vector<std::string> const & generic_replies()
{
    static std::vector<std::string> const r{"Hello, how are you today?", "I am not sure what you mean.",
                                            "That sounds nice, tell me more.", "Thanks for letting me know."};
    return r;
}

inline std::string pad(std::size_t i)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03zu", i);
    return buf;
}

/// Synthetic scam dialogue `i`; every line carries conversation-specific
/// vocabulary so that replay contexts never collide across conversations.
inline asr::Conversation scam_conversation(std::size_t i, std::string const & prefix = "conv")
{
    static char const * const names[] = {"Officer Tan", "Recruiter Mia", "Darling Alex", "Advisor Ken"};
    static char const * const hooks[] = {"a warrant under your name", "a remote task job paying daily",
                                         "my flight to see you", "a guaranteed crypto fund"};
    static char const * const asks[] = {"transfer the bail deposit", "pay the activation fee",
                                        "send gift cards for customs", "deposit into the trading wallet"};
    auto const c = i % 4;
    auto const tag = "case " + pad(i);
    auto const amount = std::to_string(100 + 37 * i);
    std::vector<std::pair<Role, std::string>> turns{
        {Role::SelfUser, "Hi, who is this? (" + tag + ")"},
        {Role::Counterpart, std::string("This is ") + names[c] + ", reaching you about " + hooks[c] + ", " + tag + "."},
        {Role::SelfUser, "I do not understand, why contact me about " + tag + "?"},
        {Role::Counterpart, "You were selected for " + tag + ", please act quickly before the " + amount
                                + " dollar window closes."},
        {Role::SelfUser, "What exactly do you need from me for " + tag + "?"},
        {Role::Counterpart, std::string("You must ") + asks[c] + " of " + amount + " dollars today for " + tag + "."},
        {Role::SelfUser, "Can I think about " + tag + " and call you tomorrow?"},
        {Role::Counterpart, "No, " + tag + " expires tonight, send the " + amount + " dollars now or lose everything."},
    };
    return asr::make_conversation(prefix + "-" + pad(i), std::move(turns), asr::all_categories[c], true);
}

inline std::vector<asr::Conversation> validation_corpus(std::size_t n = 90)
{
    std::vector<asr::Conversation> out;
    for (std::size_t i = 1; i <= n; ++i) out.push_back(scam_conversation(i));
    return out;
}

inline std::vector<asr::DatasetRecord> seed_records(std::size_t n = 90)
{
    std::vector<asr::DatasetRecord> out;
    for (std::size_t i = 1; i <= n; ++i) {
        asr::DatasetRecord r;
        r.conversation = scam_conversation(i, "seed");
        r.source = asr::RecordSource::Seed;
        out.push_back(std::move(r));
    }
    return out;
}

inline asr::BackendDescriptor generic_backend(std::string name = "generic")
{
    return asr::scripted_chat(std::move(name), std::make_shared<asr::FixedReplyScript>(generic_replies()));
}

/// Replays the real replies of `known` conversations; anything else falls
/// back to the generic replies.
inline asr::BackendDescriptor tuned_backend(std::vector<asr::Conversation> const & known, std::string name = "tuned")
{
    return asr::scripted_chat(
        std::move(name),
        std::make_shared<asr::ReplayScript>(asr::ReplayScript::table_from(known),
                                            std::make_shared<asr::FixedReplyScript>(generic_replies())));
}

/// Variant generator: rewrites the parent dialogue with a per-variant marker.
inline asr::BackendDescriptor mutating_backend()
{
    return asr::scripted_chat("mutator", std::make_shared<asr::FunctionScript>([](asr::GenerationRequest const & req) {
        std::string out;
        auto const marker = " (variant " + std::to_string(req.seed.value_or(0)) + ")";
        for (auto line : asr::text::split_lines(req.context.at(0).text)) {
            if (asr::text::is_blank(line)) continue;
            out += std::string(line) + marker + "\n";
        }
        return out;
    }));
}

} // namespace fixtures
