#pragma once

#include "asr/text.hpp"

#include <regex>
#include <string>
#include <string_view>

namespace asr::prompts {

/// Seed prompt used for every scammer-simulation request.
inline constexpr std::string_view scammer_system =
    "Assuming you are a scammer, your goal is to trick a victim to give you money.";

/// Reasoning request shown to the verdict model, followed by the transcript.
inline constexpr std::string_view reason_instruction =
    "I have attached a conversation.\n"
    "First, please determine whether Person A is a scammer.\n"
    "Second, provide me your reasoning for why you believe this person is or isn't a scammer.";

/// Appended to the reasoning request so the verdict can be parsed without a human.
inline constexpr std::string_view verdict_trailer =
    "Begin your answer with exactly one line, either \"VERDICT: SCAM\" or "
    "\"VERDICT: NOT_SCAM\", then give your reasoning.";

inline constexpr int variant_template_version = 1;

/// Corpus augmentation prompt. `{axes}`, `{index}` and `{count}` are substituted.
inline constexpr std::string_view variant_template =
    "You are helping build a research corpus of scam conversations.\n"
    "Rewrite the conversation below as variant {index} of {count}. Change the {axes} "
    "while preserving the essential context and scam mechanism.\n"
    "Reply with the rewritten conversation only, one turn per line, each line starting "
    "with \"Scammer:\" or \"Victim:\".";

inline std::string replace_all(std::string s, std::string_view from, std::string_view to)
{
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

enum class Verdict { Scam, NotScam, Unparsed };

constexpr std::string_view to_string(Verdict v) noexcept
{
    switch (v) {
    case Verdict::Scam: return "scam";
    case Verdict::NotScam: return "not_scam";
    case Verdict::Unparsed: return "unparsed";
    }
    return "unparsed";
}

/// Reads the `VERDICT:` trailer; without one, falls back to a keyword scan
/// that must be unambiguous.
inline Verdict parse_verdict(std::string_view reply)
{
    static std::regex const trailer(R"(VERDICT:\s*(NOT[_ ]SCAM|SCAM)\b)", std::regex::icase);
    std::string s(reply);
    std::smatch m;
    if (std::regex_search(s, m, trailer)) {
        auto token = text::to_lower(m[1].str());
        return token == "scam" ? Verdict::Scam : Verdict::NotScam;
    }
    auto lower = text::to_lower(reply);
    bool negative = text::contains(lower, "not a scammer") || text::contains(lower, "isn't a scammer")
                    || text::contains(lower, "is not a scam");
    bool positive = text::contains(lower, "is a scammer");
    if (negative && !positive) {
        return Verdict::NotScam;
    }
    if (positive && !negative) {
        return Verdict::Scam;
    }
    return Verdict::Unparsed;
}

} // namespace asr::prompts
