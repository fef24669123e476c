#pragma once

#include "asr/convo.hpp"
#include "asr/error.hpp"
#include "asr/llm/prompts.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace asr::survey {

enum class Component { Anticipate, Simulate, Reason };

constexpr std::string_view to_string(Component c) noexcept
{
    switch (c) {
    case Component::Anticipate: return "anticipate";
    case Component::Simulate: return "simulate";
    case Component::Reason: return "reason";
    }
    return "anticipate";
}

inline Component parse_component(std::string_view s)
{
    if (s == "anticipate") return Component::Anticipate;
    if (s == "simulate") return Component::Simulate;
    if (s == "reason") return Component::Reason;
    fail(ErrorCode::InvalidInput, "unknown survey component '" + std::string(s) + "'");
}

enum class Choice { Scam, NotScam, ScamHelpful, ScamNotHelpful, NotScamHelpful, NotScamNotHelpful };

constexpr std::string_view to_string(Choice c) noexcept
{
    switch (c) {
    case Choice::Scam: return "scam";
    case Choice::NotScam: return "not_scam";
    case Choice::ScamHelpful: return "scam_helpful";
    case Choice::ScamNotHelpful: return "scam_not_helpful";
    case Choice::NotScamHelpful: return "not_scam_helpful";
    case Choice::NotScamNotHelpful: return "not_scam_not_helpful";
    }
    return "scam";
}

inline Choice parse_choice(std::string_view s)
{
    for (auto c : {Choice::Scam, Choice::NotScam, Choice::ScamHelpful, Choice::ScamNotHelpful, Choice::NotScamHelpful,
                   Choice::NotScamNotHelpful}) {
        if (to_string(c) == s) return c;
    }
    fail(ErrorCode::ValidationError, "unknown choice '" + std::string(s) + "'");
}

constexpr bool is_four_option(Choice c) noexcept
{
    return c != Choice::Scam && c != Choice::NotScam;
}

struct Option
{
    Choice choice;
    std::string_view label;
    bool read_note = false;
};

inline constexpr std::string_view read_note =
    "*Note that the predicted replies exhibit scam-like behavior in both scam and non-scam scenarios. These generated "
    "scam-like replies should not make sense in non-scam contexts, as such responses would be inappropriate and should "
    "reaffirm that your friend is not a scammer. For example, friends should not be attempting to scam you.";

inline std::vector<Option> two_options()
{
    return {{Choice::Scam, "I believe Person A is a scammer."},
            {Choice::NotScam, "I believe Person A is not a scammer."}};
}

inline std::vector<Option> anticipate_options()
{
    return {
        {Choice::ScamHelpful, "I believe this is a scammer, and the AI-generated replies further support my suspicion."},
        {Choice::ScamNotHelpful, "I believe this is a scammer, but the AI-generated replies were not helpful."},
        {Choice::NotScamHelpful,
         "I believe this is not a scammer, and the AI-generated replies further support my decision.", true},
        {Choice::NotScamNotHelpful, "I believe this is not a scammer, and the AI-generated replies were not helpful.",
         true},
    };
}

inline std::vector<Option> reason_options()
{
    return {
        {Choice::ScamHelpful,
         "I believe this is a scammer, and the AI-generated conclusion further supports my suspicion."},
        {Choice::ScamNotHelpful, "I believe this is a scammer, but the AI-generated conclusion wasn't helpful."},
        {Choice::NotScamHelpful,
         "I believe this is not a scammer, and the AI-generated conclusion further supports my decision."},
        {Choice::NotScamNotHelpful, "I believe this is not a scammer, and the AI-generated conclusion wasn't helpful."},
    };
}

/// One fixture scenario shared by the Anticipate and Reason instruments.
/// Scores, predicted replies, and conclusions are idealized from ground truth.
struct Scenario
{
    int number = 0;
    std::optional<ScamCategory> category;
    std::vector<std::pair<Role, std::string>> turns;
    double scam_score = 0.0;
    std::string predicted_reply;
    prompts::Verdict verdict = prompts::Verdict::NotScam;
    std::string reasoning;

    [[nodiscard]] bool is_scam() const noexcept { return category.has_value(); }
    [[nodiscard]] std::string id() const { return "scenario-" + std::to_string(number); }
};

inline std::vector<Scenario> const & fixture_scenarios()
{
    using R = Role;
    static std::vector<Scenario> const scenarios{
        {1,
         ScamCategory::Authority,
         {{R::Counterpart, "Good afternoon, this is Inspector Lim from the police cybercrime unit."},
          {R::SelfUser, "Hello? What is this about?"},
          {R::Counterpart, "Your bank account has been linked to a money laundering case. You must cooperate or a "
                           "warrant will be issued today."},
          {R::SelfUser, "I have not done anything wrong. What do I need to do?"}},
         0.92,
         "To clear your name, transfer your savings to our safe holding account now. Do not tell anyone, this is a "
         "confidential investigation.",
         prompts::Verdict::Scam,
         "Person A claims to be a police officer, creates urgency with a same-day warrant, and isolates the victim. Real "
         "officers do not investigate cases through unsolicited chat messages."},
        {2,
         ScamCategory::Job,
         {{R::Counterpart, "Hi! We saw your profile. We have a part-time online job paying $300 a day."},
          {R::SelfUser, "That sounds interesting. What is the job?"},
          {R::Counterpart, "You just like products on a shopping site to boost their ranking. Very easy, one hour a day."},
          {R::SelfUser, "How do I get paid?"}},
         0.88,
         "First you need to top up $100 to activate your task account. You will get it back with commission after three "
         "tasks.",
         prompts::Verdict::Scam,
         "The offer pays far above market rates for trivial work and the recruiter reached out unsolicited. Such task "
         "schemes later demand deposits before any payout."},
        {3,
         std::nullopt,
         {{R::Counterpart, "Hey, it's Mei from the badminton club. Are you coming on Saturday?"},
          {R::SelfUser, "Yes! Same time as usual?"},
          {R::Counterpart, "Yes, 9am. Could you bring the shuttlecocks? I forgot to buy them."},
          {R::SelfUser, "Sure, no problem."}},
         0.08,
         "Great, also please send me $50 by bank transfer for the court booking, it is urgent.",
         prompts::Verdict::NotScam,
         "Person A is a known club member coordinating a routine activity. No money, credentials, or urgency are "
         "involved."},
        {4,
         std::nullopt,
         {{R::Counterpart, "Hi, this is the HR team at Northbridge Logistics following up on your application."},
          {R::SelfUser, "Thank you! I applied last month for the analyst role."},
          {R::Counterpart, "We would like to schedule an interview at our office next Tuesday at 2pm."},
          {R::SelfUser, "That works for me. Which address should I go to?"}},
         0.12,
         "Before the interview please pay a $200 processing fee to secure your slot.",
         prompts::Verdict::NotScam,
         "Person A follows up on an application the user submitted and proposes an in-person interview. Nothing is "
         "requested beyond attendance."},
        {5,
         ScamCategory::Investment,
         {{R::Counterpart, "My mentor's crypto trading signals made me 40% profit last week. Want to join?"},
          {R::SelfUser, "40% in a week? Is that safe?"},
          {R::Counterpart, "Totally safe, it is guaranteed by the platform. Slots close tonight."},
          {R::SelfUser, "How much would I need to start?"}},
         0.95,
         "Start with $1,000 on this platform link. When you see the profit you can add more before the window closes.",
         prompts::Verdict::Scam,
         "Person A promises guaranteed extreme returns and pressures the user with a deadline. Guaranteed profits are a "
         "hallmark of investment fraud."},
        {6,
         std::nullopt,
         {{R::Counterpart, "Bro, I started putting a bit into an index fund every month."},
          {R::SelfUser, "Oh nice, which one?"},
          {R::Counterpart, "Just a broad market ETF through my usual bank. Returns are slow but steady."},
          {R::SelfUser, "Maybe I should do the same."}},
         0.15,
         "You should transfer your money to my account and I will invest it for you with 30% monthly returns.",
         prompts::Verdict::NotScam,
         "Person A shares a personal, low-risk savings habit through a regulated bank and asks for nothing."},
        {7,
         ScamCategory::Love,
         {{R::Counterpart, "Good morning my love, I dreamed of you again. I can't wait until we finally meet."},
          {R::SelfUser, "Me too! When are you coming?"},
          {R::Counterpart, "I am stuck at customs in Lagos and they are holding my gold until I pay the clearance fee."},
          {R::SelfUser, "Oh no, what can we do?"}},
         0.90,
         "Please send $2,500 by gift cards today, I will repay you as soon as I land. You are the only one I trust.",
         prompts::Verdict::Scam,
         "Person A has never met the user, builds emotional attachment, and then invents a crisis that needs money. "
         "This is the classic romance scam pattern."},
        {8,
         std::nullopt,
         {{R::Counterpart, "Morning dear, did you sleep well? Dinner at my parents' place is still on for Sunday."},
          {R::SelfUser, "Yes! Should I bring anything?"},
          {R::Counterpart, "Maybe some fruit. Mum loves mangoes."},
          {R::SelfUser, "Okay, I'll pick some up on the way."}},
         0.10,
         "Also I need you to lend me $3,000 urgently, my account is frozen, please send it now.",
         prompts::Verdict::NotScam,
         "Person A is an established partner arranging a family dinner. The exchange is consistent and involves no "
         "requests for money."},
    };
    return scenarios;
}

inline Scenario const & scenario_by_id(std::string_view id)
{
    for (auto const & s : fixture_scenarios()) {
        if (s.id() == id) return s;
    }
    fail(ErrorCode::NotFound, "unknown scenario '" + std::string(id) + "'");
}

inline Conversation scenario_conversation(Scenario const & s)
{
    return make_conversation(s.id(), s.turns, s.category, s.is_scam());
}

} // namespace asr::survey
