#pragma once

#include "asr/convo.hpp"
#include "asr/survey/service.hpp"
#include "support/fixtures.hpp"

#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace cohort {

using asr::survey::json;

inline std::string normal_transcript(std::size_t i)
{
    auto const tag = fixtures::pad(i);
    return "Person A: Hey, are we still meeting for lunch on day " + tag + "?\n"
           "Person B: Yes, the usual noodle place at noon.\n"
           "Person A: Great, I will book a table for two, reference " + tag + ".\n"
           "Person B: Perfect, see you there.\n"
           "Person A: Bring the photos from the trip if you can.";
}

inline std::string scam_transcript(std::size_t i)
{
    return asr::render_transcript(fixtures::scam_conversation(i, "upload"));
}

/// Conversations whose replies the tuned simulate backend has learned.
inline std::vector<asr::Conversation> tuned_corpus(std::size_t n = 40)
{
    std::vector<asr::Conversation> out;
    for (std::size_t i = 1; i <= n; ++i) out.push_back(fixtures::scam_conversation(i, "upload"));
    return out;
}

struct Participant
{
    std::vector<std::string> types; // one per slot
    int usefulness = 0;
};

struct ArmPlan
{
    std::deque<Participant> participants;
    std::deque<bool> scam_judgments;
    std::deque<bool> normal_judgments;
};

inline std::deque<bool> judgments(int suited, int not_suited)
{
    std::deque<bool> d(static_cast<std::size_t>(suited), true);
    d.insert(d.end(), static_cast<std::size_t>(not_suited), false);
    return d;
}

/// Ten tuned-arm participants: 16 scam and 14 normal uploads, judged 14/2 and
/// 4/10, usefulness averaging 4.4.
inline ArmPlan tuned_plan()
{
    ArmPlan p;
    int const useful[] = {5, 5, 5, 5, 4, 4, 4, 4, 4, 4};
    for (int i = 0; i < 10; ++i) {
        p.participants.push_back({i < 6 ? std::vector<std::string>{"scam", "scam", "normal"}
                                        : std::vector<std::string>{"scam", "normal", "normal"},
                                  useful[i]});
    }
    p.scam_judgments = judgments(14, 2);
    p.normal_judgments = judgments(4, 10);
    return p;
}

/// Ten untuned-arm participants: 19 scam and 11 normal uploads, judged 3/16
/// and 9/2, usefulness averaging 1.8.
inline ArmPlan untuned_plan()
{
    ArmPlan p;
    int const useful[] = {2, 2, 2, 2, 2, 2, 2, 2, 1, 1};
    for (int i = 0; i < 10; ++i) {
        p.participants.push_back({i < 9 ? std::vector<std::string>{"scam", "scam", "normal"}
                                        : std::vector<std::string>{"scam", "normal", "normal"},
                                  useful[i]});
    }
    p.scam_judgments = judgments(3, 16);
    p.normal_judgments = judgments(9, 2);
    return p;
}

/// Every participant-visible payload, for the double-blind scan.
using PayloadSink = std::function<void(json const &)>;

/// Drives 20 simulate participants through `service`. The model arm of each
/// session is read back only to pick which scripted participant plays it.
inline std::vector<std::string> run_simulate_cohort(asr::survey::Service & service, PayloadSink sink = {})
{
    auto emit = [&](json const & j) {
        if (sink) sink(j);
    };
    auto tuned = tuned_plan();
    auto untuned = untuned_plan();
    std::vector<std::string> keys;
    for (auto const & k : service.issue_keys(20)) keys.push_back(k.token);
    std::size_t scam_i = 1, normal_i = 1;
    for (auto const & key : keys) {
        emit(service.start_session(key, asr::survey::Component::Simulate));
        auto & plan = *service.session(key)->model_arm == asr::survey::ModelArm::Tuned ? tuned : untuned;
        auto who = plan.participants.front();
        plan.participants.pop_front();
        for (std::size_t slot = 1; slot <= who.types.size(); ++slot) {
            auto const & type = who.types[slot - 1];
            auto transcript = type == "scam" ? scam_transcript(scam_i++) : normal_transcript(normal_i++);
            emit(service.upload_conversation(key, static_cast<int>(slot), type, transcript));
            auto & queue = type == "scam" ? plan.scam_judgments : plan.normal_judgments;
            bool suited = queue.front();
            queue.pop_front();
            emit(service.submit_response(key, json{{"slot", slot}, {"context_suited", suited}}));
        }
        emit(service.submit_usefulness(key, who.usefulness));
    }
    return keys;
}

/// Names that would reveal an arm if they reached a participant.
inline std::vector<std::string> blind_violations(json const & payload, std::vector<std::string> const & forbidden)
{
    std::vector<std::string> found;
    std::function<void(json const &, std::string const &)> walk = [&](json const & j, std::string const & path) {
        if (j.is_object()) {
            for (auto const & [k, v] : j.items()) {
                if (k == "arm" || k == "model_arm" || k == "group") found.push_back(path + "/" + k);
                walk(v, path + "/" + k);
            }
        } else if (j.is_array()) {
            for (std::size_t i = 0; i < j.size(); ++i) walk(j[i], path + "/" + std::to_string(i));
        } else if (j.is_string()) {
            auto lower = asr::text::to_lower(j.get<std::string>());
            for (auto const & f : forbidden) {
                if (lower.find(f) != std::string::npos) found.push_back(path + " contains '" + f + "'");
            }
        }
    };
    walk(payload, "");
    return found;
}

inline std::vector<std::string> forbidden_terms()
{
    return {"treatment", "control", "tuned", "untuned-model", "generic"};
}

} // namespace cohort
