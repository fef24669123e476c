#pragma once

#include "asr/convo.hpp"
#include "asr/engine.hpp"
#include "asr/error.hpp"
#include "asr/llm/gateway.hpp"
#include "asr/stats/ttest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace asr::eval {

struct TurnSimilarity
{
    std::string conversation_id;
    std::size_t turn = 0;
    std::string model;
    double cosine = 0.0;
    /// Fewer than two prior turns were available as context.
    bool truncated_context = false;
};

struct ConversationScore
{
    std::string conversation_id;
    std::string model;
    double mean_sim = 0.0;
    double max_sim = 0.0;
    std::size_t n_turns = 0;
};

struct ScoredConversation
{
    ConversationScore score;
    std::vector<TurnSimilarity> turns;
};

/// Mean and max of turn similarities. Throws NoModelTurns on an empty list.
inline ConversationScore aggregate(std::string conversation_id, std::string model, std::span<double const> sims)
{
    require(!sims.empty(), ErrorCode::NoModelTurns, "conversation '" + conversation_id + "' has no scoreable turns");
    ConversationScore s{std::move(conversation_id), std::move(model), 0.0, sims.front(), sims.size()};
    for (double v : sims) {
        s.mean_sim += v;
        s.max_sim = std::max(s.max_sim, v);
    }
    s.mean_sim /= static_cast<double>(sims.size());
    return s;
}

/// Turns the harness scores: every Counterpart turn. Turns with fewer than
/// two prior turns run on truncated context and are flagged per row.
inline std::vector<std::size_t> model_turns(Conversation const & conversation)
{
    std::vector<std::size_t> turns;
    for (auto const & m : conversation.messages) {
        if (m.role == Role::Counterpart) {
            turns.push_back(m.index);
        }
    }
    return turns;
}

/// Simulates every model turn with a 2-turn context and compares each
/// generated reply with the real one.
inline ScoredConversation score_conversation(
    Conversation const & conversation,
    BackendDescriptor const & model,
    BackendDescriptor const & emb,
    Gateway & gateway = Gateway::shared())
{
    auto turns = model_turns(conversation);
    require(!turns.empty(), ErrorCode::NoModelTurns,
            "conversation '" + conversation.id + "' has no counterpart reply to compare");
    ScoredConversation out;
    std::vector<double> sims;
    sims.reserve(turns.size());
    for (auto idx : turns) {
        auto generated = simulate_turn(conversation, idx, model, gateway);
        auto const & actual = message_at(conversation, idx);
        double cos = cosine_similarity(gateway.embed(emb, generated), gateway.embed(emb, actual.text));
        sims.push_back(cos);
        out.turns.push_back(TurnSimilarity{conversation.id, idx, model.model_name, cos,
                                           context_window(conversation, idx, 2).size() < 2});
    }
    out.score = aggregate(conversation.id, model.model_name, sims);
    return out;
}

struct WinCounts
{
    std::size_t mean = 0;
    std::size_t max = 0;
};

struct Comparison
{
    WinCounts wins;
    stats::PairedTTestResult mean_test;
    stats::PairedTTestResult max_test;
};

namespace detail {

inline std::pair<std::vector<ConversationScore>, std::vector<ConversationScore>>
paired_by_id(std::vector<ConversationScore> a, std::vector<ConversationScore> b)
{
    auto by_id = [](ConversationScore const & x, ConversationScore const & y) {
        return x.conversation_id < y.conversation_id;
    };
    std::sort(a.begin(), a.end(), by_id);
    std::sort(b.begin(), b.end(), by_id);
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) {
        same = a[i].conversation_id == b[i].conversation_id;
        if (i > 0 && a[i].conversation_id == a[i - 1].conversation_id) {
            fail(ErrorCode::PairingError, "duplicate conversation id '" + a[i].conversation_id + "'");
        }
    }
    require(same, ErrorCode::PairingError, "models were scored on different conversation sets");
    return {std::move(a), std::move(b)};
}

} // namespace detail

/// Per-metric counts of conversations where model A strictly beats model B.
inline WinCounts count_wins(std::vector<ConversationScore> const & scores_a, std::vector<ConversationScore> const & scores_b)
{
    auto [a, b] = detail::paired_by_id(scores_a, scores_b);
    WinCounts w;
    for (std::size_t i = 0; i < a.size(); ++i) {
        w.mean += a[i].mean_sim > b[i].mean_sim ? 1 : 0;
        w.max += a[i].max_sim > b[i].max_sim ? 1 : 0;
    }
    return w;
}

/// Win counts plus paired t-tests on mean and max similarity (A minus B).
inline Comparison compare_models(std::vector<ConversationScore> const & scores_a, std::vector<ConversationScore> const & scores_b)
{
    auto [a, b] = detail::paired_by_id(scores_a, scores_b);
    Comparison c;
    c.wins = count_wins(a, b);
    std::vector<double> am, bm, ax, bx;
    for (std::size_t i = 0; i < a.size(); ++i) {
        am.push_back(a[i].mean_sim);
        bm.push_back(b[i].mean_sim);
        ax.push_back(a[i].max_sim);
        bx.push_back(b[i].max_sim);
    }
    c.mean_test = stats::paired_ttest(am, bm);
    c.max_test = stats::paired_ttest(ax, bx);
    return c;
}

// ---------------------------------------------------------------------------
// Classification reports

struct ClassMetrics
{
    int label = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct ClassificationReport
{
    std::vector<ClassMetrics> classes; // sorted by label
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::size_t total = 0;
};

inline double harmonic_f1(double precision, double recall) noexcept
{
    return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

inline ClassificationReport classification_report(std::span<int const> truth, std::span<int const> predicted)
{
    require(truth.size() == predicted.size(), ErrorCode::PairingError, "truth and predictions differ in length");
    require(!truth.empty(), ErrorCode::InsufficientData, "classification report needs at least one sample");
    std::set<int> labels(truth.begin(), truth.end());
    labels.insert(predicted.begin(), predicted.end());

    ClassificationReport r;
    r.total = truth.size();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        correct += truth[i] == predicted[i] ? 1 : 0;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    for (int label : labels) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            bool t = truth[i] == label;
            bool p = predicted[i] == label;
            tp += (t && p) ? 1 : 0;
            fp += (!t && p) ? 1 : 0;
            fn += (t && !p) ? 1 : 0;
        }
        ClassMetrics m;
        m.label = label;
        m.support = tp + fn;
        m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        m.f1 = harmonic_f1(m.precision, m.recall);
        r.classes.push_back(m);
    }
    for (auto const & m : r.classes) {
        r.macro_precision += m.precision;
        r.macro_recall += m.recall;
        r.macro_f1 += m.f1;
    }
    auto const nc = static_cast<double>(r.classes.size());
    r.macro_precision /= nc;
    r.macro_recall /= nc;
    r.macro_f1 /= nc;
    return r;
}

/// Expands a binary confusion matrix (class 0 = scam, class 1 = non-scam)
/// into label vectors.
inline std::pair<std::vector<int>, std::vector<int>>
labels_from_counts(std::size_t tp0, std::size_t fn0, std::size_t tp1, std::size_t fn1)
{
    std::vector<int> truth, predicted;
    auto push = [&](int t, int p, std::size_t count) {
        truth.insert(truth.end(), count, t);
        predicted.insert(predicted.end(), count, p);
    };
    push(0, 0, tp0);
    push(0, 1, fn0);
    push(1, 1, tp1);
    push(1, 0, fn1);
    return {std::move(truth), std::move(predicted)};
}

// ---------------------------------------------------------------------------
// Display

inline std::string fixed3(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

/// Fixed notation, switching to scientific below 1e-3.
inline std::string format_p(double p)
{
    char buf[64];
    if (p != 0.0 && p < 1e-3) {
        std::snprintf(buf, sizeof buf, "%.1e", p);
    } else {
        std::snprintf(buf, sizeof buf, "%.3f", p);
    }
    return buf;
}

inline std::string format_t(double t)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", t);
    return buf;
}

struct LabelledReport
{
    std::string group;
    ClassificationReport report;
};

inline std::string render_classification_md(std::vector<LabelledReport> const & groups)
{
    std::string out = "| Group | Class | Precision | Recall | F1-score | Accuracy | Support |\n"
                      "|---|---|---|---|---|---|---|\n";
    for (auto const & g : groups) {
        bool first = true;
        for (auto const & c : g.report.classes) {
            out += "| " + (first ? g.group : std::string{}) + " | " + std::to_string(c.label) + " | "
                   + fixed3(c.precision) + " | " + fixed3(c.recall) + " | " + fixed3(c.f1) + " | "
                   + (first ? fixed3(g.report.accuracy) : std::string{}) + " | " + std::to_string(c.support) + " |\n";
            first = false;
        }
        out += "|  | Macro Avg | " + fixed3(g.report.macro_precision) + " | " + fixed3(g.report.macro_recall) + " | "
               + fixed3(g.report.macro_f1) + " |  | " + std::to_string(g.report.total) + " |\n";
    }
    return out;
}

inline std::string render_classification_csv(std::vector<LabelledReport> const & groups)
{
    std::string out = "group,class,precision,recall,f1,accuracy,support\n";
    for (auto const & g : groups) {
        for (auto const & c : g.report.classes) {
            out += g.group + "," + std::to_string(c.label) + "," + fixed3(c.precision) + "," + fixed3(c.recall) + ","
                   + fixed3(c.f1) + "," + fixed3(g.report.accuracy) + "," + std::to_string(c.support) + "\n";
        }
        out += g.group + ",macro," + fixed3(g.report.macro_precision) + "," + fixed3(g.report.macro_recall) + ","
               + fixed3(g.report.macro_f1) + "," + fixed3(g.report.accuracy) + "," + std::to_string(g.report.total) + "\n";
    }
    return out;
}

inline nlohmann::ordered_json to_json(ClassificationReport const & r)
{
    nlohmann::ordered_json j;
    auto classes = nlohmann::ordered_json::array();
    for (auto const & c : r.classes) {
        classes.push_back({{"label", c.label}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
                           {"support", c.support}});
    }
    j["classes"] = std::move(classes);
    j["macro"] = {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}};
    j["accuracy"] = r.accuracy;
    j["total"] = r.total;
    return j;
}

// ---------------------------------------------------------------------------
// Full evaluation run

struct EvaluationReport
{
    std::string model_a;
    std::string model_b;
    std::vector<TurnSimilarity> turns; // sorted by (conversation, model, turn)
    std::vector<ConversationScore> scores_a;
    std::vector<ConversationScore> scores_b;
    Comparison comparison;
};

/// Scores every conversation under both models (parallel across
/// conversations) and compares them. Output ordering is by conversation id,
/// independent of scheduling.
inline EvaluationReport run_evaluation(
    std::vector<Conversation> conversations,
    BackendDescriptor const & model_a,
    BackendDescriptor const & model_b,
    BackendDescriptor const & emb,
    Gateway & gateway = Gateway::shared(),
    std::size_t parallelism = 4)
{
    std::sort(conversations.begin(), conversations.end(),
              [](Conversation const & x, Conversation const & y) { return x.id < y.id; });
    require(!conversations.empty(), ErrorCode::InsufficientData, "no conversations to evaluate");
    require(model_a.model_name != model_b.model_name, ErrorCode::ConfigError,
            "the two models need distinct names to be told apart in the report");

    std::vector<ScoredConversation> ra(conversations.size()), rb(conversations.size());
    parallelism = std::max<std::size_t>(1, parallelism);
    for (std::size_t start = 0; start < conversations.size(); start += parallelism) {
        std::vector<std::future<void>> batch;
        auto end = std::min(conversations.size(), start + parallelism);
        for (std::size_t i = start; i < end; ++i) {
            batch.push_back(std::async(std::launch::async, [&, i] {
                ra[i] = score_conversation(conversations[i], model_a, emb, gateway);
                rb[i] = score_conversation(conversations[i], model_b, emb, gateway);
            }));
        }
        for (auto & f : batch) {
            f.get();
        }
    }

    EvaluationReport report;
    report.model_a = model_a.model_name;
    report.model_b = model_b.model_name;
    for (std::size_t i = 0; i < conversations.size(); ++i) {
        report.scores_a.push_back(ra[i].score);
        report.scores_b.push_back(rb[i].score);
        report.turns.insert(report.turns.end(), ra[i].turns.begin(), ra[i].turns.end());
        report.turns.insert(report.turns.end(), rb[i].turns.begin(), rb[i].turns.end());
    }
    report.comparison = compare_models(report.scores_a, report.scores_b);
    return report;
}

inline nlohmann::ordered_json to_json(stats::PairedTTestResult const & t)
{
    nlohmann::ordered_json j;
    j["t_statistic"] = t.t_statistic;
    j["p_value"] = t.p_value;
    j["df"] = t.df;
    j["n"] = t.n;
    j["mean_diff"] = t.mean_diff;
    return j;
}

inline nlohmann::ordered_json to_json(EvaluationReport const & r)
{
    using nlohmann::ordered_json;
    ordered_json j;
    j["model_a"] = r.model_a;
    j["model_b"] = r.model_b;
    auto turns = ordered_json::array();
    for (auto const & t : r.turns) {
        ordered_json row;
        row["conversation_id"] = t.conversation_id;
        row["turn"] = t.turn;
        row["model"] = t.model;
        row["cosine"] = t.cosine;
        row["truncated_context"] = t.truncated_context;
        turns.push_back(std::move(row));
    }
    j["turn_similarities"] = std::move(turns);
    auto scores = ordered_json::array();
    for (auto const * list : {&r.scores_a, &r.scores_b}) {
        for (auto const & s : *list) {
            ordered_json row;
            row["conversation_id"] = s.conversation_id;
            row["model"] = s.model;
            row["mean_sim"] = s.mean_sim;
            row["max_sim"] = s.max_sim;
            row["n_turns"] = s.n_turns;
            scores.push_back(std::move(row));
        }
    }
    j["conversation_scores"] = std::move(scores);
    j["win_counts"] = {{"mean", r.comparison.wins.mean}, {"max", r.comparison.wins.max}};
    j["tests"] = {{"mean", to_json(r.comparison.mean_test)}, {"max", to_json(r.comparison.max_test)}};
    return j;
}

/// Similarity summary (means, win counts, tests) recomputed from a report object.
struct SimilaritySummary
{
    std::string model_a;
    std::string model_b;
    double mean_a = 0.0, mean_b = 0.0, max_a = 0.0, max_b = 0.0;
    std::size_t n = 0;
    WinCounts wins;
    stats::PairedTTestResult mean_test;
    stats::PairedTTestResult max_test;
};

inline SimilaritySummary summarize(nlohmann::json const & report)
{
    SimilaritySummary s;
    try {
        s.model_a = report.at("model_a").get<std::string>();
        s.model_b = report.at("model_b").get<std::string>();
        std::size_t na = 0, nb = 0;
        for (auto const & row : report.at("conversation_scores")) {
            auto model = row.at("model").get<std::string>();
            double mean = row.at("mean_sim").get<double>();
            double max = row.at("max_sim").get<double>();
            if (model == s.model_a) {
                s.mean_a += mean;
                s.max_a += max;
                ++na;
            } else {
                s.mean_b += mean;
                s.max_b += max;
                ++nb;
            }
        }
        require(na > 0 && na == nb, ErrorCode::SchemaError, "report has unpaired conversation scores");
        s.n = na;
        s.mean_a /= static_cast<double>(na);
        s.max_a /= static_cast<double>(na);
        s.mean_b /= static_cast<double>(nb);
        s.max_b /= static_cast<double>(nb);
        s.wins.mean = report.at("win_counts").at("mean").get<std::size_t>();
        s.wins.max = report.at("win_counts").at("max").get<std::size_t>();
        auto read_test = [](nlohmann::json const & t) {
            stats::PairedTTestResult r;
            r.t_statistic = t.at("t_statistic").get<double>();
            r.p_value = t.at("p_value").get<double>();
            r.df = t.at("df").get<std::size_t>();
            r.n = t.at("n").get<std::size_t>();
            r.mean_diff = t.at("mean_diff").get<double>();
            return r;
        };
        s.mean_test = read_test(report.at("tests").at("mean"));
        s.max_test = read_test(report.at("tests").at("max"));
    } catch (nlohmann::json::exception const & e) {
        fail(ErrorCode::SchemaError, std::string("malformed evaluation report: ") + e.what());
    }
    return s;
}

inline std::string render_similarity_md(SimilaritySummary const & s)
{
    std::string out;
    out += "| | Mean similarity | Max similarity |\n|---|---|---|\n";
    out += "| " + s.model_a + " | " + fixed3(s.mean_a) + " | " + fixed3(s.max_a) + " |\n";
    out += "| " + s.model_b + " | " + fixed3(s.mean_b) + " | " + fixed3(s.max_b) + " |\n";
    out += "| Instances of " + s.model_a + " > " + s.model_b + " | " + std::to_string(s.wins.mean) + " | "
           + std::to_string(s.wins.max) + " |\n";
    out += "| p-value (paired t-test, n=" + std::to_string(s.n) + ") | " + format_p(s.mean_test.p_value) + " | "
           + format_p(s.max_test.p_value) + " |\n";
    out += "| t-statistic | " + format_t(s.mean_test.t_statistic) + " | " + format_t(s.max_test.t_statistic) + " |\n";
    return out;
}

inline std::string render_similarity_csv(SimilaritySummary const & s)
{
    std::string out = "row,mean_similarity,max_similarity\n";
    out += s.model_a + "," + fixed3(s.mean_a) + "," + fixed3(s.max_a) + "\n";
    out += s.model_b + "," + fixed3(s.mean_b) + "," + fixed3(s.max_b) + "\n";
    out += "wins," + std::to_string(s.wins.mean) + "," + std::to_string(s.wins.max) + "\n";
    out += "p_value," + format_p(s.mean_test.p_value) + "," + format_p(s.max_test.p_value) + "\n";
    out += "t_statistic," + format_t(s.mean_test.t_statistic) + "," + format_t(s.max_test.t_statistic) + "\n";
    return out;
}

} // namespace asr::eval
