#pragma once

#include "asr/convo.hpp"
#include "asr/csv.hpp"
#include "asr/error.hpp"
#include "asr/stats/ols.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace asr::stats {

/// One participant's encoded survey outcome plus demographic dummies.
/// Reference categories: age 25-44, female.
struct ParticipantRow
{
    std::string participant_id;
    int ai_assisted = 0;
    int age_old = 0;   // > 44
    int age_young = 0; // < 25
    int university_graduate = 0;
    int gender_male = 0;
    int gender_prefer_not_say = 0;
    int stem = 0;
    double accuracy_overall = 0.0;
    std::map<ScamCategory, int> accuracy_by_type;
    /// Treatment arm only.
    std::optional<double> helpful_overall;
    std::map<ScamCategory, int> helpful_by_type;
};

inline void validate(ParticipantRow const & r)
{
    require(!(r.age_old && r.age_young), ErrorCode::SchemaError, r.participant_id + ": both age dummies set");
    require(!(r.gender_male && r.gender_prefer_not_say), ErrorCode::SchemaError,
            r.participant_id + ": both gender dummies set");
    require(r.ai_assisted == 1 || (!r.helpful_overall && r.helpful_by_type.empty()), ErrorCode::SchemaError, r.participant_id + ": helpfulness recorded for a control participant");
}

enum class HelpfulAggregation { AllScenarios, ScamScenarios };

inline bool is_scam_choice(std::string_view choice)
{
    return choice == "scam" || choice == "scam_helpful" || choice == "scam_not_helpful";
}

inline bool is_treatment_choice(std::string_view choice)
{
    return choice == "scam_helpful" || choice == "scam_not_helpful" || choice == "not_scam_helpful"
           || choice == "not_scam_not_helpful";
}

inline bool is_helpful_choice(std::string_view choice)
{
    return choice == "scam_helpful" || choice == "not_scam_helpful";
}

struct Demographics
{
    int age_old = 0;
    int age_young = 0;
    int university_graduate = 0;
    int gender_male = 0;
    int gender_prefer_not_say = 0;
    int stem = 0;
};

namespace detail {

inline std::optional<int> parse_flag(std::string const & v, std::string const & what)
{
    auto t = text::trim(v);
    if (t.empty()) return std::nullopt;
    if (t == "1" || t == "true" || t == "yes") return 1;
    if (t == "0" || t == "false" || t == "no") return 0;
    fail(ErrorCode::SchemaError, "invalid " + what + " value '" + v + "'");
}

/// Demographics by participant; incomplete answers map to nullopt.
inline std::map<std::string, std::optional<Demographics>> read_demographics(csv::Table const & t)
{
    std::map<std::string, std::optional<Demographics>> out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto const & id = t.at(i, "participant");
        auto age = std::string(text::trim(t.at(i, "age_group")));
        auto gender = std::string(text::trim(t.at(i, "gender")));
        auto uni = parse_flag(t.at(i, "university_graduate"), "university_graduate");
        auto stem = parse_flag(t.at(i, "stem"), "stem");
        if (age.empty() || gender.empty() || !uni || !stem) {
            out[id] = std::nullopt;
            continue;
        }
        Demographics d;
        if (age == "old") d.age_old = 1;
        else if (age == "young") d.age_young = 1;
        else require(age == "middle", ErrorCode::SchemaError, "unknown age_group '" + age + "'");
        if (gender == "male") d.gender_male = 1;
        else if (gender == "prefer_not_say") d.gender_prefer_not_say = 1;
        else require(gender == "female", ErrorCode::SchemaError, "unknown gender '" + gender + "'");
        d.university_graduate = *uni;
        d.stem = *stem;
        out[id] = d;
    }
    return out;
}

} // namespace detail

inline constexpr std::size_t scenarios_per_session = 8;

/// Encodes a survey export (one row per scenario answer) and a demographics
/// table into regression rows sorted by participant id. Participants with
/// missing demographic answers are dropped and logged.
inline std::vector<ParticipantRow> encode_rows(
    csv::Table const & responses,
    csv::Table const & demographics,
    HelpfulAggregation helpful_over = HelpfulAggregation::AllScenarios)
{
    struct Answer
    {
        std::optional<ScamCategory> category;
        bool scam = false;
        std::string choice;
    };
    std::map<std::string, std::map<int, Answer>> sessions;
    std::map<std::string, bool> treatment;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        auto const & pid = responses.at(i, "participant");
        int number = 0;
        try {
            number = std::stoi(responses.at(i, "scenario_number"));
        } catch (std::exception const &) {
            fail(ErrorCode::SchemaError, "invalid scenario_number '" + responses.at(i, "scenario_number") + "'");
        }
        Answer a;
        auto const & truth = responses.at(i, "ground_truth");
        require(truth == "scam" || truth == "not_scam", ErrorCode::SchemaError, "invalid ground_truth '" + truth + "'");
        a.scam = truth == "scam";
        if (auto const & cat = responses.at(i, "category"); !text::is_blank(cat)) {
            try {
                a.category = parse_category(cat);
            } catch (Error const &) {
                fail(ErrorCode::SchemaError, "unknown scam category '" + cat + "'");
            }
        }
        a.choice = responses.at(i, "choice");
        auto const & arm = responses.at(i, "arm");
        require(arm == "treatment" || arm == "control", ErrorCode::SchemaError, "invalid arm '" + arm + "'");
        treatment[pid] = arm == "treatment";
        require(is_treatment_choice(a.choice) == (arm == "treatment"), ErrorCode::SchemaError,
                pid + ": choice '" + a.choice + "' does not match arm " + arm);
        sessions[pid][number] = std::move(a);
    }

    auto demo = detail::read_demographics(demographics);
    std::vector<ParticipantRow> rows;
    for (auto const & [pid, answers] : sessions) {
        require(answers.size() == scenarios_per_session, ErrorCode::IncompleteSession,
                pid + " answered " + std::to_string(answers.size()) + " of " + std::to_string(scenarios_per_session)
                    + " scenarios");
        auto d = demo.find(pid);
        if (d == demo.end() || !d->second) {
            spdlog::info("dropping {}: demographic answers missing", pid);
            continue;
        }
        ParticipantRow r;
        r.participant_id = pid;
        r.ai_assisted = treatment[pid] ? 1 : 0;
        r.age_old = d->second->age_old;
        r.age_young = d->second->age_young;
        r.university_graduate = d->second->university_graduate;
        r.gender_male = d->second->gender_male;
        r.gender_prefer_not_say = d->second->gender_prefer_not_say;
        r.stem = d->second->stem;

        int correct = 0;
        int helpful = 0;
        int helpful_den = 0;
        for (auto const & [number, a] : answers) {
            bool const right = is_scam_choice(a.choice) == a.scam;
            correct += right ? 1 : 0;
            if (a.scam) {
                require(a.category.has_value(), ErrorCode::SchemaError,
                        pid + ": scam scenario " + std::to_string(number) + " has no category");
                r.accuracy_by_type[*a.category] = right ? 1 : 0;
            }
            if (r.ai_assisted) {
                bool const h = is_helpful_choice(a.choice);
                if (a.scam && a.category) {
                    r.helpful_by_type[*a.category] = h ? 1 : 0;
                }
                if (helpful_over == HelpfulAggregation::AllScenarios || a.scam) {
                    helpful += h ? 1 : 0;
                    ++helpful_den;
                }
            }
        }
        r.accuracy_overall = static_cast<double>(correct) / static_cast<double>(scenarios_per_session);
        if (r.ai_assisted && helpful_den > 0) {
            r.helpful_overall = static_cast<double>(helpful) / static_cast<double>(helpful_den);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Rows file

inline std::vector<std::string> rows_header()
{
    std::vector<std::string> h{"participant_id", "ai_assisted", "age_old", "age_young", "university_graduate",
                               "gender_male", "gender_prefer_not_say", "stem", "accuracy_overall"};
    for (auto c : all_categories) h.push_back("accuracy_" + std::string(to_string(c)));
    h.emplace_back("helpful_overall");
    for (auto c : all_categories) h.push_back("helpful_" + std::string(to_string(c)));
    return h;
}

inline std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string rows_to_csv(std::vector<ParticipantRow> const & rows)
{
    std::string out = csv::join(rows_header()) + "\n";
    for (auto const & r : rows) {
        std::vector<std::string> f{r.participant_id,
                                   std::to_string(r.ai_assisted),
                                   std::to_string(r.age_old),
                                   std::to_string(r.age_young),
                                   std::to_string(r.university_graduate),
                                   std::to_string(r.gender_male),
                                   std::to_string(r.gender_prefer_not_say),
                                   std::to_string(r.stem),
                                   format_number(r.accuracy_overall)};
        for (auto c : all_categories) {
            auto it = r.accuracy_by_type.find(c);
            f.push_back(it == r.accuracy_by_type.end() ? "" : std::to_string(it->second));
        }
        f.push_back(r.helpful_overall ? format_number(*r.helpful_overall) : "");
        for (auto c : all_categories) {
            auto it = r.helpful_by_type.find(c);
            f.push_back(it == r.helpful_by_type.end() ? "" : std::to_string(it->second));
        }
        out += csv::join(f) + "\n";
    }
    return out;
}

inline std::vector<ParticipantRow> rows_from_table(csv::Table const & t)
{
    auto num = [&](std::size_t i, std::string const & col) -> std::optional<double> {
        auto v = text::trim(t.at(i, col));
        if (v.empty()) return std::nullopt;
        try {
            return std::stod(std::string(v));
        } catch (std::exception const &) {
            fail(ErrorCode::SchemaError, "column " + col + ": invalid number '" + std::string(v) + "'");
        }
    };
    auto flag = [&](std::size_t i, std::string const & col) {
        auto v = num(i, col);
        require(v.has_value(), ErrorCode::SchemaError, "column " + col + " is empty");
        return static_cast<int>(*v);
    };
    std::vector<ParticipantRow> rows;
    for (std::size_t i = 0; i < t.size(); ++i) {
        ParticipantRow r;
        r.participant_id = t.at(i, "participant_id");
        r.ai_assisted = flag(i, "ai_assisted");
        r.age_old = flag(i, "age_old");
        r.age_young = flag(i, "age_young");
        r.university_graduate = flag(i, "university_graduate");
        r.gender_male = flag(i, "gender_male");
        r.gender_prefer_not_say = flag(i, "gender_prefer_not_say");
        r.stem = flag(i, "stem");
        r.accuracy_overall = num(i, "accuracy_overall").value_or(0.0);
        for (auto c : all_categories) {
            if (auto v = num(i, "accuracy_" + std::string(to_string(c)))) r.accuracy_by_type[c] = static_cast<int>(*v);
            if (auto v = num(i, "helpful_" + std::string(to_string(c)))) r.helpful_by_type[c] = static_cast<int>(*v);
        }
        r.helpful_overall = num(i, "helpful_overall");
        validate(r);
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Regression tables

/// Looks up a named variable; nullopt when the participant has no value.
inline std::optional<double> variable(ParticipantRow const & r, std::string_view name)
{
    if (name == "ai_assisted") return r.ai_assisted;
    if (name == "age_old") return r.age_old;
    if (name == "age_young") return r.age_young;
    if (name == "university_graduate") return r.university_graduate;
    if (name == "gender_male") return r.gender_male;
    if (name == "gender_prefer_not_say") return r.gender_prefer_not_say;
    if (name == "stem") return r.stem;
    if (name == "accuracy_overall") return r.accuracy_overall;
    if (name == "helpful_overall") return r.helpful_overall;
    for (auto c : all_categories) {
        auto const suffix = std::string(to_string(c));
        if (name == "accuracy_" + suffix) {
            auto it = r.accuracy_by_type.find(c);
            return it == r.accuracy_by_type.end() ? std::nullopt : std::optional<double>(it->second);
        }
        if (name == "helpful_" + suffix) {
            auto it = r.helpful_by_type.find(c);
            return it == r.helpful_by_type.end() ? std::nullopt : std::optional<double>(it->second);
        }
    }
    fail(ErrorCode::SchemaError, "unknown variable '" + std::string(name) + "'");
}

struct RegressionSpec
{
    std::string dependent;
    /// Column k of the table uses blocks 0..k-1.
    std::vector<std::vector<std::string>> column_blocks;
};

/// The five-column layout: treatment indicator (or accuracy, for helpfulness
/// dependents), then age, education, gender, and STEM blocks.
inline RegressionSpec table_spec(std::string dependent)
{
    std::string lead = "ai_assisted";
    if (dependent.starts_with("helpful_")) {
        lead = "accuracy_" + dependent.substr(std::string("helpful_").size());
    }
    variable(ParticipantRow{}, dependent); // validates the name
    return RegressionSpec{
        std::move(dependent),
        {{lead}, {"age_old", "age_young"}, {"university_graduate"}, {"gender_male", "gender_prefer_not_say"}, {"stem"}},
    };
}

inline std::string display_name(std::string_view name)
{
    if (name == "ai_assisted") return "AI Assisted";
    if (name == "age_old") return "Age[Old (>44)]";
    if (name == "age_young") return "Age[Young (<25)]";
    if (name == "university_graduate") return "University Graduate";
    if (name == "gender_male") return "Gender[Male]";
    if (name == "gender_prefer_not_say") return "Gender[Prefer not to say]";
    if (name == "stem") return "STEM";
    if (name == "Intercept") return "Intercept";
    if (name.starts_with("accuracy_") || name.starts_with("helpful_")) {
        auto pos = name.find('_');
        std::string head = name.substr(0, pos) == "accuracy" ? "Accuracy" : "Helpful";
        std::string tail(name.substr(pos + 1));
        tail[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(tail[0])));
        return head + " (" + tail + ")";
    }
    return std::string(name);
}

struct TableColumn
{
    std::optional<RegressionFit> fit;
    std::optional<Error> error;
};

struct RegressionTable
{
    RegressionSpec spec;
    std::vector<std::string> covariate_order; // all covariates, table row order
    std::vector<TableColumn> columns;
};

/// Fits one model per column with cumulative covariate blocks. Rows are
/// sorted by participant id; rows lacking any used variable are dropped per
/// column. A failing column records its error and the rest still run.
inline RegressionTable run_table(std::vector<ParticipantRow> rows, RegressionSpec const & spec)
{
    require(!rows.empty(), ErrorCode::InsufficientData, "no participant rows");
    require(!spec.column_blocks.empty(), ErrorCode::InvalidInput, "regression spec has no covariate blocks");
    std::sort(rows.begin(), rows.end(),
              [](ParticipantRow const & a, ParticipantRow const & b) { return a.participant_id < b.participant_id; });

    RegressionTable table;
    table.spec = spec;
    std::vector<std::string> covariates;
    for (std::size_t k = 0; k < spec.column_blocks.size(); ++k) {
        covariates.insert(covariates.end(), spec.column_blocks[k].begin(), spec.column_blocks[k].end());
        table.covariate_order = covariates;
        TableColumn col;
        try {
            std::vector<double> y;
            std::vector<std::vector<double>> columns(covariates.size() + 1);
            for (auto const & r : rows) {
                auto dep = variable(r, spec.dependent);
                if (!dep) continue;
                std::vector<double> xs;
                bool complete = true;
                for (auto const & name : covariates) {
                    auto v = variable(r, name);
                    if (!v) {
                        complete = false;
                        break;
                    }
                    xs.push_back(*v);
                }
                if (!complete) continue;
                y.push_back(*dep);
                for (std::size_t c = 0; c < xs.size(); ++c) columns[c].push_back(xs[c]);
                columns.back().push_back(1.0);
            }
            require(!y.empty(), ErrorCode::InsufficientData,
                    "no rows carry '" + spec.dependent + "' together with the covariates");
            auto names = covariates;
            names.emplace_back("Intercept");
            col.fit = ols_fit(y, Matrix::from_columns(columns), names);
        } catch (Error const & e) {
            col.error = e;
        }
        table.columns.push_back(std::move(col));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Rendering

enum class TableFormat { Markdown, Latex, Csv };

inline TableFormat parse_table_format(std::string_view s)
{
    if (s == "md") return TableFormat::Markdown;
    if (s == "tex") return TableFormat::Latex;
    if (s == "csv") return TableFormat::Csv;
    fail(ErrorCode::InvalidInput, "unknown table format '" + std::string(s) + "'");
}

namespace detail {

inline std::string fmt3(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

struct Cells
{
    std::vector<std::string> labels;
    std::vector<std::vector<std::string>> values; // [row][column]
};

inline Cells layout(RegressionTable const & t, bool latex)
{
    auto sup = [&](Stars s) {
        if (latex) return "$^{" + std::string(to_string(s)) + "}$";
        return std::string(to_string(s));
    };
    Cells cells;
    auto const ncol = t.columns.size();
    auto add_row = [&](std::string label) {
        cells.labels.push_back(std::move(label));
        cells.values.emplace_back(ncol);
        return cells.values.size() - 1;
    };
    std::vector<std::string> names = t.covariate_order;
    names.emplace_back("Intercept");
    for (auto const & name : names) {
        auto est = add_row(display_name(name));
        auto se = add_row("");
        for (std::size_t c = 0; c < ncol; ++c) {
            if (!t.columns[c].fit) continue;
            if (auto const * coef = t.columns[c].fit->find(name)) {
                cells.values[est][c] = fmt3(coef->estimate) + sup(coef->stars);
                cells.values[se][c] = "(" + fmt3(coef->std_error) + ")";
            }
        }
    }
    auto obs = add_row("Observations");
    auto r2 = add_row(latex ? "$R^2$" : "R2");
    auto ar2 = add_row(latex ? "Adjusted $R^2$" : "Adjusted R2");
    auto rse = add_row("Residual Std. Error");
    auto fst = add_row("F Statistic");
    for (std::size_t c = 0; c < ncol; ++c) {
        auto const & col = t.columns[c];
        if (!col.fit) {
            cells.values[obs][c] = col.error ? std::string(to_string(col.error->code())) : "";
            continue;
        }
        auto const & f = *col.fit;
        cells.values[obs][c] = std::to_string(f.n);
        cells.values[r2][c] = fmt3(f.r2);
        cells.values[ar2][c] = fmt3(f.adj_r2);
        cells.values[rse][c] = fmt3(f.residual_se) + " (df=" + std::to_string(f.df_resid) + ")";
        cells.values[fst][c] = fmt3(f.f_statistic) + sup(f.f_stars) + " (df=" + std::to_string(f.df_model) + "; "
                               + std::to_string(f.df_resid) + ")";
    }
    return cells;
}

} // namespace detail

inline std::string render_table(RegressionTable const & t, TableFormat format)
{
    auto const ncol = t.columns.size();
    auto const dep = display_name(t.spec.dependent);
    if (format == TableFormat::Csv) {
        auto cells = detail::layout(t, false);
        std::vector<std::string> header{"row"};
        for (std::size_t c = 0; c < ncol; ++c) header.push_back("(" + std::to_string(c + 1) + ")");
        std::string out = csv::join(header) + "\n";
        for (std::size_t r = 0; r < cells.labels.size(); ++r) {
            std::vector<std::string> f{cells.labels[r]};
            f.insert(f.end(), cells.values[r].begin(), cells.values[r].end());
            out += csv::join(f) + "\n";
        }
        return out;
    }
    if (format == TableFormat::Markdown) {
        auto cells = detail::layout(t, false);
        std::string out = "Dependent variable: " + dep + "\n\n|  |";
        for (std::size_t c = 0; c < ncol; ++c) out += " (" + std::to_string(c + 1) + ") |";
        out += "\n|---|";
        for (std::size_t c = 0; c < ncol; ++c) out += "---|";
        out += "\n";
        for (std::size_t r = 0; r < cells.labels.size(); ++r) {
            out += "| " + cells.labels[r] + " |";
            for (auto const & v : cells.values[r]) out += " " + v + " |";
            out += "\n";
        }
        out += "\nNote: *p<0.1; **p<0.05; ***p<0.01\n";
        return out;
    }
    auto cells = detail::layout(t, true);
    std::string cols(ncol, 'c');
    std::string out = "\\begin{tabular}{@{\\extracolsep{5pt}}l" + cols + "}\n\\\\[-1.8ex]\\hline\n\\hline \\\\[-1.8ex]\n";
    out += "& \\multicolumn{" + std::to_string(ncol) + "}{c}{\\textit{Dependent variable: " + dep + "}} \\\\\n";
    out += "\\cline{2-" + std::to_string(ncol + 1) + "}\n\\\\[-1.8ex]";
    for (std::size_t c = 0; c < ncol; ++c) out += " & (" + std::to_string(c + 1) + ")";
    out += " \\\\\n\\hline \\\\[-1.8ex]\n";
    auto const footer_start = cells.labels.size() - 5;
    for (std::size_t r = 0; r < cells.labels.size(); ++r) {
        if (r == footer_start) out += "\\hline \\\\[-1.8ex]\n";
        out += " " + cells.labels[r];
        for (auto const & v : cells.values[r]) out += " & " + v;
        out += " \\\\\n";
    }
    out += "\\hline\n\\hline \\\\[-1.8ex]\n\\textit{Note:} & \\multicolumn{" + std::to_string(ncol)
           + "}{r}{$^{*}$p$<$0.1; $^{**}$p$<$0.05; $^{***}$p$<$0.01} \\\\\n\\end{tabular}\n";
    return out;
}

inline nlohmann::ordered_json to_json(RegressionTable const & t)
{
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
    nlohmann::ordered_json j;
    j["dependent"] = t.spec.dependent;
    auto cols = nlohmann::ordered_json::array();
    for (auto const & c : t.columns) {
        nlohmann::ordered_json cj;
        if (!c.fit) {
            cj["error"] = {{"code", std::string(to_string(c.error->code()))}, {"message", c.error->detail()}};
            cols.push_back(std::move(cj));
            continue;
        }
        auto const & f = *c.fit;
        auto coefs = nlohmann::ordered_json::array();
        for (auto const & k : f.coefficients) {
            coefs.push_back({{"name", k.name},
                             {"estimate", num(k.estimate)},
                             {"std_error", num(k.std_error)},
                             {"t_stat", num(k.t_stat)},
                             {"p_value", num(k.p_value)},
                             {"stars", std::string(to_string(k.stars))}});
        }
        cj["coefficients"] = std::move(coefs);
        cj["n"] = f.n;
        cj["r2"] = num(f.r2);
        cj["adj_r2"] = num(f.adj_r2);
        cj["residual_se"] = num(f.residual_se);
        cj["f_statistic"] = num(f.f_statistic);
        cj["f_p_value"] = num(f.f_p_value);
        cj["df_model"] = f.df_model;
        cj["df_resid"] = f.df_resid;
        cols.push_back(std::move(cj));
    }
    j["columns"] = std::move(cols);
    return j;
}

} // namespace asr::stats
