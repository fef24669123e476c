#include "asr/llm/prompts.hpp"
#include "asr/stats/ols.hpp"
#include "asr/stats/table.hpp"
#include "asr/stats/ttest.hpp"
#include "support/designs.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace asr;
using namespace asr::stats;

namespace {

ErrorCode code_of(auto && f)
{
    try {
        f();
    } catch (Error const & e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an asr::Error";
    return ErrorCode::InvalidInput;
}

RegressionFit simple_fit(std::vector<double> y, std::vector<double> x)
{
    std::vector<double> ones(x.size(), 1.0);
    return ols_fit(y, Matrix::from_columns({ones, x}), {"Intercept", "x"});
}

double rel(double a, double b)
{
    return std::fabs(a - b) / std::max(1.0, std::fabs(b));
}

} // namespace

TEST(Distributions, ClosedFormDf2)
{
    for (double t : {0.0, 0.5, 1.0, 2.5, 4.0, 9.0}) {
        double closed = 1.0 - t / std::sqrt(2.0 + t * t);
        EXPECT_NEAR(student_t_two_sided_p(t, 2.0), closed, 1e-13);
    }
    EXPECT_NEAR(student_t_two_sided_p(1.0, 1.0), 0.5, 1e-13);
}

TEST(Distributions, MatchesSimpsonOracle)
{
    for (int df = 1; df <= 120; df += 7) {
        for (double t = -10.0; t <= 10.0; t += 1.37) {
            EXPECT_NEAR(student_t_two_sided_p(t, df), oracles::simpson_two_sided_p(t, df), 1e-9)
                << "t=" << t << " df=" << df;
        }
    }
}

TEST(Distributions, FSurvivalKnownValues)
{
    // F(1, d) equals t(d) squared.
    EXPECT_NEAR(f_survival(16.0, 1.0, 2.0), student_t_two_sided_p(4.0, 2.0), 1e-12);
    EXPECT_EQ(f_survival(0.0, 3.0, 10.0), 1.0);
}

TEST(PairedT, HandExample)
{
    std::vector<double> a{1, 2, 3}, b{0, 1, 1};
    auto r = paired_ttest(a, b);
    EXPECT_NEAR(r.t_statistic, 4.0, 1e-12);
    EXPECT_EQ(r.df, 2u);
    EXPECT_NEAR(r.p_value, 0.05719, 1e-4);
    auto flipped = paired_ttest(b, a);
    EXPECT_NEAR(flipped.t_statistic, -4.0, 1e-12);
    EXPECT_EQ(flipped.p_value, r.p_value);
}

TEST(PairedT, Errors)
{
    std::vector<double> a{1, 2, 3};
    EXPECT_EQ(code_of([&] { paired_ttest(a, a); }), ErrorCode::ZeroVariance);
    EXPECT_EQ(code_of([&] { paired_ttest(a, std::vector<double>{1, 2}); }), ErrorCode::PairingError);
    EXPECT_EQ(code_of([] { paired_ttest(std::vector<double>{1}, std::vector<double>{2}); }),
              ErrorCode::InsufficientData);
}

TEST(PairedT, MatchesBruteForce)
{
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t n = 2 + rng() % 40;
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = z(rng);
            b[i] = z(rng);
        }
        auto r = paired_ttest(a, b);
        EXPECT_NEAR(r.t_statistic, oracles::paired_t(a, b), 1e-12 * std::max(1.0, std::fabs(r.t_statistic)));
    }
}

TEST(Ols, HandExamples)
{
    auto exact = simple_fit({1, 2, 3}, {0, 1, 2});
    EXPECT_NEAR(exact.coef("Intercept").estimate, 1.0, 1e-12);
    EXPECT_NEAR(exact.coef("x").estimate, 1.0, 1e-12);
    EXPECT_NEAR(exact.r2, 1.0, 1e-12);
    EXPECT_NEAR(exact.rss, 0.0, 1e-24);

    auto f = simple_fit({1, 2, 2, 3}, {1, 2, 3, 4});
    EXPECT_NEAR(f.coef("x").estimate, 0.6, 1e-12);
    EXPECT_NEAR(f.coef("Intercept").estimate, 0.5, 1e-12);
    EXPECT_NEAR(f.r2, 0.9, 1e-12);
    EXPECT_NEAR(f.adj_r2, 0.85, 1e-12);
    EXPECT_NEAR(f.coef("x").std_error, 0.141421, 1e-6);
    EXPECT_NEAR(f.coef("x").t_stat, 4.2426, 1e-4);
    EXPECT_NEAR(f.f_statistic, 18.0, 1e-12);
    EXPECT_EQ(f.df_resid, 2u);
}

TEST(Ols, Errors)
{
    EXPECT_EQ(code_of([] { simple_fit({1, 2, 3}, {0, 0, 0}); }), ErrorCode::RankDeficient);
    EXPECT_EQ(code_of([] { simple_fit({1, 2}, {0, 1}); }), ErrorCode::InsufficientData);
    EXPECT_EQ(code_of([] { simple_fit({2, 2, 2}, {0, 1, 2}); }), ErrorCode::ZeroVariance);
    try {
        std::vector<double> ones(5, 1.0), x{1, 2, 3, 4, 5}, x2{2, 4, 6, 8, 10};
        ols_fit(std::vector<double>{1, 3, 2, 5, 4}, Matrix::from_columns({ones, x, x2}), {"Intercept", "x", "x2"});
        FAIL();
    } catch (Error const & e) {
        EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
        EXPECT_NE(e.detail().find("x2"), std::string::npos);
    }
}

TEST(Ols, MatchesNormalEquationsOracle)
{
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        auto d = designs::random_design(rng);
        RegressionFit fit;
        try {
            fit = ols_fit(d.y, d.matrix(), d.names);
        } catch (Error const & e) {
            ASSERT_EQ(e.code(), ErrorCode::RankDeficient);
            continue;
        }
        auto o = oracles::normal_equations(d.rows, d.y);
        for (std::size_t j = 0; j < o.beta.size(); ++j) {
            EXPECT_LE(rel(fit.coefficients[j].estimate, o.beta[j]), 1e-9);
            EXPECT_LE(rel(fit.coefficients[j].std_error, o.se[j]), 1e-8);
        }
        EXPECT_LE(rel(fit.r2, o.r2), 1e-9);
        EXPECT_LE(rel(fit.adj_r2, o.adj_r2), 1e-9);
        EXPECT_LE(rel(fit.f_statistic, o.f), 1e-9);
    }
}

TEST(Ols, ResidualsOrthogonalAndNoiselessRecovery)
{
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        auto d = designs::random_design(rng);
        auto fit = ols_fit(d.y, d.matrix(), d.names);
        for (std::size_t j = 0; j < d.names.size(); ++j) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d.rows.size(); ++i) dot += fit.residuals[i] * d.rows[i][j];
            EXPECT_NEAR(dot, 0.0, 1e-10);
        }
        std::vector<double> beta(d.names.size());
        for (std::size_t j = 0; j < beta.size(); ++j) beta[j] = 0.25 * static_cast<double>(j) - 0.4;
        std::vector<double> exact(d.rows.size());
        for (std::size_t i = 0; i < exact.size(); ++i)
            for (std::size_t j = 0; j < beta.size(); ++j) exact[i] += beta[j] * d.rows[i][j];
        auto noiseless = ols_fit(exact, d.matrix(), d.names);
        for (std::size_t j = 0; j < beta.size(); ++j) EXPECT_NEAR(noiseless.coefficients[j].estimate, beta[j], 1e-10);
    }
}

TEST(Ols, StarsThresholds)
{
    EXPECT_EQ(stars_for(0.2), Stars::None);
    EXPECT_EQ(stars_for(0.1), Stars::None);
    EXPECT_EQ(stars_for(0.099), Stars::One);
    EXPECT_EQ(stars_for(0.049), Stars::Two);
    EXPECT_EQ(stars_for(0.0099), Stars::Three);
}

// ---------------------------------------------------------------------------
// Survey encoding and tables

namespace {

std::string response_rows(std::string const & pid, std::string const & arm, int correct, bool helpful = true)
{
    static char const * const cats[] = {"authority", "job", "", "", "investment", "", "love", ""};
    std::string out;
    for (int s = 1; s <= 8; ++s) {
        bool scam = cats[s - 1][0] != '\0';
        bool right = s <= correct;
        bool says_scam = right == scam;
        std::string choice = says_scam ? "scam" : "not_scam";
        if (arm == "treatment") choice += helpful ? "_helpful" : "_not_helpful";
        out += pid + "," + std::to_string(s) + "," + (scam ? "scam" : "not_scam") + "," + cats[s - 1] + "," + choice
               + "," + arm + "\n";
    }
    return out;
}

csv::Table responses(std::string body)
{
    return csv::Table::parse_text("participant,scenario_number,ground_truth,category,choice,arm\n" + body);
}

csv::Table demographics(std::string body)
{
    return csv::Table::parse_text("participant,age_group,university_graduate,gender,stem\n" + body);
}

} // namespace

TEST(Encode, AccuracyAndHelpfulness)
{
    auto rows = encode_rows(responses(response_rows("p2", "control", 6) + response_rows("p1", "treatment", 8)),
                            demographics("p1,young,1,male,0\np2,old,0,female,1\n"));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].participant_id, "p1");
    EXPECT_EQ(rows[0].accuracy_overall, 1.0);
    EXPECT_EQ(rows[0].helpful_overall, 1.0);
    EXPECT_EQ(rows[0].helpful_by_type.at(ScamCategory::Job), 1);
    EXPECT_EQ(rows[0].age_young, 1);
    EXPECT_EQ(rows[0].gender_male, 1);
    EXPECT_EQ(rows[1].accuracy_overall, 0.75);
    EXPECT_FALSE(rows[1].helpful_overall.has_value());
    EXPECT_TRUE(rows[1].helpful_by_type.empty());
    EXPECT_EQ(rows[1].accuracy_by_type.at(ScamCategory::Love), 0);
    EXPECT_EQ(rows[1].accuracy_by_type.at(ScamCategory::Authority), 1);
    EXPECT_EQ(rows[1].age_old, 1);
}

TEST(Encode, HelpfulAggregationOverScamOnly)
{
    auto body = response_rows("p1", "treatment", 8);
    // flip the non-scam answers to "not helpful"
    std::string flipped;
    for (auto line : text::split_lines(body)) {
        std::string l(line);
        if (l.find(",not_scam,,") != std::string::npos) l = asr::prompts::replace_all(l, "_helpful", "_not_helpful");
        if (!l.empty()) flipped += l + "\n";
    }
    auto demo = demographics("p1,middle,1,female,1\n");
    EXPECT_EQ(encode_rows(responses(flipped), demo)[0].helpful_overall, 0.5);
    EXPECT_EQ(encode_rows(responses(flipped), demo, HelpfulAggregation::ScamScenarios)[0].helpful_overall, 1.0);
}

TEST(Encode, Errors)
{
    auto demo = demographics("p1,young,1,male,0\n");
    auto seven = response_rows("p1", "control", 8);
    seven.erase(seven.rfind("p1,8"));
    EXPECT_EQ(code_of([&] { encode_rows(responses(seven), demo); }), ErrorCode::IncompleteSession);
    auto bad_cat = asr::prompts::replace_all(response_rows("p1", "control", 8), "authority", "romance");
    EXPECT_EQ(code_of([&] { encode_rows(responses(bad_cat), demo); }), ErrorCode::SchemaError);
    auto wrong_arm = asr::prompts::replace_all(response_rows("p1", "control", 8), ",control", ",treatment");
    EXPECT_EQ(code_of([&] { encode_rows(responses(wrong_arm), demo); }), ErrorCode::SchemaError);
}

TEST(Encode, MissingDemographicsDropParticipant)
{
    auto rows = encode_rows(responses(response_rows("p1", "control", 8) + response_rows("p2", "control", 7)),
                            demographics("p1,young,1,,0\np2,middle,0,female,0\n"));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].participant_id, "p2");
}

TEST(Encode, RowsFileRoundTrip)
{
    auto rows = encode_rows(responses(response_rows("p1", "treatment", 5) + response_rows("p2", "control", 7)),
                            demographics("p1,young,1,male,0\np2,old,0,prefer_not_say,1\n"));
    auto text = rows_to_csv(rows);
    auto back = rows_from_table(csv::Table::parse_text(text));
    EXPECT_EQ(rows_to_csv(back), text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].gender_prefer_not_say, 1);
    EXPECT_FALSE(back[1].helpful_overall.has_value());
}

TEST(Table, NestedColumnsAndRendering)
{
    std::mt19937_64 rng(1);
    auto rows = designs::cohort(rng, 200, 0.06, 0.1);
    auto t = run_table(rows, table_spec("accuracy_overall"));
    ASSERT_EQ(t.columns.size(), 5u);
    double prev = -1.0;
    for (auto const & c : t.columns) {
        ASSERT_TRUE(c.fit) << c.error->what();
        EXPECT_GE(c.fit->r2, prev - 1e-12);
        prev = c.fit->r2;
        EXPECT_EQ(c.fit->n, 200u);
    }
    EXPECT_EQ(t.columns[4].fit->coefficients.size(), 8u);
    auto md = render_table(t, TableFormat::Markdown);
    EXPECT_NE(md.find("AI Assisted"), std::string::npos);
    EXPECT_NE(md.find("Age[Young (<25)]"), std::string::npos);
    EXPECT_NE(md.find("| Observations | 200 | 200 | 200 | 200 | 200 |"), std::string::npos) << md;
    EXPECT_NE(md.find("Note: *p<0.1; **p<0.05; ***p<0.01"), std::string::npos);
    auto tex = render_table(t, TableFormat::Latex);
    EXPECT_NE(tex.find("\\begin{tabular}"), std::string::npos);
    auto csv_out = render_table(t, TableFormat::Csv);
    EXPECT_EQ(csv::Table::parse_text(csv_out).has("(5)"), true) << csv_out;
    auto j = to_json(t);
    EXPECT_EQ(j["columns"].size(), 5u);
}

TEST(Table, HelpfulDependentOnControlRowsIsInsufficient)
{
    std::mt19937_64 rng(4);
    auto rows = designs::cohort(rng, 50, 0.06, 0.1);
    for (auto & r : rows) r.ai_assisted = 0;
    auto t = run_table(rows, table_spec("helpful_overall"));
    for (auto const & c : t.columns) {
        ASSERT_TRUE(c.error);
        EXPECT_EQ(c.error->code(), ErrorCode::InsufficientData);
    }
    EXPECT_NE(render_table(t, TableFormat::Markdown).find("Observations"), std::string::npos);
}

TEST(Table, ColumnErrorsDoNotStopLaterColumns)
{
    std::mt19937_64 rng(6);
    auto rows = designs::cohort(rng, 60, 0.06, 0.1);
    for (auto & r : rows) r.ai_assisted = 1;
    auto t = run_table(rows, table_spec("accuracy_overall"));
    for (auto const & c : t.columns) {
        ASSERT_TRUE(c.error);
        EXPECT_EQ(c.error->code(), ErrorCode::RankDeficient);
    }
    EXPECT_EQ(code_of([] { table_spec("shoe_size"); }), ErrorCode::SchemaError);
    EXPECT_EQ(table_spec("helpful_job").column_blocks[0][0], "accuracy_job");
}

TEST(Table, ValidateRowInvariants)
{
    ParticipantRow r;
    r.participant_id = "x";
    r.age_old = r.age_young = 1;
    EXPECT_EQ(code_of([&] { validate(r); }), ErrorCode::SchemaError);
    r.age_young = 0;
    r.helpful_overall = 0.5;
    EXPECT_EQ(code_of([&] { validate(r); }), ErrorCode::SchemaError);
    r.ai_assisted = 1;
    EXPECT_NO_THROW(validate(r));
}
