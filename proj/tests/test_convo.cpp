#include "asr/convo.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace asr;

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

} // namespace

TEST(Category, ParsesExactlyFourLabels)
{
    for (auto c : all_categories) EXPECT_EQ(parse_category(to_string(c)), c);
    EXPECT_EQ(code_of([] { parse_category("romance"); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_category("Authority"); }), ErrorCode::ParseError);
}

TEST(Conversation, ValidateRejectsBlankTextAndMissingCategory)
{
    auto c = make_conversation("x", {{Role::Counterpart, "hi"}, {Role::SelfUser, "  "}});
    EXPECT_EQ(code_of([&] { validate(c); }), ErrorCode::InvalidConversation);
    auto s = make_conversation("y", {{Role::Counterpart, "hi"}}, std::nullopt, true);
    EXPECT_EQ(code_of([&] { validate(s); }), ErrorCode::InvalidConversation);
    auto bad = make_conversation("z", {{Role::Counterpart, "a"}, {Role::SelfUser, "b"}});
    bad.messages[1].index = 0;
    EXPECT_EQ(code_of([&] { validate(bad); }), ErrorCode::InvalidConversation);
}

TEST(Merge, JoinsSameRoleRuns)
{
    auto c = make_conversation("m", {{Role::Counterpart, "Hello"},
                                     {Role::Counterpart, "Are you there?"},
                                     {Role::SelfUser, "yes"}});
    auto m = merge_consecutive_turns(c);
    ASSERT_EQ(m.messages.size(), 2u);
    EXPECT_EQ(m.messages[0].text, "Hello\nAre you there?");
    EXPECT_EQ(m.messages[1].index, 1u);
}

TEST(Merge, EmptyConversationIsRejected)
{
    EXPECT_EQ(code_of([] { merge_consecutive_turns(Conversation{}); }), ErrorCode::InvalidConversation);
}

TEST(Merge, SkipsOverInterjections)
{
    auto c = make_conversation("m", {{Role::Counterpart, "a"}, {Role::Interjection, "note"}, {Role::Counterpart, "b"}});
    auto m = merge_consecutive_turns(c);
    ASSERT_EQ(m.messages.size(), 2u);
    EXPECT_EQ(m.messages[0].text, "a\nb");
    EXPECT_EQ(m.messages[1].role, Role::Interjection);
}

TEST(Merge, IsIdempotentOnRandomConversations)
{
    std::mt19937 rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        Conversation c;
        c.id = "r";
        int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) {
            c.append(static_cast<Role>(rng() % 3), "t" + std::to_string(i));
        }
        auto once = merge_consecutive_turns(c);
        EXPECT_EQ(merge_consecutive_turns(once), once);
        for (std::size_t i = 0; i < once.messages.size(); ++i) EXPECT_EQ(once.messages[i].index, i);
    }
}

TEST(ContextWindow, ExcludesInterjectionsAndKeepsOrder)
{
    auto c = make_conversation("w", {{Role::Counterpart, "c0"},
                                     {Role::SelfUser, "s1"},
                                     {Role::Interjection, "i2"},
                                     {Role::Counterpart, "c3"}});
    auto w = context_window(c, 3, 2);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_EQ(w[0].text, "c0");
    EXPECT_EQ(w[1].text, "s1");
    EXPECT_TRUE(context_window(c, 0, 2).empty());
    EXPECT_EQ(code_of([&] { context_window(c, 4, 2); }), ErrorCode::IndexError);
}

TEST(ContextWindow, NeverContainsInterjectionsProperty)
{
    std::mt19937 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        Conversation c;
        int n = 1 + static_cast<int>(rng() % 15);
        for (int i = 0; i < n; ++i) c.append(static_cast<Role>(rng() % 3), "m" + std::to_string(i));
        auto upto = rng() % c.messages.size();
        auto w = context_window(c, upto, 2);
        EXPECT_LE(w.size(), 2u);
        for (auto const & m : w) {
            EXPECT_NE(m.role, Role::Interjection);
            EXPECT_LT(m.index, upto);
        }
    }
}

TEST(Render, TranscriptLabelsCounterpartAsPersonA)
{
    auto c = make_conversation("r", {{Role::Counterpart, "hi"}, {Role::SelfUser, "hello"}});
    EXPECT_EQ(render_transcript(c), "Person A: hi\nPerson B: hello");
    EXPECT_EQ(render_dialogue(c), "Scammer: hi\nVictim: hello");
}

TEST(ParseDialogue, AcceptsBothLabelStylesAndContinuations)
{
    auto t = parse_dialogue("Scammer: pay now\nplease\nVICTIM: no\nperson a: really?\n\nnoise");
    ASSERT_EQ(t.size(), 3u);
    EXPECT_EQ(t[0].second, "pay now\nplease");
    EXPECT_EQ(t[1].first, Role::SelfUser);
    EXPECT_EQ(t[2].second, "really?\nnoise");
    EXPECT_TRUE(parse_dialogue("just some prose").empty());
}

TEST(Record, JsonRoundTripIsCanonical)
{
    DatasetRecord r;
    r.conversation = fixtures::scam_conversation(3, "seed");
    r.source = RecordSource::Variant;
    r.parent_id = "seed-000";
    r.vetting = Vetting::Accepted;
    r.split = Split::Validation;
    r.template_version = 1;
    auto line = serialize_record(r);
    EXPECT_TRUE(line.starts_with(R"({"id":"seed-003","category":"investment","is_scam":true,"source":"variant")"));
    EXPECT_EQ(parse_record(line, 1), r);
}

TEST(Record, ParseMergesTurnsAndReportsLineNumbers)
{
    auto r = parse_record(
        R"({"id":"a","category":null,"is_scam":false,"source":"real","parent_id":null,"vetting":"pending","split":null,"turns":[{"role":"scammer","text":"x"},{"role":"scammer","text":"y"}]})",
        4);
    ASSERT_EQ(r.conversation.messages.size(), 1u);
    EXPECT_EQ(r.conversation.messages[0].text, "x\ny");
    try {
        parse_record(R"({"id":"a","category":"romance","is_scam":true,"source":"seed","parent_id":null,"vetting":"pending","split":null,"turns":[]})", 9);
        FAIL();
    } catch (Error const & e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_TRUE(e.detail().starts_with("line 9: ")) << e.detail();
    }
}

TEST(Record, InvariantsOnLineageAndSplit)
{
    DatasetRecord r;
    r.conversation = fixtures::scam_conversation(1);
    r.source = RecordSource::Variant;
    EXPECT_EQ(code_of([&] { validate(r); }), ErrorCode::SchemaError);
    r.source = RecordSource::Seed;
    r.split = Split::Train;
    EXPECT_EQ(code_of([&] { validate(r); }), ErrorCode::SchemaError);
    r.vetting = Vetting::Edited;
    EXPECT_NO_THROW(validate(r));
}

TEST(Dataset, FileRoundTripAndDuplicateIds)
{
    auto dir = std::filesystem::temp_directory_path() / "asr_convo_test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "d.jsonl").string();
    auto seeds = fixtures::seed_records(5);
    write_dataset(path, seeds);
    EXPECT_EQ(read_dataset(path), seeds);
    seeds.push_back(seeds.front());
    write_dataset(path, seeds);
    EXPECT_EQ(code_of([&] { read_dataset(path); }), ErrorCode::DuplicateId);
    EXPECT_EQ(code_of([&] { read_dataset((dir / "missing.jsonl").string()); }), ErrorCode::StorageError);
}
