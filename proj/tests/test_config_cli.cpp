#include "asr/cli.hpp"
#include "asr/config.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace asr;
namespace fs = std::filesystem;

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

config::Env env_of(std::map<std::string, std::string> vars)
{
    return [vars = std::move(vars)](std::string const & k) -> std::optional<std::string> {
        auto it = vars.find(k);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    };
}

fs::path fresh_dir(std::string const & name)
{
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(fs::path const & p, std::string const & content)
{
    std::ofstream(p) << content;
}

struct Run
{
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out;
    std::ostringstream err;
    int code = cli::dispatch(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

} // namespace

TEST(Toml, ParsesSubset)
{
    auto t = config::parse_toml(R"(# top
log_level = "debug"   # trailing
port = 9000
[llm]
base_url = "http://h:1/x\"y"
[gateway]
timeout_ms = 1500
ratio = 0.5
flag = true
)");
    EXPECT_EQ(std::get<std::string>(t.at("log_level")), "debug");
    EXPECT_EQ(std::get<long long>(t.at("port")), 9000);
    EXPECT_EQ(std::get<std::string>(t.at("llm.base_url")), "http://h:1/x\"y");
    EXPECT_EQ(std::get<double>(t.at("gateway.ratio")), 0.5);
    EXPECT_TRUE(std::get<bool>(t.at("gateway.flag")));
}

TEST(Toml, Errors)
{
    EXPECT_EQ(code_of([] { config::parse_toml("[open"); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([] { config::parse_toml("novalue"); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([] { config::parse_toml("k = \"unterminated"); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([] { config::parse_toml("k = [1, 2]"); }), ErrorCode::ConfigError);
    try {
        config::parse_toml("a = 1\nb = ?", "x.toml");
        FAIL();
    } catch (Error const & e) {
        EXPECT_NE(e.detail().find("x.toml line 2"), std::string::npos);
    }
}

TEST(Config, PrecedenceFlagsEnvFileDefaults)
{
    auto dir = fresh_dir("asr_cfg_prec");
    write(dir / "asr.toml", "log_level = \"warn\"\nport = 7000\nseed = 5\n[llm]\nmodel = \"file-model\"\n"
                            "[gateway]\nmax_inflight = 3\n");
    auto defaults = config::resolve({}, env_of({{"ASR_DATA_DIR", (dir / "missing").string()}}));
    EXPECT_EQ(defaults.port, 8080);
    EXPECT_EQ(defaults.llm.model, "gpt-j");

    auto from_file = config::resolve({dir.string(), std::nullopt, std::nullopt}, env_of({}));
    EXPECT_EQ(from_file.log_level, "warn");
    EXPECT_EQ(from_file.port, 7000);
    EXPECT_EQ(from_file.seed, 5u);
    EXPECT_EQ(from_file.llm.model, "file-model");
    EXPECT_EQ(from_file.gateway.max_inflight, 3);

    auto env = env_of({{"ASR_DATA_DIR", dir.string()}, {"ASR_LOG_LEVEL", "error"}, {"ASR_LLM_MODEL", "env-model"},
                       {"ASR_MAX_INFLIGHT", "9"}});
    auto from_env = config::resolve({}, env);
    EXPECT_EQ(from_env.log_level, "error");
    EXPECT_EQ(from_env.llm.model, "env-model");
    EXPECT_EQ(from_env.gateway.max_inflight, 9);
    EXPECT_EQ(from_env.port, 7000);

    auto from_flags = config::resolve({std::nullopt, "trace", 1234}, env);
    EXPECT_EQ(from_flags.log_level, "trace");
    EXPECT_EQ(from_flags.port, 1234);
    EXPECT_EQ(from_flags.data_dir, dir.string());
}

TEST(Config, RejectsBadValues)
{
    auto dir = fresh_dir("asr_cfg_bad");
    write(dir / "asr.toml", "colour = \"blue\"\n");
    EXPECT_EQ(code_of([&] { config::resolve({dir.string(), {}, {}}, env_of({})); }), ErrorCode::ConfigError);
    write(dir / "asr.toml", "port = \"eighty\"\n");
    EXPECT_EQ(code_of([&] { config::resolve({dir.string(), {}, {}}, env_of({})); }), ErrorCode::ConfigError);
    fs::remove(dir / "asr.toml");
    EXPECT_EQ(code_of([&] { config::resolve({dir.string(), {}, {}}, env_of({{"ASR_TIMEOUT_MS", "-1"}})); }),
              ErrorCode::ConfigError);
}

TEST(BackendFiles, ScriptedReplayAndHash)
{
    auto dir = fresh_dir("asr_cfg_backend");
    write_dataset((dir / "corpus.jsonl").string(), fixtures::seed_records(3));
    write(dir / "tuned.json", R"({"kind": "scripted_chat", "model_name": "t",
        "script": {"type": "replay", "corpus": "corpus.jsonl", "ids": ["seed-002"],
                   "fallback": {"type": "fixed", "replies": ["fallback"]}}})");
    auto b = config::load_backend((dir / "tuned.json").string());
    EXPECT_EQ(b.kind, BackendKind::ScriptedChat);
    Gateway gw;
    auto conv = fixtures::scam_conversation(2, "seed");
    auto idx = conv.messages.back().index;
    EXPECT_EQ(simulate_turn(conv, idx, b, gw), conv.messages.back().text);
    auto other = fixtures::scam_conversation(1, "seed");
    EXPECT_EQ(simulate_turn(other, other.messages.back().index, b, gw), "fallback");

    auto h = config::backend_from_json(nlohmann::json{{"kind", "hash_embed"}, {"dim", 64}});
    EXPECT_EQ(h.dim, 64u);
    EXPECT_EQ(code_of([] { config::backend_from_json(nlohmann::json{{"kind", "quantum"}}); }),
              ErrorCode::ConfigError);
    EXPECT_EQ(code_of([] {
                  config::backend_from_json(
                      nlohmann::json{{"kind", "scripted_chat"}, {"script", {{"type", "fixed"}, {"replies", nlohmann::json::array()}}}});
              }),
              ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { config::load_backend((dir / "nope.json").string()); }), ErrorCode::ConfigError);
}

TEST(Cli, ExitCodes)
{
    auto help = run({"--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("forge"), std::string::npos);
    EXPECT_EQ(run({"forge", "split", "--help"}).code, 0);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    auto missing = run({"forge", "split", "--train", "3"});
    EXPECT_EQ(missing.code, 2);
    EXPECT_NE(missing.err.find("--val"), std::string::npos);
    EXPECT_EQ(run({"eval", "confusion", "--group", "a=1,2,3,4", "--format", "yaml"}).code, 2);

    auto domain = run({"eval", "confusion", "--group", "a=1,2,3"});
    EXPECT_EQ(domain.code, 1);
    auto j = nlohmann::json::parse(domain.err);
    EXPECT_EQ(j["error"], "InvalidInput");
    EXPECT_TRUE(j["message"].is_string());
}

TEST(Cli, ConfusionTables)
{
    auto md = run({"eval", "confusion", "--group", "Control=127,17,131,13", "--group", "Treatment=163,5,157,11"});
    ASSERT_EQ(md.code, 0) << md.err;
    EXPECT_NE(md.out.find("| Control | 0 | 0.907 | 0.882 | 0.894 | 0.896 | 144 |"), std::string::npos) << md.out;
    EXPECT_NE(md.out.find("| Treatment | 0 | 0.937 | 0.970 | 0.953 | 0.952 | 168 |"), std::string::npos) << md.out;
    auto js = run({"eval", "confusion", "--group", "Control=136,8,138,6", "--format", "json"});
    ASSERT_EQ(js.code, 0);
    EXPECT_NEAR(nlohmann::json::parse(js.out)["Control"]["accuracy"].get<double>(), 274.0 / 288.0, 1e-12);
}

TEST(Cli, DatasetPipelineEndToEnd)
{
    auto dir = fresh_dir("asr_cli_pipeline");
    auto dd = dir.string();
    write_dataset((dir / "seeds.jsonl").string(), fixtures::seed_records(6));
    write(dir / "echo.json", R"({"kind": "scripted_chat", "model_name": "echo", "script": {"type": "echo"}})");

    auto imported = run({"--data-dir", dd, "forge", "import", (dir / "seeds.jsonl").string()});
    ASSERT_EQ(imported.code, 0) << imported.err;
    EXPECT_EQ(imported.out, "imported 6 seed records\n");
    auto again = run({"--data-dir", dd, "forge", "import", (dir / "seeds.jsonl").string()});
    EXPECT_EQ(again.code, 1);
    EXPECT_EQ(nlohmann::json::parse(again.err)["error"], "DuplicateId");

    auto variants = run({"--data-dir", dd, "forge", "variants", "--per-seed", "2", "--model",
                         (dir / "echo.json").string(), "--parallelism", "2"});
    ASSERT_EQ(variants.code, 0) << variants.err;
    EXPECT_EQ(variants.out, "generated 12 variants for 6 seeds (0 rejected)\n");

    for (auto const & r : read_dataset((dir / "dataset.jsonl").string())) {
        bool discard = r.id() == "seed-004-v02";
        auto v = run({"--data-dir", dd, "forge", "vet", "--id", r.id(), discard ? "--discard" : "--accept"});
        ASSERT_EQ(v.code, 0) << v.err;
    }
    auto twice = run({"--data-dir", dd, "forge", "vet", "--id", "seed-001", "--accept"});
    EXPECT_EQ(twice.code, 1);
    EXPECT_EQ(nlohmann::json::parse(twice.err)["error"], "AlreadyVetted");
    EXPECT_EQ(run({"--data-dir", dd, "forge", "vet", "--id", "seed-001"}).code, 2);

    // 17 kept records in families of 3,3,3,2,3,3: 14/3 must keep families whole
    auto split = run({"--data-dir", dd, "forge", "split", "--train", "14", "--val", "3", "--seed", "4"});
    ASSERT_EQ(split.code, 0) << split.err;
    auto bad = run({"--data-dir", dd, "forge", "split", "--train", "10", "--val", "3"});
    EXPECT_EQ(bad.code, 1);

    auto status = run({"--data-dir", dd, "forge", "status", "--format", "json"});
    ASSERT_EQ(status.code, 0) << status.err;
    auto s = nlohmann::json::parse(status.out);
    EXPECT_EQ(s["seeds"], 6);
    EXPECT_EQ(s["variants"], 12);
    EXPECT_EQ(s["discarded"], 1);
    EXPECT_EQ(s["train"], 14);
    EXPECT_EQ(s["validation"], 3);
    EXPECT_EQ(s["audit_consistent"], true);

    auto exported = run({"--data-dir", dd, "forge", "export", "--split", "validation"});
    ASSERT_EQ(exported.code, 0);
    std::set<std::string> families;
    std::size_t lines = 0;
    for (auto line : text::split_lines(exported.out)) {
        if (text::is_blank(line)) continue;
        ++lines;
        families.insert(forge::family_of(parse_record(line, lines)));
    }
    EXPECT_EQ(lines, 3u);
    EXPECT_EQ(families.size(), 1u);

    write(dir / "tuned.json", R"({"kind": "scripted_chat", "model_name": "a",
        "script": {"type": "replay", "corpus": "dataset.jsonl", "fallback": {"type": "echo"}}})");
    write(dir / "plain.json", R"({"kind": "scripted_chat", "model_name": "b",
        "script": {"type": "fixed", "replies": ["please wire the fee today"]}})");
    auto report = (dir / "report.json").string();
    auto ev = run({"--data-dir", dd, "eval", "run", "--dataset", (dir / "dataset.jsonl").string(), "--split", "all", "--model-a",
                   (dir / "tuned.json").string(), "--model-b", (dir / "plain.json").string(), "--out", report});
    ASSERT_EQ(ev.code, 0) << ev.err;
    EXPECT_NE(ev.out.find("| Instances of a > b | 18 | 18 |"), std::string::npos) << ev.out;
    auto rendered = run({"eval", "report", "--report", report, "--format", "json"});
    EXPECT_EQ(rendered.code, 0) << rendered.err;
}

TEST(Cli, SurveyAndStatsEndToEnd)
{
    auto dir = fresh_dir("asr_cli_survey");
    auto dd = dir.string();
    auto keys = run({"--data-dir", dd, "survey", "keys", "--n", "3", "--format", "json"});
    ASSERT_EQ(keys.code, 0) << keys.err;
    EXPECT_EQ(nlohmann::json::parse(keys.out).size(), 3u);
    auto more = run({"--data-dir", dd, "survey", "keys", "--n", "2"});
    ASSERT_EQ(more.code, 0);
    EXPECT_EQ(std::count(more.out.begin(), more.out.end(), '\n'), 2);
    auto exp = run({"--data-dir", dd, "survey", "export", "--component", "reason"});
    ASSERT_EQ(exp.code, 0) << exp.err;
    EXPECT_TRUE(exp.out.starts_with("participant,arm,component,"));

    static char const * const cats[] = {"authority", "job", "", "", "investment", "", "love", ""};
    std::string responses = "participant,scenario_number,ground_truth,category,choice,arm\n";
    std::string demo = "participant,age_group,university_graduate,gender,stem\n";
    char const * const ages[] = {"young", "middle", "old"};
    for (int p = 0; p < 48; ++p) {
        auto pid = "q" + fixtures::pad(static_cast<std::size_t>(p));
        bool treat = p % 2 == 0;
        int correct = 4 + (p * 7) % 5;
        for (int s = 1; s <= 8; ++s) {
            bool scam = cats[s - 1][0] != '\0';
            bool says_scam = (s <= correct) == scam;
            std::string choice = says_scam ? "scam" : "not_scam";
            if (treat) choice += (p + s) % 3 ? "_helpful" : "_not_helpful";
            responses += pid + "," + std::to_string(s) + "," + (scam ? "scam" : "not_scam") + "," + cats[s - 1] + ","
                         + choice + "," + (treat ? "treatment" : "control") + "\n";
        }
        demo += pid + "," + ages[(p / 2) % 3] + "," + std::to_string((p / 3) % 2) + ","
                + ((p / 5) % 2 ? "male" : "female") + "," + std::to_string((p / 7) % 2) + "\n";
    }
    write(dir / "responses.csv", responses);
    write(dir / "demo.csv", demo);
    auto rows = (dir / "rows.csv").string();
    auto enc = run({"stats", "encode", "--responses", (dir / "responses.csv").string(), "--demographics",
                    (dir / "demo.csv").string(), "--out", rows});
    ASSERT_EQ(enc.code, 0) << enc.err;
    EXPECT_EQ(enc.out, "encoded 48 participants\n");

    auto md = run({"stats", "regress", "--rows", rows});
    ASSERT_EQ(md.code, 0) << md.err;
    EXPECT_NE(md.out.find("Observations"), std::string::npos);
    auto js = run({"stats", "regress", "--rows", rows, "--format", "json"});
    ASSERT_EQ(js.code, 0) << js.err;
    EXPECT_EQ(nlohmann::json::parse(js.out)["columns"].size(), 5u);
    auto mismatch = run({"stats", "regress", "--rows", rows, "--table", "helpful"});
    EXPECT_EQ(mismatch.code, 1);
    EXPECT_EQ(run({"stats", "regress", "--rows", (dir / "absent.csv").string()}).code, 2);
}
