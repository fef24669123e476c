#pragma once

#include "asr/config.hpp"
#include "asr/convo.hpp"
#include "asr/csv.hpp"
#include "asr/engine.hpp"
#include "asr/error.hpp"
#include "asr/eval.hpp"
#include "asr/forge.hpp"
#include "asr/stats/table.hpp"
#include "asr/survey/http.hpp"
#include "asr/survey/service.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace asr::cli {

enum ExitCode : int { Ok = 0, DomainError = 1, UsageError = 2 };

namespace detail {

inline std::string read_file(std::string const & path)
{
    std::ifstream in(path);
    require(in.good(), ErrorCode::StorageError, "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(std::string const & path, std::string const & content)
{
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), ErrorCode::StorageError, "cannot write '" + path + "'");
    out << content;
    require(out.good(), ErrorCode::StorageError, "write to '" + path + "' failed");
}

/// Dataset store backed by the data directory.
struct DataDir
{
    config::GlobalConfig const & cfg;
    forge::Store store;

    explicit DataDir(config::GlobalConfig const & c)
    : cfg(c)
    , store(c.audit_path())
    {
        std::filesystem::create_directories(cfg.data_dir);
        if (std::filesystem::exists(cfg.dataset_path())) {
            store.load(read_dataset(cfg.dataset_path()));
        }
        store.resume_audit_sequence(forge::read_audit_log(cfg.audit_path()).size());
    }

    void save() const { write_dataset(cfg.dataset_path(), store.records()); }
};

inline nlohmann::ordered_json to_json(forge::Census const & c)
{
    return {{"seeds", c.seeds},       {"variants", c.variants}, {"real", c.real},
            {"pending", c.pending},   {"accepted", c.accepted}, {"edited", c.edited},
            {"discarded", c.discarded}};
}

} // namespace detail

/// Parses and runs one command line. Output goes to `out`, diagnostics to `err`.
inline int dispatch(std::vector<std::string> args, std::ostream & out = std::cout, std::ostream & err = std::cerr)
{
    CLI::App app{"Anticipate-Simulate-Reason scam copilot toolkit", "asr"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_help_all_flag("--help-all", "Print help for every subcommand");

    config::FlagOverrides flags;
    std::string data_dir;
    std::string log_level;
    app.add_option("--data-dir", data_dir, "Directory holding dataset.jsonl, audit.jsonl, events.jsonl, asr.toml");
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

    std::function<void()> action;
    auto resolve = [&] {
        if (!data_dir.empty()) flags.data_dir = data_dir;
        if (!log_level.empty()) flags.log_level = log_level;
        auto cfg = config::resolve(flags);
        spdlog::set_level(spdlog::level::from_str(cfg.log_level));
        return cfg;
    };
    auto make_gateway = [](config::GlobalConfig const & cfg) { return std::make_unique<Gateway>(cfg.gateway); };

    // forge ------------------------------------------------------------------
    auto * forge_cmd = app.add_subcommand("forge", "Dataset construction: import, variants, vetting, split");
    forge_cmd->require_subcommand(1);

    std::string import_file;
    auto * f_import = forge_cmd->add_subcommand("import", "Import seed conversations (JSONL)");
    f_import->add_option("file", import_file, "Seed file")->required()->check(CLI::ExistingFile);
    f_import->callback([&] {
        action = [&] {
            auto cfg = resolve();
            detail::DataDir dd(cfg);
            auto seeds = forge::import_seeds(import_file);
            auto n = seeds.size();
            dd.store.add(std::move(seeds), "cli");
            dd.save();
            out << "imported " << n << " seed records\n";
        };
    });

    std::size_t per_seed = 10;
    std::string variant_model = "llm";
    std::size_t parallelism = 4;
    double variant_temperature = 0.7;
    auto * f_variants = forge_cmd->add_subcommand("variants", "Generate variants for every seed without variants");
    f_variants->add_option("--per-seed", per_seed, "Variants per seed")->check(CLI::PositiveNumber);
    f_variants->add_option("--model", variant_model, "Backend config file, or 'llm' for the configured endpoint");
    f_variants->add_option("--parallelism", parallelism, "Seeds processed concurrently")->check(CLI::PositiveNumber);
    f_variants->add_option("--temperature", variant_temperature, "Sampling temperature");
    f_variants->callback([&] {
        action = [&] {
            auto cfg = resolve();
            auto gw = make_gateway(cfg);
            auto backend = config::resolve_backend(variant_model, cfg);
            detail::DataDir dd(cfg);
            auto records = dd.store.records();
            std::set<std::string> has_children;
            for (auto const & r : records) {
                if (r.parent_id) has_children.insert(*r.parent_id);
            }
            std::vector<DatasetRecord> parents;
            for (auto const & r : records) {
                if (r.source != RecordSource::Variant && r.vetting != Vetting::Discarded && !has_children.contains(r.id())) {
                    parents.push_back(r);
                }
            }
            auto outcomes =
                forge::generate_all_variants(parents, per_seed, backend, *gw, parallelism, variant_temperature);
            std::size_t made = 0;
            std::size_t rejected = 0;
            for (auto & o : outcomes) {
                made += o.variants.size();
                rejected += o.rejected;
                dd.store.add(std::move(o.variants), "cli");
            }
            dd.save();
            out << "generated " << made << " variants for " << parents.size() << " seeds (" << rejected
                << " rejected)\n";
        };
    });

    std::string vet_id;
    bool vet_accept = false;
    bool vet_discard = false;
    std::string vet_edit;
    bool vet_interactive = false;
    std::string actor = "reviewer";
    auto * f_vet = forge_cmd->add_subcommand("vet", "Record a vetting decision");
    f_vet->add_option("--id", vet_id, "Record id");
    auto * acc = f_vet->add_flag("--accept", vet_accept, "Accept the record");
    auto * dis = f_vet->add_flag("--discard", vet_discard, "Discard the record");
    auto * edt = f_vet->add_option("--edit", vet_edit, "Replace the transcript with this file")->check(CLI::ExistingFile);
    auto * itv = f_vet->add_flag("--interactive", vet_interactive, "Review pending records from stdin");
    f_vet->add_option("--actor", actor, "Reviewer name written to the audit log");
    acc->excludes(dis)->excludes(edt)->excludes(itv);
    dis->excludes(edt)->excludes(itv);
    edt->excludes(itv);
    f_vet->callback([&] {
        if (!vet_interactive) {
            if (vet_id.empty()) throw CLI::RequiredError("--id");
            if (!vet_accept && !vet_discard && vet_edit.empty()) {
                throw CLI::ValidationError("vet", "one of --accept, --discard, --edit is required");
            }
        }
        action = [&] {
            auto cfg = resolve();
            detail::DataDir dd(cfg);
            if (vet_interactive) {
                std::size_t decided = 0;
                for (auto const & r : dd.store.records()) {
                    if (r.vetting != Vetting::Pending) continue;
                    out << "== " << r.id() << " (" << to_string(r.source) << ")\n"
                        << render_dialogue(r.conversation) << "\n[a]ccept / [d]iscard / [s]kip / [q]uit? " << std::flush;
                    std::string answer;
                    if (!std::getline(std::cin, answer) || answer == "q") break;
                    if (answer == "a") dd.store.vet(r.id(), forge::Accept{}, actor), ++decided;
                    else if (answer == "d") dd.store.vet(r.id(), forge::Discard{}, actor), ++decided;
                }
                dd.save();
                out << decided << " decisions recorded\n";
                return;
            }
            forge::VetDecision decision = forge::Accept{};
            if (vet_discard) decision = forge::Discard{};
            if (!vet_edit.empty()) decision = forge::Edit{detail::read_file(vet_edit)};
            auto r = dd.store.vet(vet_id, decision, actor);
            dd.save();
            out << r.id() << ": " << to_string(r.vetting) << "\n";
        };
    });

    forge::SplitPlan plan;
    bool no_family = false;
    auto * f_split = forge_cmd->add_subcommand("split", "Assign kept records to train/validation");
    f_split->add_option("--train", plan.train_count, "Training records")->required();
    f_split->add_option("--val", plan.validation_count, "Validation records")->required();
    f_split->add_option("--seed", plan.rng_seed, "Shuffle seed");
    f_split->add_flag("--no-family-exclusion", no_family, "Allow a seed and its variants on both sides");
    f_split->callback([&] {
        action = [&] {
            plan.family_exclusion = !no_family;
            auto cfg = resolve();
            detail::DataDir dd(cfg);
            auto assigned = dd.store.split(plan, "cli");
            dd.save();
            out << "split " << assigned.size() << " records: " << plan.train_count << " train, "
                << plan.validation_count << " validation\n";
        };
    });

    std::string export_split;
    std::string export_out;
    auto * f_export = forge_cmd->add_subcommand("export", "Write the records of one split as JSONL");
    f_export->add_option("--split", export_split, "train|validation")->required()->check(
        CLI::IsMember({"train", "validation"}));
    f_export->add_option("--out", export_out, "Output file (default stdout)");
    f_export->callback([&] {
        action = [&] {
            auto cfg = resolve();
            detail::DataDir dd(cfg);
            auto want = parse_split(export_split);
            std::vector<DatasetRecord> chosen;
            for (auto const & r : dd.store.records()) {
                if (r.split == want) chosen.push_back(r);
            }
            if (export_out.empty()) {
                for (auto const & r : chosen) out << serialize_record(r) << '\n';
            } else {
                write_dataset(export_out, chosen);
                out << "wrote " << chosen.size() << " records to " << export_out << "\n";
            }
        };
    });

    std::string status_format = "text";
    auto * f_status = forge_cmd->add_subcommand("status", "Record census and audit-log conservation check");
    f_status->add_option("--format", status_format, "text|json")->check(CLI::IsMember({"text", "json"}));
    f_status->callback([&] {
        action = [&] {
            auto cfg = resolve();
            detail::DataDir dd(cfg);
            auto census = dd.store.census();
            auto replayed = forge::replay_audit(forge::read_audit_log(cfg.audit_path()));
            std::size_t train = 0;
            std::size_t val = 0;
            for (auto const & r : dd.store.records()) {
                if (r.split == Split::Train) ++train;
                if (r.split == Split::Validation) ++val;
            }
            bool conserved = census.conserved() && census == replayed;
            if (status_format == "json") {
                nlohmann::ordered_json j = detail::to_json(census);
                j["train"] = train;
                j["validation"] = val;
                j["audit_consistent"] = conserved;
                out << j.dump(2) << "\n";
            } else {
                out << "seeds " << census.seeds << ", variants " << census.variants << ", real " << census.real
                    << "\npending " << census.pending << ", accepted " << census.accepted << ", edited "
                    << census.edited << ", discarded " << census.discarded << "\ntrain " << train << ", validation "
                    << val << "\naudit log " << (conserved ? "consistent" : "INCONSISTENT") << "\n";
            }
            require(conserved, ErrorCode::StorageError, "dataset and audit log disagree");
        };
    });

    // eval -------------------------------------------------------------------
    auto * eval_cmd = app.add_subcommand("eval", "Technical evaluation and classification reports");
    eval_cmd->require_subcommand(1);

    std::string eval_dataset;
    std::string eval_split = "validation";
    std::string model_a;
    std::string model_b;
    std::string embed_spec = "hash";
    std::string eval_out;
    std::string run_format = "md";
    auto * e_run = eval_cmd->add_subcommand("run", "Score two models on held-out conversations");
    e_run->add_option("--dataset", eval_dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
    e_run->add_option("--split", eval_split, "train|validation|all")->check(
        CLI::IsMember({"train", "validation", "all"}));
    e_run->add_option("--model-a", model_a, "Backend config for model A")->required();
    e_run->add_option("--model-b", model_b, "Backend config for model B")->required();
    e_run->add_option("--embed", embed_spec, "Embedding backend config, 'hash', or 'embed'");
    e_run->add_option("--out", eval_out, "Report file (JSON)")->required();
    e_run->add_option("--parallelism", parallelism, "Conversations scored concurrently")->check(CLI::PositiveNumber);
    e_run->add_option("--format", run_format, "Summary format: md|csv|json")->check(
        CLI::IsMember({"md", "csv", "json"}));
    e_run->callback([&] {
        action = [&] {
            auto cfg = resolve();
            auto gw = make_gateway(cfg);
            auto a = config::resolve_backend(model_a, cfg);
            auto b = config::resolve_backend(model_b, cfg);
            auto emb = config::resolve_backend(embed_spec, cfg);
            std::vector<Conversation> conversations;
            for (auto const & r : read_dataset(eval_dataset)) {
                if (eval_split == "all" || (r.split && to_string(*r.split) == eval_split)) {
                    conversations.push_back(r.conversation);
                }
            }
            auto report = eval::run_evaluation(std::move(conversations), a, b, emb, *gw, parallelism);
            auto j = eval::to_json(report);
            detail::write_file(eval_out, j.dump(2) + "\n");
            auto summary = eval::summarize(j);
            if (run_format == "json") out << nlohmann::ordered_json{{"report", eval_out}, {"wins_mean", summary.wins.mean}, {"wins_max", summary.wins.max}, {"p_mean", summary.mean_test.p_value}, {"p_max", summary.max_test.p_value}}.dump(2) << "\n";
            else if (run_format == "csv") out << eval::render_similarity_csv(summary);
            else out << eval::render_similarity_md(summary);
        };
    });

    std::string report_file;
    std::string predictions_file;
    std::string report_format = "md";
    auto * e_report = eval_cmd->add_subcommand("report", "Render an evaluation report or a classification table");
    e_report->add_option("--report", report_file, "Report JSON from 'eval run'")->check(CLI::ExistingFile);
    e_report->add_option("report_file", report_file, "Report JSON from 'eval run'")->check(CLI::ExistingFile);
    e_report->add_option("--predictions", predictions_file, "CSV with columns group,truth,predicted")
        ->check(CLI::ExistingFile);
    e_report->add_option("--format", report_format, "md|csv|json")->check(CLI::IsMember({"md", "csv", "json"}));
    e_report->callback([&] {
        if (report_file.empty() && predictions_file.empty()) {
            throw CLI::ValidationError("report", "give a report file or --predictions");
        }
        action = [&] {
            resolve();
            if (!report_file.empty()) {
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(detail::read_file(report_file));
                } catch (nlohmann::json::exception const & e) {
                    fail(ErrorCode::SchemaError, report_file + ": " + e.what());
                }
                auto s = eval::summarize(j);
                if (report_format == "json") {
                    out << nlohmann::ordered_json{{"model_a", s.model_a},
                                                  {"model_b", s.model_b},
                                                  {"mean_similarity", {s.mean_a, s.mean_b}},
                                                  {"max_similarity", {s.max_a, s.max_b}},
                                                  {"win_counts", {{"mean", s.wins.mean}, {"max", s.wins.max}}},
                                                  {"tests", {{"mean", eval::to_json(s.mean_test)},
                                                             {"max", eval::to_json(s.max_test)}}}}
                               .dump(2)
                        << "\n";
                } else {
                    out << (report_format == "csv" ? eval::render_similarity_csv(s) : eval::render_similarity_md(s));
                }
            }
            if (!predictions_file.empty()) {
                auto t = csv::Table::read(predictions_file);
                std::vector<std::string> order;
                std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> groups;
                for (std::size_t i = 0; i < t.size(); ++i) {
                    auto const & g = t.at(i, "group");
                    if (!groups.contains(g)) order.push_back(g);
                    try {
                        groups[g].first.push_back(std::stoi(t.at(i, "truth")));
                        groups[g].second.push_back(std::stoi(t.at(i, "predicted")));
                    } catch (std::exception const &) {
                        fail(ErrorCode::SchemaError, predictions_file + " row " + std::to_string(i + 2)
                                                         + ": labels must be integers");
                    }
                }
                std::vector<eval::LabelledReport> reports;
                for (auto const & g : order) {
                    reports.push_back({g, eval::classification_report(groups[g].first, groups[g].second)});
                }
                if (report_format == "json") {
                    nlohmann::ordered_json j = nlohmann::ordered_json::object();
                    for (auto const & r : reports) j[r.group] = eval::to_json(r.report);
                    out << j.dump(2) << "\n";
                } else {
                    out << (report_format == "csv" ? eval::render_classification_csv(reports)
                                                   : eval::render_classification_md(reports));
                }
            }
        };
    });

    std::vector<std::string> count_groups;
    std::string confusion_format = "md";
    auto * e_conf = eval_cmd->add_subcommand("confusion", "Classification table from confusion counts");
    e_conf->add_option("--group", count_groups, "name=TP0,FN0,TP1,FN1 (repeatable)")->required();
    e_conf->add_option("--format", confusion_format, "md|csv|json")->check(CLI::IsMember({"md", "csv", "json"}));
    e_conf->callback([&] {
        action = [&] {
            resolve();
            std::vector<eval::LabelledReport> reports;
            for (auto const & spec : count_groups) {
                auto eq = spec.find('=');
                require(eq != std::string::npos, ErrorCode::InvalidInput, "group '" + spec + "' needs name=counts");
                std::vector<std::size_t> n;
                std::stringstream ss(spec.substr(eq + 1));
                std::string part;
                while (std::getline(ss, part, ',')) {
                    try {
                        n.push_back(std::stoul(part));
                    } catch (std::exception const &) {
                        fail(ErrorCode::InvalidInput, "invalid count '" + part + "'");
                    }
                }
                require(n.size() == 4, ErrorCode::InvalidInput, "group '" + spec + "' needs four counts");
                auto [truth, pred] = eval::labels_from_counts(n[0], n[1], n[2], n[3]);
                reports.push_back({spec.substr(0, eq), eval::classification_report(truth, pred)});
            }
            if (confusion_format == "json") {
                nlohmann::ordered_json j = nlohmann::ordered_json::object();
                for (auto const & r : reports) j[r.group] = eval::to_json(r.report);
                out << j.dump(2) << "\n";
            } else {
                out << (confusion_format == "csv" ? eval::render_classification_csv(reports)
                                                  : eval::render_classification_md(reports));
            }
        };
    });

    // stats ------------------------------------------------------------------
    auto * stats_cmd = app.add_subcommand("stats", "Regression tables from survey exports");
    stats_cmd->require_subcommand(1);

    std::string responses_file;
    std::string demographics_file;
    std::string rows_out;
    std::string helpful_over = "all";
    auto * s_encode = stats_cmd->add_subcommand("encode", "Encode a survey export into participant rows");
    s_encode->add_option("--responses", responses_file, "Survey export CSV")->required()->check(CLI::ExistingFile);
    s_encode->add_option("--demographics", demographics_file, "Demographics CSV")->required()->check(
        CLI::ExistingFile);
    s_encode->add_option("--out", rows_out, "Rows CSV")->required();
    s_encode->add_option("--helpful-over", helpful_over, "all|scam: scenarios averaged into helpful_overall")
        ->check(CLI::IsMember({"all", "scam"}));
    s_encode->callback([&] {
        action = [&] {
            resolve();
            auto rows = stats::encode_rows(csv::Table::read(responses_file), csv::Table::read(demographics_file),
                                           helpful_over == "scam" ? stats::HelpfulAggregation::ScamScenarios
                                                                  : stats::HelpfulAggregation::AllScenarios);
            detail::write_file(rows_out, stats::rows_to_csv(rows));
            out << "encoded " << rows.size() << " participants\n";
        };
    });

    std::string rows_file;
    std::string dependent = "accuracy_overall";
    std::string table_family;
    std::string table_format = "md";
    auto * s_regress = stats_cmd->add_subcommand("regress", "Five-column stepwise OLS table");
    s_regress->add_option("--rows", rows_file, "Rows CSV from 'stats encode'")->required()->check(CLI::ExistingFile);
    s_regress->add_option("--dependent", dependent, "Dependent variable");
    s_regress->add_option("--table", table_family, "accuracy|helpful")->check(CLI::IsMember({"accuracy", "helpful"}));
    s_regress->add_option("--format", table_format, "md|tex|csv|json")->check(
        CLI::IsMember({"md", "tex", "csv", "json"}));
    s_regress->callback([&] {
        action = [&] {
            resolve();
            require(table_family.empty() || dependent.starts_with(table_family + "_"), ErrorCode::InvalidInput,
                    "dependent '" + dependent + "' does not belong to the " + table_family + " table");
            auto rows = stats::rows_from_table(csv::Table::read(rows_file));
            auto table = stats::run_table(std::move(rows), stats::table_spec(dependent));
            if (table_format == "json") out << stats::to_json(table).dump(2) << "\n";
            else out << stats::render_table(table, stats::parse_table_format(table_format));
        };
    });

    // survey -----------------------------------------------------------------
    auto * survey_cmd = app.add_subcommand("survey", "Offline survey administration");
    survey_cmd->require_subcommand(1);
    std::size_t n_keys = 0;
    std::string keys_format = "text";
    auto * v_keys = survey_cmd->add_subcommand("keys", "Issue survey keys");
    v_keys->add_option("--n", n_keys, "Number of keys")->required();
    v_keys->add_option("--format", keys_format, "text|json")->check(CLI::IsMember({"text", "json"}));
    v_keys->callback([&] {
        action = [&] {
            auto cfg = resolve();
            std::filesystem::create_directories(cfg.data_dir);
            survey::Service svc(survey::ServiceOptions{cfg.seed, std::nullopt, std::nullopt}, std::make_unique<survey::FileEventStore>(cfg.events_path()));
            auto keys = svc.issue_keys(n_keys);
            if (keys_format == "json") {
                nlohmann::ordered_json j = nlohmann::ordered_json::array();
                for (auto const & k : keys) j.push_back(k.token);
                out << j.dump(2) << "\n";
            } else {
                for (auto const & k : keys) out << k.token << "\n";
            }
        };
    });

    std::string component_name;
    std::string survey_out;
    auto * v_export = survey_cmd->add_subcommand("export", "Anonymized responses for one component");
    v_export->add_option("--component", component_name, "anticipate|simulate|reason")->required()->check(
        CLI::IsMember({"anticipate", "simulate", "reason"}));
    v_export->add_option("--out", survey_out, "Output CSV (default stdout)");
    v_export->callback([&] {
        action = [&] {
            auto cfg = resolve();
            survey::Service svc(survey::ServiceOptions{cfg.seed, std::nullopt, std::nullopt}, std::make_unique<survey::FileEventStore>(cfg.events_path()));
            auto csv_text = svc.export_csv(survey::parse_component(component_name));
            if (survey_out.empty()) out << csv_text;
            else detail::write_file(survey_out, csv_text);
        };
    });

    std::string tally_file;
    std::string tally_format = "md";
    auto * v_tally = survey_cmd->add_subcommand("tally", "Context-suited counts per model arm from a simulate export");
    v_tally->add_option("--export", tally_file, "Simulate export CSV")->required()->check(CLI::ExistingFile);
    v_tally->add_option("--format", tally_format, "md|json")->check(CLI::IsMember({"md", "json"}));
    v_tally->callback([&] {
        action = [&] {
            resolve();
            auto t = survey::tally_simulate(csv::Table::read(tally_file));
            if (tally_format == "json") out << survey::to_json(t).dump(2) << "\n";
            else out << survey::render_tally_md(t);
        };
    });

    // serve ------------------------------------------------------------------
    int port = 0;
    std::string host = "127.0.0.1";
    std::string serve_model = "llm";
    std::string serve_reasoner = "llm";
    std::string serve_embed = "hash";
    std::string tuned_spec;
    std::string untuned_spec;
    auto * serve_cmd = app.add_subcommand("serve", "Run the survey and conversation HTTP service");
    auto * port_opt = serve_cmd->add_option("--port", port, "Listen port (0 picks a free one)");
    serve_cmd->add_option("--host", host, "Listen address");
    serve_cmd->add_option("--model", serve_model, "Scambot generation backend");
    serve_cmd->add_option("--reasoner", serve_reasoner, "Reasoning backend");
    serve_cmd->add_option("--embed", serve_embed, "Embedding backend");
    serve_cmd->add_option("--tuned", tuned_spec, "Simulate backend for the tuned arm");
    serve_cmd->add_option("--untuned", untuned_spec, "Simulate backend for the untuned arm");
    serve_cmd->callback([&] {
        action = [&] {
            if (port_opt->count() > 0) flags.port = port;
            auto cfg = resolve();
            std::filesystem::create_directories(cfg.data_dir);
            auto backend_or_placeholder = [&](std::string const & spec) {
                try {
                    return config::resolve_backend(spec, cfg);
                } catch (Error const & e) {
                    spdlog::warn("backend '{}' unavailable: {}", spec, e.detail());
                    BackendDescriptor b;
                    b.kind = BackendKind::RemoteChat;
                    b.model_name = spec;
                    return b;
                }
            };
            static Gateway gateway(cfg.gateway);
            survey::ServiceOptions opts{cfg.seed, std::nullopt, std::nullopt};
            if (!tuned_spec.empty()) opts.tuned = config::resolve_backend(tuned_spec, cfg);
            if (!untuned_spec.empty()) opts.untuned = config::resolve_backend(untuned_spec, cfg);
            survey::Service svc(std::move(opts), std::make_unique<survey::FileEventStore>(cfg.events_path()), utc_now,
                                survey::system_token_source(), gateway);
            ConversationHub hub(backend_or_placeholder(serve_model), backend_or_placeholder(serve_embed),
                                backend_or_placeholder(serve_reasoner), ScoringParams{}, gateway);
            auto token = survey::HttpServer::admin_token_from_env();
            if (token.empty()) spdlog::warn("ASR_ADMIN_TOKEN is not set; admin endpoints are disabled");
            static survey::HttpServer * running = nullptr;
            survey::HttpServer server(svc, &hub, token);
            auto bound = server.bind(host, cfg.port);
            out << "listening on http://" << host << ":" << bound << std::endl;
            running = &server;
            std::signal(SIGINT, [](int) {
                if (running) running->stop();
            });
            std::signal(SIGTERM, [](int) {
                if (running) running->stop();
            });
            server.listen_after_bind();
            running = nullptr;
        };
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (CLI::CallForHelp const &) {
        out << app.help();
        return Ok;
    } catch (CLI::CallForAllHelp const &) {
        out << app.help("", CLI::AppFormatMode::All);
        return Ok;
    } catch (CLI::ParseError const & e) {
        err << "usage error: " << e.what() << "\n" << "run 'asr --help' for usage\n";
        return UsageError;
    }

    try {
        if (action) action();
        return Ok;
    } catch (Error const & e) {
        err << nlohmann::ordered_json{{"error", std::string(to_string(e.code()))}, {"message", e.detail()}}.dump()
            << "\n";
        return DomainError;
    } catch (std::exception const & e) {
        err << nlohmann::ordered_json{{"error", "Internal"}, {"message", e.what()}}.dump() << "\n";
        return DomainError;
    }
}

inline int dispatch(int argc, char const * const * argv, std::ostream & out = std::cout,
                    std::ostream & err = std::cerr)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(std::move(args), out, err);
}

} // namespace asr::cli
