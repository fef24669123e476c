#pragma once

#include "asr/clock.hpp"
#include "asr/convo.hpp"
#include "asr/error.hpp"
#include "asr/llm/gateway.hpp"
#include "asr/llm/prompts.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace asr::forge {

enum class MutationAxis { Names, Tone, Style };

constexpr std::string_view to_string(MutationAxis a) noexcept
{
    switch (a) {
    case MutationAxis::Names: return "names";
    case MutationAxis::Tone: return "tone";
    case MutationAxis::Style: return "style";
    }
    return "names";
}

struct VariantJob
{
    DatasetRecord parent;
    std::size_t n_variants = 10;
    std::set<MutationAxis> mutation_axes{MutationAxis::Names, MutationAxis::Tone, MutationAxis::Style};
    double temperature = 0.7;
};

struct VariantOutcome
{
    std::vector<DatasetRecord> variants;
    /// Generations that did not parse as a conversation.
    std::size_t rejected = 0;
};

inline std::string variant_id(std::string const & parent_id, std::size_t k)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "-v%02zu", k);
    return parent_id + buf;
}

inline std::string axes_phrase(std::set<MutationAxis> const & axes)
{
    std::vector<std::string> parts;
    for (auto a : axes) {
        parts.emplace_back(a == MutationAxis::Names ? "names" : a == MutationAxis::Tone ? "conversational tone" : "style");
    }
    if (parts.empty()) {
        return "surface wording";
    }
    std::string out = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) {
        out += (i + 1 == parts.size()) ? " and " : ", ";
        out += parts[i];
    }
    return out;
}

/// Request for variant `k` (1-based) of the job's parent.
inline GenerationRequest variant_request(VariantJob const & job, std::size_t k)
{
    auto prompt = std::string(prompts::variant_template);
    prompt = prompts::replace_all(prompt, "{axes}", axes_phrase(job.mutation_axes));
    prompt = prompts::replace_all(prompt, "{index}", std::to_string(k));
    prompt = prompts::replace_all(prompt, "{count}", std::to_string(job.n_variants));
    GenerationRequest req;
    req.system_prompt = std::move(prompt);
    Message m;
    m.role = Role::SelfUser;
    m.text = render_dialogue(job.parent.conversation);
    req.context.push_back(std::move(m));
    req.temperature = job.temperature;
    req.max_tokens = 1024;
    req.seed = static_cast<std::int64_t>(k);
    return req;
}

/// Generates `n_variants` pending variants of a seed or real record. Outputs
/// that do not parse as a "Scammer:/Victim:" dialogue are counted as rejected.
inline VariantOutcome generate_variants(VariantJob const & job, BackendDescriptor const & gen, Gateway & gateway = Gateway::shared())
{
    require(job.n_variants >= 1, ErrorCode::PreconditionFailed, "n_variants must be at least 1");
    require(job.parent.source != RecordSource::Variant, ErrorCode::PreconditionFailed,
            "'" + job.parent.id() + "' is a variant; variants of variants are not allowed");
    require(job.parent.vetting != Vetting::Discarded, ErrorCode::PreconditionFailed,
            "'" + job.parent.id() + "' was discarded");

    VariantOutcome out;
    for (std::size_t k = 1; k <= job.n_variants; ++k) {
        std::string reply;
        try {
            reply = gateway.generate_reply(gen, variant_request(job, k));
        } catch (Error const & e) {
            if (e.code() != ErrorCode::EmptyGeneration) {
                throw;
            }
        }
        auto turns = parse_dialogue(reply);
        if (turns.empty()) {
            ++out.rejected;
            spdlog::warn("variant {} of '{}' rejected: not a conversation", k, job.parent.id());
            continue;
        }
        DatasetRecord r;
        r.conversation = merge_consecutive_turns(make_conversation(variant_id(job.parent.id(), k), std::move(turns),
                                                                   job.parent.conversation.category,
                                                                   job.parent.conversation.is_scam));
        r.source = RecordSource::Variant;
        r.parent_id = job.parent.id();
        r.vetting = Vetting::Pending;
        r.template_version = prompts::variant_template_version;
        out.variants.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Vetting store

struct Accept {};
struct Discard {};
struct Edit
{
    std::string transcript;
};
using VetDecision = std::variant<Accept, Edit, Discard>;

struct SplitPlan
{
    std::size_t train_count = 812;
    std::size_t validation_count = 90;
    std::uint64_t rng_seed = 0;
    /// Keep each seed and its variants on one side of the split.
    bool family_exclusion = true;
};

/// Status tallies used by the conservation check.
struct Census
{
    std::size_t seeds = 0, variants = 0, real = 0;
    std::size_t pending = 0, accepted = 0, edited = 0, discarded = 0;

    [[nodiscard]] bool conserved() const noexcept
    {
        return seeds + variants + real == pending + accepted + edited + discarded;
    }

    friend bool operator==(Census const &, Census const &) = default;
};

/// Single-writer dataset store with an append-only audit log. Every mutation
/// appends one decision object per line to the audit log.
class Store
{
public:
    explicit Store(std::optional<std::string> audit_path = std::nullopt, Clock clock = utc_now)
    : audit_path_(std::move(audit_path))
    , clock_(std::move(clock))
    { }


    /// Loads records without auditing (they were audited when first added).
    void load(std::vector<DatasetRecord> records)
    {
        std::lock_guard lock(mutex_);
        for (auto & r : records) {
            insert_locked(std::move(r));
        }
    }

    /// Adds records, checking id uniqueness and variant lineage.
    void add(std::vector<DatasetRecord> records, std::string const & actor = "system")
    {
        std::lock_guard lock(mutex_);
        for (auto & r : records) {
            validate(r);
            require(!index_.contains(r.id()), ErrorCode::DuplicateId, "duplicate id '" + r.id() + "'");
            if (r.source == RecordSource::Variant) {
                auto it = index_.find(*r.parent_id);
                require(it != index_.end(), ErrorCode::NotFound, "variant '" + r.id() + "' has unknown parent '" + *r.parent_id + "'");
                require(records_[it->second].source != RecordSource::Variant, ErrorCode::PreconditionFailed,
                        "variant '" + r.id() + "' has a variant parent");
            }
            nlohmann::ordered_json entry;
            entry["action"] = "add";
            entry["record_id"] = r.id();
            entry["source"] = std::string(to_string(r.source));
            entry["parent_id"] = r.parent_id ? nlohmann::ordered_json(*r.parent_id) : nlohmann::ordered_json(nullptr);
            audit_locked(actor, std::move(entry));
            insert_locked(std::move(r));
        }
    }

    DatasetRecord vet(std::string const & record_id, VetDecision const & decision, std::string const & actor = "reviewer")
    {
        std::lock_guard lock(mutex_);
        auto it = index_.find(record_id);
        require(it != index_.end(), ErrorCode::NotFound, "no record '" + record_id + "'");
        auto & r = records_[it->second];
        require(r.vetting == Vetting::Pending, ErrorCode::AlreadyVetted,
                "'" + record_id + "' is already " + std::string(to_string(r.vetting)));

        nlohmann::ordered_json entry;
        entry["action"] = "vet";
        entry["record_id"] = record_id;
        if (std::holds_alternative<Accept>(decision)) {
            r.vetting = Vetting::Accepted;
            entry["decision"] = "accept";
        } else if (std::holds_alternative<Discard>(decision)) {
            r.vetting = Vetting::Discarded;
            entry["decision"] = "discard";
        } else {
            auto turns = parse_dialogue(std::get<Edit>(decision).transcript);
            require(!turns.empty(), ErrorCode::InvalidConversation, "edited transcript for '" + record_id + "' is empty");
            auto edited = merge_consecutive_turns(
                make_conversation(r.id(), std::move(turns), r.conversation.category, r.conversation.is_scam));
            validate(edited);
            r.conversation = std::move(edited);
            r.vetting = Vetting::Edited;
            entry["decision"] = "edit";
            entry["turns"] = r.conversation.messages.size();
        }
        audit_locked(actor, std::move(entry));
        return r;
    }

    /// Assigns train/validation to every accepted or edited record.
    std::vector<DatasetRecord> split(SplitPlan const & plan, std::string const & actor = "system");

    [[nodiscard]] std::vector<DatasetRecord> records() const
    {
        std::lock_guard lock(mutex_);
        return records_;
    }

    [[nodiscard]] std::optional<DatasetRecord> get(std::string const & id) const
    {
        std::lock_guard lock(mutex_);
        auto it = index_.find(id);
        if (it == index_.end()) {
            return std::nullopt;
        }
        return records_[it->second];
    }

    [[nodiscard]] Census census() const
    {
        std::lock_guard lock(mutex_);
        return census_of(records_);
    }

    static Census census_of(std::vector<DatasetRecord> const & records)
    {
        Census c;
        for (auto const & r : records) {
            switch (r.source) {
            case RecordSource::Seed: ++c.seeds; break;
            case RecordSource::Variant: ++c.variants; break;
            case RecordSource::Real: ++c.real; break;
            }
            switch (r.vetting) {
            case Vetting::Pending: ++c.pending; break;
            case Vetting::Accepted: ++c.accepted; break;
            case Vetting::Edited: ++c.edited; break;
            case Vetting::Discarded: ++c.discarded; break;
            }
        }
        return c;
    }

    [[nodiscard]] std::vector<nlohmann::ordered_json> audit_entries() const
    {
        std::lock_guard lock(mutex_);
        return audit_;
    }

    /// Continues sequence numbering after an existing audit log.
    void resume_audit_sequence(std::size_t next_seq)
    {
        std::lock_guard lock(mutex_);
        next_seq_ = next_seq;
    }

private:
    void insert_locked(DatasetRecord r)
    {
        require(!index_.contains(r.id()), ErrorCode::DuplicateId, "duplicate id '" + r.id() + "'");
        index_.emplace(r.id(), records_.size());
        records_.push_back(std::move(r));
    }

    void audit_locked(std::string const & actor, nlohmann::ordered_json entry)
    {
        nlohmann::ordered_json line;
        line["seq"] = next_seq_++;
        line["at"] = clock_();
        line["actor"] = actor;
        for (auto & [k, v] : entry.items()) {
            line[k] = v;
        }
        if (audit_path_) {
            std::ofstream out(*audit_path_, std::ios::app);
            require(out.good(), ErrorCode::StorageError, "cannot append to audit log '" + *audit_path_ + "'");
            out << line.dump() << '\n';
        }
        audit_.push_back(std::move(line));
    }

    std::optional<std::string> audit_path_;
    Clock clock_;
    mutable std::mutex mutex_;
    std::vector<DatasetRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<nlohmann::ordered_json> audit_;
    std::size_t next_seq_ = 0;
};

/// Root of a record's family: its parent for variants, itself otherwise.
inline std::string family_of(DatasetRecord const & r)
{
    return r.parent_id.value_or(r.id());
}

/// Seeded partition of the kept (accepted/edited) records. With family
/// exclusion on, whole families are assigned so no validation record shares
/// lineage with a training record; the validation side is chosen by an exact
/// subset-sum over shuffled family sizes.
inline std::vector<DatasetRecord> split(std::vector<DatasetRecord> records, SplitPlan const & plan)
{
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].split.reset();
        if (is_kept(records[i].vetting)) {
            pool.push_back(i);
        }
    }
    require(plan.train_count + plan.validation_count == pool.size(), ErrorCode::PlanMismatch,
            "plan (" + std::to_string(plan.train_count) + ", " + std::to_string(plan.validation_count)
                + ") does not match " + std::to_string(pool.size()) + " accepted records");

    std::mt19937_64 rng(plan.rng_seed);
    std::set<std::size_t> validation;

    if (!plan.family_exclusion) {
        std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) { return records[a].id() < records[b].id(); });
        std::shuffle(pool.begin(), pool.end(), rng);
        validation.insert(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(plan.validation_count));
    } else {
        std::map<std::string, std::vector<std::size_t>> families;
        for (auto i : pool) {
            families[family_of(records[i])].push_back(i);
        }
        std::vector<std::vector<std::size_t> const *> order;
        for (auto const & [root, members] : families) {
            order.push_back(&members);
        }
        std::shuffle(order.begin(), order.end(), rng);

        // reach[s] = index+1 of the family whose addition first reached sum s.
        auto const target = plan.validation_count;
        std::vector<std::size_t> reach(target + 1, 0);
        std::vector<std::size_t> prev(target + 1, 0);
        std::vector<bool> reachable(target + 1, false);
        reachable[0] = true;
        for (std::size_t f = 0; f < order.size() && !reachable[target]; ++f) {
            auto const size = order[f]->size();
            for (std::size_t s = target + 1; s-- > size;) {
                if (!reachable[s] && reachable[s - size]) {
                    reachable[s] = true;
                    reach[s] = f + 1;
                    prev[s] = s - size;
                }
            }
        }
        require(reachable[target], ErrorCode::PlanMismatch,
                "no lineage-disjoint selection of families sums to " + std::to_string(target) + " validation records");
        for (std::size_t s = target; s > 0; s = prev[s]) {
            for (auto i : *order[reach[s] - 1]) {
                validation.insert(i);
            }
        }
    }

    std::vector<DatasetRecord> assigned;
    assigned.reserve(pool.size());
    for (auto i : pool) {
        records[i].split = validation.contains(i) ? Split::Validation : Split::Train;
        assigned.push_back(records[i]);
    }
    return assigned;
}

inline std::vector<DatasetRecord> Store::split(SplitPlan const & plan, std::string const & actor)
{
    std::lock_guard lock(mutex_);
    auto assigned = forge::split(records_, plan);
    std::unordered_map<std::string, Split> by_id;
    for (auto const & r : assigned) {
        by_id.emplace(r.id(), *r.split);
    }
    std::size_t train = 0, validation = 0;
    for (auto & r : records_) {
        auto it = by_id.find(r.id());
        r.split = it == by_id.end() ? std::nullopt : std::optional<Split>(it->second);
        if (r.split) {
            (*r.split == Split::Train ? train : validation) += 1;
        }
    }
    nlohmann::ordered_json entry;
    entry["action"] = "split";
    entry["rng_seed"] = plan.rng_seed;
    entry["family_exclusion"] = plan.family_exclusion;
    entry["train"] = train;
    entry["validation"] = validation;
    audit_locked(actor, std::move(entry));
    return assigned;
}

/// Replays an audit log into a census. Comparing it with the store's census
/// checks that every record and status change was audited.
inline Census replay_audit(std::vector<nlohmann::json> const & entries)
{
    Census c;
    std::unordered_map<std::string, Vetting> status;
    for (auto const & e : entries) {
        auto const action = e.at("action").get<std::string>();
        if (action == "add") {
            auto const source = parse_source(e.at("source").get<std::string>());
            auto const id = e.at("record_id").get<std::string>();
            require(!status.contains(id), ErrorCode::DuplicateId, "audit log adds '" + id + "' twice");
            (source == RecordSource::Seed ? c.seeds : source == RecordSource::Variant ? c.variants : c.real) += 1;
            status.emplace(id, Vetting::Pending);
            ++c.pending;
        } else if (action == "vet") {
            auto const id = e.at("record_id").get<std::string>();
            auto it = status.find(id);
            require(it != status.end(), ErrorCode::NotFound, "audit log vets unknown record '" + id + "'");
            require(it->second == Vetting::Pending, ErrorCode::AlreadyVetted, "audit log vets '" + id + "' twice");
            --c.pending;
            auto const d = e.at("decision").get<std::string>();
            it->second = d == "accept" ? Vetting::Accepted : d == "discard" ? Vetting::Discarded : Vetting::Edited;
            (d == "accept" ? c.accepted : d == "discard" ? c.discarded : c.edited) += 1;
        }
    }
    return c;
}

inline std::vector<nlohmann::json> read_audit_log(std::string const & path)
{
    std::vector<nlohmann::json> entries;
    std::ifstream in(path);
    if (!in.good()) {
        return entries;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::is_blank(line)) {
            continue;
        }
        try {
            entries.push_back(nlohmann::json::parse(line));
        } catch (nlohmann::json::exception const & e) {
            fail(ErrorCode::ParseError, "audit line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return entries;
}

/// Reads a seed file: every record becomes a pending Seed (or stays Real if
/// marked real) with no split.
inline std::vector<DatasetRecord> import_seeds(std::string const & path)
{
    auto records = read_dataset(path);
    if (records.empty()) {
        spdlog::warn("seed file '{}' is empty", path);
    }
    for (auto & r : records) {
        if (r.source != RecordSource::Real) {
            r.source = RecordSource::Seed;
        }
        r.parent_id.reset();
        r.vetting = Vetting::Pending;
        r.split.reset();
        r.template_version.reset();
    }
    return records;
}

/// Generates variants for many parents concurrently, `parallelism` at a time.
/// Results keep the parents' order.
inline std::vector<VariantOutcome> generate_all_variants(
    std::vector<DatasetRecord> const & parents,
    std::size_t per_parent,
    BackendDescriptor const & gen,
    Gateway & gateway = Gateway::shared(),
    std::size_t parallelism = 4,
    double temperature = 0.7)
{
    std::vector<VariantOutcome> outcomes(parents.size());
    parallelism = std::max<std::size_t>(1, parallelism);
    for (std::size_t start = 0; start < parents.size(); start += parallelism) {
        std::vector<std::future<void>> batch;
        for (std::size_t i = start; i < std::min(parents.size(), start + parallelism); ++i) {
            batch.push_back(std::async(std::launch::async, [&, i] {
                VariantJob job;
                job.parent = parents[i];
                job.n_variants = per_parent;
                job.temperature = temperature;
                outcomes[i] = generate_variants(job, gen, gateway);
            }));
        }
        for (auto & f : batch) {
            f.get();
        }
    }
    return outcomes;
}

} // namespace asr::forge
