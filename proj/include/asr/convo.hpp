#pragma once

#include "asr/error.hpp"
#include "asr/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace asr {

enum class ScamCategory { Authority, Job, Love, Investment };

inline constexpr ScamCategory all_categories[] = {
    ScamCategory::Authority, ScamCategory::Job, ScamCategory::Love, ScamCategory::Investment};

constexpr std::string_view to_string(ScamCategory c) noexcept
{
    switch (c) {
    case ScamCategory::Authority: return "authority";
    case ScamCategory::Job: return "job";
    case ScamCategory::Love: return "love";
    case ScamCategory::Investment: return "investment";
    }
    return "authority";
}

inline ScamCategory parse_category(std::string_view label)
{
    for (auto c : all_categories) {
        if (to_string(c) == label) {
            return c;
        }
    }
    fail(ErrorCode::ParseError, "unknown scam category '" + std::string(label) + "'");
}

/// Who authored a message. Interjections are scambot output shown only to the
/// user; they never count as conversation turns.
enum class Role { Counterpart, SelfUser, Interjection };

constexpr std::string_view to_string(Role r) noexcept
{
    switch (r) {
    case Role::Counterpart: return "counterpart";
    case Role::SelfUser: return "self";
    case Role::Interjection: return "interjection";
    }
    return "counterpart";
}

struct Message
{
    std::size_t index = 0;
    Role role = Role::Counterpart;
    std::string text;
    std::optional<std::int64_t> timestamp_ms;

    friend bool operator==(Message const &, Message const &) = default;
};

struct Conversation
{
    std::string id;
    std::optional<ScamCategory> category;
    std::vector<Message> messages;
    std::optional<bool> is_scam;

    [[nodiscard]] bool empty() const noexcept { return messages.empty(); }

    /// Appends with the next dense index.
    Message const & append(Role role, std::string text)
    {
        auto idx = messages.empty() ? 0 : messages.back().index + 1;
        messages.push_back(Message{idx, role, std::move(text), std::nullopt});
        return messages.back();
    }

    friend bool operator==(Conversation const &, Conversation const &) = default;
};

/// Builds a conversation from (role, text) pairs with dense indexes.
inline Conversation make_conversation(
    std::string id,
    std::vector<std::pair<Role, std::string>> turns,
    std::optional<ScamCategory> category = std::nullopt,
    std::optional<bool> is_scam = std::nullopt)
{
    Conversation c{std::move(id), category, {}, is_scam};
    c.messages.reserve(turns.size());
    for (auto & [role, txt] : turns) {
        c.append(role, std::move(txt));
    }
    return c;
}

/// Checks the structural invariants: non-blank text, strictly increasing
/// indexes, category present on labelled scams.
inline void validate(Conversation const & c)
{
    for (std::size_t i = 0; i < c.messages.size(); ++i) {
        auto const & m = c.messages[i];
        require(!text::is_blank(m.text), ErrorCode::InvalidConversation,
                "message " + std::to_string(m.index) + " of '" + c.id + "' is blank");
        if (i > 0) {
            require(m.index > c.messages[i - 1].index, ErrorCode::InvalidConversation,
                    "message indexes of '" + c.id + "' are not strictly increasing");
        }
    }
    if (c.is_scam.value_or(false)) {
        require(c.category.has_value(), ErrorCode::InvalidConversation,
                "scam conversation '" + c.id + "' has no category");
    }
}

/// Collapses runs of same-role non-interjection messages into one message
/// joined by '\n' and renumbers every message densely from 0. Interjections
/// keep their relative position.
inline Conversation merge_consecutive_turns(Conversation const & conversation)
{
    require(!conversation.empty(), ErrorCode::InvalidConversation,
            "cannot merge an empty conversation");
    Conversation out{conversation.id, conversation.category, {}, conversation.is_scam};
    std::optional<std::size_t> last_turn;
    for (auto const & m : conversation.messages) {
        if (m.role != Role::Interjection && last_turn && out.messages[*last_turn].role == m.role) {
            auto & target = out.messages[*last_turn];
            target.text += '\n';
            target.text += m.text;
            continue;
        }
        out.messages.push_back(m);
        if (m.role != Role::Interjection) {
            last_turn = out.messages.size() - 1;
        }
    }
    for (std::size_t i = 0; i < out.messages.size(); ++i) {
        out.messages[i].index = i;
    }
    return out;
}

/// The last `n_turns` non-interjection messages strictly before the message
/// whose index is `upto_index`, oldest first.
inline std::vector<Message>
context_window(Conversation const & conversation, std::size_t upto_index, std::size_t n_turns = 2)
{
    require(n_turns >= 1, ErrorCode::PreconditionFailed, "n_turns must be at least 1");
    require(!conversation.empty() && upto_index <= conversation.messages.back().index,
            ErrorCode::IndexError,
            "index " + std::to_string(upto_index) + " is past the end of '" + conversation.id + "'");
    std::vector<Message> window;
    for (auto it = conversation.messages.rbegin(); it != conversation.messages.rend(); ++it) {
        if (it->index >= upto_index || it->role == Role::Interjection) {
            continue;
        }
        window.push_back(*it);
        if (window.size() == n_turns) {
            break;
        }
    }
    std::reverse(window.begin(), window.end());
    return window;
}

/// Locates a message by its index field.
inline Message const & message_at(Conversation const & conversation, std::size_t index)
{
    auto it = std::find_if(conversation.messages.begin(), conversation.messages.end(),
                           [&](Message const & m) { return m.index == index; });
    require(it != conversation.messages.end(), ErrorCode::IndexError,
            "no message with index " + std::to_string(index) + " in '" + conversation.id + "'");
    return *it;
}

/// "Person A: ..." / "Person B: ..." lines; Counterpart is Person A.
inline std::string render_transcript(Conversation const & conversation)
{
    std::string out;
    for (auto const & m : conversation.messages) {
        if (m.role == Role::Interjection) {
            continue;
        }
        if (!out.empty()) {
            out += '\n';
        }
        out += m.role == Role::Counterpart ? "Person A: " : "Person B: ";
        out += m.text;
    }
    return out;
}

/// Dataset-style transcript: "Scammer: ..." / "Victim: ..." lines.
inline std::string render_dialogue(Conversation const & conversation)
{
    std::string out;
    for (auto const & m : conversation.messages) {
        if (m.role == Role::Interjection) {
            continue;
        }
        if (!out.empty()) {
            out += '\n';
        }
        out += m.role == Role::Counterpart ? "Scammer: " : "Victim: ";
        out += m.text;
    }
    return out;
}

/// Parses "Scammer:/Victim:" (or "Person A:/Person B:") lines. Continuation
/// lines without a speaker prefix join the previous turn. Returns no turns
/// when no speaker-prefixed line exists.
inline std::vector<std::pair<Role, std::string>> parse_dialogue(std::string_view transcript)
{
    static constexpr std::pair<std::string_view, Role> prefixes[] = {
        {"scammer:", Role::Counterpart},
        {"victim:", Role::SelfUser},
        {"person a:", Role::Counterpart},
        {"person b:", Role::SelfUser},
    };
    std::vector<std::pair<Role, std::string>> turns;
    for (auto raw : text::split_lines(transcript)) {
        auto line = text::trim(raw);
        if (line.empty()) {
            continue;
        }
        bool matched = false;
        for (auto const & [prefix, role] : prefixes) {
            if (text::starts_with_ci(line, prefix)) {
                auto body = text::trim(line.substr(prefix.size()));
                turns.emplace_back(role, std::string(body));
                matched = true;
                break;
            }
        }
        if (!matched && !turns.empty()) {
            turns.back().second += '\n';
            turns.back().second += std::string(line);
        }
    }
    std::erase_if(turns, [](auto const & t) { return text::is_blank(t.second); });
    return turns;
}

// ---------------------------------------------------------------------------
// Dataset records

enum class RecordSource { Seed, Variant, Real };
enum class Vetting { Pending, Accepted, Edited, Discarded };
enum class Split { Train, Validation };

constexpr std::string_view to_string(RecordSource s) noexcept
{
    switch (s) {
    case RecordSource::Seed: return "seed";
    case RecordSource::Variant: return "variant";
    case RecordSource::Real: return "real";
    }
    return "seed";
}

constexpr std::string_view to_string(Vetting v) noexcept
{
    switch (v) {
    case Vetting::Pending: return "pending";
    case Vetting::Accepted: return "accepted";
    case Vetting::Edited: return "edited";
    case Vetting::Discarded: return "discarded";
    }
    return "pending";
}

constexpr std::string_view to_string(Split s) noexcept
{
    return s == Split::Train ? "train" : "validation";
}

inline RecordSource parse_source(std::string_view s)
{
    if (s == "seed") return RecordSource::Seed;
    if (s == "variant") return RecordSource::Variant;
    if (s == "real") return RecordSource::Real;
    fail(ErrorCode::ParseError, "unknown source '" + std::string(s) + "'");
}

inline Vetting parse_vetting(std::string_view s)
{
    if (s == "pending") return Vetting::Pending;
    if (s == "accepted") return Vetting::Accepted;
    if (s == "edited") return Vetting::Edited;
    if (s == "discarded") return Vetting::Discarded;
    fail(ErrorCode::ParseError, "unknown vetting status '" + std::string(s) + "'");
}

inline Split parse_split(std::string_view s)
{
    if (s == "train") return Split::Train;
    if (s == "validation") return Split::Validation;
    fail(ErrorCode::ParseError, "unknown split '" + std::string(s) + "'");
}

inline bool is_kept(Vetting v) noexcept
{
    return v == Vetting::Accepted || v == Vetting::Edited;
}

struct DatasetRecord
{
    Conversation conversation;
    RecordSource source = RecordSource::Seed;
    std::optional<std::string> parent_id;
    Vetting vetting = Vetting::Pending;
    std::optional<Split> split;
    /// Version of the variant prompt template that produced this record.
    std::optional<int> template_version;

    [[nodiscard]] std::string const & id() const noexcept { return conversation.id; }

    friend bool operator==(DatasetRecord const &, DatasetRecord const &) = default;
};

/// Record-local invariants. Parent existence is checked by the store.
inline void validate(DatasetRecord const & r)
{
    validate(r.conversation);
    require(!r.conversation.empty(), ErrorCode::InvalidConversation,
            "record '" + r.id() + "' has no turns");
    require(r.parent_id.has_value() == (r.source == RecordSource::Variant),
            ErrorCode::SchemaError,
            "record '" + r.id() + "': parent_id must be set exactly for variants");
    require(!r.split || is_kept(r.vetting), ErrorCode::SchemaError,
            "record '" + r.id() + "': split assigned to a record that is not accepted or edited");
}

namespace detail {

inline nlohmann::ordered_json nullable(std::optional<std::string_view> v)
{
    return v ? nlohmann::ordered_json(std::string(*v)) : nlohmann::ordered_json(nullptr);
}

} // namespace detail

/// Canonical object for one dataset line. Field order is fixed.
inline nlohmann::ordered_json to_json(DatasetRecord const & r)
{
    using nlohmann::ordered_json;
    ordered_json j;
    j["id"] = r.id();
    j["category"] = r.conversation.category
                        ? ordered_json(std::string(to_string(*r.conversation.category)))
                        : ordered_json(nullptr);
    j["is_scam"] = r.conversation.is_scam ? ordered_json(*r.conversation.is_scam) : ordered_json(nullptr);
    j["source"] = std::string(to_string(r.source));
    j["parent_id"] = r.parent_id ? ordered_json(*r.parent_id) : ordered_json(nullptr);
    j["vetting"] = std::string(to_string(r.vetting));
    j["split"] = r.split ? ordered_json(std::string(to_string(*r.split))) : ordered_json(nullptr);
    if (r.template_version) {
        j["template_version"] = *r.template_version;
    }
    auto turns = ordered_json::array();
    for (auto const & m : r.conversation.messages) {
        if (m.role == Role::Interjection) {
            continue;
        }
        ordered_json t;
        t["role"] = m.role == Role::Counterpart ? "scammer" : "victim";
        t["text"] = m.text;
        turns.push_back(std::move(t));
    }
    j["turns"] = std::move(turns);
    return j;
}

inline std::string serialize_record(DatasetRecord const & r)
{
    return to_json(r).dump();
}

/// Parses one dataset line. Consecutive same-role turns are merged on the way
/// in, so parsed records are canonical.
inline DatasetRecord parse_record(std::string_view line, std::size_t line_no = 0)
{
    auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (nlohmann::json::exception const & e) {
        fail(ErrorCode::ParseError, where() + e.what());
    }
    try {
        require(j.is_object(), ErrorCode::ParseError, where() + "expected an object");
        DatasetRecord r;
        r.conversation.id = j.at("id").get<std::string>();
        require(!r.conversation.id.empty(), ErrorCode::ParseError, where() + "empty id");
        if (auto const & c = j.at("category"); !c.is_null()) {
            r.conversation.category = parse_category(c.get<std::string>());
        }
        if (auto const & s = j.at("is_scam"); !s.is_null()) {
            r.conversation.is_scam = s.get<bool>();
        }
        r.source = parse_source(j.at("source").get<std::string>());
        if (auto const & p = j.at("parent_id"); !p.is_null()) {
            r.parent_id = p.get<std::string>();
        }
        r.vetting = parse_vetting(j.at("vetting").get<std::string>());
        if (auto const & s = j.at("split"); !s.is_null()) {
            r.split = parse_split(s.get<std::string>());
        }
        if (auto it = j.find("template_version"); it != j.end() && !it->is_null()) {
            r.template_version = it->get<int>();
        }
        for (auto const & t : j.at("turns")) {
            auto role_label = t.at("role").get<std::string>();
            Role role;
            if (role_label == "scammer") {
                role = Role::Counterpart;
            } else if (role_label == "victim") {
                role = Role::SelfUser;
            } else {
                fail(ErrorCode::ParseError, where() + "unknown role '" + role_label + "'");
            }
            r.conversation.append(role, t.at("text").get<std::string>());
        }
        require(!r.conversation.empty(), ErrorCode::ParseError, where() + "record has no turns");
        r.conversation = merge_consecutive_turns(r.conversation);
        validate(r);
        return r;
    } catch (Error const & e) {
        if (e.detail().starts_with("line ")) {
            throw;
        }
        fail(ErrorCode::ParseError, where() + e.detail());
    } catch (nlohmann::json::exception const & e) {
        fail(ErrorCode::ParseError, where() + e.what());
    }
}

/// Reads a dataset file. Blank lines are skipped; duplicate ids are rejected.
inline std::vector<DatasetRecord> read_dataset(std::string const & path)
{
    std::ifstream in(path);
    require(in.good(), ErrorCode::StorageError, "cannot open '" + path + "'");
    std::vector<DatasetRecord> records;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::is_blank(line)) {
            continue;
        }
        auto r = parse_record(line, line_no);
        require(ids.insert(r.id()).second, ErrorCode::DuplicateId,
                "line " + std::to_string(line_no) + ": duplicate id '" + r.id() + "'");
        records.push_back(std::move(r));
    }
    return records;
}

inline void write_dataset(std::string const & path, std::vector<DatasetRecord> const & records)
{
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), ErrorCode::StorageError, "cannot write '" + path + "'");
    for (auto const & r : records) {
        out << serialize_record(r) << '\n';
    }
    require(out.good(), ErrorCode::StorageError, "write to '" + path + "' failed");
}

} // namespace asr
