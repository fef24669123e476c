#pragma once

#include "asr/error.hpp"
#include "asr/text.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace asr::csv {

/// RFC 4180 field quoting, only when needed.
inline std::string escape(std::string_view field)
{
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string join(std::vector<std::string> const & fields)
{
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += escape(fields[i]);
    }
    return out;
}

/// Parses CSV text into rows; quoted fields may contain commas, quotes, and newlines.
inline std::vector<std::vector<std::string>> parse(std::string_view content)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') {
                ++i;
            }
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    require(!quoted, ErrorCode::ParseError, "unterminated quoted CSV field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// A CSV file with a header row, addressed by column name.
class Table
{
public:
    static Table parse_text(std::string_view content, std::string source = "<memory>")
    {
        Table t;
        t.source_ = std::move(source);
        auto rows = csv::parse(content);
        require(!rows.empty(), ErrorCode::SchemaError, t.source_ + ": missing header row");
        t.header_ = std::move(rows.front());
        for (std::size_t i = 0; i < t.header_.size(); ++i) {
            t.columns_.emplace(std::string(text::trim(t.header_[i])), i);
        }
        for (std::size_t r = 1; r < rows.size(); ++r) {
            require(rows[r].size() == t.header_.size(), ErrorCode::SchemaError,
                    t.source_ + " row " + std::to_string(r + 1) + ": expected " + std::to_string(t.header_.size())
                        + " fields, got " + std::to_string(rows[r].size()));
            t.rows_.push_back(std::move(rows[r]));
        }
        return t;
    }

    static Table read(std::string const & path)
    {
        std::ifstream in(path);
        require(in.good(), ErrorCode::StorageError, "cannot open '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_text(ss.str(), path);
    }

    [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
    [[nodiscard]] bool has(std::string const & column) const { return columns_.contains(column); }

    [[nodiscard]] std::string const & at(std::size_t row, std::string const & column) const
    {
        auto it = columns_.find(column);
        require(it != columns_.end(), ErrorCode::SchemaError, source_ + ": missing column '" + column + "'");
        return rows_.at(row)[it->second];
    }

private:
    std::string source_;
    std::vector<std::string> header_;
    std::map<std::string, std::size_t> columns_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace asr::csv
