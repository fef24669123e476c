#pragma once

#include "asr/error.hpp"
#include "asr/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asr {

/// A sentence embedding. Construction rejects vectors of dimension < 2 and
/// all-zero vectors.
class EmbeddingVector
{
public:
    explicit EmbeddingVector(std::vector<double> values)
    : values_(std::move(values))
    {
        require(values_.size() >= 2, ErrorCode::DimensionError,
                "embedding dimension must be at least 2, got " + std::to_string(values_.size()));
        double sq = 0.0;
        for (double v : values_) {
            require(std::isfinite(v), ErrorCode::InvalidInput, "embedding contains a non-finite value");
            sq += v * v;
        }
        require(sq > 0.0, ErrorCode::DegenerateVector, "embedding vector is all zeros");
        norm_ = std::sqrt(sq);
    }

    [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<double const> values() const noexcept { return values_; }
    [[nodiscard]] double norm() const noexcept { return norm_; }

    friend bool operator==(EmbeddingVector const & a, EmbeddingVector const & b)
    {
        return a.values_ == b.values_;
    }

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

/// Cosine similarity clamped to [-1, 1].
inline double cosine_similarity(EmbeddingVector const & a, EmbeddingVector const & b)
{
    require(a.dim() == b.dim(), ErrorCode::DimensionError,
            "cosine of vectors with dimensions " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
    auto av = a.values();
    auto bv = b.values();
    double dot = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        dot += av[i] * bv[i];
    }
    return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

/// Offline embedding: signed feature hashing of word unigrams and character
/// trigrams of each boundary-marked word. Text is lowercased and split on
/// non-alphanumeric characters first, so whitespace and punctuation layout do
/// not change the vector.
inline std::vector<double> hash_embed_values(std::string_view input, std::size_t dim, std::uint64_t seed)
{
    require(dim >= 2, ErrorCode::DimensionError, "hash embedding dimension must be at least 2");
    std::vector<double> v(dim, 0.0);
    auto add = [&](std::string_view feature, double weight) {
        auto h = text::mix64(text::fnv1a(feature, seed));
        auto bucket = static_cast<std::size_t>(h % dim);
        double sign = ((h >> 63) & 1U) ? -1.0 : 1.0;
        v[bucket] += sign * weight;
    };

    auto lower = text::to_lower(input);
    std::string word;
    std::size_t words = 0;
    auto flush = [&] {
        if (word.empty()) {
            return;
        }
        ++words;
        add("w:" + word, 1.0);
        std::string marked = "<" + word + ">";
        for (std::size_t i = 0; i + 3 <= marked.size(); ++i) {
            add("c:" + marked.substr(i, 3), 0.5);
        }
        word.clear();
    };
    for (char c : lower) {
        if (std::isalnum(static_cast<unsigned char>(c)) || (static_cast<unsigned char>(c) & 0x80)) {
            word += c;
        } else {
            flush();
        }
    }
    flush();
    if (words == 0) {
        // punctuation-only text still gets a stable direction
        add("r:" + std::string(text::trim(lower)), 1.0);
    }
    return v;
}

} // namespace asr
