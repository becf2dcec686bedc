#pragma once

// Pluggable embedders producing unit vectors of a fixed dimension.
//
// The deterministic provider feature-hashes whitespace tokens of the
// normalized text: one 64-bit FNV-1a stream picks the bucket, an
// independently seeded stream picks the sign, signed counts are then
// L2-normalized. No model weights, bitwise reproducible, and token overlap
// still yields graded cosine similarity for ranking tests.
//
// The remote provider speaks JSON over HTTP: POST {endpoint}/embed with
// {"texts": [...]}, response {"vectors": [[...]]}. Connection failures and
// timeouts are retryable; protocol violations are not.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "tempovec/types.hpp"
#include "tempovec/unicode.hpp"

namespace tempovec {

using EmbeddingVector = std::vector<float>;

inline constexpr std::size_t kDefaultDimension = 384;

// Every stored vector must be a finite unit vector of the configured size.
inline void validate_embedding(const EmbeddingVector& v, std::size_t dimension) {
    if (v.size() != dimension)
        throw DimensionMismatchError(dimension, v.size());
    double norm_sq = 0.0;
    for (float x : v) {
        if (!std::isfinite(x))
            throw EmbeddingError("embedding contains non-finite component", false);
        norm_sq += static_cast<double>(x) * x;
    }
    double norm = std::sqrt(norm_sq);
    if (std::abs(norm - 1.0) > 1e-5)
        throw EmbeddingError("embedding is not L2-normalized (norm " +
                                 std::to_string(norm) + ")",
                             false);
}

enum class EmbedderProvider : std::uint8_t {
    deterministic = 0,
    remote = 1,
};

inline std::string_view to_string(EmbedderProvider p) {
    return p == EmbedderProvider::remote ? "remote" : "deterministic";
}

inline EmbedderProvider embedder_provider_from_string(std::string_view s) {
    if (s == "deterministic")
        return EmbedderProvider::deterministic;
    if (s == "remote")
        return EmbedderProvider::remote;
    throw UsageError("unknown embedder provider: " + std::string(s));
}

struct EmbedderConfig {
    std::size_t dimension = kDefaultDimension;
    EmbedderProvider provider = EmbedderProvider::deterministic;
    std::optional<std::string> remote_endpoint;
    int remote_timeout_ms = 10000;
    int remote_max_in_flight = 4;
};

class Embedder {
public:
    virtual ~Embedder() = default;

    virtual EmbeddingVector embed(std::string_view text) = 0;

    // Element-wise identical to per-text embed calls, order preserved.
    // Partial failure fails the whole batch.
    virtual std::vector<EmbeddingVector> embed_batch(
        const std::vector<std::string>& texts) {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts)
            out.push_back(embed(t));
        return out;
    }

    virtual std::size_t dimension() const = 0;
    virtual EmbedderProvider provider() const = 0;

    // Count of texts embedded; selective re-embedding tests assert on it.
    std::uint64_t ops_count() const { return ops_.load(); }
    void reset_ops_count() { ops_.store(0); }

protected:
    void count_ops(std::size_t n) { ops_.fetch_add(n); }

private:
    std::atomic<std::uint64_t> ops_{0};
};

namespace detail {

inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;
inline constexpr std::uint64_t kFnvBasisBucket = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvBasisSign = kFnvBasisBucket ^ 0x9e3779b97f4a7c15ull;

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

}  // namespace detail

// Feature-hashing embedder. Normalization is applied internally and is
// idempotent, so callers may pass raw or normalized text.
class DeterministicEmbedder : public Embedder {
public:
    explicit DeterministicEmbedder(std::size_t dimension = kDefaultDimension)
        : dimension_(dimension) {
        if (dimension_ == 0)
            throw UsageError("embedding dimension must be positive");
    }

    EmbeddingVector embed(std::string_view text) override {
        count_ops(1);
        EmbeddingVector vec(dimension_, 0.0f);
        std::string normalized = normalize_text(text);

        std::size_t tokens = 0;
        std::size_t start = 0;
        while (start < normalized.size()) {
            std::size_t space = normalized.find(' ', start);
            std::size_t end = (space == std::string::npos) ? normalized.size() : space;
            if (end > start) {
                std::string_view tok(normalized.data() + start, end - start);
                std::uint64_t hb = detail::fnv1a(tok, detail::kFnvBasisBucket);
                std::uint64_t hs = detail::fnv1a(tok, detail::kFnvBasisSign);
                float sign = (hs & 1) ? -1.0f : 1.0f;
                vec[hb % dimension_] += sign;
                ++tokens;
            }
            start = end + 1;
        }

        // Defensive: normalization already drops empty chunks upstream.
        if (tokens == 0) {
            vec[0] = 1.0f;
            return vec;
        }

        double norm_sq = 0.0;
        for (float x : vec)
            norm_sq += static_cast<double>(x) * x;
        float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
        for (float& x : vec)
            x *= inv;
        return vec;
    }

    std::size_t dimension() const override { return dimension_; }
    EmbedderProvider provider() const override {
        return EmbedderProvider::deterministic;
    }

private:
    std::size_t dimension_;
};

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
        dot += static_cast<double>(a[i]) * b[i];
    return dot;
}

std::unique_ptr<Embedder> make_remote_embedder(const EmbedderConfig& config);

inline std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
    if (config.dimension == 0)
        throw UsageError("embedding dimension must be positive");
    switch (config.provider) {
        case EmbedderProvider::deterministic:
            return std::make_unique<DeterministicEmbedder>(config.dimension);
        case EmbedderProvider::remote:
            return make_remote_embedder(config);
    }
    throw UsageError("unknown embedder provider");
}

}  // namespace tempovec

#include "tempovec/remote_embedding.hpp"  // defines make_remote_embedder
