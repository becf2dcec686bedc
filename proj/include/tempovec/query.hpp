#pragma once

// Temporal query routing. A query carries a structural temporal intent:
//
//   current        -> hot tier (ANN over active chunks only)
//   as_of(t)       -> cold tier (exact scan of the snapshot at t)
//   range(a, b)    -> both endpoints plus a chunk-level diff
//
// Validity filtering strictly precedes ranking on the cold path: the
// snapshot is materialized first and similarity is computed over nothing
// else, so a record outside its validity window can never influence or
// appear in results. The cold path is exact by design; no ANN index is
// built over history.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tempovec/cold_tier.hpp"
#include "tempovec/embedding.hpp"
#include "tempovec/hot_tier.hpp"
#include "tempovec/types.hpp"

namespace tempovec {

enum class TemporalIntent : std::uint8_t { current = 0, as_of = 1, range = 2 };

inline std::string_view to_string(TemporalIntent t) {
    switch (t) {
        case TemporalIntent::current: return "current";
        case TemporalIntent::as_of: return "as_of";
        case TemporalIntent::range: return "range";
    }
    return "?";
}

struct QuerySpec {
    std::string text;
    std::size_t k = 5;
    TemporalIntent intent = TemporalIntent::current;
    Timestamp as_of_ts = 0;     // intent == as_of
    Timestamp range_start = 0;  // intent == range
    Timestamp range_end = 0;

    void validate() const {
        if (k == 0)
            throw UsageError("k must be at least 1");
        if (intent == TemporalIntent::range && range_start >= range_end)
            throw UsageError("range start must precede range end");
    }
};

enum class QueryRoute : std::uint8_t { hot = 0, cold = 1, both = 2 };

inline std::string_view to_string(QueryRoute r) {
    switch (r) {
        case QueryRoute::hot: return "hot";
        case QueryRoute::cold: return "cold";
        case QueryRoute::both: return "both";
    }
    return "?";
}

inline QueryRoute classify(const QuerySpec& spec) {
    spec.validate();
    switch (spec.intent) {
        case TemporalIntent::current: return QueryRoute::hot;
        case TemporalIntent::as_of: return QueryRoute::cold;
        case TemporalIntent::range: return QueryRoute::both;
    }
    return QueryRoute::hot;
}

enum class HitTier : std::uint8_t { hot = 0, cold = 1 };

inline std::string_view to_string(HitTier t) {
    return t == HitTier::hot ? "hot" : "cold";
}

struct QueryHit {
    std::string chunk_id;
    std::string doc_id;
    std::uint64_t position = 0;
    std::string content;
    float similarity = 0.0f;
    Timestamp valid_from = 0;
    std::optional<Timestamp> valid_to;            // absent for hot hits
    std::optional<std::uint64_t> version_number;  // cold hits only
    HitTier tier = HitTier::hot;
};

struct QueryResult {
    std::vector<QueryHit> hits;  // descending similarity, ties by chunk_id
};

// Chunk-level difference between the two endpoint results of a range
// query; each list is sorted ascending.
struct RangeDiff {
    std::vector<std::string> only_at_start;
    std::vector<std::string> only_at_end;
    std::vector<std::string> at_both;
};

struct RangeResult {
    QueryResult at_start;
    QueryResult at_end;
    RangeDiff diff;
};

class QueryEngine {
public:
    // exclusions supplies cold transaction versions that must not be
    // visible (in-flight or voided dual-tier commits); when absent, the
    // whole log is visible.
    QueryEngine(Embedder& embedder, const HotTier& hot, const ColdTier& cold,
                std::function<std::set<std::uint64_t>()> exclusions = nullptr)
        : embedder_(embedder), hot_(hot), cold_(cold), exclusions_(std::move(exclusions)) {}

    QueryResult query_current(std::string_view text, std::size_t k,
                              std::size_t ef_override = 0) const {
        require_k(k);
        EmbeddingVector query = embedder_.embed(text);
        QueryResult result;
        for (const auto& [record, similarity] : hot_.search(query, k, ef_override)) {
            QueryHit hit;
            hit.chunk_id = record.chunk_id;
            hit.doc_id = record.doc_id;
            hit.position = record.position;
            hit.content = record.content;
            hit.similarity = similarity;
            hit.valid_from = record.valid_from;
            hit.tier = HitTier::hot;
            result.hits.push_back(std::move(hit));
        }
        return result;
    }

    QueryResult query_as_of(std::string_view text, Timestamp target_ts, std::size_t k) const {
        require_k(k);
        EmbeddingVector query = embedder_.embed(text);
        SnapshotView snapshot = cold_.snapshot_as_of(target_ts, excluded());
        QueryResult result;
        result.hits.reserve(snapshot.records.size());
        for (const ColdRecord& record : snapshot.records) {
            QueryHit hit;
            hit.chunk_id = record.chunk_id;
            hit.doc_id = record.doc_id;
            hit.position = record.position;
            hit.content = record.content;
            hit.similarity = exact_similarity(query, record.embedding);
            hit.valid_from = record.valid_from;
            hit.valid_to = record.valid_to;
            hit.version_number = record.version_number;
            hit.tier = HitTier::cold;
            result.hits.push_back(std::move(hit));
        }
        std::sort(result.hits.begin(), result.hits.end(),
                  [](const QueryHit& a, const QueryHit& b) {
                      if (a.similarity != b.similarity)
                          return a.similarity > b.similarity;
                      return a.chunk_id < b.chunk_id;
                  });
        if (result.hits.size() > k)
            result.hits.resize(k);
        return result;
    }

    // The end endpoint uses the hot tier when end_ts covers the latest
    // commit (the snapshot there equals the active set); otherwise cold.
    RangeResult query_range(std::string_view text, Timestamp start_ts, Timestamp end_ts,
                            std::size_t k) const {
        if (start_ts >= end_ts)
            throw UsageError("range start must precede range end");
        require_k(k);
        RangeResult result;
        result.at_start = query_as_of(text, start_ts, k);
        if (end_ts >= cold_.latest_commit_ts())
            result.at_end = query_current(text, k);
        else
            result.at_end = query_as_of(text, end_ts, k);

        std::set<std::string> start_ids;
        std::set<std::string> end_ids;
        for (const QueryHit& hit : result.at_start.hits)
            start_ids.insert(hit.chunk_id);
        for (const QueryHit& hit : result.at_end.hits)
            end_ids.insert(hit.chunk_id);
        for (const std::string& id : start_ids) {
            if (end_ids.count(id))
                result.diff.at_both.push_back(id);
            else
                result.diff.only_at_start.push_back(id);
        }
        for (const std::string& id : end_ids)
            if (!start_ids.count(id))
                result.diff.only_at_end.push_back(id);
        return result;
    }

    // Dispatch for the single-result intents; range produces a RangeResult
    // and must be called directly.
    QueryResult run(const QuerySpec& spec) const {
        spec.validate();
        switch (spec.intent) {
            case TemporalIntent::current:
                return query_current(spec.text, spec.k);
            case TemporalIntent::as_of:
                return query_as_of(spec.text, spec.as_of_ts, spec.k);
            case TemporalIntent::range:
                throw UsageError("range queries return two results; use query_range");
        }
        return {};
    }

    static float exact_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
        if (a.size() != b.size())
            throw DimensionMismatchError(a.size(), b.size());
        double dot = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            dot += static_cast<double>(a[i]) * b[i];
        return static_cast<float>(dot);
    }

private:
    static void require_k(std::size_t k) {
        if (k == 0)
            throw UsageError("k must be at least 1");
    }

    std::set<std::uint64_t> excluded() const {
        return exclusions_ ? exclusions_() : std::set<std::uint64_t>{};
    }

    Embedder& embedder_;
    const HotTier& hot_;
    const ColdTier& cold_;
    std::function<std::set<std::uint64_t>()> exclusions_;
};

}  // namespace tempovec
