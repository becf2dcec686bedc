#pragma once

// Store lifecycle and the end-to-end ingestion pipeline.
//
// A data directory is one store:
//
//   meta.json         immutable identity: format, dimension, provider,
//                     index parameters and seed
//   hash_store.json   per-document chunk-hash lists (derived cache; rebuilt
//                     from the cold tier on open)
//   hot/              active-chunk index files
//   cold/commits.log  full version history
//   wal.log           dual-tier commit journal
//   .lock             writer exclusivity (flock)
//
// Ingestion runs chunking, change detection against the hash store,
// embedding of new and modified chunks only, one dual-tier transaction,
// and a hash-store update, and reports a change-capture summary. An
// identical re-ingestion short-circuits before any tier is touched.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tempovec/change_detection.hpp"
#include "tempovec/chunking.hpp"
#include "tempovec/cold_tier.hpp"
#include "tempovec/embedding.hpp"
#include "tempovec/hot_tier.hpp"
#include "tempovec/query.hpp"
#include "tempovec/transactions.hpp"
#include "tempovec/types.hpp"
#include "tempovec/wal.hpp"

namespace tempovec {

struct EngineConfig {
    std::filesystem::path data_dir;
    EmbedderConfig embedder;
    HnswParams index;  // dimension is forced to embedder.dimension
    bool read_only = false;
    std::size_t ef_search_override = 0;  // runtime-only, not persisted
};

// Per-ingest change-capture summary. embeddings_computed counts exactly
// the new and modified chunks; unchanged, moved, and deleted chunks never
// reach the embedder.
struct CdcSummary {
    std::string doc_id;
    Timestamp ingest_ts = 0;
    std::size_t total_chunks = 0;
    std::size_t new_count = 0;
    std::size_t modified_count = 0;
    std::size_t deleted_count = 0;
    std::size_t unchanged_count = 0;
    std::size_t moved_count = 0;
    std::size_t embeddings_computed = 0;
    double reprocessed_fraction = 0.0;  // embeddings_computed / total_chunks
    std::uint64_t txn_version = 0;      // 0 = no transaction (no changes)
    double elapsed_ms = 0.0;
};

struct ManifestEntry {
    std::string doc_id;
    std::filesystem::path path;
    Timestamp ts = 0;
};

struct CorpusFailure {
    std::string doc_id;
    Timestamp ts = 0;
    std::string error;
};

struct CorpusReport {
    std::size_t versions_ingested = 0;
    std::size_t documents = 0;
    std::size_t total_chunks = 0;
    std::size_t embeddings_computed = 0;
    std::size_t new_count = 0;
    std::size_t modified_count = 0;
    std::size_t deleted_count = 0;
    std::size_t unchanged_count = 0;
    std::size_t moved_count = 0;
    // Mean reprocessed_fraction over ingests that were not a document's
    // first version; the headline selective-processing number.
    double mean_nonfirst_fraction = 0.0;
    std::vector<double> latencies_ms;
    std::vector<CorpusFailure> failures;
    std::vector<CdcSummary> summaries;
};

// What embeddings_computed would have been under a coarser strategy,
// tallied over every ingest this engine instance has run.
enum class BaselineMode : std::uint8_t { full_reindex = 0, doc_level_upsert = 1 };

struct EngineStats {
    HotStats hot;
    ColdStats cold;
    double hot_reduction = 0.0;  // 1 - active/total
    std::size_t documents = 0;
};

// Per-position classification between two stored revisions of a document.
struct RevisionDiffEntry {
    std::string kind;  // "added" | "removed" | "modified" | "moved"
    std::uint64_t position = 0;      // new position (old position for removed)
    std::optional<std::uint64_t> from_position;  // moved only
    std::string chunk_id;
};

class Engine {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    explicit Engine(EngineConfig config) : config_(std::move(config)) {
        if (config_.data_dir.empty())
            throw UsageError("data_dir must be set");
        config_.index.dimension = config_.embedder.dimension;
        if (!config_.read_only)
            std::filesystem::create_directories(config_.data_dir);
        else if (!std::filesystem::exists(config_.data_dir / "meta.json"))
            throw UsageError("store not initialized at " + config_.data_dir.string());

        if (!config_.read_only)
            lock_ = io::FileLock(config_.data_dir / ".lock");

        load_or_init_meta();
        if (config_.ef_search_override != 0)
            config_.index.ef_search = config_.ef_search_override;

        embedder_ = make_embedder(config_.embedder);
        hot_ = std::make_unique<HotTier>(config_.data_dir / "hot", config_.index,
                                         config_.read_only);
        cold_ = std::make_unique<ColdTier>(config_.data_dir / "cold", config_.read_only);
        wal_ = std::make_unique<Wal>(config_.data_dir / "wal.log", config_.read_only);
        txn_ = std::make_unique<TxnManager>(*wal_, *cold_, *hot_);
        query_ = std::make_unique<QueryEngine>(*embedder_, *hot_, *cold_,
                                               [this] { return txn_->excluded_versions(); });

        // Finish or void any in-flight commit before serving anything.
        if (!config_.read_only)
            startup_report_ = txn_->reconcile();
        resync_from_cold();
    }

    // --- ingestion ---

    CdcSummary ingest_document(const RawDocument& doc,
                               std::optional<Timestamp> ingest_ts = std::nullopt) {
        require_writable();
        auto started = std::chrono::steady_clock::now();
        validate_document(doc);
        Timestamp ts = ingest_ts.value_or(now_ms());
        auto last = last_version_ts_.find(doc.doc_id);
        if (last != last_version_ts_.end() && ts <= last->second)
            throw UsageError("ingest_ts " + std::to_string(ts) + " does not advance " +
                             doc.doc_id + " past " + std::to_string(last->second));
        // The history log is globally ordered; a timestamp behind the
        // latest commit of any document would corrupt snapshot folds.
        if (ts < cold_->latest_commit_ts())
            throw UsageError("ingest_ts " + std::to_string(ts) +
                             " precedes the store's latest commit " +
                             std::to_string(cold_->latest_commit_ts()));

        std::vector<Chunk> chunks = chunk_document(doc);
        std::vector<std::string> old_hashes = hash_store_.get(doc.doc_id);
        ChangeSet changes = detect_changes(old_hashes, chunks);

        CdcSummary summary;
        summary.doc_id = doc.doc_id;
        summary.ingest_ts = ts;
        summary.total_chunks = chunks.size();
        summary.new_count = changes.new_chunks.size();
        summary.modified_count = changes.modified.size();
        summary.deleted_count = changes.deleted.size();
        summary.unchanged_count = changes.unchanged.size();
        summary.moved_count = changes.moved.size();
        summary.embeddings_computed = changes.embedding_workload();
        summary.reprocessed_fraction =
            chunks.empty() ? 0.0
                           : static_cast<double>(summary.embeddings_computed) /
                                 static_cast<double>(chunks.size());

        baseline_full_reindex_ += chunks.size();
        if (!changes.empty())
            baseline_doc_upsert_ += chunks.size();

        if (changes.empty()) {
            summary.elapsed_ms = elapsed_since(started);
            return summary;  // identical re-ingestion: no transaction
        }

        summary.txn_version = commit_changes(doc.doc_id, chunks, changes, ts);

        std::vector<std::string> new_hashes;
        new_hashes.reserve(chunks.size());
        for (const Chunk& c : chunks)
            new_hashes.push_back(c.chunk_id);
        hash_store_.update(doc.doc_id, std::move(new_hashes));
        hash_store_.save();
        last_version_ts_[doc.doc_id] = ts;

        summary.elapsed_ms = elapsed_since(started);
        return summary;
    }

    CorpusReport ingest_corpus(const std::vector<ManifestEntry>& entries) {
        require_writable();
        CorpusReport report;
        std::set<std::string> docs;
        std::set<std::string> failed_docs;
        std::map<std::string, std::size_t> versions_seen;
        double nonfirst_fraction_sum = 0.0;
        std::size_t nonfirst_count = 0;

        for (const ManifestEntry& entry : entries) {
            if (failed_docs.count(entry.doc_id))
                continue;
            std::size_t version_index = versions_seen[entry.doc_id]++;
            try {
                RawDocument doc = load_document(entry.path, entry.doc_id);
                CdcSummary summary = ingest_document(doc, entry.ts);
                report.versions_ingested += 1;
                report.total_chunks += summary.total_chunks;
                report.embeddings_computed += summary.embeddings_computed;
                report.new_count += summary.new_count;
                report.modified_count += summary.modified_count;
                report.deleted_count += summary.deleted_count;
                report.unchanged_count += summary.unchanged_count;
                report.moved_count += summary.moved_count;
                report.latencies_ms.push_back(summary.elapsed_ms);
                if (version_index > 0) {
                    nonfirst_fraction_sum += summary.reprocessed_fraction;
                    nonfirst_count += 1;
                }
                docs.insert(entry.doc_id);
                report.summaries.push_back(std::move(summary));
            } catch (const Error& e) {
                failed_docs.insert(entry.doc_id);
                report.failures.push_back({entry.doc_id, entry.ts, e.what()});
            }
        }
        report.documents = docs.size();
        if (nonfirst_count > 0)
            report.mean_nonfirst_fraction = nonfirst_fraction_sum / nonfirst_count;
        return report;
    }

    // Manifest: JSON lines, each {"doc_id": str, "path": str, "ts": int-ms}.
    // Relative paths resolve against the manifest's directory.
    static std::vector<ManifestEntry> load_manifest(const std::filesystem::path& manifest_path) {
        std::string raw = io::read_file(manifest_path);
        std::vector<ManifestEntry> entries;
        std::size_t line_no = 0;
        std::size_t start = 0;
        while (start <= raw.size()) {
            std::size_t end = raw.find('\n', start);
            std::string_view line(raw.data() + start,
                                  (end == std::string::npos ? raw.size() : end) - start);
            start = end == std::string::npos ? raw.size() + 1 : end + 1;
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string_view::npos)
                continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("doc_id") ||
                !j.contains("path") || !j.contains("ts") || !j["doc_id"].is_string() ||
                !j["path"].is_string() || !j["ts"].is_number_integer())
                throw UsageError("manifest line " + std::to_string(line_no) +
                                 " is not {\"doc_id\", \"path\", \"ts\"}");
            ManifestEntry entry;
            entry.doc_id = j["doc_id"].get<std::string>();
            entry.path = j["path"].get<std::string>();
            if (entry.path.is_relative())
                entry.path = manifest_path.parent_path() / entry.path;
            entry.ts = j["ts"].get<Timestamp>();
            entries.push_back(std::move(entry));
        }
        return entries;
    }

    std::uint64_t baseline_counter(BaselineMode mode) const {
        return mode == BaselineMode::full_reindex ? baseline_full_reindex_
                                                  : baseline_doc_upsert_;
    }

    // --- queries and maintenance ---

    const QueryEngine& query() const { return *query_; }

    ReconcileReport reconcile() {
        require_writable();
        ReconcileReport report = txn_->reconcile();
        if (report.repaired + report.compensated > 0)
            resync_from_cold();
        return report;
    }

    DivergenceReport verify_tiers() const { return txn_->verify_tiers(); }

    bool compact() {
        require_writable();
        return hot_->compact();
    }

    EngineStats stats() const {
        EngineStats s;
        s.hot = hot_->stats();
        s.cold = cold_->stats(txn_->excluded_versions());
        s.documents = hash_store_.size();
        if (s.cold.total_records > 0)
            s.hot_reduction = 1.0 - static_cast<double>(s.hot.active_count) /
                                        static_cast<double>(s.cold.total_records);
        return s;
    }

    std::vector<TimelineEntry> document_timeline(const std::string& doc_id) const {
        return cold_->document_timeline(doc_id, txn_->excluded_versions());
    }

    // Classifies the chunk-level difference between two stored revisions
    // (1-based per-document, as reported by document_timeline).
    std::vector<RevisionDiffEntry> diff_revisions(const std::string& doc_id,
                                                  std::uint64_t rev_a, std::uint64_t rev_b) const {
        std::vector<TimelineEntry> timeline = document_timeline(doc_id);
        if (timeline.empty())
            throw UsageError("unknown document " + doc_id);
        auto at = [&](std::uint64_t rev) -> const TimelineEntry& {
            if (rev == 0 || rev > timeline.size())
                throw UsageError(doc_id + " has no revision " + std::to_string(rev) + " (1.." +
                                 std::to_string(timeline.size()) + ")");
            return timeline[rev - 1];
        };
        std::vector<std::string> old_hashes = doc_hashes_at(doc_id, at(rev_a).commit_ts);
        std::vector<std::string> new_hashes = doc_hashes_at(doc_id, at(rev_b).commit_ts);

        // Reuse the ingest classifier over the stored hash sequences.
        std::vector<Chunk> new_side(new_hashes.size());
        for (std::size_t p = 0; p < new_hashes.size(); ++p) {
            new_side[p].chunk_id = new_hashes[p];
            new_side[p].position = p;
        }
        ChangeSet changes = detect_changes(old_hashes, new_side);

        std::vector<RevisionDiffEntry> diff;
        for (const auto& c : changes.new_chunks)
            diff.push_back({"added", c.position, std::nullopt, c.chunk_id});
        for (const auto& c : changes.deleted)
            diff.push_back({"removed", c.old_position, std::nullopt, c.chunk_id});
        for (const auto& c : changes.modified)
            diff.push_back({"modified", c.position, std::nullopt, c.new_chunk_id});
        for (const auto& c : changes.moved)
            diff.push_back({"moved", c.new_position, c.old_position, c.chunk_id});
        std::sort(diff.begin(), diff.end(), [](const auto& a, const auto& b) {
            if (a.position != b.position)
                return a.position < b.position;
            return a.kind < b.kind;
        });
        return diff;
    }

    ReconcileReport startup_report() const { return startup_report_; }
    const std::filesystem::path& data_dir() const { return config_.data_dir; }
    bool read_only() const { return config_.read_only; }
    Embedder& embedder() { return *embedder_; }
    const HotTier& hot() const { return *hot_; }
    const ColdTier& cold() const { return *cold_; }
    TxnManager& transactions() { return *txn_; }

private:
    struct ActiveMeta {
        std::string chunk_id;
        std::uint64_t version = 1;
    };
    using Key = std::pair<std::string, std::uint64_t>;

    void require_writable() const {
        if (config_.read_only)
            throw UsageError("store opened read-only");
    }

    static double elapsed_since(std::chrono::steady_clock::time_point started) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         started)
            .count();
    }

    // meta.json pins the store identity. Dimension, provider, and index
    // shape are immutable once written: vectors embedded under a different
    // dimension or provider are not comparable, and a different seed or M
    // would silently change every ranking.
    void load_or_init_meta() {
        std::filesystem::path meta_path = config_.data_dir / "meta.json";
        if (std::filesystem::exists(meta_path)) {
            nlohmann::json meta = nlohmann::json::parse(io::read_file(meta_path), nullptr, false);
            if (meta.is_discarded() || !meta.is_object())
                throw CorruptLogError("meta.json malformed at " + meta_path.string(), 0);
            if (meta.value("format_version", 0u) != kFormatVersion)
                throw UsageError("unsupported store format version in " + meta_path.string());
            auto dimension = meta.value("dimension", std::size_t{0});
            if (dimension != config_.embedder.dimension)
                throw UsageError("store dimension " + std::to_string(dimension) +
                                 " does not match configured " +
                                 std::to_string(config_.embedder.dimension));
            auto provider = meta.value("provider", std::string{});
            if (provider != std::string(to_string(config_.embedder.provider)))
                throw UsageError("store embedder provider '" + provider +
                                 "' does not match configured '" +
                                 std::string(to_string(config_.embedder.provider)) + "'");
            const auto& index = meta.at("index");
            config_.index.M = index.value("M", config_.index.M);
            config_.index.ef_construction =
                index.value("ef_construction", config_.index.ef_construction);
            config_.index.ef_search = index.value("ef_search", config_.index.ef_search);
            config_.index.seed = index.value("seed", config_.index.seed);
            return;
        }
        if (config_.read_only)
            throw UsageError("store not initialized at " + config_.data_dir.string());
        nlohmann::json meta = {
            {"format_version", kFormatVersion},
            {"dimension", config_.embedder.dimension},
            {"provider", std::string(to_string(config_.embedder.provider))},
            {"index",
             {{"M", config_.index.M},
              {"ef_construction", config_.index.ef_construction},
              {"ef_search", config_.index.ef_search},
              {"seed", config_.index.seed}}},
            {"created_ts", now_ms()},
        };
        io::atomic_write_file(meta_path, meta.dump(2));
    }

    // The hash store and the per-key lineage map are caches derived from
    // the cold tier; rebuilding them on open makes a torn hash-store write
    // harmless and keeps all three views convergent.
    void resync_from_cold() {
        std::map<std::string, std::vector<std::pair<std::uint64_t, std::string>>> per_doc;
        active_.clear();
        for (const ColdRecord& r : cold_->active_records(txn_->excluded_versions())) {
            per_doc[r.doc_id].emplace_back(r.position, r.chunk_id);
            active_[{r.doc_id, r.position}] = {r.chunk_id, r.version_number};
        }
        hash_store_ = HashStore(config_.data_dir / "hash_store.json");
        for (auto& [doc_id, positions] : per_doc) {
            std::sort(positions.begin(), positions.end());
            std::vector<std::string> hashes;
            hashes.reserve(positions.size());
            for (auto& [pos, chunk_id] : positions) {
                if (pos != hashes.size())
                    throw DivergenceError("document " + doc_id +
                                          " has a gap in active positions at " +
                                          std::to_string(hashes.size()));
                hashes.push_back(std::move(chunk_id));
            }
            hash_store_.update(doc_id, std::move(hashes));
        }
        if (!config_.read_only)
            hash_store_.save();

        // Last committed timestamp per document, including documents whose
        // chunks are now all deleted; the monotonicity guard must survive
        // restarts even for those.
        last_version_ts_.clear();
        std::set<std::uint64_t> excluded = txn_->excluded_versions();
        for (const ColdTransaction& txn : cold_->transactions()) {
            if (cold_->compensated().count(txn.txn_version) || excluded.count(txn.txn_version))
                continue;
            for (const ColdEvent& event : txn.events) {
                const std::string* doc_id = nullptr;
                if (const auto* e = std::get_if<InsertEvent>(&event))
                    doc_id = &e->record.doc_id;
                else if (const auto* e = std::get_if<SupersedeEvent>(&event))
                    doc_id = &e->doc_id;
                else if (const auto* e = std::get_if<DeleteEvent>(&event))
                    doc_id = &e->doc_id;
                if (doc_id) {
                    Timestamp& last = last_version_ts_[*doc_id];
                    last = std::max(last, txn.commit_ts);
                }
            }
        }
    }

    std::uint64_t commit_changes(const std::string& doc_id, const std::vector<Chunk>& chunks,
                                 const ChangeSet& changes, Timestamp ts) {
        // Embed exactly the new and modified chunks, in position order.
        std::vector<std::string> texts;
        std::vector<std::size_t> embed_positions;
        for (const auto& c : changes.new_chunks) {
            texts.push_back(chunks[c.position].content);
            embed_positions.push_back(c.position);
        }
        for (const auto& c : changes.modified) {
            texts.push_back(chunks[c.position].content);
            embed_positions.push_back(c.position);
        }
        std::vector<EmbeddingVector> embedded = embedder_->embed_batch(texts);
        std::map<std::size_t, const EmbeddingVector*> embedding_at;
        for (std::size_t i = 0; i < embed_positions.size(); ++i)
            embedding_at[embed_positions[i]] = &embedded[i];

        std::vector<ColdEvent> closes;
        std::vector<ColdEvent> inserts;
        // Lineage-cache edits, applied only after the commit succeeds. All
        // versions are computed from the pre-commit state; applying all
        // removals before all writes keeps position swaps from reading an
        // entry another move in the same batch already replaced.
        std::vector<Key> cache_removals;
        std::vector<std::pair<Key, ActiveMeta>> cache_writes;

        for (const auto& c : changes.deleted) {
            closes.push_back(DeleteEvent{doc_id, c.old_position, c.chunk_id, ts});
            cache_removals.push_back({doc_id, c.old_position});
        }
        for (const auto& c : changes.modified) {
            const ActiveMeta& prior = active_at(doc_id, c.position, c.old_chunk_id);
            closes.push_back(SupersedeEvent{doc_id, c.position, c.old_chunk_id, ts});
            cache_writes.push_back({{doc_id, c.position}, {c.new_chunk_id, prior.version + 1}});
            ColdRecord r;
            r.chunk_id = c.new_chunk_id;
            r.embedding = *embedding_at.at(c.position);
            r.doc_id = doc_id;
            r.position = c.position;
            r.valid_from = ts;
            r.content = chunks[c.position].content;
            r.version_number = prior.version + 1;
            r.parent_hash = c.old_chunk_id;
            r.change_type = ChangeType::update;
            inserts.push_back(InsertEvent{std::move(r)});
        }
        for (const auto& c : changes.moved) {
            // Position metadata change only: same chunk, same embedding,
            // no embedder call. The embedding is taken from the hot tier.
            const ActiveMeta& prior = active_at(doc_id, c.old_position, c.chunk_id);
            std::optional<HotRecord> hot_prior = hot_->find(doc_id, c.old_position);
            if (!hot_prior || hot_prior->chunk_id != c.chunk_id)
                throw DivergenceError("hot tier lost " + c.chunk_id + " at " + doc_id + ":" +
                                      std::to_string(c.old_position));
            closes.push_back(SupersedeEvent{doc_id, c.old_position, c.chunk_id, ts});
            cache_removals.push_back({doc_id, c.old_position});
            cache_writes.push_back({{doc_id, c.new_position}, {c.chunk_id, prior.version + 1}});
            ColdRecord r;
            r.chunk_id = c.chunk_id;
            r.embedding = hot_prior->embedding;
            r.doc_id = doc_id;
            r.position = c.new_position;
            r.valid_from = ts;
            r.content = chunks[c.new_position].content;
            r.version_number = prior.version + 1;
            r.parent_hash = c.chunk_id;
            r.change_type = ChangeType::update;
            inserts.push_back(InsertEvent{std::move(r)});
        }
        for (const auto& c : changes.new_chunks) {
            ColdRecord r;
            r.chunk_id = c.chunk_id;
            r.embedding = *embedding_at.at(c.position);
            r.doc_id = doc_id;
            r.position = c.position;
            r.valid_from = ts;
            r.content = chunks[c.position].content;
            r.version_number = 1;
            r.change_type = ChangeType::insert;
            inserts.push_back(InsertEvent{std::move(r)});
            cache_writes.push_back({{doc_id, c.position}, {c.chunk_id, 1}});
        }

        std::vector<ColdEvent> events = std::move(closes);
        events.insert(events.end(), std::make_move_iterator(inserts.begin()),
                      std::make_move_iterator(inserts.end()));

        WalEntry entry = txn_->commit_dual(std::move(events), ts);
        if (entry.state != WalState::committed) {
            // Try to finish the hot application now; if that fails the
            // transaction is voided and the store is as before the call.
            txn_->reconcile();
            entry = wal_->entry(entry.wal_id);
            if (entry.state != WalState::committed) {
                resync_from_cold();
                throw DivergenceError("ingest of " + doc_id +
                                      " could not be applied to the hot tier; voided");
            }
        }

        for (const Key& key : cache_removals)
            active_.erase(key);
        for (const auto& [key, meta] : cache_writes)
            active_[key] = meta;

        return *entry.cold_txn_version;
    }

    const ActiveMeta& active_at(const std::string& doc_id, std::uint64_t position,
                                const std::string& expected_chunk) const {
        auto it = active_.find({doc_id, position});
        if (it == active_.end() || it->second.chunk_id != expected_chunk)
            throw DivergenceError("lineage cache disagrees with change set at " + doc_id + ":" +
                                  std::to_string(position));
        return it->second;
    }

    // Active chunk-hash sequence of one document at a point in time.
    std::vector<std::string> doc_hashes_at(const std::string& doc_id, Timestamp ts) const {
        SnapshotView snap = cold_->snapshot_as_of(ts, txn_->excluded_versions());
        std::vector<std::pair<std::uint64_t, std::string>> positions;
        for (const ColdRecord& r : snap.records)
            if (r.doc_id == doc_id)
                positions.emplace_back(r.position, r.chunk_id);
        std::sort(positions.begin(), positions.end());
        std::vector<std::string> hashes;
        hashes.reserve(positions.size());
        for (auto& [pos, chunk_id] : positions)
            hashes.push_back(std::move(chunk_id));
        return hashes;
    }

    EngineConfig config_;
    io::FileLock lock_;
    std::unique_ptr<Embedder> embedder_;
    std::unique_ptr<HotTier> hot_;
    std::unique_ptr<ColdTier> cold_;
    std::unique_ptr<Wal> wal_;
    std::unique_ptr<TxnManager> txn_;
    std::unique_ptr<QueryEngine> query_;

    HashStore hash_store_;
    std::map<Key, ActiveMeta> active_;
    std::map<std::string, Timestamp> last_version_ts_;
    ReconcileReport startup_report_;
    std::uint64_t baseline_full_reindex_ = 0;
    std::uint64_t baseline_doc_upsert_ = 0;
};

}  // namespace tempovec
