#pragma once

// Cold tier: the complete version history of every chunk, stored as an
// append-only log of transactions and folded on demand into point-in-time
// snapshots.
//
// Each transaction is one CRC-framed log entry holding an event list:
//   Insert(record)                     a new chunk version becomes active
//   Supersede(key, old_chunk, ts)      an active record is replaced
//   Delete(key, old_chunk, ts)         an active record is removed
//   Compensate(txn_version)            a prior transaction is voided
// Records are never rewritten; validity is closed by later events. The
// half-open interval [valid_from, valid_to) decides snapshot membership.
//
// Compensation markers exist for crash repair: a transaction that reached
// this log but whose hot-tier application permanently failed is excluded
// from every fold, durably, without violating append-only.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tempovec/embedding.hpp"
#include "tempovec/io.hpp"
#include "tempovec/types.hpp"

namespace tempovec {

enum class ColdStatus : std::uint8_t { active = 0, superseded = 1, deleted = 2 };

inline std::string_view to_string(ColdStatus s) {
    switch (s) {
        case ColdStatus::active: return "active";
        case ColdStatus::superseded: return "superseded";
        case ColdStatus::deleted: return "deleted";
    }
    return "?";
}

enum class ChangeType : std::uint8_t { insert = 0, update = 1, removal = 2 };

inline std::string_view to_string(ChangeType c) {
    switch (c) {
        case ChangeType::insert: return "insert";
        case ChangeType::update: return "update";
        case ChangeType::removal: return "delete";
    }
    return "?";
}

// One chunk version. valid_to is absent exactly while the record is
// active; version_number counts from 1 along a parent_hash lineage.
struct ColdRecord {
    std::string chunk_id;
    EmbeddingVector embedding;
    std::string doc_id;
    std::uint64_t position = 0;
    Timestamp valid_from = 0;
    std::string content;
    std::optional<Timestamp> valid_to;
    ColdStatus status = ColdStatus::active;
    std::uint64_t version_number = 1;
    std::optional<std::string> parent_hash;
    ChangeType change_type = ChangeType::insert;
};

struct InsertEvent {
    ColdRecord record;
};

struct SupersedeEvent {
    std::string doc_id;
    std::uint64_t position = 0;
    std::string old_chunk_id;
    Timestamp valid_to = 0;
};

struct DeleteEvent {
    std::string doc_id;
    std::uint64_t position = 0;
    std::string old_chunk_id;
    Timestamp valid_to = 0;
};

struct CompensateEvent {
    std::uint64_t target_txn_version = 0;
};

using ColdEvent = std::variant<InsertEvent, SupersedeEvent, DeleteEvent, CompensateEvent>;

struct ColdTransaction {
    std::uint64_t txn_version = 0;
    Timestamp commit_ts = 0;
    std::uint64_t wal_id = 0;  // 0 = none
    std::vector<ColdEvent> events;
    std::uint64_t log_offset = 0;
};

struct SnapshotView {
    Timestamp as_of_ts = 0;
    std::vector<ColdRecord> records;  // sorted by (doc_id, position)
};

struct TimelineEntry {
    std::uint64_t doc_revision = 0;  // 1-based per document
    std::uint64_t txn_version = 0;
    Timestamp commit_ts = 0;
    std::size_t inserts = 0;
    std::size_t updates = 0;
    std::size_t deletes = 0;
};

struct ColdStats {
    std::size_t total_records = 0;
    std::size_t active_records = 0;
    std::size_t superseded = 0;
    std::size_t deleted = 0;
    std::size_t txn_count = 0;
    std::uint64_t bytes_on_disk = 0;
};

class ColdTier {
public:
    explicit ColdTier(std::filesystem::path dir, bool read_only = false)
        : dir_(std::move(dir)), log_path_(dir_ / "commits.log"), read_only_(read_only) {
        if (!read_only_)
            std::filesystem::create_directories(dir_);
        load();
    }

    std::uint64_t latest_version() const { return txns_.empty() ? 0 : txns_.back().txn_version; }
    Timestamp latest_commit_ts() const { return last_commit_ts_; }
    const std::vector<ColdTransaction>& transactions() const { return txns_; }
    const std::set<std::uint64_t>& compensated() const { return compensated_; }

    // Canonical event-batch encoding; also the basis of WAL payload digests.
    static std::string encode_events(const std::vector<ColdEvent>& events) {
        std::string payload;
        io::put_u32(payload, static_cast<std::uint32_t>(events.size()));
        for (const ColdEvent& event : events) {
            if (const auto* ins = std::get_if<InsertEvent>(&event)) {
                io::put_u8(payload, kInsertCode);
                const ColdRecord& r = ins->record;
                io::put_string(payload, r.chunk_id);
                io::put_string(payload, r.doc_id);
                io::put_u64(payload, r.position);
                io::put_i64(payload, r.valid_from);
                io::put_string(payload, r.content);
                io::put_u64(payload, r.version_number);
                io::put_u8(payload, r.parent_hash.has_value() ? 1 : 0);
                if (r.parent_hash)
                    io::put_string(payload, *r.parent_hash);
                io::put_u8(payload, static_cast<std::uint8_t>(r.change_type));
                io::put_u32(payload, static_cast<std::uint32_t>(r.embedding.size()));
                for (float v : r.embedding)
                    io::put_f32(payload, v);
            } else if (const auto* sup = std::get_if<SupersedeEvent>(&event)) {
                io::put_u8(payload, kSupersedeCode);
                io::put_string(payload, sup->doc_id);
                io::put_u64(payload, sup->position);
                io::put_string(payload, sup->old_chunk_id);
                io::put_i64(payload, sup->valid_to);
            } else if (const auto* del = std::get_if<DeleteEvent>(&event)) {
                io::put_u8(payload, kDeleteCode);
                io::put_string(payload, del->doc_id);
                io::put_u64(payload, del->position);
                io::put_string(payload, del->old_chunk_id);
                io::put_i64(payload, del->valid_to);
            } else if (const auto* comp = std::get_if<CompensateEvent>(&event)) {
                io::put_u8(payload, kCompensateCode);
                io::put_u64(payload, comp->target_txn_version);
            }
        }
        return payload;
    }

    // Validates the whole transaction against current active state, then
    // appends it as one durable frame. All-or-nothing: any invalid event
    // rejects the batch with the log untouched.
    std::uint64_t append(std::vector<ColdEvent> events, Timestamp commit_ts,
                         std::uint64_t wal_id = 0) {
        if (read_only_)
            throw UsageError("cold tier opened read-only");
        if (events.empty())
            throw UsageError("cold transaction requires at least one event");
        if (commit_ts < last_commit_ts_)
            throw ConflictError("commit_ts " + std::to_string(commit_ts) +
                                " precedes previous commit " + std::to_string(last_commit_ts_));

        ColdTransaction txn;
        txn.txn_version = next_version();
        txn.commit_ts = commit_ts;
        txn.wal_id = wal_id;
        txn.events = std::move(events);
        validate(txn);

        if (!writer_)
            writer_ = std::make_unique<io::FramedWriter>(log_path_);
        txn.log_offset = writer_->append(encode(txn), /*sync=*/true);
        apply_to_active(txn);
        txns_.push_back(std::move(txn));
        last_commit_ts_ = commit_ts;
        return txns_.back().txn_version;
    }

    // Full-log fold, then the temporal filter valid_from <= ts < valid_to.
    // Records keep their eventual status and valid_to: the view answers
    // "what was live at ts" with each record's complete validity known.
    SnapshotView snapshot_as_of(Timestamp ts,
                                const std::set<std::uint64_t>& exclude = {}) const {
        SnapshotView view;
        view.as_of_ts = ts;
        for (ColdRecord& record : fold(txns_.size(), exclude)) {
            Timestamp to = record.valid_to.value_or(std::numeric_limits<Timestamp>::max());
            if (record.valid_from <= ts && ts < to)
                view.records.push_back(std::move(record));
        }
        sort_records(view.records);
        return view;
    }

    // State after exactly the first txn_version transactions; active
    // records only.
    SnapshotView snapshot_at_version(std::uint64_t txn_version,
                                     const std::set<std::uint64_t>& exclude = {}) const {
        if (txn_version > txns_.size())
            throw UsageError("transaction version out of range: " +
                             std::to_string(txn_version) + " > " +
                             std::to_string(txns_.size()));
        SnapshotView view;
        view.as_of_ts = txn_version == 0 ? 0 : txns_[txn_version - 1].commit_ts;
        for (ColdRecord& record : fold(txn_version, exclude)) {
            if (record.status == ColdStatus::active)
                view.records.push_back(std::move(record));
        }
        sort_records(view.records);
        return view;
    }

    // Every record ever materialized (any status), full fold.
    std::vector<ColdRecord> all_records(const std::set<std::uint64_t>& exclude = {}) const {
        auto records = fold(txns_.size(), exclude);
        sort_records(records);
        return records;
    }

    std::vector<ColdRecord> active_records(const std::set<std::uint64_t>& exclude = {}) const {
        std::vector<ColdRecord> out;
        for (ColdRecord& record : fold(txns_.size(), exclude))
            if (record.status == ColdStatus::active)
                out.push_back(std::move(record));
        sort_records(out);
        return out;
    }

    // Chronological per-document change counts, one entry per transaction
    // touching the document.
    std::vector<TimelineEntry> document_timeline(
        const std::string& doc_id, const std::set<std::uint64_t>& exclude = {}) const {
        std::vector<TimelineEntry> out;
        for (const ColdTransaction& txn : txns_) {
            if (compensated_.count(txn.txn_version) || exclude.count(txn.txn_version))
                continue;
            TimelineEntry entry;
            bool touched = false;
            for (const ColdEvent& event : txn.events) {
                if (const auto* ins = std::get_if<InsertEvent>(&event)) {
                    if (ins->record.doc_id != doc_id)
                        continue;
                    touched = true;
                    if (ins->record.change_type == ChangeType::insert)
                        ++entry.inserts;
                    else
                        ++entry.updates;
                } else if (const auto* del = std::get_if<DeleteEvent>(&event)) {
                    if (del->doc_id != doc_id)
                        continue;
                    touched = true;
                    ++entry.deletes;
                } else if (const auto* sup = std::get_if<SupersedeEvent>(&event)) {
                    // Supersedes pair with update-inserts; counting both
                    // would double-book every modification.
                    if (sup->doc_id == doc_id)
                        touched = true;
                }
            }
            if (touched) {
                entry.doc_revision = out.size() + 1;
                entry.txn_version = txn.txn_version;
                entry.commit_ts = txn.commit_ts;
                out.push_back(entry);
            }
        }
        return out;
    }

    ColdStats stats(const std::set<std::uint64_t>& exclude = {}) const {
        ColdStats s;
        for (const ColdRecord& record : fold(txns_.size(), exclude)) {
            ++s.total_records;
            switch (record.status) {
                case ColdStatus::active: ++s.active_records; break;
                case ColdStatus::superseded: ++s.superseded; break;
                case ColdStatus::deleted: ++s.deleted; break;
            }
        }
        s.txn_count = txns_.size();
        std::error_code ec;
        s.bytes_on_disk = std::filesystem::exists(log_path_)
                              ? std::filesystem::file_size(log_path_, ec)
                              : 0;
        return s;
    }

private:
    using Key = std::pair<std::string, std::uint64_t>;

    static constexpr std::uint32_t kPayloadVersion = 1;
    static constexpr std::uint8_t kInsertCode = 0;
    static constexpr std::uint8_t kSupersedeCode = 1;
    static constexpr std::uint8_t kDeleteCode = 2;
    static constexpr std::uint8_t kCompensateCode = 3;

    std::uint64_t next_version() const {
        return txns_.empty() ? 1 : txns_.back().txn_version + 1;
    }

    static void sort_records(std::vector<ColdRecord>& records) {
        std::sort(records.begin(), records.end(), [](const ColdRecord& a, const ColdRecord& b) {
            if (a.doc_id != b.doc_id)
                return a.doc_id < b.doc_id;
            if (a.position != b.position)
                return a.position < b.position;
            return a.valid_from < b.valid_from;
        });
    }

    // --- validation against current active state ---

    [[noreturn]] static void reject(const std::string& why) {
        throw ConflictError("cold transaction rejected: " + why);
    }

    void validate(const ColdTransaction& txn) const {
        std::set<Key> removed;
        std::set<Key> inserted;
        // Chunk ids superseded by this transaction, available as lineage
        // parents; value = prior version number.
        std::multimap<std::string, std::uint64_t> superseded_versions;

        // The fold applies events in order, so closes must come before
        // inserts (a modify reuses its key) and compensation markers
        // stand alone.
        bool saw_insert = false;
        for (const ColdEvent& event : txn.events) {
            if (std::holds_alternative<InsertEvent>(event))
                saw_insert = true;
            else if (saw_insert)
                reject("supersede/delete events must precede inserts");
            if (std::holds_alternative<CompensateEvent>(event) && txn.events.size() != 1)
                reject("compensation must be the transaction's only event");
        }

        for (const ColdEvent& event : txn.events) {
            if (const auto* sup = std::get_if<SupersedeEvent>(&event)) {
                check_close(Key{sup->doc_id, sup->position}, sup->old_chunk_id,
                            sup->valid_to, txn.commit_ts, removed, "supersede");
                auto it = active_.find({sup->doc_id, sup->position});
                superseded_versions.emplace(sup->old_chunk_id, it->second.version_number);
            } else if (const auto* del = std::get_if<DeleteEvent>(&event)) {
                check_close(Key{del->doc_id, del->position}, del->old_chunk_id,
                            del->valid_to, txn.commit_ts, removed, "delete");
            } else if (const auto* comp = std::get_if<CompensateEvent>(&event)) {
                if (comp->target_txn_version == 0 ||
                    comp->target_txn_version >= txn.txn_version)
                    reject("compensation target " +
                           std::to_string(comp->target_txn_version) + " out of range");
            }
        }

        for (const ColdEvent& event : txn.events) {
            const auto* ins = std::get_if<InsertEvent>(&event);
            if (!ins)
                continue;
            const ColdRecord& r = ins->record;
            Key key{r.doc_id, r.position};
            if (r.chunk_id.empty())
                reject("insert without chunk_id");
            if (r.status != ColdStatus::active || r.valid_to.has_value())
                reject("insert of non-active record " + r.chunk_id);
            if (r.valid_from != txn.commit_ts)
                reject("insert valid_from " + std::to_string(r.valid_from) +
                       " differs from commit_ts " + std::to_string(txn.commit_ts));
            if (active_.count(key) && !removed.count(key))
                reject("insert at occupied key (" + r.doc_id + ", " +
                       std::to_string(r.position) + ")");
            if (inserted.count(key))
                reject("duplicate insert key (" + r.doc_id + ", " +
                       std::to_string(r.position) + ")");
            inserted.insert(key);

            switch (r.change_type) {
                case ChangeType::insert:
                    if (r.parent_hash.has_value())
                        reject("fresh insert " + r.chunk_id + " carries a parent hash");
                    if (r.version_number != 1)
                        reject("fresh insert " + r.chunk_id + " at version " +
                               std::to_string(r.version_number));
                    break;
                case ChangeType::update: {
                    if (!r.parent_hash.has_value())
                        reject("update " + r.chunk_id + " lacks a parent hash");
                    auto it = superseded_versions.find(*r.parent_hash);
                    if (it == superseded_versions.end())
                        reject("update " + r.chunk_id + " parent " + *r.parent_hash +
                               " is not superseded by this transaction");
                    if (r.version_number != it->second + 1)
                        reject("update " + r.chunk_id + " version " +
                               std::to_string(r.version_number) + " does not follow " +
                               std::to_string(it->second));
                    superseded_versions.erase(it);
                    break;
                }
                case ChangeType::removal:
                    reject("insert event cannot carry delete change type");
            }
        }
    }

    void check_close(const Key& key, const std::string& old_chunk_id, Timestamp valid_to,
                     Timestamp commit_ts, std::set<Key>& removed,
                     const char* what) const {
        if (removed.count(key))
            reject(std::string(what) + " of already-consumed key (" + key.first + ", " +
                   std::to_string(key.second) + ")");
        auto it = active_.find(key);
        if (it == active_.end())
            reject(std::string(what) + " of inactive key (" + key.first + ", " +
                   std::to_string(key.second) + ")");
        if (it->second.chunk_id != old_chunk_id)
            reject(std::string(what) + " expects chunk " + old_chunk_id + " but " +
                   it->second.chunk_id + " is active");
        if (valid_to != commit_ts)
            reject(std::string(what) + " valid_to " + std::to_string(valid_to) +
                   " differs from commit_ts " + std::to_string(commit_ts));
        removed.insert(key);
    }

    struct ActiveInfo {
        std::string chunk_id;
        std::uint64_t version_number;
    };

    void apply_to_active(const ColdTransaction& txn) {
        bool compensating = false;
        for (const ColdEvent& event : txn.events) {
            if (const auto* ins = std::get_if<InsertEvent>(&event)) {
                active_[{ins->record.doc_id, ins->record.position}] =
                    ActiveInfo{ins->record.chunk_id, ins->record.version_number};
            } else if (const auto* sup = std::get_if<SupersedeEvent>(&event)) {
                active_.erase({sup->doc_id, sup->position});
            } else if (const auto* del = std::get_if<DeleteEvent>(&event)) {
                active_.erase({del->doc_id, del->position});
            } else if (const auto* comp = std::get_if<CompensateEvent>(&event)) {
                compensated_.insert(comp->target_txn_version);
                compensating = true;
            }
        }
        if (compensating)
            rebuild_active();
    }

    void rebuild_active() {
        active_.clear();
        for (const ColdRecord& record : fold(txns_.size(), {}))
            if (record.status == ColdStatus::active)
                active_[{record.doc_id, record.position}] =
                    ActiveInfo{record.chunk_id, record.version_number};
    }

    // --- folding ---

    // Materializes records from the first txn_count transactions, skipping
    // compensated transactions and the caller's exclusions.
    std::vector<ColdRecord> fold(std::size_t txn_count,
                                 const std::set<std::uint64_t>& exclude) const {
        std::vector<ColdRecord> records;
        std::map<Key, std::size_t> active;
        for (std::size_t i = 0; i < txn_count; ++i) {
            const ColdTransaction& txn = txns_[i];
            if (compensated_.count(txn.txn_version) || exclude.count(txn.txn_version))
                continue;
            for (const ColdEvent& event : txn.events) {
                if (const auto* ins = std::get_if<InsertEvent>(&event)) {
                    Key key{ins->record.doc_id, ins->record.position};
                    if (active.count(key))
                        throw CorruptLogError("insert over active key in transaction " +
                                                  std::to_string(txn.txn_version),
                                              txn.log_offset);
                    active[key] = records.size();
                    records.push_back(ins->record);
                } else if (const auto* sup = std::get_if<SupersedeEvent>(&event)) {
                    close_record(records, active, {sup->doc_id, sup->position},
                                 sup->old_chunk_id, sup->valid_to, ColdStatus::superseded,
                                 txn);
                } else if (const auto* del = std::get_if<DeleteEvent>(&event)) {
                    close_record(records, active, {del->doc_id, del->position},
                                 del->old_chunk_id, del->valid_to, ColdStatus::deleted, txn);
                }
            }
        }
        return records;
    }

    static void close_record(std::vector<ColdRecord>& records,
                             std::map<Key, std::size_t>& active, const Key& key,
                             const std::string& old_chunk_id, Timestamp valid_to,
                             ColdStatus status, const ColdTransaction& txn) {
        auto it = active.find(key);
        if (it == active.end() || records[it->second].chunk_id != old_chunk_id)
            throw CorruptLogError("dangling close of (" + key.first + ", " +
                                      std::to_string(key.second) + ") in transaction " +
                                      std::to_string(txn.txn_version),
                                  txn.log_offset);
        ColdRecord& record = records[it->second];
        record.valid_to = valid_to;
        record.status = status;
        active.erase(it);
    }

    // --- encoding ---

    static std::string encode(const ColdTransaction& txn) {
        std::string payload;
        io::put_u32(payload, kPayloadVersion);
        io::put_u64(payload, txn.txn_version);
        io::put_i64(payload, txn.commit_ts);
        io::put_u64(payload, txn.wal_id);
        payload += encode_events(txn.events);
        return payload;
    }

    static ColdTransaction decode(const io::Frame& frame) {
        io::Reader r(frame.payload, frame.offset);
        std::uint32_t version = r.get_u32();
        if (version != kPayloadVersion)
            throw CorruptLogError("unsupported transaction payload version " +
                                      std::to_string(version),
                                  frame.offset);
        ColdTransaction txn;
        txn.log_offset = frame.offset;
        txn.txn_version = r.get_u64();
        txn.commit_ts = r.get_i64();
        txn.wal_id = r.get_u64();
        std::uint32_t count = r.get_u32();
        txn.events.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            std::uint8_t code = r.get_u8();
            switch (code) {
                case kInsertCode: {
                    InsertEvent ins;
                    ColdRecord& rec = ins.record;
                    rec.chunk_id = r.get_string();
                    rec.doc_id = r.get_string();
                    rec.position = r.get_u64();
                    rec.valid_from = r.get_i64();
                    rec.content = r.get_string();
                    rec.version_number = r.get_u64();
                    if (r.get_u8())
                        rec.parent_hash = r.get_string();
                    rec.change_type = static_cast<ChangeType>(r.get_u8());
                    std::uint32_t dim = r.get_u32();
                    rec.embedding.resize(dim);
                    for (std::uint32_t d = 0; d < dim; ++d)
                        rec.embedding[d] = r.get_f32();
                    txn.events.emplace_back(std::move(ins));
                    break;
                }
                case kSupersedeCode: {
                    SupersedeEvent sup;
                    sup.doc_id = r.get_string();
                    sup.position = r.get_u64();
                    sup.old_chunk_id = r.get_string();
                    sup.valid_to = r.get_i64();
                    txn.events.emplace_back(std::move(sup));
                    break;
                }
                case kDeleteCode: {
                    DeleteEvent del;
                    del.doc_id = r.get_string();
                    del.position = r.get_u64();
                    del.old_chunk_id = r.get_string();
                    del.valid_to = r.get_i64();
                    txn.events.emplace_back(std::move(del));
                    break;
                }
                case kCompensateCode: {
                    CompensateEvent comp;
                    comp.target_txn_version = r.get_u64();
                    txn.events.emplace_back(comp);
                    break;
                }
                default:
                    throw CorruptLogError("unknown event code " + std::to_string(code),
                                          frame.offset);
            }
        }
        if (!r.at_end())
            throw CorruptLogError("trailing bytes in transaction frame", frame.offset);
        return txn;
    }

    void load() {
        if (!std::filesystem::exists(log_path_))
            return;
        io::ScanResult scan = read_only_ ? io::scan_framed_log_file(log_path_)
                                         : io::recover_framed_log(log_path_);
        for (const io::Frame& frame : scan.frames) {
            ColdTransaction txn = decode(frame);
            if (txn.txn_version != next_version())
                throw CorruptLogError("transaction version " +
                                          std::to_string(txn.txn_version) +
                                          " breaks the sequence",
                                      frame.offset);
            if (txn.commit_ts < last_commit_ts_)
                throw CorruptLogError("commit timestamp regression in transaction " +
                                          std::to_string(txn.txn_version),
                                      frame.offset);
            for (const ColdEvent& event : txn.events)
                if (const auto* comp = std::get_if<CompensateEvent>(&event))
                    compensated_.insert(comp->target_txn_version);
            last_commit_ts_ = txn.commit_ts;
            txns_.push_back(std::move(txn));
        }
        rebuild_active();
    }

    std::filesystem::path dir_;
    std::filesystem::path log_path_;
    bool read_only_ = false;

    std::vector<ColdTransaction> txns_;
    std::set<std::uint64_t> compensated_;
    std::map<Key, ActiveInfo> active_;
    Timestamp last_commit_ts_ = 0;
    std::unique_ptr<io::FramedWriter> writer_;
};

}  // namespace tempovec
