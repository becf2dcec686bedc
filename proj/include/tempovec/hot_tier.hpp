#pragma once

// Hot tier: the currently-active chunk records, searchable by cosine
// similarity through an in-memory HNSW graph.
//
// Durability model: an append-only record file plus an append-only
// tombstone file of dead slot indices. The graph itself is never
// persisted; startup replays the record file and re-inserts live records.
// Both files carry a generation stamp so a crash mid-compaction can never
// pair fresh records with stale tombstones: on mismatch the tombstone file
// is ignored and lazily rewritten.
//
// Replace appends the new record before the old slot's tombstone. A crash
// between the two writes leaves both records in the file; replay resolves
// the duplicate key in favor of the later record, which is exactly the
// state the interrupted replace was committing.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tempovec/embedding.hpp"
#include "tempovec/hnsw.hpp"
#include "tempovec/io.hpp"
#include "tempovec/types.hpp"

namespace tempovec {

// An active chunk: key (doc_id, position) is unique among live records.
// Status is implicitly "active"; records stop being active by leaving the
// hot tier, never by mutation.
struct HotRecord {
    std::string chunk_id;
    EmbeddingVector embedding;
    std::string doc_id;
    std::uint64_t position = 0;
    Timestamp valid_from = 0;
    std::string content;
};

struct HotStats {
    std::size_t active_count = 0;
    std::size_t tombstone_count = 0;
    std::size_t dimension = 0;
    HnswParams index_params;
};

class HotTier {
public:
    static constexpr std::string_view kRecordsMagic = "TVHT";
    static constexpr std::string_view kTombstonesMagic = "TVTS";
    static constexpr std::uint32_t kFormatVersion = 1;
    // compact() rebuilds only above this dead-slot fraction.
    static constexpr double kCompactThreshold = 0.20;

    explicit HotTier(std::filesystem::path dir, HnswParams params = {},
                     bool read_only = false)
        : dir_(std::move(dir)),
          records_path_(dir_ / "records.bin"),
          tombstones_path_(dir_ / "tombstones.bin"),
          params_(params),
          read_only_(read_only),
          index_(std::make_unique<HnswIndex>(params)) {
        if (!read_only_)
            std::filesystem::create_directories(dir_);
        load();
    }

    const HnswParams& params() const { return params_; }
    std::size_t dimension() const { return params_.dimension; }

    void insert(const HotRecord& record, bool sync = true) {
        std::unique_lock lk(mu_);
        require_writable();
        check_record(record);
        if (auto slot = find_live(record.doc_id, record.position))
            throw ConflictError("hot record already live at (" + record.doc_id + ", " +
                                std::to_string(record.position) + "): chunk " +
                                slots_[*slot].record.chunk_id);
        append_record(record, sync);
    }

    // Swaps the record at new_record's key in one writer-side step: a
    // concurrent search sees the old record or the new one, never both.
    void replace(const std::string& old_chunk_id, const HotRecord& new_record,
                 bool sync = true) {
        std::unique_lock lk(mu_);
        require_writable();
        check_record(new_record);
        auto slot = find_live(new_record.doc_id, new_record.position);
        if (!slot)
            throw DivergenceError("hot replace: no live record at (" + new_record.doc_id +
                                  ", " + std::to_string(new_record.position) + ")");
        if (slots_[*slot].record.chunk_id != old_chunk_id)
            throw DivergenceError("hot replace: expected chunk " + old_chunk_id +
                                  " at (" + new_record.doc_id + ", " +
                                  std::to_string(new_record.position) + "), found " +
                                  slots_[*slot].record.chunk_id);
        append_record(new_record, sync);
        kill_slot(*slot, sync);
    }

    void remove(const std::string& chunk_id, const std::string& doc_id,
                std::uint64_t position, bool sync = true) {
        std::unique_lock lk(mu_);
        require_writable();
        auto slot = find_live(doc_id, position);
        if (!slot)
            throw DivergenceError("hot delete: no live record at (" + doc_id + ", " +
                                  std::to_string(position) + ")");
        if (slots_[*slot].record.chunk_id != chunk_id)
            throw DivergenceError("hot delete: expected chunk " + chunk_id + " at (" +
                                  doc_id + ", " + std::to_string(position) + "), found " +
                                  slots_[*slot].record.chunk_id);
        key_.erase({doc_id, position});
        kill_slot(*slot, sync);
    }

    // Flushes record and tombstone appends issued with sync = false.
    void sync_files() {
        std::unique_lock lk(mu_);
        require_writable();
        if (records_writer_)
            records_writer_->sync();
        if (tombstones_writer_)
            tombstones_writer_->sync();
    }

    // Top-k active records by descending cosine similarity. Ties break by
    // ascending chunk_id, then (doc_id, position) for full determinism.
    std::vector<std::pair<HotRecord, float>> search(const EmbeddingVector& query,
                                                    std::size_t k,
                                                    std::size_t ef_override = 0) const {
        if (query.size() != params_.dimension)
            throw DimensionMismatchError(params_.dimension, query.size());
        if (k == 0)
            throw UsageError("hot search requires k >= 1");
        std::shared_lock lk(mu_);
        auto hits = index_->search(query.data(), k, ef_override);
        std::vector<std::pair<HotRecord, float>> out;
        out.reserve(hits.size());
        for (const auto& [sim, slot] : hits)
            out.emplace_back(slots_[slot].record, sim);
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second)
                return a.second > b.second;
            const HotRecord& ra = a.first;
            const HotRecord& rb = b.first;
            if (ra.chunk_id != rb.chunk_id)
                return ra.chunk_id < rb.chunk_id;
            if (ra.doc_id != rb.doc_id)
                return ra.doc_id < rb.doc_id;
            return ra.position < rb.position;
        });
        return out;
    }

    std::optional<HotRecord> find(const std::string& doc_id, std::uint64_t position) const {
        std::shared_lock lk(mu_);
        if (auto slot = find_live(doc_id, position))
            return slots_[*slot].record;
        return std::nullopt;
    }

    // Live records in (doc_id, position) order.
    std::vector<HotRecord> active_records() const {
        std::shared_lock lk(mu_);
        std::vector<HotRecord> out;
        out.reserve(key_.size());
        for (const auto& [key, slot] : key_)
            out.push_back(slots_[slot].record);
        return out;
    }

    HotStats stats() const {
        std::shared_lock lk(mu_);
        return HotStats{key_.size(), tombstone_count_, params_.dimension, params_};
    }

    // Rebuilds the record file and graph over live records when the dead
    // fraction exceeds the threshold. Returns whether a rebuild happened.
    bool compact() {
        std::unique_lock lk(mu_);
        require_writable();
        if (tombstone_count_ == 0)
            return false;
        double ratio = static_cast<double>(tombstone_count_) /
                       static_cast<double>(slots_.size());
        if (ratio <= kCompactThreshold)
            return false;
        rebuild_files();
        return true;
    }

private:
    struct Slot {
        HotRecord record;
        bool dead = false;
    };

    void require_writable() const {
        if (read_only_)
            throw UsageError("hot tier opened read-only");
    }

    void check_record(const HotRecord& record) const {
        if (record.embedding.size() != params_.dimension)
            throw DimensionMismatchError(params_.dimension, record.embedding.size());
        if (record.chunk_id.empty())
            throw UsageError("hot record requires a chunk_id");
    }

    std::optional<std::uint32_t> find_live(const std::string& doc_id,
                                           std::uint64_t position) const {
        auto it = key_.find({doc_id, position});
        if (it == key_.end())
            return std::nullopt;
        return it->second;
    }

    static std::string header_payload(std::string_view magic, std::uint64_t generation) {
        std::string payload(magic);
        io::put_u32(payload, kFormatVersion);
        io::put_u64(payload, generation);
        return payload;
    }

    static std::uint64_t parse_header(const io::Frame& frame, std::string_view magic,
                                      const std::filesystem::path& path) {
        const std::string& p = frame.payload;
        if (p.size() != magic.size() + 12 || p.compare(0, magic.size(), magic) != 0)
            throw CorruptLogError("bad header in " + path.string(), frame.offset);
        io::Reader r(std::string_view(p).substr(magic.size()), frame.offset);
        std::uint32_t version = r.get_u32();
        if (version != kFormatVersion)
            throw CorruptLogError("unsupported format version " + std::to_string(version) +
                                      " in " + path.string(),
                                  frame.offset);
        return r.get_u64();
    }

    static std::string encode_record(const HotRecord& record) {
        std::string payload;
        io::put_string(payload, record.chunk_id);
        io::put_string(payload, record.doc_id);
        io::put_u64(payload, record.position);
        io::put_i64(payload, record.valid_from);
        io::put_string(payload, record.content);
        io::put_u32(payload, static_cast<std::uint32_t>(record.embedding.size()));
        for (float v : record.embedding)
            io::put_f32(payload, v);
        return payload;
    }

    static HotRecord decode_record(const io::Frame& frame) {
        io::Reader r(frame.payload, frame.offset);
        HotRecord record;
        record.chunk_id = r.get_string();
        record.doc_id = r.get_string();
        record.position = r.get_u64();
        record.valid_from = r.get_i64();
        record.content = r.get_string();
        std::uint32_t dim = r.get_u32();
        record.embedding.resize(dim);
        for (std::uint32_t i = 0; i < dim; ++i)
            record.embedding[i] = r.get_f32();
        if (!r.at_end())
            throw CorruptLogError("trailing bytes in hot record", frame.offset);
        return record;
    }

    // Registers a fresh slot: in-memory state, graph link, and (in RW
    // mode) the durable record frame.
    void append_record(const HotRecord& record, bool sync) {
        std::uint32_t slot = static_cast<std::uint32_t>(slots_.size());
        if (records_writer_)
            records_writer_->append(encode_record(record), sync);
        slots_.push_back(Slot{record, false});
        key_[{record.doc_id, record.position}] = slot;
        index_->insert(slot, slots_[slot].record.embedding.data());
    }

    void kill_slot(std::uint32_t slot, bool sync) {
        slots_[slot].dead = true;
        ++tombstone_count_;
        index_->remove(slot);
        append_tombstone(slot, sync);
    }

    void append_tombstone(std::uint32_t slot, bool sync) {
        if (read_only_)
            return;
        if (tombstones_stale_) {
            // The on-disk tombstone file belongs to an older generation
            // (or predates a crash-interrupted compaction). The caller has
            // already marked the slot dead, so a full rewrite captures it.
            rewrite_tombstone_file();
            return;
        }
        if (!tombstones_writer_)
            tombstones_writer_ = std::make_unique<io::FramedWriter>(tombstones_path_);
        std::string payload;
        io::put_u32(payload, slot);
        tombstones_writer_->append(payload, sync);
    }

    void rewrite_tombstone_file() {
        std::filesystem::path tmp = tombstones_path_;
        tmp += ".tmp";
        std::filesystem::remove(tmp);
        {
            io::FramedWriter w(tmp);
            w.append(header_payload(kTombstonesMagic, generation_), false);
            for (std::uint32_t slot = 0; slot < slots_.size(); ++slot)
                if (slots_[slot].dead) {
                    std::string payload;
                    io::put_u32(payload, slot);
                    w.append(payload, false);
                }
            w.sync();
        }
        std::filesystem::rename(tmp, tombstones_path_);
        io::fsync_dir(dir_);
        tombstones_writer_.reset();
        tombstones_stale_ = false;
    }

    void load() {
        if (!std::filesystem::exists(records_path_)) {
            if (read_only_)
                return;
            records_writer_ = std::make_unique<io::FramedWriter>(records_path_);
            records_writer_->append(header_payload(kRecordsMagic, generation_), true);
            rewrite_tombstone_file();
            return;
        }

        io::ScanResult records_scan = read_only_ ? io::scan_framed_log_file(records_path_)
                                             : io::recover_framed_log(records_path_);
        if (records_scan.frames.empty())
            throw CorruptLogError("hot record file has no header: " + records_path_.string(),
                                  0);
        generation_ = parse_header(records_scan.frames[0], kRecordsMagic, records_path_);

        for (std::size_t i = 1; i < records_scan.frames.size(); ++i) {
            HotRecord record = decode_record(records_scan.frames[i]);
            if (record.embedding.size() != params_.dimension)
                throw DimensionMismatchError(params_.dimension, record.embedding.size());
            std::uint32_t slot = static_cast<std::uint32_t>(slots_.size());
            auto key = std::make_pair(record.doc_id, record.position);
            if (auto it = key_.find(key); it != key_.end()) {
                // Crash-interrupted replace: the later record wins, the
                // earlier one gets the tombstone it never received.
                slots_[it->second].dead = true;
                ++tombstone_count_;
                tombstones_stale_ = true;
            }
            key_[key] = slot;
            slots_.push_back(Slot{std::move(record), false});
        }

        bool tombstones_ok = false;
        if (std::filesystem::exists(tombstones_path_)) {
            io::ScanResult ts = read_only_ ? io::scan_framed_log_file(tombstones_path_)
                                       : io::recover_framed_log(tombstones_path_);
            if (!ts.frames.empty() &&
                parse_header(ts.frames[0], kTombstonesMagic, tombstones_path_) ==
                    generation_) {
                tombstones_ok = true;
                for (std::size_t i = 1; i < ts.frames.size(); ++i) {
                    io::Reader r(ts.frames[i].payload, ts.frames[i].offset);
                    std::uint32_t slot = r.get_u32();
                    if (slot >= slots_.size())
                        throw CorruptLogError("tombstone for unknown slot " +
                                                  std::to_string(slot),
                                              ts.frames[i].offset);
                    if (!slots_[slot].dead) {
                        slots_[slot].dead = true;
                        // Only unmap the key if this slot still owns it; a
                        // replayed replace may have remapped it already.
                        auto key = std::make_pair(slots_[slot].record.doc_id,
                                                  slots_[slot].record.position);
                        if (auto it = key_.find(key); it != key_.end() && it->second == slot)
                            key_.erase(it);
                        ++tombstone_count_;
                    }
                }
            }
        }
        if (!tombstones_ok)
            tombstones_stale_ = true;

        for (std::uint32_t slot = 0; slot < slots_.size(); ++slot)
            if (!slots_[slot].dead)
                index_->insert(slot, slots_[slot].record.embedding.data());

        if (!read_only_)
            records_writer_ = std::make_unique<io::FramedWriter>(records_path_);
    }

    // Writes live records under a bumped generation, then swaps both files
    // into place. Rename order makes every crash window safe: fresh
    // records with a stale tombstone file is detected by the generation
    // mismatch and the tombstones are ignored.
    void rebuild_files() {
        std::vector<HotRecord> live;
        live.reserve(slots_.size() - tombstone_count_);
        for (const auto& slot : slots_)
            if (!slot.dead)
                live.push_back(slot.record);

        ++generation_;
        std::filesystem::path tmp = records_path_;
        tmp += ".tmp";
        std::filesystem::remove(tmp);
        {
            io::FramedWriter w(tmp);
            w.append(header_payload(kRecordsMagic, generation_), false);
            for (const HotRecord& record : live)
                w.append(encode_record(record), false);
            w.sync();
        }
        records_writer_.reset();
        std::filesystem::rename(tmp, records_path_);
        io::fsync_dir(dir_);

        slots_.clear();
        key_.clear();
        tombstone_count_ = 0;
        index_ = std::make_unique<HnswIndex>(params_);
        for (HotRecord& record : live) {
            std::uint32_t slot = static_cast<std::uint32_t>(slots_.size());
            key_[{record.doc_id, record.position}] = slot;
            slots_.push_back(Slot{std::move(record), false});
            index_->insert(slot, slots_[slot].record.embedding.data());
        }
        // Tombstone rewrite comes after the in-memory reset so the fresh
        // file is empty. Crash before this point: generation mismatch,
        // stale tombstones ignored.
        rewrite_tombstone_file();
        records_writer_ = std::make_unique<io::FramedWriter>(records_path_);
    }

    std::filesystem::path dir_;
    std::filesystem::path records_path_;
    std::filesystem::path tombstones_path_;
    HnswParams params_;
    bool read_only_ = false;

    mutable std::shared_mutex mu_;
    std::vector<Slot> slots_;
    std::map<std::pair<std::string, std::uint64_t>, std::uint32_t> key_;
    std::size_t tombstone_count_ = 0;
    std::uint64_t generation_ = 1;
    bool tombstones_stale_ = false;
    std::unique_ptr<HnswIndex> index_;
    std::unique_ptr<io::FramedWriter> records_writer_;
    std::unique_ptr<io::FramedWriter> tombstones_writer_;
};

}  // namespace tempovec
