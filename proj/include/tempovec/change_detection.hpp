#pragma once

// Chunk-level change detection against the previous ingested version.
//
// The hash store keeps, per document, the ordered chunk_id list of the last
// ingested version. Comparing a new version against it classifies every
// chunk as unchanged, moved, modified, new, or deleted without touching the
// storage tiers. Only new and modified chunks need embedding; moves carry
// position metadata only.

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tempovec/chunking.hpp"
#include "tempovec/io.hpp"
#include "tempovec/types.hpp"

namespace tempovec {

struct NewChunk {
    std::size_t position;
    std::string chunk_id;
    bool operator==(const NewChunk&) const = default;
};

struct ModifiedChunk {
    std::size_t position;
    std::string old_chunk_id;
    std::string new_chunk_id;
    bool operator==(const ModifiedChunk&) const = default;
};

struct DeletedChunk {
    std::size_t old_position;
    std::string chunk_id;
    bool operator==(const DeletedChunk&) const = default;
};

struct UnchangedChunk {
    std::size_t position;
    std::string chunk_id;
    bool operator==(const UnchangedChunk&) const = default;
};

struct MovedChunk {
    std::size_t old_position;
    std::size_t new_position;
    std::string chunk_id;
    bool operator==(const MovedChunk&) const = default;
};

struct ChangeSet {
    std::vector<NewChunk> new_chunks;
    std::vector<ModifiedChunk> modified;
    std::vector<DeletedChunk> deleted;
    std::vector<UnchangedChunk> unchanged;
    std::vector<MovedChunk> moved;

    bool empty() const {
        return new_chunks.empty() && modified.empty() && deleted.empty() &&
               moved.empty();
    }

    // Chunks needing an embedding: exactly the new and modified ones.
    std::size_t embedding_workload() const {
        return new_chunks.size() + modified.size();
    }
};

// Classification passes, in order:
//   1. same position, same hash            -> unchanged
//   2. hash present at a different old
//      position, per-occurrence, greedy
//      ascending old position              -> moved
//   3. remaining new position that is also
//      an unconsumed old position          -> modified
//   4. remaining new entries               -> new
//   5. unconsumed old entries              -> deleted
// Duplicate hashes are accounted per occurrence, so every old position is
// consumed exactly once and every new position is classified exactly once.
inline ChangeSet detect_changes(const std::vector<std::string>& old_hashes,
                                const std::vector<Chunk>& new_chunks) {
    ChangeSet cs;
    std::vector<bool> old_consumed(old_hashes.size(), false);
    std::vector<bool> new_done(new_chunks.size(), false);

    // Pass 1: unchanged.
    for (std::size_t p = 0; p < new_chunks.size(); ++p) {
        if (p < old_hashes.size() && old_hashes[p] == new_chunks[p].chunk_id) {
            cs.unchanged.push_back({p, new_chunks[p].chunk_id});
            old_consumed[p] = true;
            new_done[p] = true;
        }
    }

    // Pass 2: moved. Old occurrences of each hash are consumed in ascending
    // position order so duplicate hashes match deterministically.
    std::unordered_map<std::string, std::vector<std::size_t>> old_free;
    for (std::size_t p = 0; p < old_hashes.size(); ++p) {
        if (!old_consumed[p])
            old_free[old_hashes[p]].push_back(p);
    }
    std::unordered_map<std::string, std::size_t> next_free;
    for (std::size_t p = 0; p < new_chunks.size(); ++p) {
        if (new_done[p])
            continue;
        auto it = old_free.find(new_chunks[p].chunk_id);
        if (it == old_free.end())
            continue;
        std::size_t& cursor = next_free[new_chunks[p].chunk_id];
        if (cursor >= it->second.size())
            continue;
        std::size_t old_pos = it->second[cursor++];
        cs.moved.push_back({old_pos, p, new_chunks[p].chunk_id});
        old_consumed[old_pos] = true;
        new_done[p] = true;
    }

    // Pass 3: modified (same position, different content).
    for (std::size_t p = 0; p < new_chunks.size(); ++p) {
        if (new_done[p] || p >= old_hashes.size() || old_consumed[p])
            continue;
        cs.modified.push_back({p, old_hashes[p], new_chunks[p].chunk_id});
        old_consumed[p] = true;
        new_done[p] = true;
    }

    // Pass 4: new.
    for (std::size_t p = 0; p < new_chunks.size(); ++p) {
        if (!new_done[p])
            cs.new_chunks.push_back({p, new_chunks[p].chunk_id});
    }

    // Pass 5: deleted.
    for (std::size_t p = 0; p < old_hashes.size(); ++p) {
        if (!old_consumed[p])
            cs.deleted.push_back({p, old_hashes[p]});
    }
    return cs;
}

// Per-document chunk-hash lists, persisted as JSON. Writers replace whole
// entries under a lock; readers snapshot a copy, so a concurrent read sees
// either the old or the new list, never a mix.
class HashStore {
public:
    HashStore() = default;
    explicit HashStore(std::filesystem::path store_path)
        : store_path_(std::move(store_path)) {}

    // The mutex is not state; moves only transfer the entry map.
    HashStore(HashStore&& o) noexcept
        : store_path_(std::move(o.store_path_)), entries_(std::move(o.entries_)) {}
    HashStore& operator=(HashStore&& o) noexcept {
        if (this != &o) {
            std::scoped_lock lk(mu_, o.mu_);
            store_path_ = std::move(o.store_path_);
            entries_ = std::move(o.entries_);
        }
        return *this;
    }

    static HashStore load(const std::filesystem::path& path) {
        HashStore store(path);
        if (!std::filesystem::exists(path))
            return store;
        std::string raw;
        try {
            raw = io::read_file(path);
        } catch (const IoError& e) {
            throw IoError("hash store unreadable at " + path.string() + ": " + e.what());
        }
        nlohmann::json j = nlohmann::json::parse(raw, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw CorruptLogError("hash store malformed at " + path.string(), 0);
        for (auto& [doc_id, hashes] : j.items()) {
            if (!hashes.is_array())
                throw CorruptLogError("hash store malformed at " + path.string(), 0);
            std::vector<std::string> list;
            for (auto& h : hashes) {
                if (!h.is_string())
                    throw CorruptLogError("hash store malformed at " + path.string(), 0);
                list.push_back(h.get<std::string>());
            }
            store.entries_[doc_id] = std::move(list);
        }
        return store;
    }

    // Atomic: temp file then rename, so a crash never leaves a torn store.
    void save() const {
        std::scoped_lock lk(mu_);
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [doc_id, hashes] : entries_)
            j[doc_id] = hashes;
        io::atomic_write_file(store_path_, j.dump(2));
    }

    std::vector<std::string> get(const std::string& doc_id) const {
        std::scoped_lock lk(mu_);
        auto it = entries_.find(doc_id);
        return it == entries_.end() ? std::vector<std::string>{} : it->second;
    }

    bool contains(const std::string& doc_id) const {
        std::scoped_lock lk(mu_);
        return entries_.count(doc_id) > 0;
    }

    void update(const std::string& doc_id, std::vector<std::string> new_hashes) {
        std::scoped_lock lk(mu_);
        entries_[doc_id] = std::move(new_hashes);
    }

    void erase(const std::string& doc_id) {
        std::scoped_lock lk(mu_);
        entries_.erase(doc_id);
    }

    std::vector<std::string> doc_ids() const {
        std::scoped_lock lk(mu_);
        std::vector<std::string> ids;
        ids.reserve(entries_.size());
        for (const auto& [doc_id, _] : entries_)
            ids.push_back(doc_id);
        return ids;
    }

    std::size_t size() const {
        std::scoped_lock lk(mu_);
        return entries_.size();
    }

    const std::filesystem::path& path() const { return store_path_; }

private:
    std::filesystem::path store_path_;
    mutable std::mutex mu_;
    std::map<std::string, std::vector<std::string>> entries_;
};

inline HashStore load_hash_store(const std::filesystem::path& path) {
    return HashStore::load(path);
}

inline void save_hash_store(const HashStore& store) { store.save(); }

}  // namespace tempovec
