#pragma once

// Write-ahead log for dual-tier commits. Every in-flight transaction is
// registered here before touching either tier, so a crash at any point
// leaves enough evidence to finish or void the work on restart.
//
// The file is append-only with the same CRC framing as the commit log.
// A state change is a new frame, never an in-place update; the entry's
// current state is the last frame for its wal_id. Legal transitions:
//
//   pending -> cold_written -> committed
//   pending -> compensated
//   cold_written -> compensated
//
// committed and compensated are terminal. cold_written may be re-appended
// with a higher attempt count while reconciliation retries the hot tier.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tempovec/io.hpp"
#include "tempovec/types.hpp"

namespace tempovec {

enum class WalState : std::uint8_t {
    pending = 0,       // registered, cold tier not yet written
    cold_written = 1,  // durable in the cold tier, hot tier not yet confirmed
    committed = 2,     // both tiers reflect the batch
    compensated = 3,   // voided; any cold transaction is excluded by marker
};

inline std::string_view to_string(WalState s) {
    switch (s) {
        case WalState::pending: return "pending";
        case WalState::cold_written: return "cold_written";
        case WalState::committed: return "committed";
        case WalState::compensated: return "compensated";
    }
    return "?";
}

inline bool wal_transition_legal(WalState from, WalState to) {
    switch (from) {
        case WalState::pending:
            return to == WalState::cold_written || to == WalState::compensated;
        case WalState::cold_written:
            return to == WalState::committed || to == WalState::compensated;
        case WalState::committed:
        case WalState::compensated:
            return false;
    }
    return false;
}

struct WalEntry {
    std::uint64_t wal_id = 0;
    WalState state = WalState::pending;
    std::optional<std::uint64_t> cold_txn_version;
    Timestamp created_ts = 0;
    Timestamp updated_ts = 0;
    std::string payload_digest;  // hex digest of the encoded event batch
    std::uint32_t attempts = 0;  // hot-apply retries recorded by reconcile
};

class Wal {
public:
    explicit Wal(std::filesystem::path file, bool read_only = false)
        : path_(std::move(file)), read_only_(read_only) {
        load();
    }

    // Registers a new transaction as pending. Durable on return.
    std::uint64_t begin(const std::string& payload_digest, Timestamp ts) {
        require_writable();
        WalEntry entry;
        entry.wal_id = next_id_++;
        entry.state = WalState::pending;
        entry.created_ts = ts;
        entry.updated_ts = ts;
        entry.payload_digest = payload_digest;
        append(entry);
        entries_.emplace(entry.wal_id, std::move(entry));
        return next_id_ - 1;
    }

    void mark_cold_written(std::uint64_t wal_id, std::uint64_t cold_txn_version, Timestamp ts) {
        WalEntry& entry = mutable_entry(wal_id, WalState::cold_written);
        entry.cold_txn_version = cold_txn_version;
        entry.state = WalState::cold_written;
        entry.updated_ts = ts;
        append(entry);
    }

    void mark_committed(std::uint64_t wal_id, Timestamp ts) {
        WalEntry& entry = mutable_entry(wal_id, WalState::committed);
        entry.state = WalState::committed;
        entry.updated_ts = ts;
        append(entry);
    }

    void mark_compensated(std::uint64_t wal_id, Timestamp ts) {
        WalEntry& entry = mutable_entry(wal_id, WalState::compensated);
        entry.state = WalState::compensated;
        entry.updated_ts = ts;
        append(entry);
    }

    // Re-appends a cold_written entry with attempts+1; the count survives
    // restarts so the retry budget cannot be reset by crashing.
    void record_attempt(std::uint64_t wal_id, Timestamp ts) {
        require_writable();
        auto it = entries_.find(wal_id);
        if (it == entries_.end())
            throw UsageError("unknown wal_id " + std::to_string(wal_id));
        if (it->second.state != WalState::cold_written)
            throw ConflictError("attempt recorded on entry in state " +
                                std::string(to_string(it->second.state)));
        it->second.attempts += 1;
        it->second.updated_ts = ts;
        append(it->second);
    }

    const WalEntry& entry(std::uint64_t wal_id) const {
        auto it = entries_.find(wal_id);
        if (it == entries_.end())
            throw UsageError("unknown wal_id " + std::to_string(wal_id));
        return it->second;
    }

    const std::map<std::uint64_t, WalEntry>& entries() const { return entries_; }

    // Entries in a non-terminal state, ascending wal_id.
    std::vector<WalEntry> open_entries() const {
        std::vector<WalEntry> open;
        for (const auto& [id, entry] : entries_)
            if (entry.state == WalState::pending || entry.state == WalState::cold_written)
                open.push_back(entry);
        return open;
    }

    const std::filesystem::path& path() const { return path_; }

private:
    static constexpr std::uint32_t kPayloadVersion = 1;

    void require_writable() const {
        if (read_only_)
            throw UsageError("write-ahead log opened read-only");
    }

    WalEntry& mutable_entry(std::uint64_t wal_id, WalState to) {
        require_writable();
        auto it = entries_.find(wal_id);
        if (it == entries_.end())
            throw UsageError("unknown wal_id " + std::to_string(wal_id));
        if (!wal_transition_legal(it->second.state, to))
            throw ConflictError("illegal WAL transition " +
                                std::string(to_string(it->second.state)) + " -> " +
                                std::string(to_string(to)) + " for wal_id " +
                                std::to_string(wal_id));
        return it->second;
    }

    // Each frame is a full snapshot of the entry, so replay needs no
    // cross-frame joins and a torn tail loses at most the last change.
    static std::string encode(const WalEntry& entry) {
        std::string payload;
        io::put_u32(payload, kPayloadVersion);
        io::put_u64(payload, entry.wal_id);
        io::put_u8(payload, static_cast<std::uint8_t>(entry.state));
        io::put_u8(payload, entry.cold_txn_version.has_value() ? 1 : 0);
        io::put_u64(payload, entry.cold_txn_version.value_or(0));
        io::put_i64(payload, entry.created_ts);
        io::put_i64(payload, entry.updated_ts);
        io::put_u32(payload, entry.attempts);
        io::put_string(payload, entry.payload_digest);
        return payload;
    }

    static WalEntry decode(const io::Frame& frame) {
        io::Reader r(frame.payload, frame.offset);
        std::uint32_t version = r.get_u32();
        if (version != kPayloadVersion)
            throw CorruptLogError("unsupported WAL payload version " + std::to_string(version),
                                  frame.offset);
        WalEntry entry;
        entry.wal_id = r.get_u64();
        std::uint8_t state = r.get_u8();
        if (state > static_cast<std::uint8_t>(WalState::compensated))
            throw CorruptLogError("impossible WAL state " + std::to_string(state), frame.offset);
        entry.state = static_cast<WalState>(state);
        bool has_version = r.get_u8() != 0;
        std::uint64_t cold_version = r.get_u64();
        if (has_version)
            entry.cold_txn_version = cold_version;
        entry.created_ts = r.get_i64();
        entry.updated_ts = r.get_i64();
        entry.attempts = r.get_u32();
        entry.payload_digest = r.get_string();
        if (!r.at_end())
            throw CorruptLogError("trailing bytes in WAL frame", frame.offset);
        return entry;
    }

    void append(const WalEntry& entry) {
        if (!writer_)
            writer_ = std::make_unique<io::FramedWriter>(path_);
        writer_->append(encode(entry), /*sync=*/true);
    }

    void load() {
        if (!std::filesystem::exists(path_))
            return;
        io::ScanResult scan = read_only_ ? io::scan_framed_log_file(path_)
                                         : io::recover_framed_log(path_);
        for (const io::Frame& frame : scan.frames) {
            WalEntry entry = decode(frame);
            auto it = entries_.find(entry.wal_id);
            if (it == entries_.end()) {
                if (entry.state != WalState::pending)
                    throw CorruptLogError("WAL entry " + std::to_string(entry.wal_id) +
                                              " first appears in state " +
                                              std::string(to_string(entry.state)),
                                          frame.offset);
                if (entry.wal_id < next_id_)
                    throw CorruptLogError("WAL id " + std::to_string(entry.wal_id) +
                                              " repeats or goes backwards",
                                          frame.offset);
                next_id_ = entry.wal_id + 1;
                entries_.emplace(entry.wal_id, std::move(entry));
                continue;
            }
            const WalEntry& prior = it->second;
            bool attempt_bump = entry.state == WalState::cold_written &&
                                prior.state == WalState::cold_written &&
                                entry.attempts > prior.attempts;
            if (!attempt_bump && !wal_transition_legal(prior.state, entry.state))
                throw CorruptLogError("illegal WAL transition " +
                                          std::string(to_string(prior.state)) + " -> " +
                                          std::string(to_string(entry.state)) + " for wal_id " +
                                          std::to_string(entry.wal_id),
                                      frame.offset);
            entry.created_ts = prior.created_ts;
            it->second = std::move(entry);
        }
    }

    std::filesystem::path path_;
    bool read_only_ = false;
    std::uint64_t next_id_ = 1;
    std::map<std::uint64_t, WalEntry> entries_;
    std::unique_ptr<io::FramedWriter> writer_;
};

}  // namespace tempovec
