#pragma once

// Brute-force temporal oracle. Instead of folding events into records, it
// keeps a per-key list of validity intervals and answers point-in-time
// queries by linear scan. Deliberately structured nothing like the real
// cold tier so the two can cross-check each other.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tempovec::test {

struct OracleInterval {
    std::string chunk_id;
    std::string doc_id;
    std::uint64_t position = 0;
    std::int64_t from = 0;
    std::optional<std::int64_t> to;
    std::string final_status = "active";  // active | superseded | deleted
    std::uint64_t version_number = 1;
    std::optional<std::string> parent_hash;
    std::string change_type = "insert";  // insert | update
    std::uint64_t opened_by_txn = 0;
    std::uint64_t closed_by_txn = 0;  // 0 = still open
};

class ReplayOracle {
public:
    void begin_txn(std::uint64_t txn_id, std::int64_t ts) {
        current_txn_ = txn_id;
        current_ts_ = ts;
    }

    void insert(const std::string& doc_id, std::uint64_t position,
                const std::string& chunk_id, std::uint64_t version,
                std::optional<std::string> parent, const std::string& change_type) {
        OracleInterval iv;
        iv.chunk_id = chunk_id;
        iv.doc_id = doc_id;
        iv.position = position;
        iv.from = current_ts_;
        iv.version_number = version;
        iv.parent_hash = std::move(parent);
        iv.change_type = change_type;
        iv.opened_by_txn = current_txn_;
        intervals_.push_back(std::move(iv));
    }

    void close(const std::string& doc_id, std::uint64_t position, bool deleted) {
        for (auto it = intervals_.rbegin(); it != intervals_.rend(); ++it) {
            if (it->doc_id == doc_id && it->position == position && !it->to.has_value()) {
                it->to = current_ts_;
                it->final_status = deleted ? "deleted" : "superseded";
                it->closed_by_txn = current_txn_;
                return;
            }
        }
    }

    // Intervals containing ts, keyed by (doc_id, position).
    std::map<std::pair<std::string, std::uint64_t>, OracleInterval> at_time(
        std::int64_t ts) const {
        std::map<std::pair<std::string, std::uint64_t>, OracleInterval> out;
        for (const auto& iv : intervals_)
            if (iv.from <= ts && (!iv.to.has_value() || ts < *iv.to))
                out[{iv.doc_id, iv.position}] = iv;
        return out;
    }

    // Intervals open after replaying the first txn_count transactions.
    std::map<std::pair<std::string, std::uint64_t>, OracleInterval> at_txn(
        std::uint64_t txn_count) const {
        std::map<std::pair<std::string, std::uint64_t>, OracleInterval> out;
        for (const auto& iv : intervals_)
            if (iv.opened_by_txn <= txn_count &&
                (iv.closed_by_txn == 0 || iv.closed_by_txn > txn_count))
                out[{iv.doc_id, iv.position}] = iv;
        return out;
    }

    const std::vector<OracleInterval>& intervals() const { return intervals_; }

private:
    std::vector<OracleInterval> intervals_;
    std::uint64_t current_txn_ = 0;
    std::int64_t current_ts_ = 0;
};

}  // namespace tempovec::test
