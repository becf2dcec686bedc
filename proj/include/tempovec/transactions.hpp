#pragma once

// Dual-tier commit protocol. A batch of cold-tier events and the hot-tier
// mutations derived from it are applied under a write-ahead log so that a
// crash at any point can be finished or voided on restart:
//
//   1. append WAL entry pending            (fsync)
//   2. cold append; advance to cold_written (fsync)
//   3. apply hot mutations                 (fsync)
//   4. advance to committed                (fsync)
//
// The cold tier is always written first, so it is never behind the hot
// tier. A transaction whose WAL entry is not committed is excluded from
// every read until reconcile() either finishes the hot application or
// appends a compensating marker that voids the cold transaction forever.
//
// Hot mutations are derived from the event batch itself, never passed
// separately, so the two tiers cannot be given diverging payloads.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tempovec/cold_tier.hpp"
#include "tempovec/hot_tier.hpp"
#include "tempovec/sha256.hpp"
#include "tempovec/types.hpp"
#include "tempovec/wal.hpp"

namespace tempovec {

// Instants at which the crash harness may kill the process. The hook runs
// after the named step has become durable and before the next one starts.
enum class CrashPoint {
    after_wal_pending,
    after_cold_append,
    after_wal_cold_written,
    mid_hot_apply,  // between two key applications inside step 3
    after_hot_apply,
    after_wal_committed,
};

struct ReconcileReport {
    std::size_t repaired = 0;     // cold_written entries brought to committed
    std::size_t compensated = 0;  // entries voided (pending or retries exhausted)
};

// Records present in exactly one tier. A key whose two tiers disagree on
// the chunk contributes one item to each list.
struct DivergenceReport {
    struct Item {
        std::string chunk_id;
        std::string doc_id;
        std::uint64_t position = 0;
    };
    std::vector<Item> hot_only;
    std::vector<Item> cold_only;
    bool clean() const { return hot_only.empty() && cold_only.empty(); }
};

class TxnManager {
public:
    // Hot-apply retries per entry before reconcile gives up and compensates.
    static constexpr std::uint32_t kMaxHotAttempts = 3;
    // Suggested cadence for periodic reconciliation; bounds hot/cold
    // divergence to roughly this plus one pass.
    static constexpr Timestamp kDefaultReconcileIntervalMs = 500;

    TxnManager(Wal& wal, ColdTier& cold, HotTier& hot)
        : wal_(wal), cold_(cold), hot_(hot) {}

    // Test instrumentation. The crash hook fires at each CrashPoint; the
    // fault hook fires before every hot-tier key mutation and may throw.
    void set_crash_hook(std::function<void(CrashPoint)> hook) { crash_hook_ = std::move(hook); }
    void set_hot_fault_hook(std::function<void()> hook) { hot_fault_hook_ = std::move(hook); }

    // Runs the four-step protocol and returns the final WAL entry.
    //   committed     both tiers reflect the batch (the only acked outcome)
    //   cold_written  hot application failed; durable in cold, excluded
    //                 from reads until reconcile repairs or compensates it
    // A cold-tier failure in step 2 compensates the entry and rethrows:
    // nothing is visible anywhere.
    WalEntry commit_dual(std::vector<ColdEvent> events, Timestamp commit_ts) {
        std::string digest = sha256_hex(ColdTier::encode_events(events));
        std::uint64_t wal_id = wal_.begin(digest, commit_ts);
        at(CrashPoint::after_wal_pending);

        std::uint64_t cold_version = 0;
        try {
            cold_version = cold_.append(std::move(events), commit_ts, wal_id);
        } catch (...) {
            wal_.mark_compensated(wal_id, commit_ts);
            throw;
        }
        at(CrashPoint::after_cold_append);

        wal_.mark_cold_written(wal_id, cold_version, commit_ts);
        at(CrashPoint::after_wal_cold_written);

        // A batch touching keys claimed by an earlier unreconciled entry
        // must queue behind it: applying out of order would strand the
        // older transaction in an unrepairable hot state.
        if (overlaps_open_keys(wal_id, cold_.transactions()[cold_version - 1]))
            return wal_.entry(wal_id);  // cold_written; reconcile replays in order

        try {
            apply_to_hot(cold_.transactions()[cold_version - 1], /*retry=*/false);
        } catch (const Error&) {
            return wal_.entry(wal_id);  // cold_written; reconcile takes over
        }
        at(CrashPoint::after_hot_apply);

        wal_.mark_committed(wal_id, commit_ts);
        at(CrashPoint::after_wal_committed);
        return wal_.entry(wal_id);
    }

    // Drives every open WAL entry to a terminal state. Entries updated
    // within the last staleness_ms are skipped (in-flight grace window).
    // Requires exclusive writer access, like commit_dual.
    ReconcileReport reconcile(Timestamp staleness_ms = 0) {
        Timestamp now = std::max(now_ms(), cold_.latest_commit_ts());
        ReconcileReport report;
        for (const WalEntry& open : wal_.open_entries()) {
            if (staleness_ms > 0 && open.updated_ts > now - staleness_ms)
                continue;
            WalEntry entry = open;

            // A pending entry whose batch did reach the cold log means the
            // crash hit between step 2 and its WAL record: adopt the cold
            // transaction instead of discarding durable work.
            if (entry.state == WalState::pending) {
                const ColdTransaction* txn = cold_txn_for_wal(entry.wal_id);
                if (txn != nullptr &&
                    sha256_hex(ColdTier::encode_events(txn->events)) == entry.payload_digest) {
                    wal_.mark_cold_written(entry.wal_id, txn->txn_version, now);
                    entry = wal_.entry(entry.wal_id);
                } else {
                    wal_.mark_compensated(entry.wal_id, now);
                    report.compensated += 1;
                    continue;
                }
            }

            std::uint64_t version = *entry.cold_txn_version;

            // Marker already durable but the WAL mark was lost to a crash.
            if (cold_.compensated().count(version) != 0) {
                wal_.mark_compensated(entry.wal_id, now);
                report.compensated += 1;
                continue;
            }

            const ColdTransaction& txn = cold_.transactions()[version - 1];
            bool repaired = false;
            while (entry.attempts < kMaxHotAttempts) {
                try {
                    apply_to_hot(txn, /*retry=*/true);
                    wal_.mark_committed(entry.wal_id, now);
                    report.repaired += 1;
                    repaired = true;
                    break;
                } catch (const Error&) {
                    wal_.record_attempt(entry.wal_id, now);
                    entry = wal_.entry(entry.wal_id);
                }
            }
            if (!repaired) {
                compensate(txn);
                wal_.mark_compensated(entry.wal_id, now);
                report.compensated += 1;
            }
        }
        return report;
    }

    // Cold transactions that must be excluded from reads: every data
    // transaction whose WAL entry is not committed. Markers and direct
    // appends (wal_id 0) are never excluded here.
    std::set<std::uint64_t> excluded_versions() const {
        std::set<std::uint64_t> excluded;
        for (const ColdTransaction& txn : cold_.transactions()) {
            if (txn.wal_id == 0)
                continue;
            auto it = wal_.entries().find(txn.wal_id);
            if (it == wal_.entries().end() || it->second.state != WalState::committed)
                excluded.insert(txn.txn_version);
        }
        return excluded;
    }

    // Compares hot active records against the cold active snapshot.
    DivergenceReport verify_tiers() const {
        DivergenceReport report;
        std::vector<HotRecord> hot = hot_.active_records();
        std::vector<ColdRecord> cold = cold_.active_records(excluded_versions());
        std::size_t h = 0;
        std::size_t c = 0;
        auto hot_key = [](const HotRecord& r) { return std::make_pair(r.doc_id, r.position); };
        auto cold_key = [](const ColdRecord& r) { return std::make_pair(r.doc_id, r.position); };
        while (h < hot.size() || c < cold.size()) {
            if (c == cold.size() || (h < hot.size() && hot_key(hot[h]) < cold_key(cold[c]))) {
                report.hot_only.push_back({hot[h].chunk_id, hot[h].doc_id, hot[h].position});
                ++h;
            } else if (h == hot.size() || cold_key(cold[c]) < hot_key(hot[h])) {
                report.cold_only.push_back({cold[c].chunk_id, cold[c].doc_id, cold[c].position});
                ++c;
            } else {
                if (hot[h].chunk_id != cold[c].chunk_id) {
                    report.hot_only.push_back({hot[h].chunk_id, hot[h].doc_id, hot[h].position});
                    report.cold_only.push_back({cold[c].chunk_id, cold[c].doc_id, cold[c].position});
                }
                ++h;
                ++c;
            }
        }
        return report;
    }

private:
    using Key = std::pair<std::string, std::uint64_t>;

    // Per-key outcome of one transaction: the chunk expected live before
    // it runs (absent for fresh inserts) and the record live after it.
    struct KeyPlan {
        std::optional<std::string> expected_old;
        std::optional<ColdRecord> target;
    };

    void at(CrashPoint point) {
        if (crash_hook_)
            crash_hook_(point);
    }

    static HotRecord to_hot(const ColdRecord& r) {
        HotRecord h;
        h.chunk_id = r.chunk_id;
        h.embedding = r.embedding;
        h.doc_id = r.doc_id;
        h.position = r.position;
        h.valid_from = r.valid_from;
        h.content = r.content;
        return h;
    }

    static std::map<Key, KeyPlan> plan_keys(const std::vector<ColdEvent>& events) {
        std::map<Key, KeyPlan> plans;
        for (const ColdEvent& event : events) {
            if (const auto* ins = std::get_if<InsertEvent>(&event)) {
                plans[{ins->record.doc_id, ins->record.position}].target = ins->record;
            } else if (const auto* sup = std::get_if<SupersedeEvent>(&event)) {
                KeyPlan& plan = plans[{sup->doc_id, sup->position}];
                plan.expected_old = sup->old_chunk_id;
                plan.target.reset();
            } else if (const auto* del = std::get_if<DeleteEvent>(&event)) {
                KeyPlan& plan = plans[{del->doc_id, del->position}];
                plan.expected_old = del->old_chunk_id;
                plan.target.reset();
            }
        }
        return plans;
    }

    // Applies one transaction's per-key outcomes to the hot tier. A key at
    // the expected prior state is advanced; anything else aborts the
    // attempt so a retry never overwrites state it does not understand.
    // On a retry, a key already at the target is treated as applied by an
    // earlier partial run and skipped. A first attempt allows no skips: a
    // key that looks "already done" there means an older transaction on
    // the same key was never applied, and this one must queue behind it.
    void apply_to_hot(const ColdTransaction& txn, bool retry) {
        bool first = true;
        for (const auto& [key, plan] : plan_keys(txn.events)) {
            if (!first)
                at(CrashPoint::mid_hot_apply);
            first = false;
            if (hot_fault_hook_)
                hot_fault_hook_();

            std::optional<HotRecord> current = hot_.find(key.first, key.second);
            if (plan.target) {
                if (retry && current && current->chunk_id == plan.target->chunk_id)
                    continue;
                if (plan.expected_old) {
                    if (!current || current->chunk_id != *plan.expected_old)
                        throw ConflictError("hot record at " + key.first + ":" +
                                            std::to_string(key.second) +
                                            " is not the expected prior chunk");
                    hot_.replace(*plan.expected_old, to_hot(*plan.target), /*sync=*/false);
                } else {
                    if (current)
                        throw ConflictError("hot record already present at " + key.first + ":" +
                                            std::to_string(key.second));
                    hot_.insert(to_hot(*plan.target), /*sync=*/false);
                }
            } else {
                if (!current) {
                    if (retry)
                        continue;
                    throw ConflictError("hot record missing at " + key.first + ":" +
                                        std::to_string(key.second));
                }
                if (current->chunk_id != *plan.expected_old)
                    throw ConflictError("hot record at " + key.first + ":" +
                                        std::to_string(key.second) +
                                        " is not the expected prior chunk");
                hot_.remove(current->chunk_id, key.first, key.second, /*sync=*/false);
            }
        }
        hot_.sync_files();
    }

    // Voids a transaction: appends the compensating marker (durable
    // exclusion), then rolls any partially applied keys back to the state
    // the remaining included transactions prescribe. The rollback is best
    // effort; if the hot tier is still failing, the residue stays visible
    // to verify_tiers rather than blocking reconciliation. The marker
    // reuses the log's latest commit_ts so stores driven by synthetic
    // clocks never see a wall-clock timestamp injected into their history.
    void compensate(const ColdTransaction& txn) {
        cold_.append({CompensateEvent{txn.txn_version}}, cold_.latest_commit_ts());
        std::set<std::uint64_t> excluded = excluded_versions();
        std::vector<ColdRecord> active = cold_.active_records(excluded);
        std::map<Key, const ColdRecord*> desired;
        for (const ColdRecord& r : active)
            desired[{r.doc_id, r.position}] = &r;

        try {
            for (const auto& [key, plan] : plan_keys(txn.events)) {
                std::optional<HotRecord> current = hot_.find(key.first, key.second);
                auto it = desired.find(key);
                const ColdRecord* want = it == desired.end() ? nullptr : it->second;
                if (want != nullptr) {
                    if (current && current->chunk_id == want->chunk_id)
                        continue;
                    if (current)
                        hot_.replace(current->chunk_id, to_hot(*want), /*sync=*/false);
                    else
                        hot_.insert(to_hot(*want), /*sync=*/false);
                } else if (current) {
                    hot_.remove(current->chunk_id, key.first, key.second, /*sync=*/false);
                }
            }
            hot_.sync_files();
        } catch (const Error&) {
        }
    }

    const ColdTransaction* cold_txn_for_wal(std::uint64_t wal_id) const {
        for (const ColdTransaction& txn : cold_.transactions())
            if (txn.wal_id == wal_id)
                return &txn;
        return nullptr;
    }

    // True if txn touches any key claimed by another open WAL entry.
    // Pending entries are resolved through the cold log so a crash between
    // step 2 and its WAL record still claims its keys.
    bool overlaps_open_keys(std::uint64_t wal_id, const ColdTransaction& txn) const {
        std::set<Key> claimed;
        for (const WalEntry& open : wal_.open_entries()) {
            if (open.wal_id == wal_id)
                continue;
            const ColdTransaction* other = open.cold_txn_version
                                               ? &cold_.transactions()[*open.cold_txn_version - 1]
                                               : cold_txn_for_wal(open.wal_id);
            if (other == nullptr)
                continue;
            for (const auto& [key, plan] : plan_keys(other->events))
                claimed.insert(key);
        }
        if (claimed.empty())
            return false;
        for (const auto& [key, plan] : plan_keys(txn.events))
            if (claimed.count(key) != 0)
                return true;
        return false;
    }

    Wal& wal_;
    ColdTier& cold_;
    HotTier& hot_;
    std::function<void(CrashPoint)> crash_hook_;
    std::function<void()> hot_fault_hook_;
};

}  // namespace tempovec
