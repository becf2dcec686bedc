#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "support/replay_oracle.hpp"
#include "support/temp_dir.hpp"
#include "tempovec/cold_tier.hpp"

using namespace tempovec;
using tempovec::test::ReplayOracle;
using tempovec::test::TempDir;

namespace {

constexpr std::size_t kDim = 4;

EmbeddingVector vec_for(std::uint64_t seed) {
    EmbeddingVector v(kDim, 0.0f);
    v[seed % kDim] = 1.0f;
    return v;
}

ColdRecord make_record(const std::string& doc_id, std::uint64_t position,
                       const std::string& chunk_id, Timestamp valid_from,
                       std::uint64_t version = 1,
                       std::optional<std::string> parent = std::nullopt) {
    ColdRecord r;
    r.chunk_id = chunk_id;
    r.doc_id = doc_id;
    r.position = position;
    r.valid_from = valid_from;
    r.content = "content " + chunk_id;
    r.embedding = vec_for(position);
    r.version_number = version;
    r.parent_hash = std::move(parent);
    r.change_type = r.parent_hash.has_value() ? ChangeType::update : ChangeType::insert;
    return r;
}

const ColdRecord* find_record(const SnapshotView& view, const std::string& doc_id,
                              std::uint64_t position) {
    for (const auto& r : view.records)
        if (r.doc_id == doc_id && r.position == position)
            return &r;
    return nullptr;
}

}  // namespace

TEST_CASE("empty log: zero stats, empty snapshots") {
    TempDir dir;
    ColdTier tier(dir.path());
    CHECK(tier.latest_version() == 0);
    auto s = tier.stats();
    CHECK(s.total_records == 0);
    CHECK(s.active_records == 0);
    CHECK(s.txn_count == 0);
    CHECK(tier.snapshot_as_of(123456).records.empty());
    CHECK(tier.snapshot_at_version(0).records.empty());
    CHECK_THROWS_AS(tier.snapshot_at_version(1), UsageError);
}

TEST_CASE("first insert gets transaction version one") {
    TempDir dir;
    ColdTier tier(dir.path());
    auto v = tier.append({InsertEvent{make_record("doc", 0, "c1", 100)}}, 100);
    CHECK(v == 1);
    auto s = tier.stats();
    CHECK(s.total_records == 1);
    CHECK(s.active_records == 1);
    CHECK(s.txn_count == 1);
}

TEST_CASE("half-open validity boundaries") {
    TempDir dir;
    ColdTier tier(dir.path());
    tier.append({InsertEvent{make_record("doc", 0, "c1", 10)}}, 10);
    tier.append({SupersedeEvent{"doc", 0, "c1", 20},
                 InsertEvent{make_record("doc", 0, "c2", 20, 2, "c1")}},
                20);

    CHECK(tier.snapshot_as_of(9).records.empty());

    auto at10 = tier.snapshot_as_of(10);
    REQUIRE(at10.records.size() == 1);
    CHECK(at10.records[0].chunk_id == "c1");
    // The view reports the record's full validity and eventual fate.
    CHECK(at10.records[0].status == ColdStatus::superseded);
    REQUIRE(at10.records[0].valid_to.has_value());
    CHECK(*at10.records[0].valid_to == 20);

    auto at15 = tier.snapshot_as_of(15);
    REQUIRE(at15.records.size() == 1);
    CHECK(at15.records[0].chunk_id == "c1");

    auto at20 = tier.snapshot_as_of(20);
    REQUIRE(at20.records.size() == 1);
    CHECK(at20.records[0].chunk_id == "c2");
    CHECK(at20.records[0].status == ColdStatus::active);
}

TEST_CASE("invalid transactions are rejected whole") {
    TempDir dir;
    ColdTier tier(dir.path());
    tier.append({InsertEvent{make_record("doc", 0, "c1", 100)}}, 100);
    auto before = tier.stats();

    SECTION("supersede of a never-inserted record") {
        CHECK_THROWS_AS(tier.append({SupersedeEvent{"ghost", 0, "cx", 150}}, 150),
                        ConflictError);
    }
    SECTION("supersede naming the wrong chunk") {
        CHECK_THROWS_AS(tier.append({SupersedeEvent{"doc", 0, "wrong", 150}}, 150),
                        ConflictError);
    }
    SECTION("insert at an occupied key") {
        CHECK_THROWS_AS(tier.append({InsertEvent{make_record("doc", 0, "c9", 150)}}, 150),
                        ConflictError);
    }
    SECTION("commit timestamp regression") {
        CHECK_THROWS_AS(tier.append({InsertEvent{make_record("doc", 1, "c2", 50)}}, 50),
                        ConflictError);
    }
    SECTION("valid_from differing from commit_ts") {
        CHECK_THROWS_AS(tier.append({InsertEvent{make_record("doc", 1, "c2", 140)}}, 150),
                        ConflictError);
    }
    SECTION("empty event list") {
        CHECK_THROWS_AS(tier.append({}, 150), UsageError);
    }
    SECTION("insert preceding the supersede of its key") {
        CHECK_THROWS_AS(tier.append({InsertEvent{make_record("doc", 0, "c2", 150, 2, "c1")},
                                     SupersedeEvent{"doc", 0, "c1", 150}},
                                    150),
                        ConflictError);
    }
    SECTION("fresh insert with nonunit version") {
        CHECK_THROWS_AS(tier.append({InsertEvent{make_record("doc", 1, "c2", 150, 3)}}, 150),
                        ConflictError);
    }
    SECTION("update without matching supersede") {
        CHECK_THROWS_AS(
            tier.append({InsertEvent{make_record("doc", 1, "c2", 150, 2, "c1")}}, 150),
            ConflictError);
    }
    SECTION("update skipping a version") {
        CHECK_THROWS_AS(tier.append({SupersedeEvent{"doc", 0, "c1", 150},
                                     InsertEvent{make_record("doc", 0, "c2", 150, 3, "c1")}},
                                    150),
                        ConflictError);
    }
    SECTION("double supersede of one key") {
        CHECK_THROWS_AS(tier.append({SupersedeEvent{"doc", 0, "c1", 150},
                                     SupersedeEvent{"doc", 0, "c1", 150},
                                     InsertEvent{make_record("doc", 0, "c2", 150, 2, "c1")}},
                                    150),
                        ConflictError);
    }

    // Whatever the failure, the log is untouched.
    auto after = tier.stats();
    CHECK(after.total_records == before.total_records);
    CHECK(after.txn_count == before.txn_count);
    CHECK(after.bytes_on_disk == before.bytes_on_disk);
}

TEST_CASE("modify, move, delete, and re-insert lineages") {
    TempDir dir;
    ColdTier tier(dir.path());
    tier.append({InsertEvent{make_record("doc", 0, "aaa", 100)}}, 100);

    // Modify: version 2, parent aaa, same position.
    tier.append({SupersedeEvent{"doc", 0, "aaa", 200},
                 InsertEvent{make_record("doc", 0, "bbb", 200, 2, "aaa")}},
                200);
    // Move: same chunk_id, version 3, parent is its own hash, new position.
    tier.append({SupersedeEvent{"doc", 0, "bbb", 300},
                 InsertEvent{make_record("doc", 5, "bbb", 300, 3, "bbb")}},
                300);
    // Delete.
    tier.append({DeleteEvent{"doc", 5, "bbb", 400}}, 400);
    // Re-insert at the same position starts a fresh lineage.
    tier.append({InsertEvent{make_record("doc", 5, "ccc", 500)}}, 500);

    auto s = tier.stats();
    CHECK(s.total_records == 4);
    CHECK(s.active_records == 1);
    CHECK(s.superseded == 2);
    CHECK(s.deleted == 1);

    auto at250 = tier.snapshot_as_of(250);
    REQUIRE(at250.records.size() == 1);
    CHECK(at250.records[0].chunk_id == "bbb");
    CHECK(at250.records[0].position == 0);

    auto at350 = tier.snapshot_as_of(350);
    REQUIRE(at350.records.size() == 1);
    CHECK(at350.records[0].position == 5);
    CHECK(at350.records[0].version_number == 3);

    CHECK(tier.snapshot_as_of(450).records.empty());

    auto at500 = tier.snapshot_as_of(500);
    REQUIRE(at500.records.size() == 1);
    CHECK(at500.records[0].chunk_id == "ccc");
    CHECK(at500.records[0].version_number == 1);

    // Lineage integrity: every record reaches an insert in
    // version_number - 1 parent hops.
    auto all = tier.all_records();
    for (const auto& rec : all) {
        std::uint64_t hops = 0;
        const ColdRecord* cur = &rec;
        while (cur->parent_hash.has_value()) {
            const ColdRecord* parent = nullptr;
            for (const auto& other : all)
                if (other.chunk_id == *cur->parent_hash &&
                    other.version_number == cur->version_number - 1)
                    parent = &other;
            REQUIRE(parent != nullptr);
            cur = parent;
            ++hops;
        }
        CHECK(cur->change_type == ChangeType::insert);
        CHECK(hops == rec.version_number - 1);
    }
}

TEST_CASE("snapshot_at_version folds exact prefixes") {
    TempDir dir;
    ColdTier tier(dir.path());
    tier.append({InsertEvent{make_record("a", 0, "a0", 10)}}, 10);
    tier.append({InsertEvent{make_record("b", 0, "b0", 20)}}, 20);
    tier.append({SupersedeEvent{"a", 0, "a0", 30},
                 InsertEvent{make_record("a", 0, "a1", 30, 2, "a0")}},
                30);
    tier.append({DeleteEvent{"b", 0, "b0", 40}}, 40);

    CHECK(tier.snapshot_at_version(0).records.empty());

    auto v1 = tier.snapshot_at_version(1);
    REQUIRE(v1.records.size() == 1);
    CHECK(v1.records[0].chunk_id == "a0");
    CHECK(v1.records[0].status == ColdStatus::active);
    CHECK_FALSE(v1.records[0].valid_to.has_value());

    auto v2 = tier.snapshot_at_version(2);
    CHECK(v2.records.size() == 2);

    auto v3 = tier.snapshot_at_version(3);
    REQUIRE(v3.records.size() == 2);
    CHECK(find_record(v3, "a", 0)->chunk_id == "a1");

    auto v4 = tier.snapshot_at_version(4);
    REQUIRE(v4.records.size() == 1);
    CHECK(v4.records[0].chunk_id == "a1");

    CHECK_THROWS_AS(tier.snapshot_at_version(5), UsageError);
}

TEST_CASE("document timeline counts per transaction") {
    TempDir dir;
    ColdTier tier(dir.path());
    CHECK(tier.document_timeline("nope").empty());

    tier.append({InsertEvent{make_record("doc", 0, "c0", 10)},
                 InsertEvent{make_record("doc", 1, "c1", 10)},
                 InsertEvent{make_record("doc", 2, "c2", 10)}},
                10);
    tier.append({InsertEvent{make_record("other", 0, "x0", 20)}}, 20);
    tier.append({SupersedeEvent{"doc", 1, "c1", 30},
                 InsertEvent{make_record("doc", 1, "c1b", 30, 2, "c1")}},
                30);
    tier.append({DeleteEvent{"doc", 2, "c2", 40}}, 40);

    auto tl = tier.document_timeline("doc");
    REQUIRE(tl.size() == 3);
    CHECK(tl[0].doc_revision == 1);
    CHECK(tl[0].txn_version == 1);
    CHECK(tl[0].commit_ts == 10);
    CHECK(tl[0].inserts == 3);
    CHECK(tl[0].updates == 0);
    CHECK(tl[0].deletes == 0);
    CHECK(tl[1].doc_revision == 2);
    CHECK(tl[1].txn_version == 3);
    CHECK(tl[1].inserts == 0);
    CHECK(tl[1].updates == 1);
    CHECK(tl[2].deletes == 1);

    auto other = tier.document_timeline("other");
    REQUIRE(other.size() == 1);
    CHECK(other[0].txn_version == 2);
    CHECK(other[0].inserts == 1);
}

TEST_CASE("log survives restart and stays append-only") {
    TempDir dir;
    std::string bytes_before;
    {
        ColdTier tier(dir.path());
        tier.append({InsertEvent{make_record("doc", 0, "c0", 10)}}, 10);
        tier.append({SupersedeEvent{"doc", 0, "c0", 20},
                     InsertEvent{make_record("doc", 0, "c1", 20, 2, "c0")}},
                    20);
        bytes_before = io::read_file(dir.path() / "commits.log");
    }
    {
        ColdTier tier(dir.path());
        CHECK(tier.latest_version() == 2);
        auto view = tier.snapshot_as_of(15);
        REQUIRE(view.records.size() == 1);
        CHECK(view.records[0].chunk_id == "c0");
        tier.append({InsertEvent{make_record("doc", 1, "c2", 30)}}, 30);
        std::string bytes_after = io::read_file(dir.path() / "commits.log");
        REQUIRE(bytes_after.size() > bytes_before.size());
        CHECK(bytes_after.compare(0, bytes_before.size(), bytes_before) == 0);
    }
}

TEST_CASE("torn transaction tail is dropped on recovery") {
    TempDir dir;
    {
        ColdTier tier(dir.path());
        tier.append({InsertEvent{make_record("doc", 0, "c0", 10)}}, 10);
        tier.append({InsertEvent{make_record("doc", 1, "c1", 20)}}, 20);
    }
    {
        std::ofstream out(dir.path() / "commits.log",
                          std::ios::binary | std::ios::app);
        out.write("\x80\x00\x00\x00half a transaction", 22);
    }
    ColdTier tier(dir.path());
    CHECK(tier.latest_version() == 2);
    CHECK(tier.stats().total_records == 2);
    // Appending continues cleanly after truncation.
    tier.append({InsertEvent{make_record("doc", 2, "c2", 30)}}, 30);
    ColdTier again(dir.path());
    CHECK(again.latest_version() == 3);
}

TEST_CASE("corrupt frame reports its byte offset") {
    TempDir dir;
    std::uint64_t second_offset = 0;
    {
        ColdTier tier(dir.path());
        tier.append({InsertEvent{make_record("doc", 0, "c0", 10)}}, 10);
        tier.append({InsertEvent{make_record("doc", 1, "c1", 20)}}, 20);
        second_offset = tier.transactions()[1].log_offset;
    }
    {
        std::fstream f(dir.path() / "commits.log",
                       std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(static_cast<std::streamoff>(second_offset) + 10);
        f.put('\xff');
    }
    try {
        ColdTier tier(dir.path());
        FAIL("expected CorruptLogError");
    } catch (const CorruptLogError& e) {
        CHECK(e.offset() == second_offset);
    }
}

TEST_CASE("exclusions and compensation hide transactions") {
    TempDir dir;
    ColdTier tier(dir.path());
    tier.append({InsertEvent{make_record("a", 0, "a0", 10)}}, 10);
    tier.append({InsertEvent{make_record("b", 0, "b0", 20)}}, 20);

    // Caller-side exclusion (uncommitted transaction).
    auto view = tier.snapshot_as_of(25, {2});
    REQUIRE(view.records.size() == 1);
    CHECK(view.records[0].chunk_id == "a0");
    CHECK(tier.stats({2}).total_records == 1);
    CHECK(tier.document_timeline("b", {2}).empty());

    // Durable compensation marker.
    tier.append({CompensateEvent{2}}, 30);
    CHECK(tier.compensated().count(2) == 1);
    auto after = tier.snapshot_as_of(25);
    REQUIRE(after.records.size() == 1);
    CHECK(after.records[0].chunk_id == "a0");
    CHECK(tier.stats().total_records == 1);
    CHECK(tier.stats().txn_count == 3);

    // The voided key is free again.
    tier.append({InsertEvent{make_record("b", 0, "b1", 40)}}, 40);
    auto current = tier.snapshot_as_of(40);
    CHECK(current.records.size() == 2);

    // Compensation state survives restart.
    ColdTier again(dir.path());
    CHECK(again.compensated().count(2) == 1);
    CHECK(again.stats().total_records == 2);

    // Structural checks on markers.
    CHECK_THROWS_AS(tier.append({CompensateEvent{99}}, 50), ConflictError);
    CHECK_THROWS_AS(tier.append({CompensateEvent{1}, InsertEvent{make_record("c", 0, "c0", 50)}}, 50),
                    ConflictError);
}

TEST_CASE("random histories match the replay oracle") {
    std::mt19937_64 rng(2024);
    for (int round = 0; round < 8; ++round) {
        TempDir dir;
        ColdTier tier(dir.path());
        ReplayOracle oracle;

        // Local mirror of active state used to drive valid operations.
        struct Live {
            std::string chunk_id;
            std::uint64_t version;
        };
        std::map<std::pair<std::string, std::uint64_t>, Live> live;
        Timestamp ts = 1000;
        std::uint64_t txn_id = 0;
        std::uint64_t chunk_seq = 0;
        auto fresh_chunk = [&] { return "h" + std::to_string(++chunk_seq); };
        std::vector<Timestamp> commit_times;

        int txn_count = 40 + static_cast<int>(rng() % 30);
        for (int t = 0; t < txn_count; ++t) {
            ts += 1 + static_cast<Timestamp>(rng() % 5);
            ++txn_id;
            oracle.begin_txn(txn_id, ts);
            std::vector<ColdEvent> events;
            std::vector<ColdEvent> inserts;

            int action = static_cast<int>(rng() % 4);
            if (action == 0 || live.empty()) {
                // Ingest a few fresh chunks into a random doc.
                std::string doc = "d" + std::to_string(rng() % 6);
                int n = 1 + static_cast<int>(rng() % 3);
                for (int i = 0; i < n; ++i) {
                    std::uint64_t pos = rng() % 12;
                    if (live.count({doc, pos}))
                        continue;
                    std::string chunk = fresh_chunk();
                    inserts.emplace_back(InsertEvent{make_record(doc, pos, chunk, ts)});
                    oracle.insert(doc, pos, chunk, 1, std::nullopt, "insert");
                    live[{doc, pos}] = Live{chunk, 1};
                }
            } else if (action == 1) {
                // Modify one live chunk in place.
                auto it = live.begin();
                std::advance(it, static_cast<long>(rng() % live.size()));
                auto [doc, pos] = it->first;
                std::string next = fresh_chunk();
                events.emplace_back(SupersedeEvent{doc, pos, it->second.chunk_id, ts});
                inserts.emplace_back(InsertEvent{
                    make_record(doc, pos, next, ts, it->second.version + 1,
                                it->second.chunk_id)});
                oracle.close(doc, pos, false);
                oracle.insert(doc, pos, next, it->second.version + 1,
                              it->second.chunk_id, "update");
                it->second = Live{next, it->second.version + 1};
            } else if (action == 2) {
                // Move one live chunk to a free position.
                auto it = live.begin();
                std::advance(it, static_cast<long>(rng() % live.size()));
                auto [doc, pos] = it->first;
                std::uint64_t to = rng() % 12;
                if (live.count({doc, to}))
                    to = 12 + (rng() % 50);
                if (!live.count({doc, to})) {
                    Live moved = it->second;
                    events.emplace_back(SupersedeEvent{doc, pos, moved.chunk_id, ts});
                    inserts.emplace_back(InsertEvent{make_record(
                        doc, to, moved.chunk_id, ts, moved.version + 1, moved.chunk_id)});
                    oracle.close(doc, pos, false);
                    oracle.insert(doc, to, moved.chunk_id, moved.version + 1,
                                  moved.chunk_id, "update");
                    live.erase(it);
                    live[{doc, to}] = Live{moved.chunk_id, moved.version + 1};
                }
            } else {
                // Delete one live chunk.
                auto it = live.begin();
                std::advance(it, static_cast<long>(rng() % live.size()));
                auto [doc, pos] = it->first;
                events.emplace_back(DeleteEvent{doc, pos, it->second.chunk_id, ts});
                oracle.close(doc, pos, true);
                live.erase(it);
            }

            for (auto& e : inserts)
                events.push_back(std::move(e));
            if (events.empty()) {
                --txn_id;
                continue;
            }
            std::uint64_t got = tier.append(std::move(events), ts);
            REQUIRE(got == txn_id);
            commit_times.push_back(ts);
        }

        // Point-in-time equivalence at random and at boundary timestamps.
        std::vector<Timestamp> probes;
        for (int i = 0; i < 60; ++i)
            probes.push_back(990 + static_cast<Timestamp>(rng() % (ts - 980)));
        for (Timestamp c : commit_times) {
            probes.push_back(c);
            probes.push_back(c - 1);
        }
        for (Timestamp probe : probes) {
            auto expect = oracle.at_time(probe);
            auto view = tier.snapshot_as_of(probe);
            REQUIRE(view.records.size() == expect.size());
            for (const auto& rec : view.records) {
                auto it = expect.find({rec.doc_id, rec.position});
                REQUIRE(it != expect.end());
                CHECK(rec.chunk_id == it->second.chunk_id);
                CHECK(rec.valid_from == it->second.from);
                CHECK(rec.valid_to.has_value() == it->second.to.has_value());
                if (rec.valid_to.has_value())
                    CHECK(*rec.valid_to == *it->second.to);
                CHECK(std::string(to_string(rec.status)) == it->second.final_status);
                CHECK(rec.version_number == it->second.version_number);
            }
        }

        // Version-prefix equivalence.
        for (std::uint64_t v = 0; v <= tier.latest_version(); ++v) {
            auto expect = oracle.at_txn(v);
            auto view = tier.snapshot_at_version(v);
            REQUIRE(view.records.size() == expect.size());
            for (const auto& rec : view.records) {
                auto it = expect.find({rec.doc_id, rec.position});
                REQUIRE(it != expect.end());
                CHECK(rec.chunk_id == it->second.chunk_id);
            }
        }

        // History completeness: every chunk id ever created appears.
        std::set<std::string> seen;
        for (const auto& rec : tier.all_records())
            seen.insert(rec.chunk_id);
        for (const auto& iv : oracle.intervals())
            CHECK(seen.count(iv.chunk_id) == 1);
    }
}
