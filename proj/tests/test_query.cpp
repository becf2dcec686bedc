#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "support/temp_dir.hpp"
#include "tempovec/chunking.hpp"
#include "tempovec/query.hpp"
#include "tempovec/transactions.hpp"

using namespace tempovec;
using tempovec::test::TempDir;

namespace {

constexpr std::size_t kDim = 64;

HnswParams small_params() {
    return HnswParams{kDim, 8, 100, 32, 77};
}

// A store with a real embedder, written through the dual-tier protocol so
// both tiers always agree.
struct QueryFixture {
    explicit QueryFixture(const std::filesystem::path& root)
        : embedder(kDim),
          wal(root / "wal.log"),
          cold(root / "cold"),
          hot(root / "hot", small_params()),
          txn(wal, cold, hot),
          engine(embedder, hot, cold, [this] { return txn.excluded_versions(); }) {}

    ColdRecord record(const std::string& doc_id, std::uint64_t position, Timestamp ts,
                      const std::string& text, std::uint64_t version = 1,
                      std::optional<std::string> parent = std::nullopt,
                      ChangeType change = ChangeType::insert) {
        ColdRecord r;
        r.chunk_id = hash_chunk(normalize(text));
        r.embedding = embedder.embed(text);
        r.doc_id = doc_id;
        r.position = position;
        r.valid_from = ts;
        r.content = text;
        r.version_number = version;
        r.parent_hash = std::move(parent);
        r.change_type = change;
        return r;
    }

    // Inserts a document's chunks as one transaction; returns chunk ids.
    std::vector<std::string> ingest(const std::string& doc_id,
                                    const std::vector<std::string>& texts, Timestamp ts) {
        std::vector<ColdEvent> events;
        std::vector<std::string> ids;
        for (std::size_t p = 0; p < texts.size(); ++p) {
            ColdRecord r = record(doc_id, p, ts, texts[p]);
            ids.push_back(r.chunk_id);
            events.push_back(InsertEvent{std::move(r)});
        }
        REQUIRE(txn.commit_dual(std::move(events), ts).state == WalState::committed);
        return ids;
    }

    std::string update(const std::string& doc_id, std::uint64_t position,
                       const std::string& old_chunk, const std::string& new_text, Timestamp ts,
                       std::uint64_t new_version) {
        ColdRecord r = record(doc_id, position, ts, new_text, new_version, old_chunk,
                              ChangeType::update);
        std::string id = r.chunk_id;
        std::vector<ColdEvent> events = {SupersedeEvent{doc_id, position, old_chunk, ts},
                                         InsertEvent{std::move(r)}};
        REQUIRE(txn.commit_dual(std::move(events), ts).state == WalState::committed);
        return id;
    }

    void erase(const std::string& doc_id, std::uint64_t position, const std::string& old_chunk,
               Timestamp ts) {
        std::vector<ColdEvent> events = {DeleteEvent{doc_id, position, old_chunk, ts}};
        REQUIRE(txn.commit_dual(std::move(events), ts).state == WalState::committed);
    }

    DeterministicEmbedder embedder;
    Wal wal;
    ColdTier cold;
    HotTier hot;
    TxnManager txn;
    QueryEngine engine;
};

// Exact top-k over an arbitrary record list; the reference for both paths.
std::vector<std::string> brute_force_ids(const EmbeddingVector& query,
                                         const std::vector<std::pair<std::string, EmbeddingVector>>&
                                             records,
                                         std::size_t k) {
    std::vector<std::pair<float, std::string>> scored;
    for (const auto& [chunk_id, embedding] : records)
        scored.emplace_back(QueryEngine::exact_similarity(query, embedding), chunk_id);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first)
            return a.first > b.first;
        return a.second < b.second;
    });
    if (scored.size() > k)
        scored.resize(k);
    std::vector<std::string> ids;
    for (const auto& [sim, id] : scored)
        ids.push_back(id);
    return ids;
}

std::vector<std::string> hit_ids(const QueryResult& result) {
    std::vector<std::string> ids;
    for (const QueryHit& hit : result.hits)
        ids.push_back(hit.chunk_id);
    return ids;
}

std::string salad(std::mt19937_64& rng) {
    static const std::vector<std::string> vocab = {
        "ledger",  "harbor",  "quartz", "meadow",  "piston", "ember",   "lattice", "orchard",
        "granite", "clipper", "monsoon", "tundra", "copper", "bramble", "signal",  "anchor"};
    std::string text;
    int words = 6 + static_cast<int>(rng() % 6);
    for (int i = 0; i < words; ++i) {
        if (!text.empty())
            text += ' ';
        text += vocab[rng() % vocab.size()];
    }
    return text;
}

}  // namespace

TEST_CASE("temporal intent maps to a fixed route") {
    QuerySpec current{.text = "x", .k = 5, .intent = TemporalIntent::current};
    QuerySpec as_of{.text = "x", .k = 5, .intent = TemporalIntent::as_of, .as_of_ts = 100};
    QuerySpec range{.text = "x",
                    .k = 5,
                    .intent = TemporalIntent::range,
                    .range_start = 100,
                    .range_end = 200};
    CHECK(classify(current) == QueryRoute::hot);
    CHECK(classify(as_of) == QueryRoute::cold);
    CHECK(classify(range) == QueryRoute::both);
}

TEST_CASE("invalid query specs are rejected") {
    QuerySpec zero_k{.text = "x", .k = 0};
    CHECK_THROWS_AS(zero_k.validate(), UsageError);
    QuerySpec bad_range{.text = "x",
                        .k = 5,
                        .intent = TemporalIntent::range,
                        .range_start = 200,
                        .range_end = 200};
    CHECK_THROWS_AS(bad_range.validate(), UsageError);

    TempDir dir;
    QueryFixture f(dir.path());
    CHECK_THROWS_AS(f.engine.query_current("x", 0), UsageError);
    CHECK_THROWS_AS(f.engine.query_as_of("x", 100, 0), UsageError);
    CHECK_THROWS_AS(f.engine.query_range("x", 300, 200, 5), UsageError);
}

TEST_CASE("empty store returns empty results on every path") {
    TempDir dir;
    QueryFixture f(dir.path());
    CHECK(f.engine.query_current("anything", 5).hits.empty());
    CHECK(f.engine.query_as_of("anything", 12345, 5).hits.empty());
    RangeResult r = f.engine.query_range("anything", 100, 200, 5);
    CHECK(r.at_start.hits.empty());
    CHECK(r.at_end.hits.empty());
    CHECK(r.diff.only_at_start.empty());
    CHECK(r.diff.only_at_end.empty());
}

TEST_CASE("a uniquely worded paragraph ranks first and matches brute force") {
    TempDir dir;
    QueryFixture f(dir.path());
    std::mt19937_64 rng(11);
    std::vector<std::pair<std::string, EmbeddingVector>> reference;
    Timestamp ts = 1000;
    for (int d = 0; d < 6; ++d) {
        std::vector<std::string> texts;
        for (int p = 0; p < 4; ++p)
            texts.push_back(salad(rng));
        auto ids = f.ingest("doc-" + std::to_string(d), texts, ts);
        for (std::size_t p = 0; p < texts.size(); ++p)
            reference.emplace_back(ids[p], f.embedder.embed(texts[p]));
        ts += 100;
    }
    std::string needle = "zanzibar flux capacitor waveguide";
    auto needle_ids = f.ingest("doc-needle", {needle}, ts);
    reference.emplace_back(needle_ids[0], f.embedder.embed(needle));

    QueryResult result = f.engine.query_current(needle, 5);
    REQUIRE(!result.hits.empty());
    CHECK(result.hits[0].chunk_id == needle_ids[0]);
    CHECK(result.hits[0].content == needle);
    CHECK(result.hits[0].tier == HitTier::hot);
    CHECK(result.hits[0].similarity == Catch::Approx(1.0).margin(1e-5));

    // 25 records with ef 32: the hot path is exhaustive here, so the whole
    // ranking must equal the oracle.
    EmbeddingVector q = f.embedder.embed(needle);
    CHECK(hit_ids(result) == brute_force_ids(q, reference, 5));
}

TEST_CASE("superseded text stops matching once updated") {
    TempDir dir;
    QueryFixture f(dir.path());
    std::string old_text = "the ancient lighthouse keeper polishes brass lanterns";
    auto ids = f.ingest("doc", {old_text}, 1000);
    f.update("doc", 0, ids[0], "the modern automated beacon runs unattended", 2000, 2);

    QueryResult current = f.engine.query_current(old_text, 5);
    for (const QueryHit& hit : current.hits)
        CHECK(hit.chunk_id != ids[0]);
    QueryResult as_of_now = f.engine.query_as_of(old_text, 3000, 5);
    for (const QueryHit& hit : as_of_now.hits)
        CHECK(hit.chunk_id != ids[0]);
    // But history still has it at its own time.
    QueryResult historical = f.engine.query_as_of(old_text, 1500, 5);
    REQUIRE(historical.hits.size() == 1);
    CHECK(historical.hits[0].chunk_id == ids[0]);
    CHECK(historical.hits[0].tier == HitTier::cold);
    REQUIRE(historical.hits[0].version_number.has_value());
    CHECK(*historical.hits[0].version_number == 1);
}

TEST_CASE("as-of queries return the version current at the target time") {
    TempDir dir;
    QueryFixture f(dir.path());
    std::string v1 = "the database X stores widget inventory";
    std::string v2 = "the database Y stores widget inventory";
    auto ids = f.ingest("db-doc", {v1}, 100);
    std::string v2_id = f.update("db-doc", 0, ids[0], v2, 200, 2);

    CHECK(f.engine.query_as_of("database widgets", 50, 5).hits.empty());

    QueryResult at_150 = f.engine.query_as_of("database widgets", 150, 5);
    REQUIRE(at_150.hits.size() == 1);
    CHECK(at_150.hits[0].chunk_id == ids[0]);
    CHECK(at_150.hits[0].content == v1);
    REQUIRE(at_150.hits[0].valid_to.has_value());
    CHECK(*at_150.hits[0].valid_to == 200);

    QueryResult at_250 = f.engine.query_as_of("database widgets", 250, 5);
    REQUIRE(at_250.hits.size() == 1);
    CHECK(at_250.hits[0].chunk_id == v2_id);
    CHECK(at_250.hits[0].content == v2);
    CHECK_FALSE(at_250.hits[0].valid_to.has_value());

    // Boundary: the new version takes effect exactly at its commit.
    CHECK(f.engine.query_as_of("database widgets", 200, 5).hits[0].chunk_id == v2_id);
    CHECK(f.engine.query_as_of("database widgets", 199, 5).hits[0].chunk_id == ids[0]);
}

TEST_CASE("cold path equals the brute-force oracle and never leaks") {
    TempDir dir;
    QueryFixture f(dir.path());
    std::mt19937_64 rng(0xe77);

    // Random history: key -> (chunk, version, text).
    struct Live {
        std::string chunk;
        std::uint64_t version;
    };
    std::map<std::pair<std::string, std::uint64_t>, Live> live;
    Timestamp ts = 1000;
    std::vector<Timestamp> commit_times;
    for (int i = 0; i < 30; ++i) {
        double what = std::uniform_real_distribution<double>(0, 1)(rng);
        if (what < 0.45 || live.empty()) {
            std::pair<std::string, std::uint64_t> key = {"doc-" + std::to_string(rng() % 5),
                                                         rng() % 4};
            if (live.count(key)) {
                --i;
                continue;
            }
            ColdRecord r = f.record(key.first, key.second, ts, salad(rng));
            live[key] = {r.chunk_id, 1};
            REQUIRE(f.txn.commit_dual({InsertEvent{r}}, ts).state == WalState::committed);
        } else {
            auto it = live.begin();
            std::advance(it, static_cast<long>(rng() % live.size()));
            auto key = it->first;
            if (what < 0.8) {
                std::string id = f.update(key.first, key.second, it->second.chunk, salad(rng), ts,
                                          it->second.version + 1);
                it->second = {id, it->second.version + 1};
            } else {
                f.erase(key.first, key.second, it->second.chunk, ts);
                live.erase(it);
            }
        }
        commit_times.push_back(ts);
        ts += 100;
    }

    std::uniform_int_distribution<Timestamp> when(500, ts + 500);
    for (int probe = 0; probe < 120; ++probe) {
        Timestamp t = when(rng);
        std::string text = salad(rng);
        QueryResult result = f.engine.query_as_of(text, t, 5);

        // No hit outside its validity window.
        for (const QueryHit& hit : result.hits) {
            CHECK(hit.valid_from <= t);
            if (hit.valid_to)
                CHECK(*hit.valid_to > t);
        }

        // Exact agreement with a full-scan oracle over the snapshot.
        std::vector<std::pair<std::string, EmbeddingVector>> reference;
        for (const ColdRecord& r : f.cold.snapshot_as_of(t, {}).records)
            reference.emplace_back(r.chunk_id, r.embedding);
        CHECK(hit_ids(result) == brute_force_ids(f.embedder.embed(text), reference, 5));
    }

    // Hot and cold agree at "now": identical ranking on this small corpus.
    for (int probe = 0; probe < 20; ++probe) {
        std::string text = salad(rng);
        CHECK(hit_ids(f.engine.query_current(text, 5)) ==
              hit_ids(f.engine.query_as_of(text, ts, 5)));
    }
}

TEST_CASE("range queries return endpoint results and a chunk diff") {
    TempDir dir;
    QueryFixture f(dir.path());
    std::string stable = "shipping manifests are archived quarterly";
    std::string v1 = "the database X stores widget inventory";
    std::string v2 = "the database Y stores widget inventory";
    auto ids = f.ingest("doc", {v1, stable}, 100);
    std::string v2_id = f.update("doc", 0, ids[0], v2, 200, 2);

    RangeResult r = f.engine.query_range("database widget manifests", 150, 250, 5);
    CHECK(hit_ids(r.at_start) != hit_ids(r.at_end));
    CHECK(r.diff.only_at_start == std::vector<std::string>{ids[0]});
    CHECK(r.diff.only_at_end == std::vector<std::string>{v2_id});
    CHECK(r.diff.at_both == std::vector<std::string>{ids[1]});

    // End beyond the latest commit is served by the hot tier.
    for (const QueryHit& hit : r.at_end.hits)
        CHECK(hit.tier == HitTier::hot);
    // An interior end timestamp is served from history.
    RangeResult interior = f.engine.query_range("database widget manifests", 120, 180, 5);
    for (const QueryHit& hit : interior.at_end.hits)
        CHECK(hit.tier == HitTier::cold);
    CHECK(hit_ids(interior.at_start) == hit_ids(interior.at_end));
    CHECK(interior.diff.only_at_start.empty());
    CHECK(interior.diff.only_at_end.empty());
    CHECK(interior.diff.at_both.size() == 2);
}

TEST_CASE("in-flight transactions stay invisible to every query path") {
    TempDir dir;
    QueryFixture f(dir.path());
    auto ids = f.ingest("doc", {"original paragraph about harbor pilots"}, 1000);

    f.txn.set_hot_fault_hook([] { throw IoError("injected"); });
    ColdRecord r = f.record("doc", 0, 2000, "revised paragraph about harbor pilots", 2,
                            ids[0], ChangeType::update);
    std::string new_id = r.chunk_id;
    WalEntry entry = f.txn.commit_dual(
        {SupersedeEvent{"doc", 0, ids[0], 2000}, InsertEvent{std::move(r)}}, 2000);
    REQUIRE(entry.state == WalState::cold_written);
    f.txn.set_hot_fault_hook(nullptr);

    // The uncommitted update must not appear at any time, on any path.
    QueryResult as_of = f.engine.query_as_of("harbor pilots", 3000, 5);
    REQUIRE(as_of.hits.size() == 1);
    CHECK(as_of.hits[0].chunk_id == ids[0]);
    CHECK_FALSE(as_of.hits[0].valid_to.has_value());
    CHECK(f.engine.query_current("harbor pilots", 5).hits[0].chunk_id == ids[0]);

    REQUIRE(f.txn.reconcile().repaired == 1);
    CHECK(f.engine.query_as_of("harbor pilots", 3000, 5).hits[0].chunk_id == new_id);
    CHECK(f.engine.query_current("harbor pilots", 5).hits[0].chunk_id == new_id);
}

TEST_CASE("run dispatches by intent and rejects range") {
    TempDir dir;
    QueryFixture f(dir.path());
    f.ingest("doc", {"granite anchors the breakwater"}, 1000);

    QuerySpec current{.text = "granite breakwater", .k = 3, .intent = TemporalIntent::current};
    CHECK(f.engine.run(current).hits.size() == 1);
    QuerySpec as_of{.text = "granite breakwater",
                    .k = 3,
                    .intent = TemporalIntent::as_of,
                    .as_of_ts = 500};
    CHECK(f.engine.run(as_of).hits.empty());
    QuerySpec range{.text = "granite breakwater",
                    .k = 3,
                    .intent = TemporalIntent::range,
                    .range_start = 500,
                    .range_end = 1500};
    CHECK_THROWS_AS(f.engine.run(range), UsageError);
}
