// Command-line front end for the temporal vector store.
//
// Subcommands: init, ingest, query, query-asof, query-range, timeline,
// diff, stats, reconcile, verify, compact. Query and inspection commands
// open the store read-only, so they work alongside a live writer.
//
// Exit codes: 0 success, 1 usage error, 2 store or I/O error,
// 3 tier divergence.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tempovec/engine.hpp"

namespace {

using namespace tempovec;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitStore = 2;
constexpr int kExitDivergence = 3;

// Accepts integer milliseconds or RFC 3339 (fractional seconds and
// numeric offsets allowed): 1700000000000, 2026-08-25T12:00:00Z,
// 2026-08-25T12:00:00.250+02:00.
Timestamp parse_timestamp(const std::string& text) {
    if (text.empty())
        throw UsageError("empty timestamp");
    bool numeric = true;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (i == 0 && text[i] == '-')
            continue;
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            numeric = false;
            break;
        }
    }
    if (numeric) {
        try {
            return std::stoll(text);
        } catch (const std::exception&) {
            throw UsageError("timestamp out of range: " + text);
        }
    }

    std::tm tm{};
    int consumed = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon,
                    &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &consumed) != 6)
        throw UsageError("timestamp must be integer milliseconds or RFC 3339: " + text);
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    std::string rest = text.substr(static_cast<std::size_t>(consumed));

    Timestamp millis = 0;
    if (!rest.empty() && rest[0] == '.') {
        std::size_t i = 1;
        std::string digits;
        while (i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i])))
            digits += rest[i++];
        if (digits.empty())
            throw UsageError("timestamp has a bare fraction point: " + text);
        digits.resize(3, '0');  // truncate beyond milliseconds
        millis = std::stoll(digits.substr(0, 3));
        rest = rest.substr(i);
    }

    Timestamp offset_ms = 0;
    if (rest == "Z" || rest == "z") {
        // UTC
    } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
        int hours = std::stoi(rest.substr(1, 2));
        int minutes = std::stoi(rest.substr(4, 2));
        offset_ms = (hours * 3600LL + minutes * 60LL) * 1000;
        if (rest[0] == '-')
            offset_ms = -offset_ms;
    } else {
        throw UsageError("timestamp must end in Z or a +hh:mm offset: " + text);
    }

    std::time_t secs = timegm(&tm);
    if (secs == static_cast<std::time_t>(-1))
        throw UsageError("timestamp out of range: " + text);
    return static_cast<Timestamp>(secs) * 1000 + millis - offset_ms;
}

std::string format_timestamp(Timestamp ms) {
    std::time_t secs = ms / 1000;
    Timestamp rem = ms % 1000;
    if (rem < 0) {
        rem += 1000;
        secs -= 1;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char body[32];
    std::strftime(body, sizeof(body), "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof(out), "%s.%03lldZ", body, static_cast<long long>(rem));
    return out;
}

// Truncates to at most `limit` bytes on a UTF-8 boundary, single line.
std::string preview(const std::string& content, std::size_t limit = 72) {
    std::string flat;
    flat.reserve(content.size());
    for (char c : content)
        flat += (c == '\n' || c == '\t') ? ' ' : c;
    if (flat.size() <= limit)
        return flat;
    std::size_t cut = limit;
    while (cut > 0 && (static_cast<unsigned char>(flat[cut]) & 0xC0) == 0x80)
        --cut;
    return flat.substr(0, cut) + "...";
}

EmbedderProvider parse_provider(const std::string& name) {
    if (name == "deterministic")
        return EmbedderProvider::deterministic;
    if (name == "remote")
        return EmbedderProvider::remote;
    throw UsageError("unknown embedder provider: " + name);
}

struct CommonOptions {
    std::string data_dir;
    std::string format = "human";
    std::size_t dimension = kDefaultDimension;
    bool dimension_given = false;
    std::string provider = "deterministic";
    bool provider_given = false;
    std::string endpoint;
    std::size_t ef_search = 0;

    bool json() const { return format == "json"; }
};

// Existing stores dictate dimension and provider; flags not explicitly
// given adopt the stored values so queries never need to repeat them.
// Explicitly given flags are passed through and mismatch at open.
Engine open_engine(const CommonOptions& opts, bool read_only) {
    if (opts.data_dir.empty())
        throw UsageError("no data dir; pass --data-dir or set TEMPOVEC_DATA_DIR");
    EngineConfig config;
    config.data_dir = opts.data_dir;
    config.read_only = read_only;
    config.ef_search_override = opts.ef_search;
    config.embedder.dimension = opts.dimension;
    config.embedder.provider = parse_provider(opts.provider);

    auto meta_path = config.data_dir / "meta.json";
    if (std::filesystem::exists(meta_path)) {
        nlohmann::json meta = nlohmann::json::parse(io::read_file(meta_path), nullptr, false);
        if (meta.is_object()) {
            if (!opts.dimension_given && meta.contains("dimension"))
                config.embedder.dimension = meta["dimension"].get<std::size_t>();
            if (!opts.provider_given && meta.contains("provider"))
                config.embedder.provider = parse_provider(meta["provider"].get<std::string>());
        }
    }
    if (!opts.endpoint.empty())
        config.embedder.remote_endpoint = opts.endpoint;
    return Engine(std::move(config));
}

nlohmann::json hit_to_json(const QueryHit& hit, std::size_t rank) {
    nlohmann::json j = {
        {"rank", rank},        {"similarity", hit.similarity},
        {"chunk_id", hit.chunk_id}, {"doc_id", hit.doc_id},
        {"position", hit.position}, {"content", hit.content},
        {"valid_from", hit.valid_from}, {"tier", std::string(to_string(hit.tier))},
    };
    j["valid_to"] = hit.valid_to ? nlohmann::json(*hit.valid_to) : nlohmann::json(nullptr);
    if (hit.version_number)
        j["version"] = *hit.version_number;
    return j;
}

void print_hits_human(const QueryResult& result) {
    if (result.hits.empty()) {
        std::cout << "no results\n";
        return;
    }
    std::size_t rank = 1;
    for (const QueryHit& hit : result.hits) {
        std::string window = "[" + format_timestamp(hit.valid_from) + " .. " +
                             (hit.valid_to ? format_timestamp(*hit.valid_to) : "now") + ")";
        std::printf("%2zu  %.4f  %s:%llu  %s  %s\n", rank++, hit.similarity,
                    hit.doc_id.c_str(), static_cast<unsigned long long>(hit.position),
                    window.c_str(), preview(hit.content).c_str());
    }
}

void print_hits(const QueryResult& result, bool json) {
    if (!json) {
        print_hits_human(result);
        return;
    }
    std::size_t rank = 1;
    for (const QueryHit& hit : result.hits)
        std::cout << hit_to_json(hit, rank++).dump() << "\n";
}

nlohmann::json summary_to_json(const CdcSummary& s) {
    return {
        {"doc_id", s.doc_id},
        {"ingest_ts", s.ingest_ts},
        {"total_chunks", s.total_chunks},
        {"new", s.new_count},
        {"modified", s.modified_count},
        {"deleted", s.deleted_count},
        {"unchanged", s.unchanged_count},
        {"moved", s.moved_count},
        {"embeddings", s.embeddings_computed},
        {"reprocessed_fraction", s.reprocessed_fraction},
        {"txn_version", s.txn_version},
        {"elapsed_ms", s.elapsed_ms},
    };
}

void print_summary(const CdcSummary& s, bool json) {
    if (json) {
        std::cout << summary_to_json(s).dump() << "\n";
        return;
    }
    std::printf(
        "%s @ %s  chunks=%zu new=%zu modified=%zu deleted=%zu moved=%zu "
        "unchanged=%zu embedded=%zu (%.1f%%) txn=%llu %.1fms\n",
        s.doc_id.c_str(), format_timestamp(s.ingest_ts).c_str(), s.total_chunks, s.new_count,
        s.modified_count, s.deleted_count, s.moved_count, s.unchanged_count,
        s.embeddings_computed, 100.0 * s.reprocessed_fraction,
        static_cast<unsigned long long>(s.txn_version), s.elapsed_ms);
}

int run_verify(Engine& engine, bool json) {
    DivergenceReport report = engine.verify_tiers();
    if (json) {
        auto items = [](const std::vector<DivergenceReport::Item>& v) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& item : v)
                arr.push_back({{"chunk_id", item.chunk_id},
                               {"doc_id", item.doc_id},
                               {"position", item.position}});
            return arr;
        };
        nlohmann::json j = {{"clean", report.clean()},
                            {"hot_only", items(report.hot_only)},
                            {"cold_only", items(report.cold_only)}};
        std::cout << j.dump() << "\n";
    } else if (report.clean()) {
        std::cout << "tiers agree\n";
    } else {
        for (const auto& item : report.hot_only)
            std::printf("hot only:  %s:%llu %s\n", item.doc_id.c_str(),
                        static_cast<unsigned long long>(item.position), item.chunk_id.c_str());
        for (const auto& item : report.cold_only)
            std::printf("cold only: %s:%llu %s\n", item.doc_id.c_str(),
                        static_cast<unsigned long long>(item.position), item.chunk_id.c_str());
    }
    return report.clean() ? kExitOk : kExitDivergence;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tempovec: dual-tier temporal vector store"};
    app.require_subcommand(1);

    CommonOptions opts;
    app.add_option("--data-dir", opts.data_dir, "store directory")
        ->envname("TEMPOVEC_DATA_DIR");
    app.add_option("--format", opts.format, "output format")
        ->check(CLI::IsMember({"human", "json"}))
        ->capture_default_str();
    auto* dim_opt =
        app.add_option("--dimension", opts.dimension, "embedding dimension (new stores)");
    auto* provider_opt = app.add_option("--provider", opts.provider,
                                        "embedder provider: deterministic or remote");
    app.add_option("--endpoint", opts.endpoint, "remote embedder endpoint URL");
    app.add_option("--ef-search", opts.ef_search, "index search width for this process");

    auto* init_cmd = app.add_subcommand("init", "create an empty store");

    auto* ingest_cmd = app.add_subcommand("ingest", "ingest one document or a manifest");
    std::string doc_path, doc_id, ts_text, manifest_path;
    auto* doc_opt = ingest_cmd->add_option("--doc", doc_path, "document file");
    ingest_cmd->add_option("--doc-id", doc_id, "document id (default: file stem)");
    ingest_cmd->add_option("--ts", ts_text, "version timestamp (ms or RFC 3339; default now)");
    auto* manifest_opt =
        ingest_cmd->add_option("--manifest", manifest_path,
                               "JSON-lines manifest: {\"doc_id\",\"path\",\"ts\"} per line");
    doc_opt->excludes(manifest_opt);

    std::string query_text, at_text, from_text, to_text;
    std::size_t k = 5;
    auto* query_cmd = app.add_subcommand("query", "search the current state");
    query_cmd->add_option("text", query_text, "query text")->required();
    query_cmd->add_option("-k,--top", k, "results to return")->capture_default_str();

    auto* asof_cmd = app.add_subcommand("query-asof", "search a historical snapshot");
    asof_cmd->add_option("text", query_text, "query text")->required();
    asof_cmd->add_option("--at", at_text, "snapshot timestamp")->required();
    asof_cmd->add_option("-k,--top", k, "results to return")->capture_default_str();

    auto* range_cmd = app.add_subcommand("query-range", "compare two snapshots");
    range_cmd->add_option("text", query_text, "query text")->required();
    range_cmd->add_option("--from", from_text, "range start timestamp")->required();
    range_cmd->add_option("--to", to_text, "range end timestamp")->required();
    range_cmd->add_option("-k,--top", k, "results per endpoint")->capture_default_str();

    std::string timeline_doc;
    auto* timeline_cmd = app.add_subcommand("timeline", "list a document's revisions");
    timeline_cmd->add_option("doc_id", timeline_doc, "document id")->required();

    std::string diff_doc;
    std::uint64_t rev_a = 0, rev_b = 0;
    auto* diff_cmd = app.add_subcommand("diff", "chunk changes between two revisions");
    diff_cmd->add_option("doc_id", diff_doc, "document id")->required();
    diff_cmd->add_option("rev_a", rev_a, "older revision (1-based)")->required();
    diff_cmd->add_option("rev_b", rev_b, "newer revision (1-based)")->required();

    auto* stats_cmd = app.add_subcommand("stats", "store statistics");
    auto* reconcile_cmd = app.add_subcommand("reconcile", "repair or void in-flight commits");
    auto* verify_cmd = app.add_subcommand("verify", "compare hot and cold active sets");
    auto* compact_cmd = app.add_subcommand("compact", "drop tombstones from the index");

    // Global flags remain valid after the subcommand name.
    for (CLI::App* sub : {init_cmd, ingest_cmd, query_cmd, asof_cmd, range_cmd, timeline_cmd,
                          diff_cmd, stats_cmd, reconcile_cmd, verify_cmd, compact_cmd})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    opts.dimension_given = dim_opt->count() > 0;
    opts.provider_given = provider_opt->count() > 0;

    try {
        if (app.got_subcommand(init_cmd)) {
            Engine engine = open_engine(opts, /*read_only=*/false);
            if (opts.json()) {
                nlohmann::json j = {{"data_dir", engine.data_dir().string()},
                                    {"dimension", engine.embedder().dimension()},
                                    {"provider",
                                     std::string(to_string(engine.embedder().provider()))}};
                std::cout << j.dump() << "\n";
            } else {
                std::cout << "initialized " << engine.data_dir().string() << " (dimension "
                          << engine.embedder().dimension() << ", "
                          << to_string(engine.embedder().provider()) << ")\n";
            }
            return kExitOk;
        }

        if (app.got_subcommand(ingest_cmd)) {
            if (doc_opt->count() == 0 && manifest_opt->count() == 0)
                throw UsageError("ingest needs --doc or --manifest");
            Engine engine = open_engine(opts, /*read_only=*/false);
            if (doc_opt->count() > 0) {
                RawDocument doc = load_document(doc_path, doc_id);
                std::optional<Timestamp> ts;
                if (!ts_text.empty())
                    ts = parse_timestamp(ts_text);
                print_summary(engine.ingest_document(doc, ts), opts.json());
                return kExitOk;
            }
            CorpusReport report = engine.ingest_corpus(Engine::load_manifest(manifest_path));
            for (const CdcSummary& s : report.summaries)
                print_summary(s, opts.json());
            for (const CorpusFailure& f : report.failures)
                std::cerr << "failed: " << f.doc_id << " @ " << format_timestamp(f.ts) << ": "
                          << f.error << "\n";
            if (opts.json()) {
                nlohmann::json j = {{"versions_ingested", report.versions_ingested},
                                    {"documents", report.documents},
                                    {"total_chunks", report.total_chunks},
                                    {"embeddings", report.embeddings_computed},
                                    {"mean_nonfirst_fraction", report.mean_nonfirst_fraction},
                                    {"failures", report.failures.size()}};
                std::cout << j.dump() << "\n";
            } else {
                std::printf(
                    "ingested %zu versions of %zu documents: %zu chunks, %zu embedded, "
                    "mean re-embed fraction after first version %.3f\n",
                    report.versions_ingested, report.documents, report.total_chunks,
                    report.embeddings_computed, report.mean_nonfirst_fraction);
            }
            return report.failures.empty() ? kExitOk : kExitStore;
        }

        if (app.got_subcommand(query_cmd)) {
            Engine engine = open_engine(opts, /*read_only=*/true);
            print_hits(engine.query().query_current(query_text, k), opts.json());
            return kExitOk;
        }

        if (app.got_subcommand(asof_cmd)) {
            Engine engine = open_engine(opts, /*read_only=*/true);
            print_hits(engine.query().query_as_of(query_text, parse_timestamp(at_text), k),
                       opts.json());
            return kExitOk;
        }

        if (app.got_subcommand(range_cmd)) {
            Engine engine = open_engine(opts, /*read_only=*/true);
            Timestamp from = parse_timestamp(from_text);
            Timestamp to = parse_timestamp(to_text);
            RangeResult result = engine.query().query_range(query_text, from, to, k);
            if (opts.json()) {
                auto hits = [](const QueryResult& r) {
                    nlohmann::json arr = nlohmann::json::array();
                    std::size_t rank = 1;
                    for (const QueryHit& hit : r.hits)
                        arr.push_back(hit_to_json(hit, rank++));
                    return arr;
                };
                nlohmann::json j = {{"at_start", hits(result.at_start)},
                                    {"at_end", hits(result.at_end)},
                                    {"diff",
                                     {{"only_at_start", result.diff.only_at_start},
                                      {"only_at_end", result.diff.only_at_end},
                                      {"at_both", result.diff.at_both}}}};
                std::cout << j.dump() << "\n";
            } else {
                std::cout << "at " << format_timestamp(from) << ":\n";
                print_hits_human(result.at_start);
                std::cout << "at " << format_timestamp(to) << ":\n";
                print_hits_human(result.at_end);
                std::printf("diff: %zu only at start, %zu only at end, %zu at both\n",
                            result.diff.only_at_start.size(), result.diff.only_at_end.size(),
                            result.diff.at_both.size());
            }
            return kExitOk;
        }

        if (app.got_subcommand(timeline_cmd)) {
            Engine engine = open_engine(opts, /*read_only=*/true);
            auto timeline = engine.document_timeline(timeline_doc);
            for (const TimelineEntry& entry : timeline) {
                if (opts.json()) {
                    nlohmann::json j = {{"revision", entry.doc_revision},
                                        {"txn_version", entry.txn_version},
                                        {"commit_ts", entry.commit_ts},
                                        {"inserts", entry.inserts},
                                        {"updates", entry.updates},
                                        {"deletes", entry.deletes}};
                    std::cout << j.dump() << "\n";
                } else {
                    std::printf("rev %llu  txn %llu  %s  +%zu ~%zu -%zu\n",
                                static_cast<unsigned long long>(entry.doc_revision),
                                static_cast<unsigned long long>(entry.txn_version),
                                format_timestamp(entry.commit_ts).c_str(), entry.inserts,
                                entry.updates, entry.deletes);
                }
            }
            if (timeline.empty() && !opts.json())
                std::cout << "no revisions for " << timeline_doc << "\n";
            return kExitOk;
        }

        if (app.got_subcommand(diff_cmd)) {
            Engine engine = open_engine(opts, /*read_only=*/true);
            for (const RevisionDiffEntry& entry : engine.diff_revisions(diff_doc, rev_a, rev_b)) {
                if (opts.json()) {
                    nlohmann::json j = {{"kind", entry.kind},
                                        {"position", entry.position},
                                        {"chunk_id", entry.chunk_id}};
                    if (entry.from_position)
                        j["from_position"] = *entry.from_position;
                    std::cout << j.dump() << "\n";
                } else if (entry.from_position) {
                    std::printf("%-8s @%llu (from %llu)  %s\n", entry.kind.c_str(),
                                static_cast<unsigned long long>(entry.position),
                                static_cast<unsigned long long>(*entry.from_position),
                                entry.chunk_id.substr(0, 12).c_str());
                } else {
                    std::printf("%-8s @%llu  %s\n", entry.kind.c_str(),
                                static_cast<unsigned long long>(entry.position),
                                entry.chunk_id.substr(0, 12).c_str());
                }
            }
            return kExitOk;
        }

        if (app.got_subcommand(stats_cmd)) {
            Engine engine = open_engine(opts, /*read_only=*/true);
            EngineStats s = engine.stats();
            if (opts.json()) {
                nlohmann::json j = {
                    {"documents", s.documents},
                    {"hot",
                     {{"active", s.hot.active_count},
                      {"tombstones", s.hot.tombstone_count},
                      {"dimension", s.hot.dimension},
                      {"M", s.hot.index_params.M},
                      {"ef_construction", s.hot.index_params.ef_construction},
                      {"ef_search", s.hot.index_params.ef_search}}},
                    {"cold",
                     {{"total", s.cold.total_records},
                      {"active", s.cold.active_records},
                      {"superseded", s.cold.superseded},
                      {"deleted", s.cold.deleted},
                      {"transactions", s.cold.txn_count},
                      {"bytes_on_disk", s.cold.bytes_on_disk}}},
                    {"hot_reduction", s.hot_reduction}};
                std::cout << j.dump() << "\n";
            } else {
                std::printf("documents: %zu\n", s.documents);
                std::printf("hot:  %zu active, %zu tombstones, dimension %zu (M=%zu ef=%zu)\n",
                            s.hot.active_count, s.hot.tombstone_count, s.hot.dimension,
                            s.hot.index_params.M, s.hot.index_params.ef_search);
                std::printf("cold: %zu records (%zu active, %zu superseded, %zu deleted) in "
                            "%zu transactions, %llu bytes\n",
                            s.cold.total_records, s.cold.active_records, s.cold.superseded,
                            s.cold.deleted, s.cold.txn_count,
                            static_cast<unsigned long long>(s.cold.bytes_on_disk));
                std::printf("hot tier indexes %.1f%% less than the full history\n",
                            100.0 * s.hot_reduction);
            }
            return kExitOk;
        }

        if (app.got_subcommand(reconcile_cmd)) {
            Engine engine = open_engine(opts, /*read_only=*/false);
            ReconcileReport at_open = engine.startup_report();
            ReconcileReport now = engine.reconcile();
            std::size_t repaired = at_open.repaired + now.repaired;
            std::size_t compensated = at_open.compensated + now.compensated;
            if (opts.json()) {
                nlohmann::json j = {{"repaired", repaired}, {"compensated", compensated}};
                std::cout << j.dump() << "\n";
            } else {
                std::printf("repaired=%zu compensated=%zu\n", repaired, compensated);
            }
            return kExitOk;
        }

        if (app.got_subcommand(verify_cmd)) {
            Engine engine = open_engine(opts, /*read_only=*/true);
            return run_verify(engine, opts.json());
        }

        if (app.got_subcommand(compact_cmd)) {
            Engine engine = open_engine(opts, /*read_only=*/false);
            bool did = engine.compact();
            if (opts.json())
                std::cout << nlohmann::json{{"compacted", did}}.dump() << "\n";
            else
                std::cout << (did ? "compacted\n" : "no compaction needed\n");
            return kExitOk;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStore;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStore;
    }
    return kExitUsage;
}
