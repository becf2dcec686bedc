#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "tempovec/chunking.hpp"
#include "support/temp_dir.hpp"

using namespace tempovec;
using tempovec::test::TempDir;

static RawDocument doc(std::string text, std::string id = "d1") {
    return RawDocument{std::move(id), std::move(text), std::nullopt};
}

TEST_CASE("split on blank lines", "[chunking]") {
    auto blocks = split_document("A\n\nB");
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].content == "A");
    CHECK(blocks[0].kind == ChunkKind::paragraph);
    CHECK(blocks[1].content == "B");
}

TEST_CASE("empty and whitespace-only input", "[chunking]") {
    CHECK(split_document("").empty());
    CHECK(split_document("\n\n\n").empty());
    CHECK(split_document("   \n\t\n  ").empty());
}

TEST_CASE("multiple blank lines are one separator", "[chunking]") {
    auto blocks = split_document("A\n\n\n\n\nB");
    REQUIRE(blocks.size() == 2);
}

TEST_CASE("multi-line paragraph stays together", "[chunking]") {
    auto blocks = split_document("line one\nline two\n\nnext");
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].content == "line one\nline two");
}

TEST_CASE("fenced code block is atomic across blank lines", "[chunking]") {
    auto blocks = split_document("intro\n\n```\nx=1\n\ny=2\n```\n\noutro");
    REQUIRE(blocks.size() == 3);
    CHECK(blocks[0].content == "intro");
    CHECK(blocks[1].kind == ChunkKind::code_block);
    CHECK(blocks[1].content == "```\nx=1\n\ny=2\n```");
    CHECK(blocks[2].content == "outro");
}

TEST_CASE("unterminated fence runs to end of document", "[chunking]") {
    auto blocks = split_document("before\n\n```\ncode\n\nmore");
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[1].kind == ChunkKind::code_block);
    CHECK(blocks[1].content == "```\ncode\n\nmore");
}

TEST_CASE("table block is atomic", "[chunking]") {
    auto blocks = split_document("| a | b |\n|---|---|\n| 1 | 2 |\n\ntext");
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].kind == ChunkKind::table);
    CHECK(blocks[0].content == "| a | b |\n|---|---|\n| 1 | 2 |");
}

TEST_CASE("table block swallows interior blank lines", "[chunking]") {
    auto blocks = split_document("| a |\n\n| b |\n\nplain");
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].kind == ChunkKind::table);
    CHECK(blocks[0].content == "| a |\n\n| b |");
    CHECK(blocks[1].content == "plain");
}

TEST_CASE("list blocks cover bullet and numbered forms", "[chunking]") {
    auto blocks = split_document("- one\n- two\n\n1. first\n2. second\n\n* star");
    // The blank gap joins the two lists into one atomic block; the star list
    // is also a list line so it joins too.
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].kind == ChunkKind::list);
}

TEST_CASE("list block ends before a paragraph", "[chunking]") {
    auto blocks = split_document("- one\n- two\n\nparagraph after");
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].kind == ChunkKind::list);
    CHECK(blocks[0].content == "- one\n- two");
    CHECK(blocks[1].kind == ChunkKind::paragraph);
}

TEST_CASE("special block starts terminate a paragraph", "[chunking]") {
    auto blocks = split_document("text line\n- item\n| cell |");
    REQUIRE(blocks.size() == 3);
    CHECK(blocks[0].kind == ChunkKind::paragraph);
    CHECK(blocks[1].kind == ChunkKind::list);
    CHECK(blocks[2].kind == ChunkKind::table);
}

TEST_CASE("hash_chunk matches the reference digest", "[chunking]") {
    CHECK(hash_chunk("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(hash_chunk("abc") == hash_chunk("abc"));
    CHECK(hash_chunk("abc") != hash_chunk("abd"));
}

TEST_CASE("chunk_document assigns dense positions", "[chunking]") {
    auto chunks = chunk_document(doc("A\n\nB"));
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].position == 0);
    CHECK(chunks[1].position == 1);
    CHECK(chunks[0].chunk_id.size() == 64);
    CHECK(chunks[0].content == "A");
    CHECK(chunks[0].normalized == "a");
}

TEST_CASE("duplicate paragraphs share a chunk_id", "[chunking]") {
    auto chunks = chunk_document(doc("A\n\nA"));
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].chunk_id == chunks[1].chunk_id);
    CHECK(chunks[0].position == 0);
    CHECK(chunks[1].position == 1);
}

TEST_CASE("whitespace-only paragraph is dropped, positions stay dense", "[chunking]") {
    auto chunks = chunk_document(doc("A\n\n   \n\nB"));
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].normalized == "a");
    CHECK(chunks[1].normalized == "b");
    CHECK(chunks[1].position == 1);
}

TEST_CASE("chunk ids are insensitive to case and whitespace runs", "[chunking]") {
    auto a = chunk_document(doc("Hello   World\n\nSecond  Chunk"));
    auto b = chunk_document(doc("hello world\n\nsecond chunk"));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].chunk_id == b[i].chunk_id);
}

TEST_CASE("chunking is deterministic", "[chunking]") {
    std::string text = "alpha beta\n\n- x\n- y\n\n```\nf()\n```\n\ntail";
    auto a = chunk_document(doc(text));
    auto b = chunk_document(doc(text));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].chunk_id == b[i].chunk_id);
        CHECK(a[i].kind == b[i].kind);
    }
}

TEST_CASE("identical paragraphs across documents share ids", "[chunking]") {
    auto a = chunk_document(doc("shared text", "doc-a"));
    auto b = chunk_document(doc("other\n\nshared text", "doc-b"));
    REQUIRE(a.size() == 1);
    REQUIRE(b.size() == 2);
    CHECK(a[0].chunk_id == b[1].chunk_id);
}

TEST_CASE("document validation", "[chunking]") {
    CHECK_THROWS_AS(chunk_document(doc("x", "")), UsageError);
    CHECK_THROWS_AS(chunk_document(doc("x", "bad\x01id")), UsageError);
    CHECK_THROWS_AS(chunk_document(doc("\xff\xfe", "d1")), UsageError);
}

TEST_CASE("load_document reads utf-8 files", "[chunking]") {
    TempDir dir;
    auto path = dir.file("note.md");
    {
        std::ofstream out(path, std::ios::binary);
        out << "# Title\n\nBody text\n";
    }
    auto d = load_document(path);
    CHECK(d.doc_id == "note");
    CHECK(d.source_path == path.string());
    auto chunks = chunk_document(d);
    REQUIRE(chunks.size() == 2);

    auto named = load_document(path, "custom-id");
    CHECK(named.doc_id == "custom-id");
}

TEST_CASE("load_document rejects invalid utf-8", "[chunking]") {
    TempDir dir;
    auto path = dir.file("bad.txt");
    {
        std::ofstream out(path, std::ios::binary);
        out << "ok\n\xc3\x28";
    }
    CHECK_THROWS_AS(load_document(path), UsageError);
}
