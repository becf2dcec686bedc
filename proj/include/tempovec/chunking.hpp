#pragma once

// Splits document text into content-addressed chunks.
//
// Paragraphs are maximal runs of non-blank lines. Fenced code blocks,
// table blocks (lines starting with '|'), and list blocks (lines starting
// with '-', '*', or 'N.') are atomic: they become one chunk even when blank
// lines appear inside them. Each chunk's identity is the SHA-256 of its
// normalized text, so chunks equal up to case and whitespace share an id.

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tempovec/io.hpp"
#include "tempovec/sha256.hpp"
#include "tempovec/types.hpp"
#include "tempovec/unicode.hpp"

namespace tempovec {

enum class ChunkKind : std::uint8_t {
    paragraph = 0,
    code_block = 1,
    table = 2,
    list = 3,
};

inline std::string_view to_string(ChunkKind k) {
    switch (k) {
        case ChunkKind::paragraph: return "paragraph";
        case ChunkKind::code_block: return "code_block";
        case ChunkKind::table: return "table";
        case ChunkKind::list: return "list";
    }
    return "paragraph";
}

struct RawDocument {
    std::string doc_id;
    std::string text;
    std::optional<std::string> source_path;
};

struct Chunk {
    std::string chunk_id;    // 64-char lowercase hex, SHA-256 of normalized
    std::string content;     // original text, pre-normalization
    std::string normalized;
    std::size_t position = 0;  // dense 0-based index after empty chunks drop
    ChunkKind kind = ChunkKind::paragraph;
};

// doc_id must be non-empty and printable; it names files and log records.
inline void validate_doc_id(std::string_view doc_id) {
    if (doc_id.empty())
        throw UsageError("doc_id must be non-empty");
    for (unsigned char c : doc_id) {
        if (c < 0x20 || c == 0x7f)
            throw UsageError("doc_id must not contain control characters");
    }
}

inline void validate_document(const RawDocument& doc) {
    validate_doc_id(doc.doc_id);
    if (!is_valid_utf8(doc.text))
        throw UsageError("document text is not valid UTF-8: " + doc.doc_id);
}

namespace detail {

inline std::string_view trim_ascii(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline bool is_blank_line(std::string_view line) {
    return trim_ascii(line).empty();
}

inline bool is_fence_line(std::string_view line) {
    return trim_ascii(line).substr(0, 3) == "```";
}

inline bool is_table_line(std::string_view line) {
    auto t = trim_ascii(line);
    return !t.empty() && t.front() == '|';
}

inline bool is_list_line(std::string_view line) {
    auto t = trim_ascii(line);
    if (t.empty())
        return false;
    if (t.front() == '-' || t.front() == '*')
        return true;
    std::size_t i = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i])))
        ++i;
    return i > 0 && i < t.size() && t[i] == '.';
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size())
                lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

}  // namespace detail

// Blocks produced by the splitter, before normalization and hashing.
struct SplitBlock {
    std::string content;
    ChunkKind kind;
};

inline std::vector<SplitBlock> split_document(std::string_view text) {
    using namespace detail;
    auto lines = split_lines(text);
    std::vector<SplitBlock> blocks;

    auto emit = [&](std::size_t first, std::size_t last, ChunkKind kind) {
        std::string content;
        for (std::size_t i = first; i <= last; ++i) {
            if (i > first)
                content.push_back('\n');
            content.append(lines[i]);
        }
        if (!trim_ascii(content).empty())
            blocks.push_back(SplitBlock{std::move(content), kind});
    };

    // Index of the next non-blank line at or after i, or lines.size().
    auto next_nonblank = [&](std::size_t i) {
        while (i < lines.size() && is_blank_line(lines[i]))
            ++i;
        return i;
    };

    std::size_t i = 0;
    while (i < lines.size()) {
        if (is_blank_line(lines[i])) {
            ++i;
            continue;
        }
        if (is_fence_line(lines[i])) {
            std::size_t j = i + 1;
            while (j < lines.size() && !is_fence_line(lines[j]))
                ++j;
            std::size_t last = (j < lines.size()) ? j : lines.size() - 1;
            emit(i, last, ChunkKind::code_block);
            i = last + 1;
            continue;
        }
        if (is_table_line(lines[i]) || is_list_line(lines[i])) {
            bool table = is_table_line(lines[i]);
            auto same_kind = [&](std::string_view l) {
                return table ? is_table_line(l) : is_list_line(l);
            };
            std::size_t last = i;
            std::size_t j = i + 1;
            while (j < lines.size()) {
                if (is_blank_line(lines[j])) {
                    // Blank lines stay inside the block only when the same
                    // kind of line resumes after them.
                    std::size_t k = next_nonblank(j);
                    if (k < lines.size() && !is_fence_line(lines[k]) &&
                        same_kind(lines[k])) {
                        j = k;
                        continue;
                    }
                    break;
                }
                if (is_fence_line(lines[j]) || !same_kind(lines[j]))
                    break;
                last = j;
                ++j;
            }
            emit(i, last, table ? ChunkKind::table : ChunkKind::list);
            i = last + 1;
            continue;
        }
        // Paragraph: plain lines until a blank line or a special block starts.
        std::size_t last = i;
        std::size_t j = i + 1;
        while (j < lines.size() && !is_blank_line(lines[j]) &&
               !is_fence_line(lines[j]) && !is_table_line(lines[j]) &&
               !is_list_line(lines[j])) {
            last = j;
            ++j;
        }
        emit(i, last, ChunkKind::paragraph);
        i = last + 1;
    }
    return blocks;
}

// NFC, case folding, whitespace collapse, trim. See unicode.hpp.
inline std::string normalize(std::string_view content) {
    return normalize_text(content);
}

inline std::string hash_chunk(std::string_view normalized) {
    return sha256_hex(normalized);
}

inline std::vector<Chunk> chunk_document(const RawDocument& doc) {
    validate_document(doc);
    std::vector<Chunk> chunks;
    for (auto& block : split_document(doc.text)) {
        std::string normalized = normalize(block.content);
        if (normalized.empty())
            continue;
        Chunk c;
        c.chunk_id = hash_chunk(normalized);
        c.content = std::move(block.content);
        c.normalized = std::move(normalized);
        c.position = chunks.size();
        c.kind = block.kind;
        chunks.push_back(std::move(c));
    }
    return chunks;
}

// Loads a UTF-8 text or Markdown file. doc_id defaults to the file stem.
inline RawDocument load_document(const std::filesystem::path& path,
                                 std::string doc_id = {}) {
    RawDocument doc;
    doc.doc_id = doc_id.empty() ? path.stem().string() : std::move(doc_id);
    doc.text = io::read_file(path);
    doc.source_path = path.string();
    validate_document(doc);
    return doc;
}

}  // namespace tempovec
