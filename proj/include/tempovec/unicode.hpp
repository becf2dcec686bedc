#pragma once
// Text normalization on top of ICU: NFC, full case folding, whitespace
// collapsing. The pipeline is fixed as NFC -> casefold -> collapse -> trim
// and is idempotent.

#include "tempovec/types.hpp"

#include <unicode/uchar.h>
#include <unicode/unorm2.h>
#include <unicode/ustring.h>
#include <unicode/utf16.h>

#include <string>
#include <string_view>
#include <vector>

namespace tempovec {

namespace detail {

inline std::vector<UChar> utf8_to_utf16(std::string_view utf8) {
    std::vector<UChar> out(utf8.size() + 1);
    UErrorCode ec = U_ZERO_ERROR;
    int32_t len = 0;
    u_strFromUTF8(out.data(), static_cast<int32_t>(out.size()), &len, utf8.data(),
                  static_cast<int32_t>(utf8.size()), &ec);
    if (U_FAILURE(ec))
        throw UsageError(std::string("invalid UTF-8 input: ") + u_errorName(ec));
    out.resize(static_cast<std::size_t>(len));
    return out;
}

inline std::string utf16_to_utf8(const UChar* data, int32_t len) {
    std::string out(static_cast<std::size_t>(len) * 3 + 1, '\0');
    UErrorCode ec = U_ZERO_ERROR;
    int32_t out_len = 0;
    u_strToUTF8(out.data(), static_cast<int32_t>(out.size()), &out_len, data, len, &ec);
    if (U_FAILURE(ec))
        throw UsageError(std::string("UTF-16 to UTF-8 conversion failed: ") + u_errorName(ec));
    out.resize(static_cast<std::size_t>(out_len));
    return out;
}

} // namespace detail

inline bool is_valid_utf8(std::string_view s) {
    const auto* p = reinterpret_cast<const unsigned char*>(s.data());
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = p[i];
        std::size_t cont;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xe0) == 0xc0) {
            cont = 1;
            cp = c & 0x1f;
        } else if ((c & 0xf0) == 0xe0) {
            cont = 2;
            cp = c & 0x0f;
        } else if ((c & 0xf8) == 0xf0) {
            cont = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + cont >= s.size())
            return false;
        for (std::size_t k = 1; k <= cont; ++k) {
            if ((p[i + k] & 0xc0) != 0x80)
                return false;
            cp = (cp << 6) | (p[i + k] & 0x3f);
        }
        // reject overlong encodings, surrogates, and out-of-range values
        static constexpr std::uint32_t mins[] = {0, 0x80, 0x800, 0x10000};
        if (cp < mins[cont] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff))
            return false;
        i += cont + 1;
    }
    return true;
}

// Unicode NFC normalization, then full case folding, then every maximal run
// of whitespace replaced by a single ASCII space, then trimmed.
inline std::string normalize_text(std::string_view utf8) {
    if (utf8.empty())
        return {};
    auto u16 = detail::utf8_to_utf16(utf8);

    UErrorCode ec = U_ZERO_ERROR;
    const UNormalizer2* nfc = unorm2_getNFCInstance(&ec);
    if (U_FAILURE(ec))
        throw Error("ICU NFC instance unavailable");

    std::vector<UChar> composed(u16.size() * 3 + 8);
    int32_t clen = unorm2_normalize(nfc, u16.data(), static_cast<int32_t>(u16.size()),
                                    composed.data(), static_cast<int32_t>(composed.size()), &ec);
    if (ec == U_BUFFER_OVERFLOW_ERROR) {
        ec = U_ZERO_ERROR;
        composed.resize(static_cast<std::size_t>(clen) + 1);
        clen = unorm2_normalize(nfc, u16.data(), static_cast<int32_t>(u16.size()),
                                composed.data(), static_cast<int32_t>(composed.size()), &ec);
    }
    if (U_FAILURE(ec))
        throw Error(std::string("NFC normalization failed: ") + u_errorName(ec));

    std::vector<UChar> folded(static_cast<std::size_t>(clen) * 3 + 8);
    int32_t flen = u_strFoldCase(folded.data(), static_cast<int32_t>(folded.size()),
                                 composed.data(), clen, U_FOLD_CASE_DEFAULT, &ec);
    if (ec == U_BUFFER_OVERFLOW_ERROR) {
        ec = U_ZERO_ERROR;
        folded.resize(static_cast<std::size_t>(flen) + 1);
        flen = u_strFoldCase(folded.data(), static_cast<int32_t>(folded.size()),
                             composed.data(), clen, U_FOLD_CASE_DEFAULT, &ec);
    }
    if (U_FAILURE(ec))
        throw Error(std::string("case folding failed: ") + u_errorName(ec));

    // Collapse whitespace runs; drop leading/trailing whitespace entirely.
    std::vector<UChar> out;
    out.reserve(static_cast<std::size_t>(flen));
    bool pending_space = false;
    bool emitted = false;
    int32_t i = 0;
    while (i < flen) {
        UChar32 cp;
        U16_NEXT(folded.data(), i, flen, cp);
        if (u_isUWhiteSpace(cp)) {
            pending_space = emitted;
            continue;
        }
        if (pending_space) {
            out.push_back(u' ');
            pending_space = false;
        }
        UChar buf[2];
        int32_t blen = 0;
        UBool err = false;
        U16_APPEND(buf, blen, 2, cp, err);
        if (!err)
            out.insert(out.end(), buf, buf + blen);
        emitted = true;
    }
    return detail::utf16_to_utf8(out.data(), static_cast<int32_t>(out.size()));
}

} // namespace tempovec
