#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace acrodis::text {

// Decodes UTF-8 into codepoints. Invalid byte sequences become U+FFFD.
std::vector<uint32_t> decode_utf8(std::string_view s);

// Encodes codepoints back to UTF-8.
std::string encode_utf8(const std::vector<uint32_t>& cps);

// Canonical composition for the Latin range: combining marks U+0300..U+036F
// over ASCII base letters are folded into their precomposed forms where one
// exists (Latin-1 Supplement / Latin Extended-A). Precomposed input passes
// through unchanged. Covers the diacritics of French and Spanish corpora.
std::string nfc(std::string_view s);

// Lowercase for ASCII plus the accented Latin ranges handled by nfc().
std::string to_lower(std::string_view s);

// nfc + to_lower, the normal form used for token comparison and hashing.
std::string normalize_token(std::string_view s);

// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

// FNV-1a 64-bit.
uint64_t fnv1a(std::string_view s);

}  // namespace acrodis::text
