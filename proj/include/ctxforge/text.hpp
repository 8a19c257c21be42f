#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ctxforge::text {

/// Decodes UTF-8; malformed sequences become U+FFFD so decoding is total.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view cps);

enum class Script { Latin, Hiragana, Katakana, Han, Hangul, Cyrillic, Greek, Other };

Script script_of(char32_t cp);

bool is_space(char32_t cp);
bool is_punct(char32_t cp);
/// Letters and digits of any script; everything that is not whitespace,
/// punctuation, a symbol or a control character.
bool is_word_char(char32_t cp);
bool is_letter(char32_t cp);

/// Full-width ASCII variants (U+FF01..U+FF5E) and the ideographic space map
/// to their ASCII counterparts; everything else passes through.
char32_t fold_width(char32_t cp);
char32_t to_lower(char32_t cp);

std::u32string fold_width(std::u32string_view s);

std::size_t length_cp(std::string_view utf8);

/// Han characters that only occur in simplified Chinese.
bool is_simplified_only_han(char32_t cp);

std::string trim_ascii(std::string_view s);

/// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace ctxforge::text
