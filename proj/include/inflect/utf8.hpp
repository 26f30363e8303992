#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace inflect::utf8 {

// Decodes UTF-8 into codepoints. Throws DataError on malformed sequences.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view codepoints);
std::string encode(char32_t codepoint);

// Splits a UTF-8 string into one string per codepoint.
std::vector<std::string> split_codepoints(std::string_view text);

std::size_t length(std::string_view text);

}  // namespace inflect::utf8
