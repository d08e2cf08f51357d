#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace miabench::utf8 {

/// Strict decoder: rejects overlong forms, surrogates, code points above
/// U+10FFFF and truncated sequences. Throws Error(decode_error) naming the
/// byte offset of the first invalid sequence.
std::vector<char32_t> decode(std::string_view bytes);

void append(std::string& out, char32_t cp);

std::string encode(const std::vector<char32_t>& cps);

}  // namespace miabench::utf8
