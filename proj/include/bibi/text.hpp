#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace bibi {

// A token together with its byte range [begin, end) in the source text.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

// The harness tokenizer, shared by every module.
//
// Splits on Unicode whitespace (ASCII blanks plus the UTF-8 encoded
// Zs/Zl/Zp code points and U+0085), then peels leading and trailing ASCII
// punctuation off each chunk into single-character tokens. Interior
// punctuation ("I'm", "2006-07") stays attached. No case folding.
std::vector<Token> tokenize_with_offsets(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);

// Removes exactly one trailing "\n" (or "\r\n") if present.
std::string_view trim_trailing_newline(std::string_view s);

}  // namespace bibi
