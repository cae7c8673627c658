#include "bibi/text.hpp"

#include <cstdint>

namespace bibi {
namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

// Returns the byte length of the whitespace sequence starting at `pos`, or 0.
std::size_t whitespace_length(std::string_view s, std::size_t pos) {
  const auto c0 = static_cast<unsigned char>(s[pos]);
  if (c0 == ' ' || (c0 >= 0x09 && c0 <= 0x0D)) return 1;
  auto at = [&](std::size_t k) -> unsigned {
    return pos + k < s.size() ? static_cast<unsigned char>(s[pos + k]) : 0u;
  };
  if (c0 == 0xC2 && (at(1) == 0x85 || at(1) == 0xA0)) return 2;  // NEL, NBSP
  if (c0 == 0xE1 && at(1) == 0x9A && at(2) == 0x80) return 3;     // U+1680
  if (c0 == 0xE2 && at(1) == 0x80) {
    const unsigned c2 = at(2);
    if ((c2 >= 0x80 && c2 <= 0x8A) || c2 == 0xA8 || c2 == 0xA9 || c2 == 0xAF) return 3;
  }
  if (c0 == 0xE2 && at(1) == 0x81 && at(2) == 0x9F) return 3;  // U+205F
  if (c0 == 0xE3 && at(1) == 0x80 && at(2) == 0x80) return 3;  // U+3000
  return 0;
}

void split_chunk(std::string_view text, std::size_t begin, std::size_t end, std::vector<Token>& out) {
  std::size_t lo = begin;
  std::size_t hi = end;
  while (lo < hi && is_ascii_punct(static_cast<unsigned char>(text[lo]))) {
    out.push_back({std::string(1, text[lo]), lo, lo + 1});
    ++lo;
  }
  std::vector<Token> trailing;
  while (hi > lo && is_ascii_punct(static_cast<unsigned char>(text[hi - 1]))) {
    trailing.push_back({std::string(1, text[hi - 1]), hi - 1, hi});
    --hi;
  }
  if (lo < hi) out.push_back({std::string(text.substr(lo, hi - lo)), lo, hi});
  out.insert(out.end(), trailing.rbegin(), trailing.rend());
}

}  // namespace

std::vector<Token> tokenize_with_offsets(std::string_view text) {
  std::vector<Token> out;
  std::size_t pos = 0;
  std::size_t chunk_start = std::string_view::npos;
  while (pos < text.size()) {
    const std::size_t ws = whitespace_length(text, pos);
    if (ws > 0) {
      if (chunk_start != std::string_view::npos) {
        split_chunk(text, chunk_start, pos, out);
        chunk_start = std::string_view::npos;
      }
      pos += ws;
    } else {
      if (chunk_start == std::string_view::npos) chunk_start = pos;
      ++pos;
    }
  }
  if (chunk_start != std::string_view::npos) split_chunk(text, chunk_start, text.size(), out);
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
  return out;
}

std::string_view trim_trailing_newline(std::string_view s) {
  if (!s.empty() && s.back() == '\n') {
    s.remove_suffix(1);
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  }
  return s;
}

}  // namespace bibi
