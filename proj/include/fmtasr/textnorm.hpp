// Copyright 2026 The fmtasr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Transcript normalization for formatted (punctuated, cased) text.
//
// Only the sentence marks `.` `,` `?` survive normalization. Every other
// punctuation character is removed and acts as a token boundary, except
// apostrophes and hyphens that sit between two word characters ("don't",
// "well-known"), which stay part of the word. Retained marks become
// standalone space-separated tokens and runs of one repeated mark collapse
// to a single mark ("..." -> ".").

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fmtasr::textnorm {

enum class View { kPlain, kCased, kCasedPunct };

struct Transcript {
  std::string raw;
  std::string normalized;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

struct TokenSequence {
  std::vector<std::string> tokens;
  View view = View::kCasedPunct;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

namespace detail {

struct CodePoint {
  char32_t value;
  std::string_view bytes;  // original encoding, re-emitted verbatim
};

// Decodes UTF-8. Malformed bytes decode to themselves one byte at a time so
// that nothing is lost.
inline std::vector<CodePoint> DecodeUtf8(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = b0;
    if (b0 >= 0xC2 && b0 <= 0xDF) {
      len = 2;
      cp = b0 & 0x1F;
    } else if (b0 >= 0xE0 && b0 <= 0xEF) {
      len = 3;
      cp = b0 & 0x0F;
    } else if (b0 >= 0xF0 && b0 <= 0xF4) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len == 1 || i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (b & 0x3F);
      }
    }
    if (!ok) {
      len = 1;
      cp = b0;
    }
    out.push_back({cp, s.substr(i, len)});
    i += len;
  }
  return out;
}

inline void AppendUtf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline bool IsSpace(char32_t c) {
  return c == U' ' || (c >= U'\t' && c <= U'\r') || c == 0x00A0 ||
         c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 ||
         c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

inline bool IsRetainedMark(char32_t c) {
  return c == U'.' || c == U',' || c == U'?';
}

// Joiners stay inside a word when flanked by word characters.
inline bool IsJoiner(char32_t c) {
  return c == U'\'' || c == 0x2019 || c == U'-' || c == 0x2010 || c == 0x2011;
}

inline bool IsEllipsis(char32_t c) { return c == 0x2026; }

inline bool IsPunctuation(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
           (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
  }
  switch (c) {
    case 0x00A1: case 0x00A7: case 0x00AB: case 0x00B6:
    case 0x00B7: case 0x00BB: case 0x00BF: case 0x037E:
    case 0x0387:
      return true;
    default:
      break;
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x2E00 && c <= 0x2E4F) || (c >= 0x3001 && c <= 0x3003) ||
         (c >= 0x3008 && c <= 0x3011) || (c >= 0x3014 && c <= 0x301F) ||
         (c >= 0xFE10 && c <= 0xFE19) || (c >= 0xFE30 && c <= 0xFE4F) ||
         (c >= 0xFE50 && c <= 0xFE6B) || (c >= 0xFF01 && c <= 0xFF0F) ||
         (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
         (c >= 0xFF5B && c <= 0xFF65);
}

inline bool IsWordChar(char32_t c) {
  return !IsSpace(c) && !IsPunctuation(c) && !IsEllipsis(c);
}

inline char32_t ToLower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 0x20;
  if (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) return c + 0x20;
  if (c >= 0x0391 && c <= 0x03A9 && c != 0x03A2) return c + 0x20;
  if (c >= 0x0410 && c <= 0x042F) return c + 0x20;
  if (c >= 0x0400 && c <= 0x040F) return c + 0x50;
  return c;
}

}  // namespace detail

inline bool IsPunctuationToken(std::string_view token) {
  return token == "." || token == "," || token == "?";
}

inline std::string Lowercase(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const auto& cp : detail::DecodeUtf8(s)) {
    const char32_t lower = detail::ToLower(cp.value);
    if (lower == cp.value) {
      out.append(cp.bytes);
    } else {
      detail::AppendUtf8(out, lower);
    }
  }
  return out;
}

// Splits raw text into word and mark tokens following the normalization
// rules described at the top of this file.
inline std::vector<std::string> NormalizeTokens(std::string_view raw) {
  const auto cps = detail::DecodeUtf8(raw);
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  auto push_mark = [&](std::string_view mark) {
    flush();
    if (tokens.empty() || tokens.back() != mark) tokens.emplace_back(mark);
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i].value;
    if (detail::IsRetainedMark(c)) {
      push_mark(cps[i].bytes);
    } else if (detail::IsEllipsis(c)) {
      push_mark(".");
    } else if (detail::IsJoiner(c)) {
      const bool inside = !word.empty() && i + 1 < cps.size() &&
                          detail::IsWordChar(cps[i + 1].value);
      if (inside) {
        word.append(cps[i].bytes);
      } else {
        flush();
      }
    } else if (detail::IsSpace(c) || detail::IsPunctuation(c)) {
      flush();
    } else {
      word.append(cps[i].bytes);
    }
  }
  flush();
  return tokens;
}

inline Transcript Preprocess(std::string_view raw) {
  Transcript t;
  t.raw = std::string(raw);
  for (const auto& token : NormalizeTokens(raw)) {
    if (!t.normalized.empty()) t.normalized.push_back(' ');
    t.normalized += token;
  }
  return t;
}

inline TokenSequence Tokenize(const Transcript& t, View view) {
  TokenSequence seq;
  seq.view = view;
  std::string_view rest = t.normalized;
  while (!rest.empty()) {
    const auto space = rest.find(' ');
    std::string_view token = rest.substr(0, space);
    rest = space == std::string_view::npos ? std::string_view{}
                                           : rest.substr(space + 1);
    if (token.empty()) continue;
    if (view != View::kCasedPunct && IsPunctuationToken(token)) continue;
    seq.tokens.push_back(view == View::kPlain ? Lowercase(token)
                                              : std::string(token));
  }
  return seq;
}

inline const char* ViewName(View view) {
  switch (view) {
    case View::kPlain:
      return "plain";
    case View::kCased:
      return "cased";
    case View::kCasedPunct:
      return "cased_punct";
  }
  return "?";
}

}  // namespace fmtasr::textnorm
