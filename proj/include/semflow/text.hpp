#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "semflow/error.hpp"

namespace semflow {

using StopwordSet = std::set<std::string, std::less<>>;

namespace detail {

inline bool is_token_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

}  // namespace detail

/// Tokenizes one document.
///
/// The text is lowercased; spans between `<code>` and `</code>` are cut out
/// (an unterminated `<code>` runs to the end); whitespace-delimited pieces
/// starting with `http://`, `https://` or `www.` are dropped; the rest is
/// split on every non-[a-z0-9] byte. Stopwords are removed last. Token order
/// is preserved.
inline std::vector<std::string> preprocess(std::string_view text,
                                           const StopwordSet& stopwords) {
  std::string lowered(text);
  for (char& c : lowered) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }

  std::string stripped;
  stripped.reserve(lowered.size());
  constexpr std::string_view kOpen = "<code>";
  constexpr std::string_view kClose = "</code>";
  std::size_t pos = 0;
  while (pos < lowered.size()) {
    const std::size_t open = lowered.find(kOpen, pos);
    if (open == std::string::npos) {
      stripped.append(lowered, pos, std::string::npos);
      break;
    }
    stripped.append(lowered, pos, open - pos);
    stripped.push_back(' ');
    const std::size_t close = lowered.find(kClose, open + kOpen.size());
    if (close == std::string::npos) break;
    pos = close + kClose.size();
  }

  std::vector<std::string> tokens;
  std::size_t i = 0;
  const std::size_t n = stripped.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(stripped[i]))) ++i;
    std::size_t end = i;
    while (end < n && !std::isspace(static_cast<unsigned char>(stripped[end]))) ++end;
    const std::string_view piece(stripped.data() + i, end - i);
    i = end;
    if (piece.empty() || detail::starts_with(piece, "http://") ||
        detail::starts_with(piece, "https://") ||
        detail::starts_with(piece, "www.")) {
      continue;
    }
    std::size_t j = 0;
    while (j < piece.size()) {
      while (j < piece.size() &&
             !detail::is_token_char(static_cast<unsigned char>(piece[j]))) {
        ++j;
      }
      std::size_t k = j;
      while (k < piece.size() &&
             detail::is_token_char(static_cast<unsigned char>(piece[k]))) {
        ++k;
      }
      if (k > j) {
        std::string token(piece.substr(j, k - j));
        if (!stopwords.contains(token)) tokens.push_back(std::move(token));
      }
      j = k;
    }
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Small I/O helpers shared by the file formats.

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    if (p == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, p - start));
    start = p + 1;
  }
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

// Shortest-ish decimal with the requested significant digits.
inline std::string format_double(double v, int significant = 12) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant, v);
  return buf;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  return out;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

/// One term per line; blank lines and `#` comments ignored; lowercased.
inline StopwordSet load_stopwords(const std::string& path) {
  StopwordSet words;
  for (std::string& line : read_lines(path)) {
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    std::size_t e = line.size();
    while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
    if (e == b || line[b] == '#') continue;
    std::string w = line.substr(b, e - b);
    for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    words.insert(std::move(w));
  }
  return words;
}

}  // namespace semflow
