#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "polaudit/strings.hpp"

namespace polaudit {
namespace html {

// Appends a code point as UTF-8.
inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
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

// Common named + numeric character references. Unknown references pass
// through literally, which is the tolerant choice for scraped pages.
inline std::string decode_entities(std::string_view s) {
  static const std::map<std::string, std::uint32_t> named = {
      {"amp", '&'},   {"lt", '<'},     {"gt", '>'},    {"quot", '"'},
      {"apos", '\''}, {"nbsp", ' '},   {"copy", 0xA9}, {"reg", 0xAE},
      {"trade", 0x2122}, {"mdash", 0x2014}, {"ndash", 0x2013},
      {"hellip", 0x2026}, {"rsquo", 0x2019}, {"lsquo", 0x2018},
      {"rdquo", 0x201D}, {"ldquo", 0x201C}, {"bull", 0x2022},
      {"middot", 0xB7}, {"sect", 0xA7}, {"para", 0xB6}};
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    std::size_t semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out.push_back(s[i++]);
      continue;
    }
    std::string_view name = s.substr(i + 1, semi - i - 1);
    if (!name.empty() && name[0] == '#') {
      std::uint32_t cp = 0;
      bool ok = name.size() > 1;
      if (name.size() > 2 && (name[1] == 'x' || name[1] == 'X')) {
        for (std::size_t k = 2; k < name.size() && ok; ++k) {
          char c = ascii_lower(name[k]);
          if (is_digit(c)) cp = cp * 16 + (c - '0');
          else if (c >= 'a' && c <= 'f') cp = cp * 16 + (c - 'a' + 10);
          else ok = false;
        }
      } else {
        for (std::size_t k = 1; k < name.size() && ok; ++k) {
          if (is_digit(name[k])) cp = cp * 10 + (name[k] - '0');
          else ok = false;
        }
      }
      if (ok && cp > 0) {
        append_utf8(out, cp);
        i = semi + 1;
        continue;
      }
    } else {
      auto it = named.find(to_lower(name));
      if (it != named.end()) {
        append_utf8(out, it->second);
        i = semi + 1;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

struct Attribute {
  std::string name;   // lowercase
  std::string value;  // entity-decoded
};

struct Event {
  enum class Kind { open, close, text };
  Kind kind = Kind::text;
  std::string name;  // lowercase tag name (open/close)
  std::vector<Attribute> attrs;
  bool self_closing = false;
  std::string text;  // raw text, entities decoded
};

inline const std::set<std::string>& raw_text_tags() {
  static const std::set<std::string> tags = {"script", "style"};
  return tags;
}

// Tolerant tag-soup tokenizer: never throws, treats stray '<' as text,
// skips comments/doctype/CDATA, survives unquoted and boolean attributes.
class Tokenizer {
public:
  explicit Tokenizer(std::string_view html) : s_(html) {}

  std::optional<Event> next() {
    if (pos_ >= s_.size()) return std::nullopt;
    if (!raw_until_.empty()) return next_raw_text();
    if (s_[pos_] == '<') {
      if (auto ev = try_tag()) return ev;
    }
    // Text run up to the next plausible tag start.
    std::size_t start = pos_;
    ++pos_;
    while (pos_ < s_.size()) {
      if (s_[pos_] == '<' && pos_ + 1 < s_.size() &&
          (is_alpha(s_[pos_ + 1]) || s_[pos_ + 1] == '/' || s_[pos_ + 1] == '!'))
        break;
      ++pos_;
    }
    Event ev;
    ev.kind = Event::Kind::text;
    ev.text = decode_entities(s_.substr(start, pos_ - start));
    return ev;
  }

private:
  std::optional<Event> next_raw_text() {
    // Inside <script>/<style>: everything until the matching close tag.
    std::string close = "</" + raw_until_;
    std::size_t end = pos_;
    for (;;) {
      end = s_.find('<', end);
      if (end == std::string_view::npos) {
        end = s_.size();
        break;
      }
      if (end + close.size() <= s_.size() &&
          iequals(s_.substr(end, close.size()), close)) {
        break;
      }
      ++end;
    }
    Event ev;
    ev.kind = Event::Kind::text;
    ev.text = std::string(s_.substr(pos_, end - pos_));
    pos_ = end;
    raw_until_.clear();
    return ev;
  }

  std::optional<Event> try_tag() {
    std::size_t i = pos_ + 1;
    if (i >= s_.size()) return std::nullopt;
    if (s_[i] == '!' || s_[i] == '?') {
      // Comment, doctype, CDATA or processing instruction.
      if (s_.substr(i, 3) == "!--") {
        auto end = s_.find("-->", i + 3);
        pos_ = end == std::string_view::npos ? s_.size() : end + 3;
      } else {
        auto end = s_.find('>', i);
        pos_ = end == std::string_view::npos ? s_.size() : end + 1;
      }
      Event ev;
      ev.kind = Event::Kind::text;
      ev.text.clear();
      return ev;
    }
    bool closing = s_[i] == '/';
    if (closing) ++i;
    if (i >= s_.size() || !is_alpha(s_[i])) return std::nullopt;
    std::size_t name_start = i;
    while (i < s_.size() && (is_alpha(s_[i]) || is_digit(s_[i]) || s_[i] == '-'))
      ++i;
    Event ev;
    ev.kind = closing ? Event::Kind::close : Event::Kind::open;
    ev.name = to_lower(s_.substr(name_start, i - name_start));
    // Attributes.
    while (i < s_.size() && s_[i] != '>') {
      if (s_[i] == '/' && i + 1 < s_.size() && s_[i + 1] == '>') {
        ev.self_closing = true;
        i += 1;
        break;
      }
      if (is_space(s_[i])) {
        ++i;
        continue;
      }
      std::size_t an = i;
      while (i < s_.size() && !is_space(s_[i]) && s_[i] != '=' && s_[i] != '>' &&
             s_[i] != '/')
        ++i;
      if (i == an) {
        ++i;
        continue;
      }
      Attribute attr;
      attr.name = to_lower(s_.substr(an, i - an));
      while (i < s_.size() && is_space(s_[i])) ++i;
      if (i < s_.size() && s_[i] == '=') {
        ++i;
        while (i < s_.size() && is_space(s_[i])) ++i;
        if (i < s_.size() && (s_[i] == '"' || s_[i] == '\'')) {
          char quote = s_[i++];
          std::size_t vb = i;
          while (i < s_.size() && s_[i] != quote) ++i;
          attr.value = decode_entities(s_.substr(vb, i - vb));
          if (i < s_.size()) ++i;
        } else {
          std::size_t vb = i;
          while (i < s_.size() && !is_space(s_[i]) && s_[i] != '>') ++i;
          attr.value = decode_entities(s_.substr(vb, i - vb));
        }
      }
      if (!closing) ev.attrs.push_back(std::move(attr));
    }
    pos_ = (i < s_.size()) ? i + 1 : s_.size();
    if (ev.kind == Event::Kind::open && !ev.self_closing &&
        raw_text_tags().count(ev.name))
      raw_until_ = ev.name;
    return ev;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::string raw_until_;
};

// Charset declared in the first chunk of the document, if any.
inline std::optional<std::string> sniff_charset(std::string_view head) {
  std::string lower = to_lower(head.substr(0, std::min<std::size_t>(head.size(), 4096)));
  auto find_attr = [&](std::string_view key) -> std::optional<std::string> {
    auto pos = lower.find(key);
    if (pos == std::string::npos) return std::nullopt;
    pos += key.size();
    while (pos < lower.size() && (is_space(lower[pos]) || lower[pos] == '=' ||
                                  lower[pos] == '"' || lower[pos] == '\''))
      ++pos;
    std::size_t end = pos;
    while (end < lower.size() && (is_alpha(lower[end]) || is_digit(lower[end]) ||
                                  lower[end] == '-' || lower[end] == '_'))
      ++end;
    if (end == pos) return std::nullopt;
    return lower.substr(pos, end - pos);
  };
  return find_attr("charset");
}

// Declared charset wins; everything else falls back to UTF-8 with U+FFFD
// replacement for invalid sequences. Latin-1 and Windows-1252 get real
// transcoding since they are the common legacy cases.
inline std::string decode_to_utf8(std::string_view bytes,
                                  std::optional<std::string> declared = {}) {
  std::string charset = declared ? to_lower(*declared) : "";
  if (charset.empty()) {
    if (auto sniffed = sniff_charset(bytes)) charset = *sniffed;
  }
  bool latin1 = charset == "iso-8859-1" || charset == "latin-1" ||
                charset == "latin1" || charset == "windows-1252" ||
                charset == "cp1252";
  if (latin1) {
    static const std::uint32_t cp1252[32] = {
        0x20AC, 0xFFFD, 0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021,
        0x02C6, 0x2030, 0x0160, 0x2039, 0x0152, 0xFFFD, 0x017D, 0xFFFD,
        0xFFFD, 0x2018, 0x2019, 0x201C, 0x201D, 0x2022, 0x2013, 0x2014,
        0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0xFFFD, 0x017E, 0x0178};
    std::string out;
    out.reserve(bytes.size());
    for (unsigned char c : bytes) {
      if (c < 0x80) out.push_back(static_cast<char>(c));
      else if (c < 0xA0) append_utf8(out, cp1252[c - 0x80]);
      else append_utf8(out, c);
    }
    return out;
  }
  // Validate as UTF-8, replacing bad sequences.
  std::string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    unsigned char c = bytes[i];
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) { len = 1; cp = c; }
    else if ((c & 0xE0) == 0xC0) { len = 2; cp = c & 0x1F; }
    else if ((c & 0xF0) == 0xE0) { len = 3; cp = c & 0x0F; }
    else if ((c & 0xF8) == 0xF0) { len = 4; cp = c & 0x07; }
    if (len == 0 || i + len > bytes.size()) {
      append_utf8(out, 0xFFFD);
      ++i;
      continue;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      unsigned char cc = bytes[i + k];
      if ((cc & 0xC0) != 0x80) { ok = false; break; }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok || (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      append_utf8(out, 0xFFFD);
      ++i;
      continue;
    }
    out.append(bytes.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace html
}  // namespace polaudit
