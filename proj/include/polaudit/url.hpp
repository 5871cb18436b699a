#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "polaudit/errors.hpp"
#include "polaudit/strings.hpp"

namespace polaudit {

struct Url {
  std::string scheme;  // lowercase
  std::string host;    // lowercase
  int port = 0;        // 0 = default for scheme
  std::string path;    // always starts with '/' when host present
  std::string query;    // without '?'
  std::string fragment; // without '#'

  bool is_http() const { return scheme == "http" || scheme == "https"; }

  int effective_port() const {
    if (port) return port;
    return scheme == "https" ? 443 : 80;
  }

  std::string authority() const {
    if (port) return host + ":" + std::to_string(port);
    return host;
  }

  std::string str() const {
    std::string s = scheme + "://" + authority() + path;
    if (!query.empty()) s += "?" + query;
    if (!fragment.empty()) s += "#" + fragment;
    return s;
  }
};

inline std::optional<Url> try_parse_url(std::string_view input) {
  std::string_view s = trim_view(input);
  auto scheme_end = s.find("://");
  if (scheme_end == std::string_view::npos || scheme_end == 0) return std::nullopt;
  Url u;
  u.scheme = to_lower(s.substr(0, scheme_end));
  for (char c : u.scheme)
    if (!is_alpha(c) && !is_digit(c) && c != '+' && c != '-' && c != '.')
      return std::nullopt;
  std::string_view rest = s.substr(scheme_end + 3);
  auto frag = rest.find('#');
  if (frag != std::string_view::npos) {
    u.fragment = std::string(rest.substr(frag + 1));
    rest = rest.substr(0, frag);
  }
  auto qmark = rest.find('?');
  if (qmark != std::string_view::npos) {
    u.query = std::string(rest.substr(qmark + 1));
    rest = rest.substr(0, qmark);
  }
  auto slash = rest.find('/');
  std::string_view authority =
      slash == std::string_view::npos ? rest : rest.substr(0, slash);
  u.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    std::string_view port_sv = authority.substr(colon + 1);
    if (port_sv.empty()) return std::nullopt;
    int port = 0;
    for (char c : port_sv) {
      if (!is_digit(c)) return std::nullopt;
      port = port * 10 + (c - '0');
      if (port > 65535) return std::nullopt;
    }
    u.port = port;
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) return std::nullopt;
  u.host = to_lower(authority);
  return u;
}

inline Url parse_url(std::string_view input) {
  auto u = try_parse_url(input);
  if (!u) throw InputError("malformed URL '" + std::string(input) + "'");
  return *u;
}

namespace detail {

// RFC 3986 dot-segment removal.
inline std::string remove_dot_segments(std::string_view path) {
  std::string out;
  std::string_view in = path;
  while (!in.empty()) {
    if (in.rfind("../", 0) == 0) {
      in.remove_prefix(3);
    } else if (in.rfind("./", 0) == 0) {
      in.remove_prefix(2);
    } else if (in.rfind("/./", 0) == 0) {
      in.remove_prefix(2);
    } else if (in == "/.") {
      in = "/";
    } else if (in.rfind("/../", 0) == 0 || in == "/..") {
      in = (in == "/..") ? std::string_view("/") : in.substr(3);
      auto pos = out.rfind('/');
      out.resize(pos == std::string::npos ? 0 : pos);
    } else if (in == "." || in == "..") {
      in = {};
    } else {
      std::size_t next = in.find('/', 1);
      std::string_view seg =
          next == std::string_view::npos ? in : in.substr(0, next);
      out += seg;
      in = next == std::string_view::npos ? std::string_view{} : in.substr(next);
    }
  }
  return out.empty() ? "/" : out;
}

}  // namespace detail

// Resolves an href against an absolute base page URL. Returns nullopt for
// hrefs that cannot become an http(s) URL (mailto:, javascript:, empty, ...).
inline std::optional<Url> resolve_href(const Url& base, std::string_view href) {
  std::string h = trim(href);
  if (h.empty()) return std::nullopt;
  if (h[0] == '#') return std::nullopt;  // same-document
  if (auto abs = try_parse_url(h)) {
    if (!abs->is_http()) return std::nullopt;
    abs->path = detail::remove_dot_segments(abs->path);
    return abs;
  }
  auto colon = h.find(':');
  auto slash = h.find('/');
  if (colon != std::string::npos && (slash == std::string::npos || colon < slash))
    return std::nullopt;  // non-http scheme like mailto: or javascript:
  Url u = base;
  u.fragment.clear();
  if (h.rfind("//", 0) == 0) {  // protocol-relative
    return try_parse_url(u.scheme + ":" + h);
  }
  auto frag = h.find('#');
  if (frag != std::string::npos) h = h.substr(0, frag);
  std::string query;
  auto qmark = h.find('?');
  if (qmark != std::string::npos) {
    query = h.substr(qmark + 1);
    h = h.substr(0, qmark);
  }
  if (h.empty()) {
    u.query = query;
    return u;
  }
  if (h[0] == '/') {
    u.path = detail::remove_dot_segments(h);
  } else {
    auto pos = u.path.rfind('/');
    std::string merged = u.path.substr(0, pos + 1) + h;
    u.path = detail::remove_dot_segments(merged);
  }
  u.query = query;
  return u;
}

}  // namespace polaudit
