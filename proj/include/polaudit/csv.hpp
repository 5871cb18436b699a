#pragma once

#include <istream>
#include <string>
#include <vector>

#include "polaudit/errors.hpp"

namespace polaudit {

// RFC-4180-ish CSV: quoted fields may contain commas, newlines and doubled
// quotes. Returns one row per record; the final line number is tracked for
// error messages.
class CsvReader {
public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  bool next(std::vector<std::string>& row) {
    row.clear();
    if (!in_.good() || in_.peek() == EOF) return false;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (;;) {
      int ci = in_.get();
      if (ci == EOF) {
        if (quoted) throw ParseError("unterminated quoted field", line_);
        if (any || !field.empty()) row.push_back(std::move(field));
        return !row.empty();
      }
      char c = static_cast<char>(ci);
      if (quoted) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(c);
        }
        continue;
      }
      switch (c) {
        case '"':
          quoted = true;
          any = true;
          break;
        case ',':
          row.push_back(std::move(field));
          field.clear();
          any = true;
          break;
        case '\r':
          break;
        case '\n':
          ++line_;
          row.push_back(std::move(field));
          return true;
        default:
          field.push_back(c);
          any = true;
      }
    }
  }

  std::size_t line() const { return line_; }

private:
  std::istream& in_;
  std::size_t line_ = 1;
};

inline std::string csv_escape(const std::string& field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace polaudit
