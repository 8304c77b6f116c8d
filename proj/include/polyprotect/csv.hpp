#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "polyprotect/errors.hpp"

namespace polyprotect::csv {

/// Shortest decimal representation that round-trips the exact double.
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view field, std::string_view context) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw FormatError("not a number: '" + std::string(field) + "' in " +
                      std::string(context));
  }
  return value;
}

inline double parse_finite_double(std::string_view field,
                                  std::string_view context) {
  const double value = parse_double(field, context);
  if (!std::isfinite(value)) {
    throw FormatError("non-finite value '" + std::string(field) + "' in " +
                      std::string(context));
  }
  return value;
}

inline long long parse_int(std::string_view field, std::string_view context) {
  long long value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw FormatError("not an integer: '" + std::string(field) + "' in " +
                      std::string(context));
  }
  return value;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

/// Labels are embedded verbatim in CSV cells, so the separator set is banned.
inline void validate_label(std::string_view label, std::string_view what) {
  if (label.empty()) {
    throw FormatError(std::string(what) + " label is empty");
  }
  for (char c : label) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') {
      throw FormatError(std::string(what) + " label contains ',', '\"' or a " +
                        "line break: '" + std::string(label) + "'");
    }
  }
}

/// Reads a whole text file as lines. Accepts \n and \r\n endings; a trailing
/// newline does not produce an empty last line.
inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open file: " + path.string());
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (in.bad()) {
    throw IoError("read failure: " + path.string());
  }
  return lines;
}

class Writer {
public:
  explicit Writer(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open file for writing: " + path.string());
  }

  void raw_line(std::string_view line) {
    out_ << line << '\n';
    check();
  }

  template <typename Range>
  void row(const Range& fields) {
    bool first = true;
    for (const auto& f : fields) {
      if (!first) out_ << ',';
      out_ << f;
      first = false;
    }
    out_ << '\n';
    check();
  }

  void close() {
    out_.close();
    if (out_.fail()) throw IoError("write failure: " + path_.string());
  }

private:
  void check() {
    if (!out_) throw IoError("write failure: " + path_.string());
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace polyprotect::csv
