#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <filesystem>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "fedsac/core/error.hpp"

namespace fedsac::csv {

/// Shortest decimal form that round-trips to the same double.
inline std::string format_number(double value) {
  if (value == 0.0) {
    return "0";  // folds -0 so files stay byte-stable
  }
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) {
    throw ParseError("cannot format number");
  }
  return std::string(buf, end);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view field, std::string_view context) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw ParseError(std::string(context) + ": not a finite number: '" +
                     std::string(field) + "'");
  }
  return value;
}

inline long long parse_int(std::string_view field, std::string_view context) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(std::string(context) + ": not an integer: '" +
                     std::string(field) + "'");
  }
  return value;
}

/// A parsed CSV file: header columns plus data rows (blank lines dropped).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;
};

inline Table read_table(const std::filesystem::path& path,
                        const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open " + path.string());
  }
  Table table;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    auto fields = split(line);
    if (!have_header) {
      for (auto f : fields) {
        table.header.emplace_back(f);
      }
      if (table.header != expected_header) {
        std::string want;
        for (const auto& h : expected_header) {
          want += (want.empty() ? "" : ",") + h;
        }
        throw ParseError(path.string() + ": expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != expected_header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(expected_header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    std::vector<std::string> row;
    row.reserve(fields.size());
    for (auto f : fields) {
      row.emplace_back(f);
    }
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) {
    throw ParseError(path.string() + ": empty file");
  }
  return table;
}

/// Appends comma-joined rows to a file; numbers use format_number.
class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) {
      throw ParseError("cannot write " + path.string());
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
      out_ << (i ? "," : "") << header[i];
    }
    out_ << '\n';
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << to_field(fields), first = false), ...);
    out_ << '\n';
  }

  void flush() { out_.flush(); }

 private:
  static std::string to_field(double v) { return format_number(v); }
  static std::string to_field(int v) { return std::to_string(v); }
  static std::string to_field(long v) { return std::to_string(v); }
  static std::string to_field(long long v) { return std::to_string(v); }
  static std::string to_field(unsigned v) { return std::to_string(v); }
  static std::string to_field(unsigned long v) { return std::to_string(v); }
  static std::string to_field(unsigned long long v) { return std::to_string(v); }
  static std::string to_field(const std::string& v) { return v; }
  static std::string to_field(const char* v) { return v; }

  std::ofstream out_;
};

}  // namespace fedsac::csv
