#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace tws::csv {

/// RFC-4180 reader: comma separated, double-quote quoting with "" escapes,
/// quoted fields may span lines, CRLF or LF terminators.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Reads the next record into `fields`. Returns false at end of input.
  /// A record with an unterminated quote is returned with `malformed()` set.
  bool next(std::vector<std::string>& fields);

  bool malformed() const noexcept { return malformed_; }
  /// 1-based line number where the last record started.
  std::size_t line() const noexcept { return record_line_; }

 private:
  std::istream& in_;
  bool malformed_ = false;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

std::string escape(std::string_view field);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  Writer& field(std::string_view value);
  Writer& field(double value);
  Writer& field(long long value);
  Writer& field(unsigned long long value);
  Writer& field(int value) { return field(static_cast<long long>(value)); }
  Writer& field(unsigned long value) { return field(static_cast<unsigned long long>(value)); }
  Writer& field(long value) { return field(static_cast<long long>(value)); }
  Writer& field(unsigned value) { return field(static_cast<unsigned long long>(value)); }
  Writer& field(const char* value) { return field(std::string_view(value)); }
  Writer& field(const std::string& value) { return field(std::string_view(value)); }
  Writer& field(bool value) { return field(std::string_view(value ? "true" : "false")); }
  void end_row();

  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace tws::csv
