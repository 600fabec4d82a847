#include "tws/csv.hpp"

#include <charconv>
#include <cmath>

namespace tws::csv {

bool Reader::next(std::vector<std::string>& fields) {
  fields.clear();
  malformed_ = false;
  std::string current;
  bool in_quotes = false;
  bool any = false;
  record_line_ = line_;

  for (;;) {
    const int ci = in_.get();
    if (ci == std::char_traits<char>::eof()) {
      if (!any) return false;
      if (in_quotes) malformed_ = true;
      fields.push_back(std::move(current));
      return true;
    }
    const char c = static_cast<char>(ci);
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in_.peek() == '"') {
          in_.get();
          current.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line_;
        current.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (current.empty()) {
          in_quotes = true;
        } else {
          // Stray quote inside an unquoted field.
          malformed_ = true;
          current.push_back(c);
        }
        break;
      case ',':
        fields.push_back(std::move(current));
        current.clear();
        break;
      case '\r':
        if (in_.peek() == '\n') in_.get();
        [[fallthrough]];
      case '\n':
        ++line_;
        fields.push_back(std::move(current));
        return true;
      default:
        current.push_back(c);
    }
  }
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

Writer& Writer::field(std::string_view value) {
  if (!first_) out_.put(',');
  first_ = false;
  out_ << escape(value);
  return *this;
}

Writer& Writer::field(double value) { return field(std::string_view(format_double(value))); }

Writer& Writer::field(long long value) { return field(std::string_view(std::to_string(value))); }

Writer& Writer::field(unsigned long long value) {
  return field(std::string_view(std::to_string(value)));
}

void Writer::end_row() {
  out_.put('\n');
  first_ = true;
}

void Writer::row(const std::vector<std::string>& fields) {
  for (const auto& f : fields) field(std::string_view(f));
  end_row();
}

}  // namespace tws::csv
