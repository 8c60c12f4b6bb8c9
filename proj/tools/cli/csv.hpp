#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace msbp::cli {

// Shortest round-trip decimal form; "inf", "-inf", "nan" for non-finite values.
inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Comma-separated rows with a header, LF line ends. Cells containing commas
// or quotes are quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      append(cells[i]);
    }
    out_ += '\n';
  }

  const std::string& str() const noexcept { return out_; }

 private:
  void append(std::string_view cell) {
    if (cell.find_first_of(",\"\n") == std::string_view::npos) {
      out_ += cell;
      return;
    }
    out_ += '"';
    for (char ch : cell) {
      if (ch == '"') out_ += '"';
      out_ += ch;
    }
    out_ += '"';
  }

  std::string out_;
};

}  // namespace msbp::cli
