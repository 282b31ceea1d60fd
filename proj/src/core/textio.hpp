#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Deterministic text formatting and CSV plumbing. All floating-point output
// goes through fmt_double (shortest round-trip form) so repeated runs produce
// byte-identical files.
namespace mixmatch::textio {

std::string fmt_double(double v);
std::string fmt_u64(uint64_t v);
std::string fmt_int(int64_t v);

// JSON array of doubles, e.g. [0.5,0.25,0.25].
std::string json_array(const std::vector<double>& values);

// Quotes a CSV field only when it needs it (comma, quote, newline).
std::string csv_field(std::string_view raw);

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void row(const std::vector<std::string>& fields);
  ~CsvWriter();

 private:
  std::string buffer_;
  std::filesystem::path path_;
};

// Minimal CSV reader: quoted fields, embedded commas/quotes/newlines.
// Returns rows of fields; the caller interprets the header.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace mixmatch::textio
