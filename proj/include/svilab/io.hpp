#pragma once

// Plain-text outputs: comma-separated tables with round-trip number
// formatting, FNV-1a content hashes, and an output directory that remembers
// what it wrote so the run manifest can list every file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace svilab {

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);

/// Shortest text that parses back to the same double; "inf", "-inf", "nan".
std::string format_number(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  /// Throws ParamError when the width differs from the header.
  void add_row(std::vector<std::string> cells);
  void add_row(const std::vector<double>& cells);
  std::size_t rows() const noexcept { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct WrittenFile {
  std::string name;
  std::uint64_t bytes = 0;
  std::uint64_t fnv1a = 0;
};

class OutputDir {
 public:
  /// Creates the directory (and parents).
  explicit OutputDir(std::filesystem::path dir);
  const std::filesystem::path& path() const noexcept { return dir_; }
  void write(const std::string& name, std::string_view content);
  const std::vector<WrittenFile>& files() const noexcept { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<WrittenFile> files_;
};

/// SVILAB_OUTPUT_ROOT when set, else `fallback`.
std::filesystem::path output_root(const std::filesystem::path& fallback = "svilab_out");

/// UTC wall clock, ISO 8601 to the second.
std::string utc_now();

const char* version() noexcept;

}  // namespace svilab
