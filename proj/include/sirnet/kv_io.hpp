#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sirnet {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view context);
std::uint64_t parse_uint(std::string_view text, std::string_view context);
bool parse_bool(std::string_view text, std::string_view context);

std::string join_indices(std::span<const std::size_t> values);
std::vector<std::size_t> parse_indices(std::string_view text, std::string_view context);

/// Ordered `key=value` text file. Blank lines and lines starting with '#'
/// are ignored; duplicate keys are rejected. Errors are ConfigError.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view text, std::string_view source = "<memory>");
  static KeyValueFile read(const std::filesystem::path& path);

  std::string serialize() const;
  void write(const std::filesystem::path& path) const;

  void set(std::string key, std::string value);
  void set_double(std::string key, double value) { set(std::move(key), format_double(value)); }
  void set_uint(std::string key, std::uint64_t value) { set(std::move(key), std::to_string(value)); }
  void set_bool(std::string key, bool value) { set(std::move(key), value ? "true" : "false"); }

  bool contains(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::uint64_t get_uint(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<std::size_t> get_indices(std::string_view key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Flat little-endian f64 array files.
void write_f64_blob(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64_blob(const std::filesystem::path& path);

}  // namespace sirnet
