#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sirnet/kv_io.hpp"
#include "sirnet/tensor.hpp"

namespace sirnet {

struct ArchiveEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

/// Manifest plus blob: `<stem>.manifest` holds `meta` and one
/// `tensor.<name>.shape` / `tensor.<name>.offset` pair per entry, and
/// `<stem>.bin` holds every entry's values back to back (little-endian f64).
struct TensorArchive {
  KeyValueFile meta;
  std::vector<ArchiveEntry> entries;

  void add(std::string name, Shape shape, std::vector<double> values);
  /// Throws ConfigError if missing.
  const ArchiveEntry& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

/// `path` is the manifest path; the blob sits next to it.
void write_archive(const TensorArchive& archive, const std::filesystem::path& path);
TensorArchive read_archive(const std::filesystem::path& path);

}  // namespace sirnet
