#include "sirnet/checkpoint.hpp"

#include <string_view>

#include "sirnet/errors.hpp"

namespace sirnet {
namespace {

constexpr std::string_view kFormat = "sir-metric/1";

std::string shape_text(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out.empty() ? "scalar" : out;
}

Shape parse_shape(std::string_view text, std::string_view context) {
  Shape shape;
  if (text == "scalar") return shape;
  while (!text.empty()) {
    const auto cut = text.find('x');
    shape.push_back(static_cast<std::size_t>(parse_uint(text.substr(0, cut), context)));
    if (cut == std::string_view::npos) break;
    text.remove_prefix(cut + 1);
  }
  return shape;
}

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto blob = manifest;
  blob.replace_extension(".bin");
  return blob;
}

}  // namespace

void TensorArchive::add(std::string name, Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("archive entry " + name + ": shape " + shape_to_string(shape) +
                         " vs " + std::to_string(values.size()) + " values");
  }
  if (contains(name)) throw ContractError("archive entry " + name + " added twice");
  entries.push_back({std::move(name), std::move(shape), std::move(values)});
}

bool TensorArchive::contains(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return true;
  }
  return false;
}

const ArchiveEntry& TensorArchive::get(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw ConfigError("archive has no tensor '" + name + "'");
}

void write_archive(const TensorArchive& archive, const std::filesystem::path& path) {
  KeyValueFile manifest;
  manifest.set("format", std::string(kFormat));
  manifest.set("blob", blob_path(path).filename().string());
  for (const auto& [key, value] : archive.meta.entries()) manifest.set("meta." + key, value);
  std::vector<double> blob;
  for (const auto& e : archive.entries) {
    manifest.set("tensor." + e.name + ".shape", shape_text(e.shape));
    manifest.set_uint("tensor." + e.name + ".offset", blob.size() * sizeof(double));
    blob.insert(blob.end(), e.values.begin(), e.values.end());
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_f64_blob(blob_path(path), blob);
  manifest.write(path);
}

TensorArchive read_archive(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  const auto manifest = KeyValueFile::read(path);
  if (!manifest.contains("format") || manifest.get("format") != kFormat) {
    throw ConfigError(path.string() + ": not a " + std::string(kFormat) + " manifest");
  }
  const auto blob = read_f64_blob(path.parent_path() / manifest.get("blob"));

  TensorArchive archive;
  const std::string_view meta_prefix = "meta.";
  const std::string_view tensor_prefix = "tensor.";
  const std::string_view shape_suffix = ".shape";
  for (const auto& [key, value] : manifest.entries()) {
    const std::string_view k = key;
    if (k.starts_with(meta_prefix)) {
      archive.meta.set(std::string(k.substr(meta_prefix.size())), value);
    } else if (k.starts_with(tensor_prefix) && k.ends_with(shape_suffix)) {
      const auto name = std::string(
          k.substr(tensor_prefix.size(), k.size() - tensor_prefix.size() - shape_suffix.size()));
      const auto shape = parse_shape(value, key);
      const auto offset_bytes = manifest.get_uint("tensor." + name + ".offset");
      if (offset_bytes % sizeof(double) != 0) throw ConfigError(key + ": misaligned offset");
      const auto begin = offset_bytes / sizeof(double);
      const auto n = shape_numel(shape);
      if (begin > blob.size() || blob.size() - begin < n) {
        throw ConfigError(path.string() + ": tensor " + name + " runs past the end of the blob");
      }
      archive.add(name, shape,
                  std::vector<double>(blob.begin() + static_cast<std::ptrdiff_t>(begin),
                                      blob.begin() + static_cast<std::ptrdiff_t>(begin + n)));
    }
  }
  return archive;
}

}  // namespace sirnet
