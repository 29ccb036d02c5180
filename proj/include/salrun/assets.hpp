#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "salrun/params.hpp"

namespace salrun {

/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

struct AssetStatus {
  std::vector<std::string> missing;  // relative paths absent or failing their hash
  bool complete() const { return missing.empty(); }
};

/// `<cache_dir>/<model_name>`.
std::filesystem::path asset_dir(const std::filesystem::path& cache_dir, const std::string& model_name);

/// Pure filesystem check; never throws for missing or corrupt files.
AssetStatus verify_assets(const ModelManifest& manifest, const std::filesystem::path& cache_dir);

enum class AssetOutcome { Downloaded, Skipped, ChecksumMismatch, NetworkError, IoError, Removed };

std::string_view to_string(AssetOutcome outcome);

struct AssetReport {
  struct Entry {
    std::string model;
    std::string relative_path;
    AssetOutcome outcome;
    std::string detail;
  };
  std::vector<Entry> entries;

  bool ok() const;
  std::size_t count(AssetOutcome outcome) const;
};

/// Fetches every asset not already present with a matching hash. A hash
/// mismatch deletes the fetched file. Failures are recorded per entry.
AssetReport download_assets(const ModelManifest& manifest, const std::filesystem::path& cache_dir);

/// Removes the model's cache subtree.
AssetReport clean_assets(const ModelManifest& manifest, const std::filesystem::path& cache_dir);

}  // namespace salrun
