#include "salrun/assets.hpp"

#include <curl/curl.h>
#include <fcntl.h>
#include <openssl/evp.h>
#include <sys/file.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>

#include "salrun/error.hpp"

namespace salrun {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

fs::path asset_dir(const fs::path& cache_dir, const std::string& model_name) {
  return cache_dir / model_name;
}

namespace {

bool asset_valid(const fs::path& file, const std::string& sha256) {
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) return false;
  try {
    return sha256_file(file) == sha256;
  } catch (const Error&) {
    return false;
  }
}

// Serializes cache mutations for one model across threads and processes.
class CacheLock {
 public:
  CacheLock(const fs::path& cache_dir, const std::string& model) {
    std::error_code ec;
    fs::create_directories(cache_dir, ec);
    path_ = cache_dir / ("." + model + ".lock");
    fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(Errc::IoError, "cannot open lock " + path_.string());
    ::flock(fd_, LOCK_EX);
  }
  ~CacheLock() {
    if (remove_) {
      std::error_code ec;
      fs::remove(path_, ec);
    }
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  void remove_on_release() { remove_ = true; }

 private:
  fs::path path_;
  int fd_ = -1;
  bool remove_ = false;
};

void curl_global() {
  static std::once_flag once;
  std::call_once(once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

std::size_t write_to_file(char* data, std::size_t size, std::size_t n, void* user) {
  return std::fwrite(data, size, n, static_cast<std::FILE*>(user)) * size;
}

// Returns an empty string on success, otherwise the failure description.
std::string fetch(const std::string& url, const fs::path& dest) {
  curl_global();
  std::unique_ptr<std::FILE, decltype(&std::fclose)> file(std::fopen(dest.c_str(), "wb"), std::fclose);
  if (!file) return "cannot write " + dest.string();
  std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
  char errbuf[CURL_ERROR_SIZE] = {0};
  curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, write_to_file);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, file.get());
  curl_easy_setopt(curl.get(), CURLOPT_ERRORBUFFER, errbuf);
  const CURLcode rc = curl_easy_perform(curl.get());
  if (rc != CURLE_OK) return errbuf[0] ? errbuf : curl_easy_strerror(rc);
  return {};
}

}  // namespace

AssetStatus verify_assets(const ModelManifest& manifest, const fs::path& cache_dir) {
  AssetStatus status;
  const fs::path dir = asset_dir(cache_dir, manifest.name);
  for (const auto& a : manifest.model_files) {
    if (!asset_valid(dir / a.relative_path, a.sha256)) status.missing.push_back(a.relative_path);
  }
  return status;
}

std::string_view to_string(AssetOutcome outcome) {
  switch (outcome) {
    case AssetOutcome::Downloaded: return "downloaded";
    case AssetOutcome::Skipped: return "skipped";
    case AssetOutcome::ChecksumMismatch: return "checksum mismatch";
    case AssetOutcome::NetworkError: return "network error";
    case AssetOutcome::IoError: return "io error";
    case AssetOutcome::Removed: return "removed";
  }
  return "?";
}

bool AssetReport::ok() const {
  for (const auto& e : entries) {
    if (e.outcome == AssetOutcome::ChecksumMismatch || e.outcome == AssetOutcome::NetworkError ||
        e.outcome == AssetOutcome::IoError)
      return false;
  }
  return true;
}

std::size_t AssetReport::count(AssetOutcome outcome) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.outcome == outcome;
  return n;
}

AssetReport download_assets(const ModelManifest& manifest, const fs::path& cache_dir) {
  AssetReport report;
  if (manifest.model_files.empty()) return report;
  CacheLock lock(cache_dir, manifest.name);
  const fs::path dir = asset_dir(cache_dir, manifest.name);
  for (const auto& a : manifest.model_files) {
    const fs::path dest = dir / a.relative_path;
    auto record = [&](AssetOutcome o, std::string detail = {}) {
      report.entries.push_back({manifest.name, a.relative_path, o, std::move(detail)});
    };
    if (asset_valid(dest, a.sha256)) {
      record(AssetOutcome::Skipped);
      continue;
    }
    std::error_code ec;
    fs::create_directories(dest.parent_path(), ec);
    if (ec) {
      record(AssetOutcome::IoError, ec.message());
      continue;
    }
    const fs::path part = dest.string() + ".part";
    if (auto err = fetch(a.url, part); !err.empty()) {
      fs::remove(part, ec);
      record(AssetOutcome::NetworkError, a.url + ": " + err);
      continue;
    }
    const std::string actual = sha256_file(part);
    if (actual != a.sha256) {
      fs::remove(part, ec);
      fs::remove(dest, ec);
      record(AssetOutcome::ChecksumMismatch, "expected " + a.sha256 + ", got " + actual);
      continue;
    }
    fs::rename(part, dest, ec);
    if (ec) {
      record(AssetOutcome::IoError, ec.message());
      continue;
    }
    record(AssetOutcome::Downloaded);
  }
  return report;
}

AssetReport clean_assets(const ModelManifest& manifest, const fs::path& cache_dir) {
  AssetReport report;
  std::error_code ec;
  if (!fs::exists(cache_dir, ec)) return report;
  CacheLock lock(cache_dir, manifest.name);
  lock.remove_on_release();
  const fs::path dir = asset_dir(cache_dir, manifest.name);
  if (fs::exists(dir, ec)) {
    for (const auto& entry : fs::recursive_directory_iterator(dir, ec)) {
      if (entry.is_regular_file(ec))
        report.entries.push_back({manifest.name, fs::relative(entry.path(), dir, ec).string(),
                                  AssetOutcome::Removed, {}});
    }
    fs::remove_all(dir, ec);
    if (ec) report.entries.push_back({manifest.name, dir.string(), AssetOutcome::IoError, ec.message()});
  }
  return report;
}

}  // namespace salrun
