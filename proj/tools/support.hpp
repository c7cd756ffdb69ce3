#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace horizons::cli {

/// Bad flag values discovered after CLI11 parsing (range syntax, bin lists).
/// Mapped to exit code 2 like any other usage error.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Current wall time as YYYY-MM-DDTHH:MM:SSZ.
std::string iso_utc_now();

/// Output file staged next to its final path and renamed only on commit().
/// A throw anywhere before that leaves the final path untouched.
class PendingFile {
 public:
  explicit PendingFile(std::filesystem::path final_path);
  ~PendingFile();

  PendingFile(const PendingFile&) = delete;
  PendingFile& operator=(const PendingFile&) = delete;

  std::ofstream& stream() { return stream_; }
  const std::filesystem::path& final_path() const { return final_; }

  void commit();

 private:
  std::filesystem::path final_;
  std::filesystem::path temp_;
  std::ofstream stream_;
  bool committed_{false};
};

/// Unique scratch directory under the system temp dir, removed on scope exit.
class ScratchDir {
 public:
  ScratchDir();
  ~ScratchDir();

  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

}  // namespace horizons::cli
