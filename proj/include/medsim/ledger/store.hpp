#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "medsim/core/digest.hpp"

namespace medsim::ledger {

class StoreError : public std::runtime_error {
 public:
  enum class Kind { not_found, corrupted, io };
  StoreError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Local content-addressed store: one file per object, named by its CID
/// (lowercase hex SHA-256 of the bytes).
class ContentStore {
 public:
  explicit ContentStore(std::filesystem::path dir);

  /// Writes atomically (temp file + rename). Storing existing content is a no-op.
  std::string store(std::string_view payload);

  /// Returns the exact stored bytes. Throws StoreError::not_found, or
  /// StoreError::corrupted when the bytes no longer hash to `cid`.
  std::string fetch(std::string_view cid) const;

  bool contains(std::string_view cid) const;
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_of(std::string_view cid) const;

 private:
  std::filesystem::path dir_;
};

std::string cid_of(std::string_view payload);

}  // namespace medsim::ledger
