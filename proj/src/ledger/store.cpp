#include "medsim/ledger/store.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

namespace medsim::ledger {

namespace fs = std::filesystem;

std::string cid_of(std::string_view payload) { return sha256(payload).hex(); }

ContentStore::ContentStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw StoreError(StoreError::Kind::io, "cannot create store " + dir_.string() + ": " + ec.message());
}

fs::path ContentStore::path_of(std::string_view cid) const {
  if (!parse_digest(cid)) throw StoreError(StoreError::Kind::not_found, "malformed cid: " + std::string(cid));
  return dir_ / std::string(cid);
}

bool ContentStore::contains(std::string_view cid) const {
  return parse_digest(cid) && fs::exists(dir_ / std::string(cid));
}

std::string ContentStore::store(std::string_view payload) {
  const auto cid = cid_of(payload);
  const auto target = dir_ / cid;
  if (fs::exists(target)) return cid;

  const auto tmp = dir_ / ("." + cid + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) throw StoreError(StoreError::Kind::io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw StoreError(StoreError::Kind::io, "rename failed: " + target.string() + ": " + ec.message());
  return cid;
}

std::string ContentStore::fetch(std::string_view cid) const {
  const auto path = path_of(cid);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError(StoreError::Kind::not_found, "missing content " + std::string(cid));
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (cid_of(bytes) != cid)
    throw StoreError(StoreError::Kind::corrupted, "content " + std::string(cid) + " fails its hash check");
  return bytes;
}

}  // namespace medsim::ledger
