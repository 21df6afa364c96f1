#include <system_error>

#include "vtank/digest.hpp"
#include "vtank/error.hpp"
#include "vtank/io.hpp"
#include "vtank/store.hpp"

namespace vtank {

BlobStore::BlobStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path BlobStore::path_of(const std::string& digest) const {
  if (digest.size() != 64 || digest.find_first_not_of("0123456789abcdef") != std::string::npos) {
    fail(Errc::Validation, "not a sha256 digest: '" + digest + "'");
  }
  return root_ / "blobs" / digest.substr(0, 2) / digest;
}

std::string BlobStore::put(std::string_view data) {
  std::string digest = sha256_hex(data);
  if (!exists(digest)) write_file(path_of(digest), data);
  return digest;
}

bool BlobStore::exists(const std::string& digest) const {
  std::error_code ec;
  return std::filesystem::is_regular_file(path_of(digest), ec);
}

std::string BlobStore::get(const std::string& digest) const {
  if (!exists(digest)) fail(Errc::NotFound, "blob " + digest + " not found");
  std::string data = read_file(path_of(digest));
  if (sha256_hex(data) != digest) fail(Errc::Integrity, "blob " + digest + " is corrupted");
  return data;
}

}  // namespace vtank
