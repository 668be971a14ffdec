#include "corvid/store/archive.hpp"

#include <sodium.h>
#include <sys/stat.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "corvid/common/error.hpp"
#include "corvid/common/text.hpp"

namespace corvid::store {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "corvid-skill/1";

bool hidden(const fs::path& rel) {
  for (const auto& part : rel) {
    if (part.string().starts_with(".")) return true;
  }
  return false;
}

// Relative, no "." or ".." segments, no empty segments.
bool safe_path(std::string_view p) {
  if (p.empty() || p.front() == '/') return false;
  for (auto seg : split(p, '/')) {
    if (seg.empty() || seg == "." || seg == "..") return false;
  }
  return p.find('\0') == std::string_view::npos && p.find('\\') == std::string_view::npos;
}

}  // namespace

Archive Archive::pack(const std::string& name, const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw Error(Errc::not_found, "not a directory: " + dir);
  Archive a;
  a.name = name;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    const auto rel = it->path().lexically_relative(root);
    if (hidden(rel)) {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file()) continue;
    std::ifstream in(it->path(), std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot read " + it->path().string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto perms = it->status().permissions();
    a.files.push_back({rel.generic_string(), ss.str(), (perms & fs::perms::owner_exec) != fs::perms::none});
  }
  std::sort(a.files.begin(), a.files.end(), [](const auto& x, const auto& y) { return x.path < y.path; });
  return a;
}

std::string Archive::serialize() const {
  auto sorted = files;
  std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.path < y.path; });
  nlohmann::json list = nlohmann::json::array();
  for (const auto& f : sorted) {
    list.push_back({{"path", f.path}, {"data", base64_encode(f.data)}, {"executable", f.executable}});
  }
  // nlohmann objects keep keys sorted, which makes the dump canonical.
  return nlohmann::json{{"format", kFormat}, {"name", name}, {"files", list}}.dump();
}

Archive Archive::parse(const std::string& bytes) {
  Archive a;
  try {
    const auto j = nlohmann::json::parse(bytes);
    if (j.at("format").get<std::string>() != kFormat) throw Error(Errc::parse_error, "unknown archive format");
    a.name = j.at("name").get<std::string>();
    for (const auto& f : j.at("files")) {
      ArchiveFile file{f.at("path").get<std::string>(), base64_decode(f.at("data").get<std::string>()),
                       f.at("executable").get<bool>()};
      if (!safe_path(file.path)) throw Error(Errc::parse_error, "unsafe path in archive: " + file.path);
      a.files.push_back(std::move(file));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("malformed archive: ") + e.what());
  }
  for (std::size_t i = 1; i < a.files.size(); ++i) {
    if (!(a.files[i - 1].path < a.files[i].path)) {
      throw Error(Errc::parse_error, "archive files are not sorted or not unique");
    }
  }
  return a;
}

void Archive::unpack(const std::string& dir) const {
  const fs::path root(dir);
  if (fs::exists(root)) throw Error(Errc::conflict, dir + " already exists");
  fs::create_directories(root);
  for (const auto& f : files) {
    if (!safe_path(f.path)) throw Error(Errc::parse_error, "unsafe path in archive: " + f.path);
    const auto target = root / f.path;
    fs::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    out << f.data;
    if (!out.flush()) throw Error(Errc::io_error, "cannot write " + target.string());
    out.close();
    if (f.executable) {
      fs::permissions(target, fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                      fs::perm_options::add);
    }
  }
}

std::string sha256_hex(const std::string& bytes) {
  if (sodium_init() < 0) throw Error(Errc::io_error, "libsodium failed to initialise");
  unsigned char digest[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(digest, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  char hex[crypto_hash_sha256_BYTES * 2 + 1];
  sodium_bin2hex(hex, sizeof hex, digest, sizeof digest);
  return hex;
}

}  // namespace corvid::store
