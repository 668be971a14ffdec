#pragma once

#include <string>
#include <vector>

namespace corvid::store {

struct ArchiveFile {
  std::string path;  // relative, "/"-separated
  std::string data;
  bool executable = false;

  bool operator==(const ArchiveFile&) const = default;
};

// A skill bundle as one canonical JSON document:
//   {"files":[{"data":<base64>,"executable":false,"path":"config.yaml"},...],
//    "format":"corvid-skill/1","name":"myskill"}
// Keys sorted, files sorted by path, no whitespace. Hidden files (runtime
// logs, .git) are left out, so packing the same tree twice gives the same
// bytes.
struct Archive {
  std::string name;
  std::vector<ArchiveFile> files;

  static Archive pack(const std::string& name, const std::string& dir);
  std::string serialize() const;
  // Throws Error(parse_error) for malformed documents or unsafe paths.
  static Archive parse(const std::string& bytes);
  // Writes the files below `dir`, which must not exist yet.
  void unpack(const std::string& dir) const;
};

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);

}  // namespace corvid::store
