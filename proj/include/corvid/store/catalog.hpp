#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "corvid/dsl/ast.hpp"
#include "corvid/store/archive.hpp"
#include "corvid/store/warnings.hpp"

namespace corvid::store {

struct StoreEntry {
  std::string name;
  std::string description;
  std::string source_url;  // as given to index_skill
  dsl::SkillManifest manifest;
  std::vector<Warning> warnings;
  std::string sha256;  // of the serialized archive

  nlohmann::json to_json() const;
  static StoreEntry from_json(const nlohmann::json& j);
};

// Skill names accepted in URLs and catalog file names.
bool valid_skill_name(std::string_view name);

struct IndexedSkill {
  StoreEntry entry;
  std::string archive;  // serialized
};

// Loads the bundle at `source` (a directory, or a git URL that is cloned
// first) and builds its entry. The description is the first line of the
// bundle's README.md, when there is one. Parse failures rethrow the dsl's
// positioned errors.
IndexedSkill index_skill(const std::string& source);

// One catalog state; never modified after construction.
struct CatalogSnapshot {
  std::map<std::string, IndexedSkill> skills;
  // Files that were skipped, with the reason.
  std::vector<std::string> rejected;
};

// A directory holding <name>.json (the entry) and <name>.skill (the archive)
// per skill. Readers get a whole snapshot; reload() swaps it atomically.
class Catalog {
 public:
  explicit Catalog(std::string dir);

  // Writes both files (via rename) and reloads.
  StoreEntry add(const IndexedSkill& skill);
  // Scans the directory. Entries whose warnings or hash do not match their
  // manifest and archive are rejected.
  void reload();
  std::shared_ptr<const CatalogSnapshot> snapshot() const;
  // Changes whenever a catalog file is added, removed or rewritten.
  std::string fingerprint() const;
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  mutable std::mutex mutex_;
  std::shared_ptr<const CatalogSnapshot> current_;
};

}  // namespace corvid::store
