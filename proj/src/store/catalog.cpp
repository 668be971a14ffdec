#include "corvid/store/catalog.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "corvid/common/error.hpp"
#include "corvid/common/text.hpp"
#include "corvid/dsl/bundle.hpp"
#include "corvid/dsl/parse.hpp"

extern char** environ;

namespace corvid::store {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& p, const std::string& bytes) {
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << bytes;
    if (!out.flush()) throw Error(Errc::io_error, "cannot write " + tmp);
  }
  fs::rename(tmp, p);
}

bool looks_like_url(const std::string& s) {
  return s.find("://") != std::string::npos || s.starts_with("git@");
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "corvid-store-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw Error(Errc::io_error, "cannot create a temporary directory");
    path = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void git_clone(const std::string& url, const fs::path& dest) {
  std::string git = "git", clone = "clone", depth = "--depth", one = "1", quiet = "--quiet", u = url,
              d = dest.string();
  std::vector<char*> argv{git.data(), clone.data(), depth.data(), one.data(), quiet.data(), u.data(), d.data(),
                          nullptr};
  pid_t pid = -1;
  if (posix_spawnp(&pid, "git", nullptr, nullptr, argv.data(), environ) != 0) {
    throw Error(Errc::unreachable, "cannot run git to fetch " + url);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) throw Error(Errc::unreachable, "git clone failed for " + url);
}

std::string repo_name(std::string url) {
  while (!url.empty() && url.back() == '/') url.pop_back();
  auto name = url.substr(url.find_last_of("/:") + 1);
  if (name.ends_with(".git")) name.resize(name.size() - 4);
  return name;
}

std::string first_line(const fs::path& readme) {
  if (!fs::exists(readme)) return {};
  std::istringstream in(read_file(readme));
  for (std::string line; std::getline(in, line);) {
    auto t = trim(line);
    while (t.starts_with("#")) t = trim(t.substr(1));
    if (!t.empty()) return std::string(t);
  }
  return {};
}

nlohmann::json topics_json(const std::set<bus::TopicName>& topics) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& t : topics) a.push_back(t.str());
  return a;
}

std::set<bus::TopicName> topics_from(const nlohmann::json& a) {
  std::set<bus::TopicName> out;
  for (const auto& t : a) out.insert(bus::TopicName::parse(t.get<std::string>()));
  return out;
}

IndexedSkill index_dir(const fs::path& root, const std::string& source) {
  auto bundle = dsl::load_bundle(root.string(), source);
  if (!valid_skill_name(bundle.name)) {
    throw Error(Errc::invalid_argument, "'" + bundle.name + "' is not a valid skill name");
  }
  IndexedSkill s;
  s.archive = Archive::pack(bundle.name, root.string()).serialize();
  s.entry.name = bundle.name;
  s.entry.description = first_line(root / "README.md");
  s.entry.source_url = source;
  s.entry.manifest = bundle.manifest;
  s.entry.warnings = lint_warnings(bundle.manifest);
  s.entry.sha256 = sha256_hex(s.archive);
  return s;
}

}  // namespace

bool valid_skill_name(std::string_view name) {
  if (name.empty() || name.size() > 64 || name.front() == '-') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

nlohmann::json StoreEntry::to_json() const {
  nlohmann::json w = nlohmann::json::array();
  for (const auto& x : warnings) w.push_back(store::to_json(x));
  return {{"name", name},
          {"description", description},
          {"source_url", source_url},
          {"manifest",
           {{"has_action", manifest.has_action},
            {"extra_container_flags", manifest.extra_container_flags},
            {"needs_internet_access", manifest.needs_internet_access},
            {"topics_read", topics_json(manifest.topics_read)},
            {"topics_write", topics_json(manifest.topics_write)}}},
          {"warnings", w},
          {"sha256", sha256}};
}

StoreEntry StoreEntry::from_json(const nlohmann::json& j) {
  try {
    StoreEntry e;
    e.name = j.at("name").get<std::string>();
    e.description = j.value("description", "");
    e.source_url = j.at("source_url").get<std::string>();
    const auto& m = j.at("manifest");
    e.manifest.has_action = m.at("has_action").get<bool>();
    e.manifest.extra_container_flags = m.at("extra_container_flags").get<std::string>();
    e.manifest.needs_internet_access = m.at("needs_internet_access").get<bool>();
    e.manifest.topics_read = topics_from(m.at("topics_read"));
    e.manifest.topics_write = topics_from(m.at("topics_write"));
    for (const auto& w : j.at("warnings")) e.warnings.push_back(warning_from_json(w));
    e.sha256 = j.at("sha256").get<std::string>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::parse_error, std::string("malformed store entry: ") + ex.what());
  }
}

IndexedSkill index_skill(const std::string& source) {
  if (!looks_like_url(source)) {
    if (!fs::is_directory(source)) throw Error(Errc::not_found, "no skill bundle at " + source);
    return index_dir(fs::path(source), source);
  }
  TempDir tmp;
  const auto dest = tmp.path / repo_name(source);
  git_clone(source, dest);
  return index_dir(dest, source);
}

Catalog::Catalog(std::string dir) : dir_(std::move(dir)), current_(std::make_shared<CatalogSnapshot>()) {}

StoreEntry Catalog::add(const IndexedSkill& skill) {
  fs::create_directories(dir_);
  const auto& name = skill.entry.name;
  if (!valid_skill_name(name)) throw Error(Errc::invalid_argument, "'" + name + "' is not a valid skill name");
  // Archive first: an entry never points at a missing archive.
  write_atomic(fs::path(dir_) / (name + ".skill"), skill.archive);
  write_atomic(fs::path(dir_) / (name + ".json"), skill.entry.to_json().dump(2) + "\n");
  reload();
  return skill.entry;
}

void Catalog::reload() {
  if (!fs::is_directory(dir_)) throw Error(Errc::not_found, "catalog directory " + dir_ + " does not exist");
  auto next = std::make_shared<CatalogSnapshot>();
  std::vector<fs::path> entries;
  for (const auto& f : fs::directory_iterator(dir_)) {
    if (f.is_regular_file() && f.path().extension() == ".json") entries.push_back(f.path());
  }
  std::sort(entries.begin(), entries.end());
  for (const auto& path : entries) {
    const auto file = path.filename().string();
    try {
      IndexedSkill s;
      s.entry = StoreEntry::from_json(nlohmann::json::parse(read_file(path)));
      if (s.entry.name != path.stem().string() || !valid_skill_name(s.entry.name)) {
        throw Error(Errc::parse_error, "entry name does not match the file name");
      }
      s.archive = read_file(path.parent_path() / (s.entry.name + ".skill"));
      if (sha256_hex(s.archive) != s.entry.sha256) throw Error(Errc::conflict, "archive hash mismatch");
      if (lint_warnings(s.entry.manifest) != s.entry.warnings) {
        throw Error(Errc::conflict, "stored warnings differ from the manifest's");
      }
      const auto archive = Archive::parse(s.archive);
      const auto config = std::find_if(archive.files.begin(), archive.files.end(),
                                       [](const ArchiveFile& f) { return f.path == "config.yaml"; });
      if (archive.name != s.entry.name || config == archive.files.end() ||
          dsl::parse_manifest(config->data, "config.yaml") != s.entry.manifest) {
        throw Error(Errc::conflict, "entry manifest differs from the archive's config.yaml");
      }
      next->skills.emplace(s.entry.name, std::move(s));
    } catch (const std::exception& e) {
      next->rejected.push_back(file + ": " + e.what());
    }
  }
  std::lock_guard lock(mutex_);
  current_ = std::move(next);
}

std::shared_ptr<const CatalogSnapshot> Catalog::snapshot() const {
  std::lock_guard lock(mutex_);
  return current_;
}

std::string Catalog::fingerprint() const {
  std::vector<std::string> parts;
  std::error_code ec;
  for (const auto& f : fs::directory_iterator(dir_, ec)) {
    const auto ext = f.path().extension();
    if (ext != ".json" && ext != ".skill") continue;
    const auto mtime = f.last_write_time(ec).time_since_epoch().count();
    parts.push_back(f.path().filename().string() + ":" + std::to_string(f.file_size(ec)) + ":" +
                    std::to_string(mtime));
  }
  std::sort(parts.begin(), parts.end());
  return join(parts, "|");
}

}  // namespace corvid::store
