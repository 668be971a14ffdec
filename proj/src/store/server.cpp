#include "corvid/store/server.hpp"

#include <httplib.h>

#include "corvid/bus/server.hpp"
#include "corvid/common/error.hpp"

namespace corvid::store {

namespace {

constexpr const char* kHashHeader = "X-Corvid-Sha256";

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

// Resolves the <name> path parameter: 400 for a malformed name, 404 when
// the snapshot has no such skill.
const IndexedSkill* lookup(const CatalogSnapshot& snap, const httplib::Request& req, httplib::Response& res) {
  const auto name = req.matches[1].str();
  if (!valid_skill_name(name)) {
    send_error(res, 400, "malformed skill name");
    return nullptr;
  }
  const auto it = snap.skills.find(name);
  if (it == snap.skills.end()) {
    send_error(res, 404, "no skill named '" + name + "'");
    return nullptr;
  }
  return &it->second;
}

}  // namespace

StoreServer::StoreServer(Options options)
    : options_(std::move(options)), catalog_(options_.catalog_dir), http_(std::make_unique<httplib::Server>()) {
  catalog_.reload();

  http_->Get("/skills", [this](const httplib::Request&, httplib::Response& res) {
    const auto snap = catalog_.snapshot();
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [name, s] : snap->skills) list.push_back(s.entry.to_json());
    send_json(res, 200, {{"skills", list}});
  });
  http_->Get(R"(/skills/([^/]*))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto snap = catalog_.snapshot();
    if (const auto* s = lookup(*snap, req, res)) send_json(res, 200, s->entry.to_json());
  });
  http_->Post(R"(/install/([^/]*))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto snap = catalog_.snapshot();
    if (const auto* s = lookup(*snap, req, res)) {
      res.status = 200;
      res.set_header(kHashHeader, s->entry.sha256);
      res.set_content(s->archive, "application/json");
    }
  });
  http_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, "not found");
  });
  if (!options_.ui_dir.empty() && !http_->set_mount_point("/", options_.ui_dir)) {
    throw Error(Errc::not_found, "ui directory " + options_.ui_dir + " does not exist");
  }

  const auto addr = bus::SocketAddress::parse(options_.listen);
  host_ = addr.host;
  if (addr.port == 0) {
    port_ = http_->bind_to_any_port(host_);
  } else {
    port_ = http_->bind_to_port(host_, addr.port) ? addr.port : -1;
  }
  if (port_ <= 0) throw Error(Errc::address_in_use, "cannot listen on " + options_.listen);

  listener_ = std::thread([this] { http_->listen_after_bind(); });
  watcher_ = std::thread([this] {
    auto seen = catalog_.fingerprint();
    while (!stopping_) {
      const auto until = std::chrono::steady_clock::now() + options_.rescan;
      while (!stopping_ && std::chrono::steady_clock::now() < until) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
      if (stopping_) break;
      const auto now = catalog_.fingerprint();
      if (now == seen) continue;
      seen = now;
      try {
        catalog_.reload();
      } catch (const Error&) {
        // Directory gone for a moment; keep serving the last snapshot.
      }
    }
  });
}

StoreServer::~StoreServer() { stop(); }

std::string StoreServer::address() const { return host_ + ":" + std::to_string(port_); }

void StoreServer::stop() {
  if (stopping_.exchange(true)) return;
  http_->stop();
  if (listener_.joinable()) listener_.join();
  if (watcher_.joinable()) watcher_.join();
}

Archive fetch_archive(const std::string& address, const std::string& name) {
  const auto addr = bus::SocketAddress::parse(address);
  httplib::Client cli(addr.host, addr.port);
  cli.set_connection_timeout(5);
  const auto res = cli.Post("/install/" + name);
  if (!res) throw Error(Errc::unreachable, "store at " + address + " is unreachable");
  if (res->status == 404) throw Error(Errc::not_found, "the store has no skill named '" + name + "'");
  if (res->status == 400) throw Error(Errc::invalid_argument, "'" + name + "' is not a valid skill name");
  if (res->status != 200) throw Error(Errc::unreachable, "store answered " + std::to_string(res->status));
  if (sha256_hex(res->body) != res->get_header_value(kHashHeader)) {
    throw Error(Errc::conflict, "archive for '" + name + "' does not match its hash");
  }
  auto archive = Archive::parse(res->body);
  if (archive.name != name) throw Error(Errc::conflict, "store sent the archive of '" + archive.name + "'");
  return archive;
}

}  // namespace corvid::store
