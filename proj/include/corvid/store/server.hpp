#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include "corvid/store/catalog.hpp"

namespace httplib {
class Server;
}

namespace corvid::store {

// HTTP/JSON API over a catalog:
//   GET  /skills          {"skills":[entry,...]}
//   GET  /skills/<name>   entry, 404 unknown, 400 malformed name
//   POST /install/<name>  the archive; X-Corvid-Sha256 carries its hash
// Optional static files (the browser frontend) are served from ui_dir.
class StoreServer {
 public:
  struct Options {
    std::string catalog_dir;
    std::string listen = "127.0.0.1:7421";  // port 0 picks a free one
    std::string ui_dir;
    // How often the catalog directory is checked for changes.
    std::chrono::milliseconds rescan{1000};
  };

  // Loads the catalog and binds. Throws Error(address_in_use) or
  // Error(not_found) for a missing catalog directory.
  explicit StoreServer(Options options);
  ~StoreServer();
  StoreServer(const StoreServer&) = delete;
  StoreServer& operator=(const StoreServer&) = delete;

  std::string address() const;
  Catalog& catalog() { return catalog_; }
  void stop();

 private:
  Options options_;
  Catalog catalog_;
  std::unique_ptr<httplib::Server> http_;
  std::string host_;
  int port_ = 0;
  std::thread listener_;
  std::thread watcher_;
  std::atomic<bool> stopping_{false};
};

// Fetches an archive from a running store and checks it against the hash
// the store reports. Throws Error(unreachable), Error(not_found) or
// Error(conflict) on a hash mismatch.
Archive fetch_archive(const std::string& address, const std::string& name);

}  // namespace corvid::store
