#pragma once

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "corvid/bus/broker.hpp"
#include "corvid/bus/wire.hpp"

namespace corvid::bus {

struct SocketAddress {
  std::string host;
  std::uint16_t port = 0;

  // "host:port"; throws Error(malformed_config).
  static SocketAddress parse(const std::string& text);
  std::string str() const;
};

// Serves the broker over framed TCP. One reader thread per connection plus a
// writer thread draining that connection's mailbox.
class BusServer {
 public:
  // Binds immediately; throws Error(address_in_use) when the port is taken.
  BusServer(std::shared_ptr<Broker> broker, const SocketAddress& address);
  ~BusServer();
  BusServer(const BusServer&) = delete;
  BusServer& operator=(const BusServer&) = delete;

  SocketAddress address() const { return bound_; }
  void stop();

 private:
  struct Connection;
  void accept_loop();
  void serve(std::shared_ptr<Connection> conn);

  std::shared_ptr<Broker> broker_;
  SocketAddress bound_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mutex_;
  std::list<std::shared_ptr<Connection>> connections_;
  std::list<std::thread> workers_;
};

// Administrative connection used to register grants for clients that will
// connect on their own (skill processes).
class AdminClient {
 public:
  static AdminClient connect(const std::string& address, const std::string& admin_token);
  ~AdminClient();
  AdminClient(AdminClient&&) noexcept;
  AdminClient& operator=(AdminClient&&) noexcept;

  std::string register_client(const std::string& client_id, const Grants& grants);
  void unregister_client(const std::string& client_id);

 private:
  explicit AdminClient(int fd) : fd_(fd) {}
  nlohmann::json call(const nlohmann::json& request);
  int fd_ = -1;
  wire::FrameDecoder decoder_;
};

}  // namespace corvid::bus
