#include "corvid/bus/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <future>
#include <map>

#include "corvid/bus/wire.hpp"
#include "corvid/common/error.hpp"

namespace corvid::bus {

namespace {

using nlohmann::json;

constexpr auto kReplyTimeout = std::chrono::seconds(5);

void send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::unreachable, std::string("send failed: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void send_frame(int fd, const json& map) { send_all(fd, wire::frame(wire::canonical(map))); }

// Reads until one frame is complete. Returns nullopt on orderly EOF.
std::optional<std::string> read_frame(int fd, wire::FrameDecoder& decoder) {
  while (true) {
    if (auto f = decoder.next()) return f;
    char buf[8192];
    auto n = ::recv(fd, buf, sizeof buf, 0);
    if (n == 0) return std::nullopt;
    if (n < 0) {
      if (errno == EINTR) continue;
      return std::nullopt;
    }
    decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
  }
}

json parse_map(const std::string& body) {
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw Error(Errc::parse_error, "frame is not a map");
    return j;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("frame is not a map: ") + e.what());
  }
}

json key_to_map(const TopicKey& k) {
  return {{"key", base64_encode(std::string_view(reinterpret_cast<const char*>(k.key_bytes.data()),
                                                 k.key_bytes.size()))},
          {"key_id", k.key_id},
          {"topic", k.topic.str()}};
}

TopicKey key_from_map(const json& m) {
  TopicKey k{TopicName::parse(m.at("topic").get<std::string>()), {}, m.at("key_id").get<std::uint64_t>()};
  auto raw = base64_decode(m.at("key").get<std::string>());
  if (raw.size() != kKeySize) throw Error(Errc::parse_error, "topic key must be 32 bytes");
  std::memcpy(k.key_bytes.data(), raw.data(), kKeySize);
  return k;
}

json error_map(const Error& e) {
  return {{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"op", "error"}};
}

Errc errc_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(Errc::unresolved_reference); ++i) {
    if (to_string(static_cast<Errc>(i)) == s) return static_cast<Errc>(i);
  }
  return Errc::unreachable;
}

[[noreturn]] void rethrow_remote(const json& reply) {
  throw Error(errc_from_string(reply.value("code", "")), reply.value("message", "remote error"));
}

int connect_to(const std::string& address) {
  auto addr = SocketAddress::parse(address);
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(Errc::unreachable, "socket() failed");
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(addr.port);
  if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1) {
    ::close(fd);
    throw Error(Errc::malformed_config, "not an IPv4 address: " + addr.host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    auto err = std::string(std::strerror(errno));
    ::close(fd);
    throw Error(Errc::unreachable, "cannot reach bus at " + address + ": " + err);
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

// Client side of a network session.
class SocketTransport final : public Transport {
 public:
  SocketTransport(int fd, std::shared_ptr<Mailbox> mailbox, wire::FrameDecoder decoder)
      : fd_(fd), mailbox_(std::move(mailbox)) {
    reader_ = std::thread([this, d = std::move(decoder)]() mutable { read_loop(std::move(d)); });
  }

  ~SocketTransport() override {
    close();
    if (reader_.joinable()) reader_.join();
    ::close(fd_);
  }

  void publish(const Envelope& env) override {
    std::lock_guard lock(write_mutex_);
    send_all(fd_, wire::frame(wire::encode_envelope(env)));
  }

  void subscribe(const TopicName& topic) override {
    call({{"op", "subscribe"}, {"topic", topic.str()}});
  }
  void unsubscribe(const TopicName& topic) override {
    call({{"op", "unsubscribe"}, {"topic", topic.str()}});
  }
  TopicKey request_key(const TopicName& topic) override {
    return key_from_map(call({{"op", "key_request"}, {"topic", topic.str()}}));
  }
  std::size_t subscriber_count(const TopicName& topic) override {
    return call({{"op", "subscriber_count"}, {"topic", topic.str()}}).at("count").get<std::size_t>();
  }

  void close() override {
    if (!closed_.exchange(true)) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  json call(json request) {
    std::future<json> reply;
    std::uint64_t id;
    {
      std::lock_guard lock(pending_mutex_);
      if (eof_) throw Error(Errc::unreachable, "bus connection closed");
      id = next_id_++;
      reply = pending_[id].get_future();
    }
    request["id"] = id;
    {
      std::lock_guard lock(write_mutex_);
      send_all(fd_, wire::frame(wire::canonical(request)));
    }
    if (reply.wait_for(kReplyTimeout) != std::future_status::ready) {
      throw Error(Errc::unreachable, "bus did not answer " + request["op"].get<std::string>());
    }
    auto r = reply.get();
    if (r.value("op", "") == "error") rethrow_remote(r);
    return r;
  }

  void read_loop(wire::FrameDecoder decoder) {
    try {
      while (auto body = read_frame(fd_, decoder)) {
        auto m = parse_map(*body);
        if (!m.contains("op")) {
          mailbox_->push(wire::envelope_from_map(m));
        } else if (m.contains("re")) {
          std::lock_guard lock(pending_mutex_);
          auto it = pending_.find(m["re"].get<std::uint64_t>());
          if (it != pending_.end()) {
            it->second.set_value(m);
            pending_.erase(it);
          }
        } else if (m["op"] == "key") {
          mailbox_->push(key_from_map(m));
        }
        // Unsolicited errors (a rejected publish) carry no request id; the
        // session already checked grants locally, so there is nobody to tell.
      }
    } catch (const std::exception&) {
    }
    {
      std::lock_guard lock(pending_mutex_);
      eof_ = true;
      for (auto& [id, p] : pending_) {
        p.set_value(json{{"code", "unreachable"}, {"message", "bus connection closed"}, {"op", "error"}});
      }
      pending_.clear();
    }
    mailbox_->close();
  }

  int fd_;
  std::shared_ptr<Mailbox> mailbox_;
  std::thread reader_;
  std::mutex write_mutex_;
  std::mutex pending_mutex_;
  std::map<std::uint64_t, std::promise<json>> pending_;
  std::uint64_t next_id_ = 1;
  bool eof_ = false;
  std::atomic<bool> closed_{false};
};

}  // namespace

SocketAddress SocketAddress::parse(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(Errc::malformed_config, "address must be host:port, got \"" + text + "\"");
  }
  SocketAddress a;
  a.host = text.substr(0, colon);
  if (a.host == "localhost") a.host = "127.0.0.1";
  unsigned port = 0;
  auto tail = std::string_view(text).substr(colon + 1);
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), port);
  if (ec != std::errc() || ptr != tail.data() + tail.size() || port > 65535) {
    throw Error(Errc::malformed_config, "bad port in \"" + text + "\"");
  }
  a.port = static_cast<std::uint16_t>(port);
  return a;
}

std::string SocketAddress::str() const { return host + ":" + std::to_string(port); }

struct BusServer::Connection {
  int fd = -1;
  std::mutex write_mutex;
  std::string client_id;
  std::shared_ptr<Mailbox> mailbox;

  void send(const json& m) {
    std::lock_guard lock(write_mutex);
    send_frame(fd, m);
  }
};

BusServer::BusServer(std::shared_ptr<Broker> broker, const SocketAddress& address)
    : broker_(std::move(broker)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(Errc::io_error, "socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(address.port);
  if (::inet_pton(AF_INET, address.host.c_str(), &sa.sin_addr) != 1) {
    ::close(listen_fd_);
    throw Error(Errc::malformed_config, "not an IPv4 address: " + address.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    auto err = errno;
    ::close(listen_fd_);
    if (err == EADDRINUSE) throw Error(Errc::address_in_use, address.str() + " is already in use");
    throw Error(Errc::io_error, "cannot listen on " + address.str() + ": " + std::strerror(err));
  }
  socklen_t len = sizeof sa;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &len);
  bound_ = SocketAddress{address.host, ntohs(sa.sin_port)};
  acceptor_ = std::thread([this] { accept_loop(); });
}

BusServer::~BusServer() { stop(); }

void BusServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  std::list<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    for (auto& c : connections_) {
      ::shutdown(c->fd, SHUT_RDWR);
      if (c->mailbox) c->mailbox->close();
    }
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void BusServer::accept_loop() {
  while (!stopping_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    std::lock_guard lock(mutex_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    connections_.push_back(conn);
    workers_.emplace_back([this, conn] { serve(conn); });
  }
}

void BusServer::serve(std::shared_ptr<Connection> conn) {
  wire::FrameDecoder decoder;
  std::thread writer;
  bool admin = false;
  try {
    auto first = read_frame(conn->fd, decoder);
    if (!first) throw Error(Errc::unreachable, "closed before hello");
    auto hello = parse_map(*first);
    const auto op = hello.value("op", "");
    if (op == "admin") {
      const auto token = hello.value("token", "");
      if (token.size() != broker_->admin_token().size() || token != broker_->admin_token()) {
        throw Error(Errc::permission_denied, "bad admin token");
      }
      admin = true;
      conn->send({{"op", "welcome"}});
    } else if (op == "hello") {
      conn->client_id = hello.value("client_id", "");
      conn->mailbox = std::make_shared<Mailbox>();
      auto att = broker_->attach(conn->client_id, hello.value("token", ""), conn->mailbox);
      json keys = json::array();
      for (const auto& k : att.keys) keys.push_back(key_to_map(k));
      conn->send({{"grants", att.grants.to_json()}, {"keys", keys}, {"op", "welcome"}});
      writer = std::thread([conn] {
        try {
          while (!conn->mailbox->closed()) {
            if (!conn->mailbox->wait(std::chrono::milliseconds(200))) continue;
            for (auto& item : conn->mailbox->take_all()) {
              if (auto* env = std::get_if<Envelope>(&item)) {
                conn->send(wire::envelope_to_map(*env));
              } else {
                auto m = key_to_map(std::get<TopicKey>(item));
                m["op"] = "key";
                conn->send(m);
              }
            }
          }
        } catch (const std::exception&) {
        }
        ::shutdown(conn->fd, SHUT_RDWR);
      });
    } else {
      throw Error(Errc::permission_denied, "expected hello");
    }

    while (auto body = read_frame(conn->fd, decoder)) {
      json m = parse_map(*body);
      json reply;
      try {
        if (!m.contains("op")) {
          if (admin) throw Error(Errc::permission_denied, "admin sessions cannot publish");
          broker_->route(conn->client_id, wire::envelope_from_map(m));
          continue;
        }
        const auto kind = m["op"].get<std::string>();
        if (admin && kind == "register") {
          auto token = broker_->issue_credential(m.at("client_id").get<std::string>(),
                                                 Grants::from_json(m.at("grants")));
          reply = {{"op", "registered"}, {"token", token}};
        } else if (admin && kind == "unregister") {
          broker_->unregister_client(m.at("client_id").get<std::string>());
          reply = {{"op", "ok"}};
        } else if (!admin && kind == "subscribe") {
          broker_->subscribe(conn->client_id, TopicName::parse(m.at("topic").get<std::string>()));
          reply = {{"op", "ok"}};
        } else if (!admin && kind == "unsubscribe") {
          broker_->unsubscribe(conn->client_id, TopicName::parse(m.at("topic").get<std::string>()));
          reply = {{"op", "ok"}};
        } else if (!admin && kind == "key_request") {
          reply = key_to_map(
              broker_->key_for(conn->client_id, TopicName::parse(m.at("topic").get<std::string>())));
          reply["op"] = "key";
        } else if (!admin && kind == "subscriber_count") {
          auto g = broker_->grants_of(conn->client_id);
          if (!g || !g->system) throw Error(Errc::permission_denied, "needs a system grant");
          reply = {{"count", broker_->subscriber_count(
                                 TopicName::parse(m.at("topic").get<std::string>()))},
                   {"op", "count"}};
        } else {
          throw Error(Errc::invalid_argument, "unknown op " + kind);
        }
      } catch (const Error& e) {
        reply = error_map(e);
      } catch (const json::exception& e) {
        reply = error_map(Error(Errc::parse_error, e.what()));
      }
      if (m.contains("id")) reply["re"] = m["id"];
      conn->send(reply);
    }
  } catch (const Error& e) {
    try {
      conn->send(error_map(e));
    } catch (...) {
    }
  } catch (const std::exception&) {
  }
  if (!conn->client_id.empty() && conn->mailbox) broker_->unregister_client(conn->client_id);
  if (conn->mailbox) conn->mailbox->close();
  ::shutdown(conn->fd, SHUT_RDWR);
  if (writer.joinable()) writer.join();
  ::close(conn->fd);
  std::lock_guard lock(mutex_);
  connections_.remove(conn);
}

ClientSession ClientSession::connect(const std::string& address, const std::string& client_id,
                                     const std::string& token, Clock clock) {
  int fd = connect_to(address);
  wire::FrameDecoder decoder;
  try {
    send_frame(fd, {{"client_id", client_id}, {"op", "hello"}, {"token", token}});
    auto body = read_frame(fd, decoder);
    if (!body) throw Error(Errc::unreachable, "bus closed the connection during hello");
    auto welcome = parse_map(*body);
    if (welcome.value("op", "") != "welcome") rethrow_remote(welcome);
    auto grants = Grants::from_json(welcome.at("grants"));
    std::vector<TopicKey> keys;
    for (const auto& k : welcome.at("keys")) keys.push_back(key_from_map(k));
    auto mailbox = std::make_shared<Mailbox>();
    auto transport = std::make_unique<SocketTransport>(fd, mailbox, std::move(decoder));
    return ClientSession(client_id, std::move(grants), std::move(keys), std::move(mailbox),
                         std::move(transport), std::move(clock));
  } catch (...) {
    ::close(fd);
    throw;
  }
}

AdminClient AdminClient::connect(const std::string& address, const std::string& admin_token) {
  AdminClient c(connect_to(address));
  auto reply = c.call({{"op", "admin"}, {"token", admin_token}});
  if (reply.value("op", "") != "welcome") rethrow_remote(reply);
  return c;
}

AdminClient::~AdminClient() {
  if (fd_ >= 0) ::close(fd_);
}

AdminClient::AdminClient(AdminClient&& o) noexcept
    : fd_(std::exchange(o.fd_, -1)), decoder_(std::move(o.decoder_)) {}

AdminClient& AdminClient::operator=(AdminClient&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(o.fd_, -1);
    decoder_ = std::move(o.decoder_);
  }
  return *this;
}

json AdminClient::call(const json& request) {
  send_frame(fd_, request);
  auto body = read_frame(fd_, decoder_);
  if (!body) throw Error(Errc::unreachable, "bus closed the admin connection");
  auto reply = parse_map(*body);
  if (reply.value("op", "") == "error") rethrow_remote(reply);
  return reply;
}

std::string AdminClient::register_client(const std::string& client_id, const Grants& grants) {
  return call({{"client_id", client_id}, {"grants", grants.to_json()}, {"op", "register"}})
      .at("token")
      .get<std::string>();
}

void AdminClient::unregister_client(const std::string& client_id) {
  call({{"client_id", client_id}, {"op", "unregister"}});
}

std::string BrokerHandle::address() const { return server ? server->address().str() : ""; }

void BrokerHandle::stop() {
  if (server) server->stop();
}

BrokerHandle broker_start(BrokerConfig config) {
  if (const char* env = std::getenv("CORVID_BUS_ADDR"); env && *env) {
    config.listen_address = env;
  }
  auto address = SocketAddress::parse(config.listen_address);
  auto broker = Broker::create(std::move(config));
  auto server = std::make_shared<BusServer>(broker, address);
  return BrokerHandle{std::move(broker), std::move(server)};
}

}  // namespace corvid::bus
