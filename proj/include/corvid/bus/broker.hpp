#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "corvid/bus/crypto.hpp"
#include "corvid/common/text.hpp"

namespace corvid::bus {

// What a client may touch. `system` is the wildcard grant given to the core
// modules (dialog, nlu, stt, tts, satellites); third-party skills never get it.
struct Grants {
  std::set<TopicName> readable;
  std::set<TopicName> writable;
  bool system = false;

  static Grants system_grant() { return Grants{{}, {}, true}; }

  bool can_read(const TopicName& t) const { return system || readable.count(t) > 0; }
  bool can_write(const TopicName& t) const { return system || writable.count(t) > 0; }
  // readable ∪ writable; empty for system grants (keys are issued on demand).
  std::set<TopicName> keyed_topics() const;

  nlohmann::json to_json() const;
  static Grants from_json(const nlohmann::json& j);
};

struct Message {
  TopicName topic;
  std::string sender;
  std::int64_t timestamp_ms = 0;
  Payload payload;
};

using Handler = std::function<void(const Message&)>;

// Inbound queue of a session. The broker (or a socket reader) produces,
// the owning session consumes.
class Mailbox {
 public:
  using Item = std::variant<Envelope, TopicKey>;

  void push(Item item);
  std::deque<Item> take_all();
  // Blocks until an item is queued, the mailbox is closed, or the timeout passes.
  bool wait(std::chrono::milliseconds timeout);
  void close();
  bool closed() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Item> items_;
  bool closed_ = false;
};

// Session -> broker direction of a client connection.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void publish(const Envelope& env) = 0;
  virtual void subscribe(const TopicName& topic) = 0;
  virtual void unsubscribe(const TopicName& topic) = 0;
  virtual TopicKey request_key(const TopicName& topic) = 0;
  virtual std::size_t subscriber_count(const TopicName& topic) = 0;
  virtual void close() = 0;
};

struct SubscriptionHandle {
  std::uint64_t id = 0;
  TopicName topic = TopicName::parse("_");

  bool operator==(const SubscriptionHandle&) const = default;
};

// A client's view of the bus. Holds only the key material its grants allow;
// all sealing and opening happens here, the broker only routes envelopes.
//
// A session may be moved between threads but must not be used from two
// threads at once. Handlers run on the thread calling dispatch().
class ClientSession {
 public:
  ClientSession(std::string client_id, Grants grants, std::vector<TopicKey> keys,
                std::shared_ptr<Mailbox> mailbox, std::unique_ptr<Transport> transport,
                Clock clock);
  ~ClientSession();
  ClientSession(ClientSession&&) noexcept;
  ClientSession& operator=(ClientSession&&) noexcept;
  ClientSession(const ClientSession&) = delete;
  ClientSession& operator=(const ClientSession&) = delete;

  // Connects to a networked broker using a credential issued by it.
  static ClientSession connect(const std::string& address, const std::string& client_id,
                               const std::string& token, Clock clock = system_now_ms);

  const std::string& client_id() const;
  const Grants& grants() const;

  // Throws Error(permission_denied) for non-writable topics and
  // Error(payload_too_large) above 1 MiB.
  void publish(const TopicName& topic, const Payload& payload);

  // Throws Error(permission_denied) for non-readable topics. Subscribing twice
  // to the same topic returns the first handle and keeps the first handler.
  SubscriptionHandle subscribe(const TopicName& topic, Handler handler);
  void unsubscribe(const SubscriptionHandle& handle);

  // Processes everything queued so far; returns the number of handler calls.
  std::size_t dispatch();
  // Waits up to `timeout` for traffic, then dispatches.
  std::size_t wait_and_dispatch(std::chrono::milliseconds timeout);

  // Every key this session currently holds.
  std::vector<TopicKey> key_material() const;
  // Fetches a key from the authority; permission_denied unless granted.
  TopicKey request_key(const TopicName& topic);

  // Number of sessions subscribed to `topic` (system grants only).
  std::size_t subscriber_count(const TopicName& topic);

  // Envelopes dropped because they failed to open, and handler exceptions.
  std::uint64_t dropped() const;
  const std::vector<std::string>& handler_errors() const;

  bool closed() const;
  void close();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

struct BrokerConfig {
  std::string listen_address = "127.0.0.1:7420";
  // Absent: a random seed is generated. Present: must be 16..64 bytes.
  std::optional<std::vector<std::uint8_t>> key_seed;
  // Secret for administrative connections; generated when empty.
  std::string admin_token;

  // Throws Error(malformed_config).
  static BrokerConfig from_json(const nlohmann::json& j);
};

using WiretapFn = std::function<void(const Envelope&)>;

// Routing core plus key authority. Thread-safe.
class Broker : public std::enable_shared_from_this<Broker> {
 public:
  // Throws Error(malformed_config) for a bad seed.
  static std::shared_ptr<Broker> create(BrokerConfig config = {});

  // In-process registration. Throws Error(duplicate_client) or
  // Error(invalid_argument) for an empty id.
  ClientSession register_client(const std::string& client_id, const Grants& grants,
                                Clock clock = system_now_ms);

  // Registers grants for a client that will connect over the network and
  // returns its one-time credential.
  std::string issue_credential(const std::string& client_id, const Grants& grants);

  struct Attachment {
    Grants grants;
    std::vector<TopicKey> keys;
  };
  // Binds a network connection's mailbox to a previously issued credential.
  Attachment attach(const std::string& client_id, const std::string& token,
                    std::shared_ptr<Mailbox> mailbox);
  void unregister_client(const std::string& client_id);

  void route(const std::string& client_id, const Envelope& env);
  void subscribe(const std::string& client_id, const TopicName& topic);
  void unsubscribe(const std::string& client_id, const TopicName& topic);
  TopicKey key_for(const std::string& client_id, const TopicName& topic);

  // Increments the topic's key_id and pushes the new key to every holder.
  TopicKey rotate_key(const TopicName& topic);

  std::size_t subscriber_count(const TopicName& topic) const;
  bool is_registered(const std::string& client_id) const;
  std::optional<Grants> grants_of(const std::string& client_id) const;

  // Observes every routed envelope, still sealed.
  std::uint64_t add_wiretap(WiretapFn fn);
  void remove_wiretap(std::uint64_t id);

  const std::string& admin_token() const { return admin_token_; }

 private:
  explicit Broker(std::vector<std::uint8_t> seed, std::string admin_token);

  struct ClientRecord {
    Grants grants;
    std::string token;
    std::shared_ptr<Mailbox> mailbox;  // null until attached
    std::set<TopicName> subscriptions;
  };

  TopicKey current_key_locked(const TopicName& topic);
  std::vector<TopicKey> keys_for_locked(const Grants& grants);

  std::vector<std::uint8_t> seed_;
  std::string admin_token_;
  mutable std::mutex mutex_;
  std::map<std::string, ClientRecord> clients_;
  std::map<TopicName, std::uint64_t> key_ids_;
  std::map<std::uint64_t, WiretapFn> wiretaps_;
  std::uint64_t next_wiretap_ = 1;
};

class BusServer;

// A started broker: routing core plus its network listener.
struct BrokerHandle {
  std::shared_ptr<Broker> broker;
  std::shared_ptr<BusServer> server;

  std::string address() const;
  void stop();
};

// Starts the broker and binds its listener. CORVID_BUS_ADDR, when set,
// overrides config.listen_address. Throws Error(address_in_use) or
// Error(malformed_config).
BrokerHandle broker_start(BrokerConfig config);

}  // namespace corvid::bus
