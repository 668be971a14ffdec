#include "corvid/bus/broker.hpp"

#include <algorithm>

#include <sodium.h>

#include "corvid/common/error.hpp"

namespace corvid::bus {

std::set<TopicName> Grants::keyed_topics() const {
  std::set<TopicName> out = readable;
  out.insert(writable.begin(), writable.end());
  return out;
}

nlohmann::json Grants::to_json() const {
  nlohmann::json r = nlohmann::json::array(), w = nlohmann::json::array();
  for (const auto& t : readable) r.push_back(t.str());
  for (const auto& t : writable) w.push_back(t.str());
  return {{"read", r}, {"system", system}, {"write", w}};
}

Grants Grants::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("read") || !j.contains("write") || !j["read"].is_array() ||
      !j["write"].is_array()) {
    throw Error(Errc::parse_error, "grant map needs read and write lists");
  }
  Grants g;
  for (const auto& t : j["read"]) g.readable.insert(TopicName::parse(t.get<std::string>()));
  for (const auto& t : j["write"]) g.writable.insert(TopicName::parse(t.get<std::string>()));
  g.system = j.value("system", false);
  return g;
}

void Mailbox::push(Item item) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    items_.push_back(std::move(item));
  }
  cv_.notify_all();
}

std::deque<Mailbox::Item> Mailbox::take_all() {
  std::lock_guard lock(mutex_);
  return std::exchange(items_, {});
}

bool Mailbox::wait(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [&] { return !items_.empty() || closed_; }) &&
         !items_.empty();
}

void Mailbox::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Mailbox::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

namespace {

class InProcessTransport final : public Transport {
 public:
  InProcessTransport(std::weak_ptr<Broker> broker, std::string client_id)
      : broker_(std::move(broker)), client_id_(std::move(client_id)) {}

  void publish(const Envelope& env) override { locked()->route(client_id_, env); }
  void subscribe(const TopicName& topic) override { locked()->subscribe(client_id_, topic); }
  void unsubscribe(const TopicName& topic) override { locked()->unsubscribe(client_id_, topic); }
  TopicKey request_key(const TopicName& topic) override {
    return locked()->key_for(client_id_, topic);
  }
  std::size_t subscriber_count(const TopicName& topic) override {
    return locked()->subscriber_count(topic);
  }
  void close() override {
    if (auto b = broker_.lock()) b->unregister_client(client_id_);
    broker_.reset();
  }

 private:
  std::shared_ptr<Broker> locked() {
    auto b = broker_.lock();
    if (!b) throw Error(Errc::unreachable, "broker is gone");
    return b;
  }

  std::weak_ptr<Broker> broker_;
  std::string client_id_;
};

bool tokens_equal(const std::string& a, const std::string& b) {
  return a.size() == b.size() && sodium_memcmp(a.data(), b.data(), a.size()) == 0;
}

std::string random_token() {
  auto k = random_key();
  return base64_encode(std::string_view(reinterpret_cast<const char*>(k.data()), k.size()));
}

}  // namespace

BrokerConfig BrokerConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::malformed_config, "broker config must be a map");
  BrokerConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "listen_address") {
      if (!value.is_string()) throw Error(Errc::malformed_config, "listen_address must be text");
      c.listen_address = value.get<std::string>();
    } else if (key == "key_seed") {
      if (!value.is_string()) throw Error(Errc::malformed_config, "key_seed must be base64 text");
      std::string raw;
      try {
        raw = base64_decode(value.get<std::string>());
      } catch (const Error&) {
        throw Error(Errc::malformed_config, "key_seed is not valid base64");
      }
      c.key_seed = std::vector<std::uint8_t>(raw.begin(), raw.end());
    } else if (key == "admin_token") {
      if (!value.is_string()) throw Error(Errc::malformed_config, "admin_token must be text");
      c.admin_token = value.get<std::string>();
    } else {
      throw Error(Errc::malformed_config, "unknown broker config key \"" + key + "\"");
    }
  }
  return c;
}

Broker::Broker(std::vector<std::uint8_t> seed, std::string admin_token)
    : seed_(std::move(seed)), admin_token_(std::move(admin_token)) {}

std::shared_ptr<Broker> Broker::create(BrokerConfig config) {
  std::vector<std::uint8_t> seed;
  if (config.key_seed) {
    seed = *config.key_seed;
    if (seed.size() < 16 || seed.size() > 64) {
      throw Error(Errc::malformed_config,
                  "key seed must be 16..64 bytes, got " + std::to_string(seed.size()));
    }
  } else {
    auto k = random_key();
    seed.assign(k.begin(), k.end());
  }
  std::string admin = config.admin_token.empty() ? random_token() : config.admin_token;
  return std::shared_ptr<Broker>(new Broker(std::move(seed), std::move(admin)));
}

TopicKey Broker::current_key_locked(const TopicName& topic) {
  auto [it, inserted] = key_ids_.try_emplace(topic, 1);
  return TopicKey{topic, derive_topic_key(seed_, topic, it->second), it->second};
}

std::vector<TopicKey> Broker::keys_for_locked(const Grants& grants) {
  std::vector<TopicKey> keys;
  for (const auto& t : grants.keyed_topics()) keys.push_back(current_key_locked(t));
  return keys;
}

std::string Broker::issue_credential(const std::string& client_id, const Grants& grants) {
  if (client_id.empty()) throw Error(Errc::invalid_argument, "client id must not be empty");
  std::lock_guard lock(mutex_);
  if (clients_.count(client_id)) {
    throw Error(Errc::duplicate_client, "client \"" + client_id + "\" is already registered");
  }
  auto token = random_token();
  clients_[client_id] = ClientRecord{grants, token, nullptr, {}};
  return token;
}

Broker::Attachment Broker::attach(const std::string& client_id, const std::string& token,
                                  std::shared_ptr<Mailbox> mailbox) {
  std::lock_guard lock(mutex_);
  auto it = clients_.find(client_id);
  if (it == clients_.end() || it->second.token.empty() ||
      !tokens_equal(it->second.token, token)) {
    throw Error(Errc::permission_denied, "bad credential for client \"" + client_id + "\"");
  }
  if (it->second.mailbox) {
    throw Error(Errc::duplicate_client, "client \"" + client_id + "\" is already connected");
  }
  it->second.mailbox = std::move(mailbox);
  it->second.token.clear();  // one-time
  return Attachment{it->second.grants, keys_for_locked(it->second.grants)};
}

ClientSession Broker::register_client(const std::string& client_id, const Grants& grants,
                                      Clock clock) {
  auto token = issue_credential(client_id, grants);
  auto mailbox = std::make_shared<Mailbox>();
  auto att = attach(client_id, token, mailbox);
  return ClientSession(client_id, att.grants, std::move(att.keys), std::move(mailbox),
                       std::make_unique<InProcessTransport>(weak_from_this(), client_id),
                       std::move(clock));
}

void Broker::unregister_client(const std::string& client_id) {
  std::shared_ptr<Mailbox> mailbox;
  {
    std::lock_guard lock(mutex_);
    auto it = clients_.find(client_id);
    if (it == clients_.end()) return;
    mailbox = std::move(it->second.mailbox);
    clients_.erase(it);
  }
  if (mailbox) mailbox->close();
}

void Broker::route(const std::string& client_id, const Envelope& env) {
  std::vector<WiretapFn> taps;
  {
    std::lock_guard lock(mutex_);
    auto it = clients_.find(client_id);
    if (it == clients_.end() || !it->second.mailbox) {
      throw Error(Errc::permission_denied, "client \"" + client_id + "\" is not connected");
    }
    if (!it->second.grants.can_write(env.topic)) {
      throw Error(Errc::permission_denied,
                  "client \"" + client_id + "\" may not write " + env.topic.str());
    }
    if (env.sender != client_id) {
      throw Error(Errc::permission_denied, "sender field does not match the session");
    }
    // Pushing under the broker lock keeps per-(publisher, topic) FIFO order.
    for (auto& [id, rec] : clients_) {
      if (rec.mailbox && rec.subscriptions.count(env.topic)) rec.mailbox->push(env);
    }
    for (const auto& [id, fn] : wiretaps_) taps.push_back(fn);
  }
  for (const auto& fn : taps) fn(env);
}

void Broker::subscribe(const std::string& client_id, const TopicName& topic) {
  std::lock_guard lock(mutex_);
  auto it = clients_.find(client_id);
  if (it == clients_.end()) throw Error(Errc::not_found, "unknown client \"" + client_id + "\"");
  if (!it->second.grants.can_read(topic)) {
    throw Error(Errc::permission_denied,
                "client \"" + client_id + "\" may not read " + topic.str());
  }
  it->second.subscriptions.insert(topic);
}

void Broker::unsubscribe(const std::string& client_id, const TopicName& topic) {
  std::lock_guard lock(mutex_);
  auto it = clients_.find(client_id);
  if (it != clients_.end()) it->second.subscriptions.erase(topic);
}

TopicKey Broker::key_for(const std::string& client_id, const TopicName& topic) {
  std::lock_guard lock(mutex_);
  auto it = clients_.find(client_id);
  if (it == clients_.end()) throw Error(Errc::not_found, "unknown client \"" + client_id + "\"");
  const auto& g = it->second.grants;
  if (!g.can_read(topic) && !g.can_write(topic)) {
    throw Error(Errc::permission_denied,
                "client \"" + client_id + "\" holds no grant for " + topic.str());
  }
  return current_key_locked(topic);
}

TopicKey Broker::rotate_key(const TopicName& topic) {
  std::lock_guard lock(mutex_);
  auto& id = key_ids_.try_emplace(topic, 0).first->second;
  ++id;
  TopicKey key{topic, derive_topic_key(seed_, topic, id), id};
  for (auto& [cid, rec] : clients_) {
    if (!rec.mailbox) continue;
    if (rec.grants.system || rec.grants.keyed_topics().count(topic)) rec.mailbox->push(key);
  }
  return key;
}

std::size_t Broker::subscriber_count(const TopicName& topic) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(clients_.begin(), clients_.end(), [&](const auto& kv) {
    return kv.second.mailbox && kv.second.subscriptions.count(topic);
  }));
}

bool Broker::is_registered(const std::string& client_id) const {
  std::lock_guard lock(mutex_);
  return clients_.count(client_id) > 0;
}

std::optional<Grants> Broker::grants_of(const std::string& client_id) const {
  std::lock_guard lock(mutex_);
  auto it = clients_.find(client_id);
  if (it == clients_.end()) return std::nullopt;
  return it->second.grants;
}

std::uint64_t Broker::add_wiretap(WiretapFn fn) {
  std::lock_guard lock(mutex_);
  auto id = next_wiretap_++;
  wiretaps_[id] = std::move(fn);
  return id;
}

void Broker::remove_wiretap(std::uint64_t id) {
  std::lock_guard lock(mutex_);
  wiretaps_.erase(id);
}

}  // namespace corvid::bus
