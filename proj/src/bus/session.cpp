#include <map>

#include "corvid/bus/broker.hpp"
#include "corvid/common/error.hpp"

namespace corvid::bus {

struct ClientSession::State {
  std::string client_id;
  Grants grants;
  std::map<std::pair<TopicName, std::uint64_t>, TopicKey> keyring;
  std::map<TopicName, std::uint64_t> current_key_id;
  std::shared_ptr<Mailbox> mailbox;
  std::unique_ptr<Transport> transport;
  Clock clock;
  NonceLedger ledger;

  struct Subscription {
    std::uint64_t id;
    Handler handler;
  };
  std::map<TopicName, Subscription> subscriptions;
  std::uint64_t next_subscription = 1;
  std::uint64_t dropped = 0;
  std::vector<std::string> handler_errors;
  bool closed = false;

  void add_key(const TopicKey& key) {
    keyring.insert_or_assign({key.topic, key.key_id}, key);
    auto& cur = current_key_id[key.topic];
    cur = std::max(cur, key.key_id);
  }

  const TopicKey* find_key(const TopicName& topic, std::uint64_t key_id) const {
    auto it = keyring.find({topic, key_id});
    return it == keyring.end() ? nullptr : &it->second;
  }

  TopicKey signing_key(const TopicName& topic) {
    auto it = current_key_id.find(topic);
    if (it == current_key_id.end()) {
      // System grants fetch keys lazily from the authority.
      add_key(transport->request_key(topic));
      it = current_key_id.find(topic);
    }
    return keyring.at({topic, it->second});
  }

  void ensure_open() const {
    if (closed) throw Error(Errc::unreachable, "session \"" + client_id + "\" is closed");
  }
};

ClientSession::ClientSession(std::string client_id, Grants grants, std::vector<TopicKey> keys,
                             std::shared_ptr<Mailbox> mailbox,
                             std::unique_ptr<Transport> transport, Clock clock)
    : state_(std::make_unique<State>()) {
  state_->client_id = std::move(client_id);
  state_->grants = std::move(grants);
  for (const auto& k : keys) state_->add_key(k);
  state_->mailbox = std::move(mailbox);
  state_->transport = std::move(transport);
  state_->clock = clock ? std::move(clock) : Clock(system_now_ms);
}

ClientSession::~ClientSession() { close(); }
ClientSession::ClientSession(ClientSession&&) noexcept = default;

ClientSession& ClientSession::operator=(ClientSession&& other) noexcept {
  if (this != &other) {
    close();
    state_ = std::move(other.state_);
  }
  return *this;
}

const std::string& ClientSession::client_id() const { return state_->client_id; }
const Grants& ClientSession::grants() const { return state_->grants; }

void ClientSession::publish(const TopicName& topic, const Payload& payload) {
  auto& s = *state_;
  s.ensure_open();
  if (!s.grants.can_write(topic)) {
    throw Error(Errc::permission_denied,
                "client \"" + s.client_id + "\" may not write " + topic.str());
  }
  const auto key = s.signing_key(topic);
  const auto now = s.clock();
  // A random 96-bit nonce colliding is astronomically unlikely; the ledger
  // still guarantees it, so retry rather than fail.
  for (int attempt = 0;; ++attempt) {
    try {
      auto env = seal(key, payload, random_nonce(), s.ledger, s.client_id, now);
      s.transport->publish(env);
      return;
    } catch (const Error& e) {
      if (e.code() != Errc::nonce_reuse || attempt > 8) throw;
    }
  }
}

SubscriptionHandle ClientSession::subscribe(const TopicName& topic, Handler handler) {
  auto& s = *state_;
  s.ensure_open();
  if (!s.grants.can_read(topic)) {
    throw Error(Errc::permission_denied,
                "client \"" + s.client_id + "\" may not read " + topic.str());
  }
  if (auto it = s.subscriptions.find(topic); it != s.subscriptions.end()) {
    return SubscriptionHandle{it->second.id, topic};
  }
  if (s.grants.system && !s.current_key_id.count(topic)) {
    s.add_key(s.transport->request_key(topic));
  }
  s.transport->subscribe(topic);
  const auto id = s.next_subscription++;
  s.subscriptions.emplace(topic, State::Subscription{id, std::move(handler)});
  return SubscriptionHandle{id, topic};
}

void ClientSession::unsubscribe(const SubscriptionHandle& handle) {
  auto& s = *state_;
  auto it = s.subscriptions.find(handle.topic);
  if (it == s.subscriptions.end() || it->second.id != handle.id) return;
  s.subscriptions.erase(it);
  if (!s.closed) s.transport->unsubscribe(handle.topic);
}

std::size_t ClientSession::dispatch() {
  auto& s = *state_;
  if (!s.mailbox) return 0;
  std::size_t calls = 0;
  for (auto& item : s.mailbox->take_all()) {
    if (auto* key = std::get_if<TopicKey>(&item)) {
      s.add_key(*key);
      continue;
    }
    const auto& env = std::get<Envelope>(item);
    auto sub = s.subscriptions.find(env.topic);
    if (sub == s.subscriptions.end()) continue;  // unsubscribed while queued
    const TopicKey* key = s.find_key(env.topic, env.key_id);
    if (!key && s.grants.system) {
      try {
        s.add_key(s.transport->request_key(env.topic));
      } catch (const Error&) {
      }
      key = s.find_key(env.topic, env.key_id);
    }
    if (!key) {
      ++s.dropped;
      continue;
    }
    Message msg{env.topic, env.sender, env.timestamp_ms, {}};
    try {
      msg.payload = open(*key, env);
    } catch (const Error&) {
      ++s.dropped;
      continue;
    }
    // Copy: the handler may unsubscribe itself.
    auto handler = sub->second.handler;
    ++calls;
    try {
      handler(msg);
    } catch (const std::exception& e) {
      s.handler_errors.push_back(env.topic.str() + ": " + e.what());
    }
  }
  return calls;
}

std::size_t ClientSession::wait_and_dispatch(std::chrono::milliseconds timeout) {
  if (!state_->mailbox) return 0;
  state_->mailbox->wait(timeout);
  return dispatch();
}

std::vector<TopicKey> ClientSession::key_material() const {
  std::vector<TopicKey> out;
  for (const auto& [k, key] : state_->keyring) out.push_back(key);
  return out;
}

TopicKey ClientSession::request_key(const TopicName& topic) {
  auto& s = *state_;
  s.ensure_open();
  if (!s.grants.can_read(topic) && !s.grants.can_write(topic)) {
    throw Error(Errc::permission_denied,
                "client \"" + s.client_id + "\" holds no grant for " + topic.str());
  }
  auto key = s.transport->request_key(topic);
  s.add_key(key);
  return key;
}

std::size_t ClientSession::subscriber_count(const TopicName& topic) {
  auto& s = *state_;
  s.ensure_open();
  if (!s.grants.system) {
    throw Error(Errc::permission_denied, "subscriber counts need a system grant");
  }
  return s.transport->subscriber_count(topic);
}

std::uint64_t ClientSession::dropped() const { return state_->dropped; }

const std::vector<std::string>& ClientSession::handler_errors() const {
  return state_->handler_errors;
}

bool ClientSession::closed() const {
  return !state_ || state_->closed || (state_->mailbox && state_->mailbox->closed());
}

void ClientSession::close() {
  if (!state_ || state_->closed) return;
  state_->closed = true;
  if (state_->transport) state_->transport->close();
  if (state_->mailbox) state_->mailbox->close();
}

}  // namespace corvid::bus
