#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corvid/bus/payload.hpp"
#include "corvid/bus/topic.hpp"

namespace corvid::bus {

inline constexpr std::size_t kKeySize = 32;
inline constexpr std::size_t kNonceSize = 12;

using KeyBytes = std::array<std::uint8_t, kKeySize>;
using Nonce = std::array<std::uint8_t, kNonceSize>;

struct TopicKey {
  TopicName topic;
  KeyBytes key_bytes{};
  std::uint64_t key_id = 1;

  bool operator==(const TopicKey&) const = default;
};

struct Envelope {
  TopicName topic;
  std::uint64_t key_id = 0;
  Nonce nonce{};
  std::vector<std::uint8_t> ciphertext;
  std::string sender;
  std::int64_t timestamp_ms = 0;

  bool operator==(const Envelope&) const = default;
};

// Remembers every nonce used per (topic, key_id) so seal() can refuse reuse.
// Thread-safe.
class NonceLedger {
 public:
  // Returns false when the nonce was already claimed.
  bool claim(const TopicName& topic, std::uint64_t key_id, const Nonce& nonce);

 private:
  std::mutex mutex_;
  std::map<std::pair<TopicName, std::uint64_t>, std::set<Nonce>> used_;
};

Nonce random_nonce();
KeyBytes random_key();

// Derives the key for (topic, key_id) from the authority seed (BLAKE2b keyed
// hash). Seed must be 16..64 bytes.
KeyBytes derive_topic_key(std::span<const std::uint8_t> seed, const TopicName& topic,
                          std::uint64_t key_id);

// Authenticated encryption of the canonical payload bytes. The envelope
// header (topic, key_id, sender, timestamp) is bound as associated data.
// Throws Error(nonce_reuse) if the ledger has seen the nonce before, and
// Error(payload_too_large) past kMaxPayloadBytes.
Envelope seal(const TopicKey& key, const Payload& payload, const Nonce& nonce,
              NonceLedger& ledger, std::string sender, std::int64_t timestamp_ms);

// Throws Error(key_id_mismatch) when the envelope names another key_id, and
// Error(auth_failure) for any tampering or wrong key material.
Payload open(const TopicKey& key, const Envelope& envelope);

}  // namespace corvid::bus
