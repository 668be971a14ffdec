#include "corvid/bus/crypto.hpp"

#include <sodium.h>

#include <string>

#include "corvid/common/error.hpp"

namespace corvid::bus {

static_assert(crypto_aead_chacha20poly1305_ietf_KEYBYTES == kKeySize);
static_assert(crypto_aead_chacha20poly1305_ietf_NPUBBYTES == kNonceSize);

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error(Errc::precondition, "libsodium failed to initialize");
}

std::string associated_data(const TopicName& topic, std::uint64_t key_id,
                            const std::string& sender, std::int64_t timestamp_ms) {
  std::string ad = topic.str();
  ad.push_back('\0');
  ad += std::to_string(key_id);
  ad.push_back('\0');
  ad += sender;
  ad.push_back('\0');
  ad += std::to_string(timestamp_ms);
  return ad;
}

}  // namespace

bool NonceLedger::claim(const TopicName& topic, std::uint64_t key_id, const Nonce& nonce) {
  std::lock_guard lock(mutex_);
  return used_[{topic, key_id}].insert(nonce).second;
}

Nonce random_nonce() {
  ensure_sodium();
  Nonce n;
  randombytes_buf(n.data(), n.size());
  return n;
}

KeyBytes random_key() {
  ensure_sodium();
  KeyBytes k;
  crypto_aead_chacha20poly1305_ietf_keygen(k.data());
  return k;
}

KeyBytes derive_topic_key(std::span<const std::uint8_t> seed, const TopicName& topic,
                          std::uint64_t key_id) {
  ensure_sodium();
  if (seed.size() < crypto_generichash_KEYBYTES_MIN ||
      seed.size() > crypto_generichash_KEYBYTES_MAX) {
    throw Error(Errc::malformed_config, "key seed must be 16..64 bytes");
  }
  std::string message("corvid-topic-key");
  message.push_back('\0');
  message += topic.str();
  message.push_back('\0');
  message += std::to_string(key_id);
  KeyBytes out;
  crypto_generichash(out.data(), out.size(), reinterpret_cast<const unsigned char*>(message.data()),
                     message.size(), seed.data(), seed.size());
  return out;
}

Envelope seal(const TopicKey& key, const Payload& payload, const Nonce& nonce,
              NonceLedger& ledger, std::string sender, std::int64_t timestamp_ms) {
  ensure_sodium();
  const std::string plain = payload.serialize();
  if (plain.size() > kMaxPayloadBytes) {
    throw Error(Errc::payload_too_large,
                "payload of " + std::to_string(plain.size()) + " bytes exceeds 1 MiB");
  }
  if (!ledger.claim(key.topic, key.key_id, nonce)) {
    throw Error(Errc::nonce_reuse, "nonce already used for topic " + key.topic.str());
  }
  Envelope env{key.topic, key.key_id, nonce, {}, std::move(sender), timestamp_ms};
  const auto ad = associated_data(env.topic, env.key_id, env.sender, env.timestamp_ms);
  env.ciphertext.resize(plain.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
  unsigned long long written = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(
      env.ciphertext.data(), &written, reinterpret_cast<const unsigned char*>(plain.data()),
      plain.size(), reinterpret_cast<const unsigned char*>(ad.data()), ad.size(), nullptr,
      nonce.data(), key.key_bytes.data());
  env.ciphertext.resize(written);
  return env;
}

Payload open(const TopicKey& key, const Envelope& envelope) {
  ensure_sodium();
  // A key for another topic is not rejected up front: the associated data
  // carries the envelope's topic, so authentication fails on its own.
  if (envelope.key_id != key.key_id) {
    throw Error(Errc::key_id_mismatch, "envelope sealed under key #" +
                                           std::to_string(envelope.key_id) + ", key is #" +
                                           std::to_string(key.key_id));
  }
  if (envelope.ciphertext.size() < crypto_aead_chacha20poly1305_ietf_ABYTES) {
    throw Error(Errc::auth_failure, "ciphertext shorter than the authentication tag");
  }
  const auto ad =
      associated_data(envelope.topic, envelope.key_id, envelope.sender, envelope.timestamp_ms);
  std::string plain(envelope.ciphertext.size() - crypto_aead_chacha20poly1305_ietf_ABYTES, '\0');
  unsigned long long written = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(
          reinterpret_cast<unsigned char*>(plain.data()), &written, nullptr,
          envelope.ciphertext.data(), envelope.ciphertext.size(),
          reinterpret_cast<const unsigned char*>(ad.data()), ad.size(), envelope.nonce.data(),
          key.key_bytes.data()) != 0) {
    throw Error(Errc::auth_failure, "envelope failed authentication on " + envelope.topic.str());
  }
  plain.resize(written);
  return Payload::deserialize(plain);
}

}  // namespace corvid::bus
