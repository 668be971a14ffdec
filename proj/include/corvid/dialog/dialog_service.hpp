#pragma once

#include <chrono>
#include <functional>
#include <string>

#include "corvid/bus/broker.hpp"
#include "corvid/dialog/dialog_manager.hpp"

namespace corvid::dialog {

using LogSink = std::function<void(const std::string&)>;

// Binds a DialogManager to a bus session (system grant). Bus events and ticks
// are fed to the manager in arrival order from the thread calling poll().
class DialogService {
 public:
  DialogService(bus::ClientSession session, DialogConfig config, Clock clock, LogSink log = {});

  DialogManager& manager() { return manager_; }
  bus::ClientSession& session() { return session_; }

  // Handles queued traffic, ticks, and publishes what the manager produced.
  // Returns the number of events handled plus messages published.
  std::size_t poll();
  std::size_t poll(std::chrono::milliseconds wait);

  // Payloads that could not be decoded.
  std::uint64_t malformed() const { return malformed_; }

 private:
  void subscribe();
  std::size_t flush();

  bus::ClientSession session_;
  Clock clock_;
  DialogManager manager_;
  LogSink log_;
  std::uint64_t malformed_ = 0;
};

}  // namespace corvid::dialog
