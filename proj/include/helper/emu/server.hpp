#pragma once

#include <functional>
#include <memory>
#include <string>

#include "helper/sim/scenario.hpp"

namespace helper::emu {

struct ServeOptions {
  std::string address = "127.0.0.1";
  /// 0 picks a free port; start() returns the one bound.
  unsigned short port = 8765;
  /// Emulated seconds per wall-clock second.
  double time_scale = 1.0;
  /// Wall-clock interval between world steps, seconds.
  double step_interval_s = 0.02;
  /// Diagnostic lines (connections, errors); may be empty.
  std::function<void(const std::string&)> log;
};

/// WebSocket host for one emulated world. The world lives on its own
/// thread; client I/O runs on an I/O thread and talks to the world only
/// through a command queue and broadcast frames.
class EmuServer {
 public:
  EmuServer(sim::Scenario sc, ServeOptions options);
  ~EmuServer();
  EmuServer(const EmuServer&) = delete;
  EmuServer& operator=(const EmuServer&) = delete;

  /// Binds, starts the I/O and world threads, returns the bound port.
  unsigned short start();
  /// Stops accepting, closes clients and joins the threads. Idempotent.
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  /// The session so far as a replayable scenario (served by the world thread).
  sim::Scenario replay_scenario();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace helper::emu
