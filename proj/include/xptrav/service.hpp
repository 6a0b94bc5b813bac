// Copyright 2026 The xptrav Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XPTRAV_SERVICE_HPP
#define XPTRAV_SERVICE_HPP

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xptrav/session.hpp"

namespace xptrav {

// ─── Wire protocol ──────────────────────────────────────────────────────────

/// Malformed or unknown client frame.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClientMessage {
  enum class Type { drive, toggle_learning, reset, snapshot };
  Type type = Type::drive;
  DriveCommand drive;
  bool on = false;
};

/// Parses one client text frame. Unknown fields are ignored.
ClientMessage parse_client_message(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// round(score * 255) after clamping to [0, 1]; unknown cells map to 0.
std::uint8_t quantize_score(float score);

std::string state_frame(std::uint64_t tick, const Pose& pose, std::size_t centers, bool learning);
std::string world_meta_frame(const GridMap& map);
/// Rows of `layer` in the given order, quantized and concatenated.
std::string layer_frame(std::string_view name, const Layer& layer, std::span<const int> rows);
/// RGB8 row-major color raster; unobserved cells are black.
std::string color_frame(const GridMap& map);
std::string error_frame(std::string_view message);

// ─── Teleoperation core ─────────────────────────────────────────────────────

struct ServiceConfig {
  std::filesystem::path world_path;
  int port = 8765;
  /// Ticks between sweeps in the live loop.
  int sweep_period = 10;
  bool learning = true;
  std::optional<std::uint64_t> seed;
  double dt = kDefaultTickDt;
  std::filesystem::path snapshot_dir = "snapshots";
  /// Remaining pipeline knobs; dt, sweep period, learning and seed above win.
  PipelineConfig pipeline;

  void validate() const;
  PipelineConfig resolved_pipeline() const;
};

using ClientId = std::uint64_t;

/// Frames produced by one step of the core.
struct Outbox {
  std::vector<std::string> broadcast;
  /// Replies for the client that sent the message.
  std::vector<std::string> reply;
};

/// Transport-independent live session: latest drive command wins, a
/// disconnect zeroes it, sweeps run on a frozen copy in the background and
/// land at a tick boundary. All methods must be called from one thread.
class TeleopCore {
 public:
  TeleopCore(World world, PipelineConfig cfg, std::filesystem::path snapshot_dir);
  ~TeleopCore();
  TeleopCore(const TeleopCore&) = delete;
  TeleopCore& operator=(const TeleopCore&) = delete;

  /// Frames a newly connected client needs to render the current state.
  std::vector<std::string> on_connect(ClientId client);
  void on_disconnect(ClientId client);
  Outbox on_message(ClientId client, std::string_view text);

  /// One tick of the loop; broadcasts state and any finished sweep.
  Outbox tick();

  /// Waits for a running sweep and installs its layer.
  Outbox settle();

  /// Settles, then writes a run directory under `snapshot_dir`; returns it.
  std::filesystem::path snapshot();

  const Session& session() const { return session_; }
  DriveCommand command() const { return command_; }
  bool sweep_running() const { return pending_.valid(); }
  std::uint64_t sweeps_completed() const { return sweeps_completed_; }

 private:
  Outbox collect(bool wait);
  std::vector<std::string> map_frames() const;

  Session session_;
  std::filesystem::path snapshot_dir_;
  DriveCommand command_;
  std::future<Layer> pending_;
  std::uint64_t sweeps_completed_ = 0;
};

/// Runs the websocket server until `stop` becomes true or the process is
/// signalled. Throws IoError when the port cannot be bound. `on_listening`
/// receives the bound port (useful with port 0) before the loop starts.
void serve(const ServiceConfig& cfg, std::atomic<bool>* stop = nullptr,
           const std::function<void(int)>& on_listening = {});

}  // namespace xptrav

#endif  // XPTRAV_SERVICE_HPP
