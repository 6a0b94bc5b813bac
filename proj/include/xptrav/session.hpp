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

#ifndef XPTRAV_SESSION_HPP
#define XPTRAV_SESSION_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xptrav/encoder.hpp"
#include "xptrav/gridmap.hpp"
#include "xptrav/memory.hpp"
#include "xptrav/traverse.hpp"
#include "xptrav/worldsim.hpp"

namespace xptrav {

inline constexpr double kDefaultTickDt = 0.1;

/// Everything that shapes a session apart from the world and the commands.
struct PipelineConfig {
  TraverseConfig traverse;
  EncoderConfig encoder;
  double threshold = CfTree::kDefaultThreshold;
  int branching = CfTree::kDefaultBranching;
  double dt = kDefaultTickDt;
  bool learning = true;
  /// Ticks between traversability sweeps; 0 disables periodic sweeps.
  int sweep_period = 0;
  /// Sensor noise seed; unset means the world seed.
  std::optional<std::uint64_t> seed;

  void validate() const;
  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);
};

/// One timed drive command of a script: applied from `t_start` until the
/// next line's `t_start`. The last line marks the end of the session.
struct ScriptLine {
  double t_start = 0.0;
  double v = 0.0;
  double w = 0.0;
};
using Script = std::vector<ScriptLine>;

/// `.cmds` text: one `t_start v w` per line; `#` starts a comment.
Script parse_script(std::istream& in);
void write_script(std::ostream& out, const Script& script);
Script load_script(const std::filesystem::path& path);
void save_script(const Script& script, const std::filesystem::path& path);

/// Number of ticks a script runs for at the given dt.
std::uint64_t script_ticks(const Script& script, double dt);
/// Command in force during tick `tick` (1-based; tick k covers [(k-1)dt, k dt)).
DriveCommand script_command(const Script& script, std::uint64_t tick, double dt);

struct LogRecord {
  std::uint64_t tick = 0;
  double time = 0.0;
  Pose pose;
  std::size_t inserts = 0;  ///< cumulative accepted experience inserts
  std::size_t centers = 0;

  std::string to_json() const;
  static LogRecord from_json(const std::string& line);
  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

void write_session_log(std::ostream& out, const std::vector<LogRecord>& log);
std::vector<LogRecord> read_session_log(std::istream& in);

struct Snapshot {
  GridMap map;
  CfTree memory;
};

/// Frozen copy of what a sweep needs; runs independently of the session.
struct SweepJob {
  GridMap map;
  CfTree memory;
  TraverseConfig cfg;
  std::uint64_t tick = 0;

  /// Runs evaluate_map on the copy and returns the resulting trav layer.
  Layer run(const Encoder& encoder, SweepStats* stats = nullptr);
};

/// One robot driving through one world. Ticks are strictly sequential:
/// step, sense, fuse points, sample experience, and every `sweep_period`
/// ticks a traversability sweep. Construction takes the tick-0 scan.
class Session {
 public:
  Session(World world, PipelineConfig cfg);

  const World& world() const { return world_; }
  const PipelineConfig& config() const { return cfg_; }
  const Encoder& encoder() const { return encoder_; }
  const GridMap& map() const { return map_; }
  const CfTree& memory() const { return memory_; }
  const RobotState& robot() const { return robot_; }
  std::uint64_t tick() const { return tick_; }
  std::size_t inserts() const { return tracker_.inserted(); }
  bool learning() const { return learning_; }
  void set_learning(bool on) { learning_ = on; }
  const std::vector<LogRecord>& log() const { return log_; }

  /// Advances one tick and runs a due sweep inline.
  void tick(DriveCommand cmd);

  /// Advances one tick without sweeping; returns true when a sweep is due.
  bool advance(DriveCommand cmd);
  /// Copy of the state a due sweep reads.
  SweepJob prepare_sweep() const;
  /// Installs the trav layer produced by a job.
  void apply_sweep(Layer trav);

  Snapshot snapshot() const { return {map_, memory_}; }
  /// Back to tick 0 with an empty map and memory.
  void reset();

 private:
  void sense_and_learn();
  void record();

  World world_;
  PipelineConfig cfg_;
  Encoder encoder_;
  GridMap map_;
  CfTree memory_;
  ExperienceTracker tracker_;
  SimRng rng_;
  RobotState robot_;
  std::uint64_t tick_ = 0;
  bool learning_ = true;
  std::vector<LogRecord> log_;
};

struct RunHooks {
  /// Ticks at which a map/memory copy is kept (after that tick completes).
  std::vector<std::uint64_t> snapshot_ticks;
};

struct RunResult {
  std::vector<LogRecord> log;
  std::map<std::uint64_t, Snapshot> snapshots;
  Snapshot final;
};

/// Drives a fresh session through the script.
RunResult run_script(const World& world, const Script& script, const PipelineConfig& cfg,
                     const RunHooks& hooks = {});

// ─── Run directories ────────────────────────────────────────────────────────

/// Layout: world.tws, script.cmds, run.json, session.log, map.tgm,
/// memory.tmm, snapshots/tick_<k>.{tgm,tmm}.
struct RunDir {
  std::filesystem::path root;

  std::filesystem::path world() const { return root / "world.tws"; }
  std::filesystem::path script() const { return root / "script.cmds"; }
  std::filesystem::path config() const { return root / "run.json"; }
  std::filesystem::path log() const { return root / "session.log"; }
  std::filesystem::path map() const { return root / "map.tgm"; }
  std::filesystem::path memory() const { return root / "memory.tmm"; }
  std::filesystem::path snapshot_map(std::uint64_t tick) const;
  std::filesystem::path snapshot_memory(std::uint64_t tick) const;
};

/// Writes a run directory; `script` may be null for interactive sessions.
void save_run(const RunDir& dir, const WorldSpec& world, const Script* script, const PipelineConfig& cfg,
              const RunResult& result);

/// Reads a run directory back; snapshots are loaded for every file present.
struct LoadedRun {
  WorldSpec world;
  std::optional<Script> script;
  PipelineConfig config;
  RunResult result;
};
LoadedRun load_run(const RunDir& dir);

}  // namespace xptrav

#endif  // XPTRAV_SESSION_HPP
