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

#include "xptrav/session.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "xptrav/binary_io.hpp"

namespace xptrav {

namespace {

using Json = nlohmann::ordered_json;

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

// ─── PipelineConfig ─────────────────────────────────────────────────────────

void PipelineConfig::validate() const {
  traverse.validate();
  if (!(threshold > 0.0)) throw std::invalid_argument("memory threshold must be positive");
  if (branching < 2) throw std::invalid_argument("branching factor must be at least 2");
  if (!(dt > 0.0)) throw std::invalid_argument("tick dt must be positive");
  if (sweep_period < 0) throw std::invalid_argument("sweep period must be >= 0");
}

std::string PipelineConfig::to_json() const {
  Json t;
  t["window"] = traverse.window;
  t["stride"] = traverse.stride;
  t["distance_scale"] = optional_json(traverse.distance_scale);
  t["kernel_floor"] = traverse.kernel_floor;
  t["coverage_min"] = traverse.coverage_min;
  t["epsilon"] = traverse.epsilon;
  t["experience_spacing"] = optional_json(traverse.experience_spacing);
  if (traverse.roi) {
    const CellRect& r = *traverse.roi;
    t["roi"] = Json::array({r.row0, r.col0, r.rows, r.cols});
  } else {
    t["roi"] = nullptr;
  }
  t["threads"] = traverse.threads;
  Json e;
  e["kind"] = encoder.kind == EncoderKind::conv ? "conv" : "analytic";
  e["elevation_scale"] = encoder.elevation_scale;
  e["weights"] = encoder.weights_path ? Json(encoder.weights_path->string()) : Json(nullptr);
  Json j;
  j["traverse"] = t;
  j["encoder"] = e;
  j["threshold"] = threshold;
  j["branching"] = branching;
  j["dt"] = dt;
  j["learning"] = learning;
  j["sweep_period"] = sweep_period;
  j["seed"] = optional_json(seed);
  return j.dump(2) + "\n";
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    PipelineConfig cfg;
    if (j.contains("traverse")) {
      const Json& t = j["traverse"];
      cfg.traverse.window = t.value("window", cfg.traverse.window);
      cfg.traverse.stride = t.value("stride", cfg.traverse.stride);
      cfg.traverse.distance_scale = optional_from<double>(t, "distance_scale");
      cfg.traverse.kernel_floor = t.value("kernel_floor", cfg.traverse.kernel_floor);
      cfg.traverse.coverage_min = t.value("coverage_min", cfg.traverse.coverage_min);
      cfg.traverse.epsilon = t.value("epsilon", cfg.traverse.epsilon);
      cfg.traverse.experience_spacing = optional_from<double>(t, "experience_spacing");
      if (t.contains("roi") && !t["roi"].is_null()) {
        const auto v = t["roi"].get<std::vector<int>>();
        if (v.size() != 4) throw FormatError("roi must be [row0, col0, rows, cols]");
        cfg.traverse.roi = CellRect{v[0], v[1], v[2], v[3]};
      }
      cfg.traverse.threads = t.value("threads", cfg.traverse.threads);
    }
    if (j.contains("encoder")) {
      const Json& e = j["encoder"];
      const std::string kind = e.value("kind", std::string("analytic"));
      if (kind == "conv") {
        cfg.encoder.kind = EncoderKind::conv;
      } else if (kind != "analytic") {
        throw FormatError("unknown encoder kind '" + kind + "'");
      }
      cfg.encoder.elevation_scale = e.value("elevation_scale", cfg.encoder.elevation_scale);
      if (auto w = optional_from<std::string>(e, "weights")) cfg.encoder.weights_path = *w;
    }
    cfg.threshold = j.value("threshold", cfg.threshold);
    cfg.branching = j.value("branching", cfg.branching);
    cfg.dt = j.value("dt", cfg.dt);
    cfg.learning = j.value("learning", cfg.learning);
    cfg.sweep_period = j.value("sweep_period", cfg.sweep_period);
    cfg.seed = optional_from<std::uint64_t>(j, "seed");
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("run config: ") + e.what());
  }
}

// ─── Scripts ────────────────────────────────────────────────────────────────

Script parse_script(std::istream& in) {
  Script script;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    ScriptLine s;
    if (!(fields >> s.t_start)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw FormatError("script line " + std::to_string(number) + ": expected `t_start v w`");
    }
    std::string extra;
    if (!(fields >> s.v >> s.w) || (fields >> extra)) {
      throw FormatError("script line " + std::to_string(number) + ": expected `t_start v w`");
    }
    if (!std::isfinite(s.t_start) || !std::isfinite(s.v) || !std::isfinite(s.w) || s.t_start < 0.0) {
      throw FormatError("script line " + std::to_string(number) + ": values must be finite, t_start >= 0");
    }
    if (!script.empty() && s.t_start < script.back().t_start) {
      throw FormatError("script line " + std::to_string(number) + ": t_start goes backwards");
    }
    script.push_back(s);
  }
  return script;
}

void write_script(std::ostream& out, const Script& script) {
  const auto shortest = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  for (const ScriptLine& s : script) {
    out << shortest(s.t_start) << ' ' << shortest(s.v) << ' ' << shortest(s.w) << '\n';
  }
}

Script load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_script(in);
}

void save_script(const Script& script, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_script(out, script);
}

std::uint64_t script_ticks(const Script& script, double dt) {
  if (script.empty()) return 0;
  return static_cast<std::uint64_t>(std::llround(script.back().t_start / dt));
}

DriveCommand script_command(const Script& script, std::uint64_t tick, double dt) {
  const double t = static_cast<double>(tick - 1) * dt + 1e-9;
  DriveCommand cmd;
  for (const ScriptLine& s : script) {
    if (s.t_start > t) break;
    cmd = {s.v, s.w};
  }
  return cmd;
}

// ─── Session log ────────────────────────────────────────────────────────────

std::string LogRecord::to_json() const {
  Json j;
  j["tick"] = tick;
  j["t"] = time;
  j["pose"] = Json::array({pose.x, pose.y, pose.theta});
  j["inserts"] = inserts;
  j["centers"] = centers;
  return j.dump();
}

LogRecord LogRecord::from_json(const std::string& line) {
  try {
    const Json j = Json::parse(line);
    LogRecord r;
    r.tick = j.at("tick").get<std::uint64_t>();
    r.time = j.at("t").get<double>();
    const auto p = j.at("pose").get<std::vector<double>>();
    if (p.size() != 3) throw FormatError("session log: pose must be [x, y, theta]");
    r.pose = {p[0], p[1], p[2]};
    r.inserts = j.at("inserts").get<std::size_t>();
    r.centers = j.at("centers").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("session log: ") + e.what());
  }
}

void write_session_log(std::ostream& out, const std::vector<LogRecord>& log) {
  for (const LogRecord& r : log) out << r.to_json() << '\n';
}

std::vector<LogRecord> read_session_log(std::istream& in) {
  std::vector<LogRecord> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    log.push_back(LogRecord::from_json(line));
  }
  return log;
}

// ─── Session ────────────────────────────────────────────────────────────────

Layer SweepJob::run(const Encoder& encoder, SweepStats* stats) {
  const SweepStats s = evaluate_map(map, memory, encoder, cfg);
  if (stats != nullptr) *stats = s;
  return map.layer(layer::trav);
}

Session::Session(World world, PipelineConfig cfg)
    : world_(std::move(world)),
      cfg_(std::move(cfg)),
      encoder_(cfg_.encoder),
      map_(world_.blank_map()),
      memory_(cfg_.threshold, cfg_.branching),
      tracker_(cfg_.traverse),
      rng_(cfg_.seed.value_or(world_.spec().seed)),
      learning_(cfg_.learning) {
  cfg_.validate();
  robot_.pose = world_.spec().start;
  sense_and_learn();
  record();
}

void Session::reset() {
  map_ = world_.blank_map();
  memory_ = CfTree(cfg_.threshold, cfg_.branching);
  tracker_ = ExperienceTracker(cfg_.traverse);
  rng_ = SimRng(cfg_.seed.value_or(world_.spec().seed));
  robot_ = RobotState{};
  robot_.pose = world_.spec().start;
  tick_ = 0;
  learning_ = cfg_.learning;
  log_.clear();
  sense_and_learn();
  record();
}

void Session::sense_and_learn() {
  const auto points = sense(world_, robot_, world_.spec().sensor, rng_);
  map_.ingest_points(points);
  if (learning_) tracker_.observe(map_, memory_, encoder_, {robot_.pose.x, robot_.pose.y});
}

void Session::record() {
  log_.push_back({tick_, robot_.time, robot_.pose, tracker_.inserted(), memory_.subcluster_count()});
}

bool Session::advance(DriveCommand cmd) {
  robot_ = step_robot(robot_, cmd, cfg_.dt, world_);
  ++tick_;
  sense_and_learn();
  record();
  return cfg_.sweep_period > 0 && tick_ % static_cast<std::uint64_t>(cfg_.sweep_period) == 0 &&
         !memory_.empty();
}

SweepJob Session::prepare_sweep() const { return {map_, memory_, cfg_.traverse, tick_}; }

void Session::apply_sweep(Layer trav) {
  if (trav.rows() != map_.rows() || trav.cols() != map_.cols()) {
    throw std::invalid_argument("sweep layer does not match the map");
  }
  map_.layer(layer::trav) = std::move(trav);
}

void Session::tick(DriveCommand cmd) {
  if (advance(cmd)) evaluate_map(map_, memory_, encoder_, cfg_.traverse);
}

RunResult run_script(const World& world, const Script& script, const PipelineConfig& cfg,
                     const RunHooks& hooks) {
  Session session(world, cfg);
  RunResult result{{}, {}, session.snapshot()};
  const auto wanted = [&](std::uint64_t t) {
    return std::find(hooks.snapshot_ticks.begin(), hooks.snapshot_ticks.end(), t) !=
           hooks.snapshot_ticks.end();
  };
  if (wanted(0)) result.snapshots.emplace(0, session.snapshot());
  const std::uint64_t ticks = script_ticks(script, cfg.dt);
  for (std::uint64_t k = 1; k <= ticks; ++k) {
    session.tick(script_command(script, k, cfg.dt));
    if (wanted(k)) result.snapshots.emplace(k, session.snapshot());
  }
  result.log = session.log();
  result.final = session.snapshot();
  return result;
}

// ─── Run directories ────────────────────────────────────────────────────────

std::filesystem::path RunDir::snapshot_map(std::uint64_t tick) const {
  return root / "snapshots" / ("tick_" + std::to_string(tick) + ".tgm");
}

std::filesystem::path RunDir::snapshot_memory(std::uint64_t tick) const {
  return root / "snapshots" / ("tick_" + std::to_string(tick) + ".tmm");
}

void save_run(const RunDir& dir, const WorldSpec& world, const Script* script, const PipelineConfig& cfg,
              const RunResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir.root / "snapshots", ec);
  if (ec) throw IoError("cannot create " + dir.root.string() + ": " + ec.message());
  save_world_spec(world, dir.world());
  if (script != nullptr) save_script(*script, dir.script());
  {
    std::ofstream out(dir.config());
    if (!out) throw IoError("cannot open " + dir.config().string() + " for writing");
    out << cfg.to_json();
  }
  {
    std::ofstream out(dir.log());
    if (!out) throw IoError("cannot open " + dir.log().string() + " for writing");
    write_session_log(out, result.log);
  }
  save_map(result.final.map, dir.map());
  save_memory(result.final.memory, dir.memory());
  for (const auto& [tick, snap] : result.snapshots) {
    save_map(snap.map, dir.snapshot_map(tick));
    save_memory(snap.memory, dir.snapshot_memory(tick));
  }
}

LoadedRun load_run(const RunDir& dir) {
  if (!std::filesystem::is_directory(dir.root)) throw IoError("not a run directory: " + dir.root.string());
  LoadedRun run{load_world_spec(dir.world()), std::nullopt, {}, {{}, {}, {load_map(dir.map()), load_memory(dir.memory())}}};
  if (std::filesystem::exists(dir.script())) run.script = load_script(dir.script());
  {
    std::ifstream in(dir.config());
    if (!in) throw IoError("cannot open " + dir.config().string());
    std::stringstream buf;
    buf << in.rdbuf();
    run.config = PipelineConfig::from_json(buf.str());
  }
  {
    std::ifstream in(dir.log());
    if (!in) throw IoError("cannot open " + dir.log().string());
    run.result.log = read_session_log(in);
  }
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir.root / "snapshots", ec)) {
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".tgm" || name.rfind("tick_", 0) != 0) continue;
    const std::uint64_t tick = std::stoull(name.substr(5));
    if (!std::filesystem::exists(dir.snapshot_memory(tick))) continue;
    run.result.snapshots.emplace(tick, Snapshot{load_map(dir.snapshot_map(tick)), load_memory(dir.snapshot_memory(tick))});
  }
  return run;
}

}  // namespace xptrav
