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

#include "xptrav/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <boost/beast/core/detail/base64.hpp>

#include "json.hpp"

namespace xptrav {

namespace {

using Json = nlohmann::ordered_json;

double finite_number(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw ProtocolError(std::string("field '") + key + "' must be a number");
  }
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) throw ProtocolError(std::string("field '") + key + "' must be finite");
  return v;
}

}  // namespace

// ─── Wire protocol ──────────────────────────────────────────────────────────

ClientMessage parse_client_message(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    throw ProtocolError("frame is not valid JSON");
  }
  if (!j.is_object()) throw ProtocolError("frame must be a JSON object");
  if (!j.contains("type") || !j["type"].is_string()) throw ProtocolError("frame has no string 'type'");
  const std::string type = j["type"].get<std::string>();
  ClientMessage m;
  if (type == "drive") {
    m.type = ClientMessage::Type::drive;
    m.drive = {finite_number(j, "v"), finite_number(j, "w")};
  } else if (type == "toggle_learning") {
    m.type = ClientMessage::Type::toggle_learning;
    if (!j.contains("on") || !j["on"].is_boolean()) throw ProtocolError("field 'on' must be a boolean");
    m.on = j["on"].get<bool>();
  } else if (type == "reset") {
    m.type = ClientMessage::Type::reset;
  } else if (type == "snapshot") {
    m.type = ClientMessage::Type::snapshot;
  } else {
    throw ProtocolError("unknown message type '" + type + "'");
  }
  return m;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  namespace b64 = boost::beast::detail::base64;
  std::string_view body = text;
  for (int pad = 0; pad < 2 && !body.empty() && body.back() == '='; ++pad) body.remove_suffix(1);
  if (body.size() % 4 == 1 || (body.size() != text.size() && text.size() % 4 != 0)) {
    throw ProtocolError("invalid base64 payload");
  }
  std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
  const auto [written, read] = b64::decode(out.data(), body.data(), body.size());
  if (read != body.size()) throw ProtocolError("invalid base64 payload");
  out.resize(written);
  return out;
}

std::uint8_t quantize_score(float score) {
  if (!is_known(score)) return 0;
  return static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(score), 0.0, 1.0) * 255.0));
}

std::string state_frame(std::uint64_t tick, const Pose& pose, std::size_t centers, bool learning) {
  Json j;
  j["type"] = "state";
  j["tick"] = tick;
  j["pose"] = Json::array({pose.x, pose.y, pose.theta});
  j["centers"] = centers;
  j["learning"] = learning;
  return j.dump();
}

std::string world_meta_frame(const GridMap& map) {
  Json j;
  j["type"] = "world_meta";
  j["rows"] = map.rows();
  j["cols"] = map.cols();
  j["resolution"] = map.resolution();
  j["origin"] = Json::array({map.origin().x, map.origin().y});
  return j.dump();
}

std::string layer_frame(std::string_view name, const Layer& layer, std::span<const int> rows) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(rows.size() * static_cast<std::size_t>(layer.cols()));
  for (int r : rows) {
    const float* row = layer.row_data(r);
    for (int c = 0; c < layer.cols(); ++c) bytes.push_back(quantize_score(row[c]));
  }
  Json j;
  j["type"] = "layer";
  j["name"] = name;
  j["rows"] = std::vector<int>(rows.begin(), rows.end());
  j["data_b64"] = base64_encode(bytes);
  return j.dump();
}

std::string color_frame(const GridMap& map) {
  const Layer* channels[3] = {&map.layer(layer::color_r), &map.layer(layer::color_g), &map.layer(layer::color_b)};
  std::vector<std::uint8_t> bytes;
  bytes.reserve(map.cell_count() * 3);
  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    for (const Layer* ch : channels) bytes.push_back(quantize_score(ch->values()[i]));
  }
  Json j;
  j["type"] = "color";
  j["data_b64"] = base64_encode(bytes);
  return j.dump();
}

std::string error_frame(std::string_view message) {
  Json j;
  j["type"] = "error";
  j["msg"] = message;
  return j.dump();
}

// ─── Config ─────────────────────────────────────────────────────────────────

void ServiceConfig::validate() const {
  if (sweep_period < 1) throw std::invalid_argument("sweep period must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("tick dt must be positive");
  if (port < 0 || port > 65535) throw std::invalid_argument("port must be in [0, 65535]");
  resolved_pipeline().validate();
}

PipelineConfig ServiceConfig::resolved_pipeline() const {
  PipelineConfig p = pipeline;
  p.dt = dt;
  p.sweep_period = sweep_period;
  p.learning = learning;
  if (seed) p.seed = seed;
  return p;
}

// ─── TeleopCore ─────────────────────────────────────────────────────────────

TeleopCore::TeleopCore(World world, PipelineConfig cfg, std::filesystem::path snapshot_dir)
    : session_(std::move(world), std::move(cfg)), snapshot_dir_(std::move(snapshot_dir)) {}

TeleopCore::~TeleopCore() {
  if (pending_.valid()) pending_.wait();
}

std::vector<std::string> TeleopCore::map_frames() const {
  const GridMap& map = session_.map();
  std::vector<int> rows(static_cast<std::size_t>(map.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  return {color_frame(map), layer_frame(layer::trav, map.layer(layer::trav), rows)};
}

std::vector<std::string> TeleopCore::on_connect(ClientId) {
  std::vector<std::string> frames{world_meta_frame(session_.map())};
  for (std::string& f : map_frames()) frames.push_back(std::move(f));
  const Session& s = session_;
  frames.push_back(state_frame(s.tick(), s.robot().pose, s.memory().subcluster_count(), s.learning()));
  return frames;
}

void TeleopCore::on_disconnect(ClientId) { command_ = {}; }

Outbox TeleopCore::on_message(ClientId, std::string_view text) {
  Outbox out;
  ClientMessage m;
  try {
    m = parse_client_message(text);
  } catch (const ProtocolError& e) {
    out.reply.push_back(error_frame(e.what()));
    return out;
  }
  switch (m.type) {
    case ClientMessage::Type::drive:
      command_ = m.drive;
      break;
    case ClientMessage::Type::toggle_learning:
      session_.set_learning(m.on);
      break;
    case ClientMessage::Type::reset: {
      if (pending_.valid()) pending_.get();
      session_.reset();
      command_ = {};
      out.broadcast.push_back(world_meta_frame(session_.map()));
      for (std::string& f : map_frames()) out.broadcast.push_back(std::move(f));
      const Session& s = session_;
      out.broadcast.push_back(state_frame(s.tick(), s.robot().pose, s.memory().subcluster_count(), s.learning()));
      break;
    }
    case ClientMessage::Type::snapshot:
      try {
        Outbox settled = settle();
        out.broadcast = std::move(settled.broadcast);
        snapshot();
      } catch (const std::exception& e) {
        out.reply.push_back(error_frame(std::string("snapshot failed: ") + e.what()));
      }
      break;
  }
  return out;
}

Outbox TeleopCore::collect(bool wait) {
  Outbox out;
  if (!pending_.valid()) return out;
  if (!wait && pending_.wait_for(std::chrono::seconds(0)) != std::future_status::ready) return out;
  session_.apply_sweep(pending_.get());
  ++sweeps_completed_;
  for (std::string& f : map_frames()) out.broadcast.push_back(std::move(f));
  return out;
}

Outbox TeleopCore::settle() { return collect(true); }

Outbox TeleopCore::tick() {
  Outbox out = collect(false);
  if (session_.advance(command_)) {
    Outbox earlier = collect(true);
    for (std::string& f : earlier.broadcast) out.broadcast.push_back(std::move(f));
    pending_ = std::async(std::launch::async, [job = session_.prepare_sweep(), &enc = session_.encoder()]() mutable {
      return job.run(enc);
    });
  }
  const Session& s = session_;
  out.broadcast.push_back(state_frame(s.tick(), s.robot().pose, s.memory().subcluster_count(), s.learning()));
  return out;
}

std::filesystem::path TeleopCore::snapshot() {
  settle();
  const Snapshot snap = session_.snapshot();
  RunResult result{session_.log(), {}, snap};
  result.snapshots.emplace(session_.tick(), snap);
  const RunDir dir{snapshot_dir_ / ("tick_" + std::to_string(session_.tick()))};
  save_run(dir, session_.world().spec(), nullptr, session_.config(), result);
  return dir.root;
}

}  // namespace xptrav
