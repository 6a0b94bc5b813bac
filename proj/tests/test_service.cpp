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

#include <atomic>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "xptrav/binary_io.hpp"
#include "xptrav/eval.hpp"
#include "xptrav/service.hpp"

using namespace xptrav;
using namespace xptrav::testing;
using Json = nlohmann::json;

namespace {

WorldSpec small_spec() {
  WorldSpec s = preset_scenario("s1_path_grass").world;
  s.sensor.points_per_tick = 800;
  return s;
}

PipelineConfig live_config() {
  PipelineConfig cfg;
  cfg.sweep_period = 10;
  return cfg;
}

std::string map_bytes(const GridMap& m) {
  std::ostringstream out;
  write_map(out, m);
  return out.str();
}

std::string memory_bytes(const CfTree& t) {
  std::ostringstream out;
  write_memory(out, t);
  return out.str();
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string type_of(const std::string& frame) { return Json::parse(frame).at("type").get<std::string>(); }

}  // namespace

TEST_CASE("client message parsing") {
  const ClientMessage d = parse_client_message(R"({"type":"drive","v":0.5,"w":-1,"extra":3})");
  CHECK(d.type == ClientMessage::Type::drive);
  CHECK(d.drive.v == 0.5);
  CHECK(d.drive.w == -1.0);
  CHECK(parse_client_message(R"({"type":"toggle_learning","on":false})").on == false);
  CHECK(parse_client_message(R"({"type":"reset"})").type == ClientMessage::Type::reset);
  CHECK(parse_client_message(R"({"type":"snapshot"})").type == ClientMessage::Type::snapshot);
  for (const char* bad : {"not json", "[1]", R"({"v":1})", R"({"type":"fly"})", R"({"type":"drive","v":"1","w":0})",
                          R"({"type":"drive","v":1})", R"({"type":"toggle_learning","on":1})"}) {
    CHECK_THROWS_AS(parse_client_message(bad), ProtocolError);
  }
}

TEST_CASE("base64 round trip") {
  Rng rng(1);
  for (int n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(uniform_int(rng, 0, 255));
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
  }
  const std::vector<std::uint8_t> man{'M', 'a', 'n'};
  CHECK(base64_encode(man) == "TWFu");
  CHECK_THROWS_AS(base64_decode("T!Fu"), ProtocolError);
}

TEST_CASE("score quantization") {
  CHECK(quantize_score(0.0f) == 0);
  CHECK(quantize_score(1.0f) == 255);
  CHECK(quantize_score(0.5f) == 128);
  CHECK(quantize_score(-2.0f) == 0);
  CHECK(quantize_score(7.0f) == 255);
  CHECK(quantize_score(kUnknown) == 0);
}

TEST_CASE("frame shapes") {
  const Json s = Json::parse(state_frame(3, {1.0, 2.0, 0.5}, 4, true));
  CHECK(s["type"] == "state");
  CHECK(s["tick"] == 3);
  CHECK(s["pose"].size() == 3);
  CHECK(s["centers"] == 4);
  CHECK(s["learning"] == true);

  GridMap map(3, 5, 0.2, {1.0, -1.0});
  const Json m = Json::parse(world_meta_frame(map));
  CHECK(m["rows"] == 3);
  CHECK(m["cols"] == 5);
  CHECK(m["origin"][1] == -1.0);

  Layer l(3, 5, 0.0f);
  l.at(2, 4) = 1.0f;
  const std::vector<int> rows{2, 0};
  const Json f = Json::parse(layer_frame("trav", l, rows));
  CHECK(f["name"] == "trav");
  const auto data = base64_decode(f["data_b64"].get<std::string>());
  REQUIRE(data.size() == 10);
  CHECK(data[4] == 255);
  CHECK(data[9] == 0);

  set_cell(map, 1, 1, 1.0f, 0.0f, 0.5f, 0.0f);
  const auto rgb = base64_decode(Json::parse(color_frame(map))["data_b64"].get<std::string>());
  REQUIRE(rgb.size() == 45);
  CHECK(rgb[(1 * 5 + 1) * 3] == 255);
  CHECK(rgb[(1 * 5 + 1) * 3 + 2] == 128);
  CHECK(rgb[0] == 0);
  CHECK(Json::parse(error_frame("boom"))["msg"] == "boom");
}

TEST_CASE("connect frames and malformed messages") {
  TempDir dir("core");
  TeleopCore core(generate_world(small_spec()), live_config(), dir.path());
  const auto frames = core.on_connect(1);
  REQUIRE(frames.size() == 4);
  CHECK(type_of(frames[0]) == "world_meta");
  CHECK(type_of(frames[1]) == "color");
  CHECK(type_of(frames[2]) == "layer");
  CHECK(type_of(frames[3]) == "state");
  const Outbox out = core.on_message(1, "{oops");
  REQUIRE(out.reply.size() == 1);
  CHECK(type_of(out.reply[0]) == "error");
  CHECK(out.broadcast.empty());
}

TEST_CASE("dead-man: a disconnect stops the robot within one tick") {
  TempDir dir("deadman");
  TeleopCore core(generate_world(small_spec()), live_config(), dir.path());
  core.on_connect(1);
  core.on_message(1, R"({"type":"drive","v":1,"w":0})");
  for (int k = 0; k < 5; ++k) core.tick();
  const Pose moving = core.session().robot().pose;
  CHECK(moving.x > small_spec().start.x);
  core.on_disconnect(1);
  core.tick();
  const Pose after = core.session().robot().pose;
  for (int k = 0; k < 5; ++k) core.tick();
  CHECK(core.session().robot().pose == after);
  CHECK(after.x - moving.x <= 0.1 + 1e-12);
  CHECK(core.command().v == 0.0);
}

TEST_CASE("no command keeps the robot still") {
  TempDir dir("idle");
  TeleopCore core(generate_world(small_spec()), live_config(), dir.path());
  core.on_connect(1);
  for (int k = 0; k < 10; ++k) core.tick();
  CHECK(core.session().robot().pose == small_spec().start);
}

TEST_CASE("learning off freezes the memory across a sweep") {
  TempDir dir("learn");
  TeleopCore core(generate_world(small_spec()), live_config(), dir.path());
  core.on_message(1, R"({"type":"drive","v":1,"w":0})");
  for (int k = 0; k < 40; ++k) core.tick();
  core.settle();
  REQUIRE_FALSE(core.session().memory().empty());
  core.on_message(1, R"({"type":"toggle_learning","on":false})");
  const std::size_t centers = core.session().memory().subcluster_count();
  const std::uint64_t sweeps = core.sweeps_completed();
  for (int k = 0; k < 20; ++k) core.tick();
  core.settle();
  CHECK(core.sweeps_completed() > sweeps);
  CHECK(core.session().memory().subcluster_count() == centers);
  CHECK_FALSE(core.session().learning());
}

TEST_CASE("reset broadcasts a fresh map") {
  TempDir dir("reset");
  TeleopCore core(generate_world(small_spec()), live_config(), dir.path());
  core.on_message(1, R"({"type":"drive","v":1,"w":0})");
  for (int k = 0; k < 12; ++k) core.tick();
  const Outbox out = core.on_message(1, R"({"type":"reset"})");
  REQUIRE(out.broadcast.size() == 4);
  CHECK(type_of(out.broadcast[0]) == "world_meta");
  CHECK(core.session().tick() == 0);
  CHECK(core.command().v == 0.0);
}

TEST_CASE("snapshots are reproducible and evaluate like the live state") {
  TempDir dir("snap");
  const World world = generate_world(small_spec());
  TeleopCore core(world, live_config(), dir.path());
  core.on_message(1, R"({"type":"drive","v":1,"w":0})");
  for (int k = 0; k < 25; ++k) core.tick();
  const auto first = core.snapshot();
  const auto second = core.snapshot();
  CHECK(first == second);
  CHECK(std::filesystem::exists(RunDir{first}.map()));
  const std::string map_a = file_bytes(RunDir{first}.map());
  core.snapshot();
  CHECK(file_bytes(RunDir{first}.map()) == map_a);
  CHECK(map_a == map_bytes(core.session().map()));

  const LoadedRun run = load_run(RunDir{first});
  const std::vector<PhaseDef> phases{{25, {1}, "pathway"}};
  const auto from_disk = evaluate_phases(run.result, world, phases, run.config);
  const auto live = evaluate_snapshot(core.session().snapshot(), world, phases[0], core.session().config());
  REQUIRE(from_disk.size() == 1);
  CHECK(from_disk[0].to_json() == live.to_json());

  TeleopCore fresh(world, live_config(), dir.path() / "fresh");
  const LoadedRun empty = load_run(RunDir{fresh.snapshot()});
  const std::vector<PhaseDef> zero{{0, {1}, "pathway"}};
  CHECK_THROWS_AS(evaluate_phases(empty.result, world, zero, empty.config), EmptyMemoryError);
}

TEST_CASE("snapshot message writes a run directory") {
  TempDir dir("snapmsg");
  TeleopCore core(generate_world(small_spec()), live_config(), dir.path());
  for (int k = 0; k < 3; ++k) core.tick();
  const Outbox out = core.on_message(1, R"({"type":"snapshot"})");
  CHECK(out.reply.empty());
  CHECK(std::filesystem::exists(dir / "tick_3" / "map.tgm"));
}

TEST_CASE("the live core reproduces a scripted run bit for bit") {
  const Scenario s = preset_scenario("s2_sidewalk_crossing");
  const World world = generate_world(s.world);
  const PipelineConfig cfg = live_config();
  const RunResult scripted = run_script(world, s.script, cfg);

  TempDir dir("equiv");
  TeleopCore core(world, cfg, dir.path());
  const std::uint64_t ticks = script_ticks(s.script, cfg.dt);
  DriveCommand last{};
  for (std::uint64_t k = 1; k <= ticks; ++k) {
    const DriveCommand cmd = script_command(s.script, k, cfg.dt);
    if (k == 1 || cmd.v != last.v || cmd.w != last.w) {
      Json j{{"type", "drive"}, {"v", cmd.v}, {"w", cmd.w}};
      core.on_message(1, j.dump());
      last = cmd;
    }
    core.tick();
  }
  core.settle();
  CHECK(core.session().log() == scripted.log);
  CHECK(map_bytes(core.session().map()) == map_bytes(scripted.final.map));
  CHECK(memory_bytes(core.session().memory()) == memory_bytes(scripted.final.memory));
}

TEST_CASE("service config validation") {
  ServiceConfig cfg;
  cfg.sweep_period = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.sweep_period = 10;
  cfg.port = 70000;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.port = 0;
  cfg.seed = 5;
  cfg.learning = false;
  const PipelineConfig p = cfg.resolved_pipeline();
  CHECK(p.sweep_period == 10);
  CHECK(*p.seed == 5);
  CHECK_FALSE(p.learning);
}

TEST_CASE("websocket round trip") {
  namespace net = boost::asio;
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;

  TempDir dir("ws");
  save_world_spec(small_spec(), dir / "world.tws");
  ServiceConfig cfg;
  cfg.world_path = dir / "world.tws";
  cfg.port = 0;
  cfg.dt = 0.02;
  cfg.snapshot_dir = dir / "snaps";
  std::atomic<bool> stop{false};
  std::promise<int> port;
  std::thread server([&] { serve(cfg, &stop, [&](int p) { port.set_value(p); }); });
  const int bound = port.get_future().get();
  CHECK(bound > 0);

  {
    net::io_context ioc;
    net::ip::tcp::resolver resolver(ioc);
    websocket::stream<net::ip::tcp::socket> ws(ioc);
    net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(bound)));
    ws.handshake("127.0.0.1", "/");
    const auto read = [&] {
      beast::flat_buffer buf;
      ws.read(buf);
      return Json::parse(beast::buffers_to_string(buf.data()));
    };
    CHECK(read()["type"] == "world_meta");
    ws.write(net::buffer(std::string(R"({"type":"drive","v":1,"w":0})")));
    ws.write(net::buffer(std::string("nonsense")));
    bool saw_error = false;
    double x = 0.0;
    for (int k = 0; k < 400 && !(saw_error && x > small_spec().start.x + 0.2); ++k) {
      const Json f = read();
      if (f["type"] == "error") saw_error = true;
      if (f["type"] == "state") x = f["pose"][0].get<double>();
    }
    CHECK(saw_error);
    CHECK(x > small_spec().start.x + 0.2);
    ws.close(websocket::close_code::normal);
  }
  stop = true;
  server.join();
}

TEST_CASE("serve reports an unusable world file") {
  ServiceConfig cfg;
  cfg.world_path = "/nonexistent/world.tws";
  cfg.port = 0;
  CHECK_THROWS_AS(serve(cfg), IoError);
}
