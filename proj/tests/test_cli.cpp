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

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "xptrav/binary_io.hpp"
#include "xptrav/memory.hpp"

using namespace xptrav;
using namespace xptrav::testing;
using Json = nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "xptrav");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<Json> json_lines(const std::string& text) {
  std::vector<Json> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(Json::parse(line));
  }
  return lines;
}

}  // namespace

TEST_CASE("gen-world, run and evaluate") {
  TempDir dir("cli");
  const std::string world = (dir / "w.tws").string();
  const std::string script = (dir / "s.cmds").string();
  const std::string phases = (dir / "s.phases").string();
  const Result gen = cli({"gen-world", "--preset", "s2_sidewalk_crossing", "--out", world, "--script-out", script,
                          "--phases-out", phases});
  REQUIRE(gen.code == 0);
  CHECK(json_lines(gen.out).at(0)["type"] == "world");

  const std::string run_dir = (dir / "run").string();
  const Result run = cli({"run", "--world", world, "--script", script, "--out-dir", run_dir, "--phases", phases});
  REQUIRE(run.code == 0);
  const Json summary = json_lines(run.out).at(0);
  CHECK(summary["snapshots"] == 2);
  CHECK(summary["centers"].get<int>() > 0);

  const Result eval = cli({"evaluate", "--run", run_dir, "--phases", phases});
  REQUIRE(eval.code == 0);
  const auto reports = json_lines(eval.out);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0]["label"] == "sidewalk");
  CHECK(reports[1]["f05"].get<double>() > 0.0);
  const Result pretty = cli({"evaluate", "--run", run_dir, "--phases", phases, "--pretty"});
  CHECK(pretty.out.find("precision") != std::string::npos);

  SUBCASE("phases without snapshots are replayed from the script") {
    const std::string bare = (dir / "bare").string();
    REQUIRE(cli({"run", "--world", world, "--script", script, "--out-dir", bare}).code == 0);
    const Result replayed = cli({"evaluate", "--run", bare, "--phases", phases});
    REQUIRE(replayed.code == 0);
    CHECK(replayed.out == eval.out);
  }
}

TEST_CASE("encode matches the analytic encoder") {
  TempDir dir("cli_enc");
  Rng rng(3);
  const GridMap map = random_map(rng, 40, 40, 0.2);
  save_map(map, dir / "m.tgm");
  const Result r = cli({"encode", "--map", (dir / "m.tgm").string(), "--anchor", "5,7"});
  REQUIRE(r.code == 0);
  const Json j = json_lines(r.out).at(0);
  const FeatureVector want = encode_analytic(map.extract_patch({5, 7}, 16), EncoderConfig{});
  const auto got = j["features"].get<std::vector<double>>();
  REQUIRE(got.size() == kFeatureDim);
  for (std::size_t i = 0; i < kFeatureDim; ++i) CHECK(got[i] == want[i]);
  CHECK(cli({"encode", "--map", (dir / "m.tgm").string(), "--anchor", "30,30"}).code == 2);
}

TEST_CASE("inspect maps and memories") {
  TempDir dir("cli_inspect");
  save_map(GridMap(12, 9, 0.1, {0.0, 0.0}), dir / "m.tgm");
  const Result m = cli({"inspect", (dir / "m.tgm").string()});
  REQUIRE(m.code == 0);
  CHECK(m.out.find("known cells: 0") != std::string::npos);

  CfTree tree(0.3);
  for (int k = 0; k < 7; ++k) {
    FeatureVector v;
    v[static_cast<std::size_t>(k)] = 20.0;
    tree.insert(v);
  }
  save_memory(tree, dir / "t.tmm");
  const Result t = cli({"inspect", (dir / "t.tmm").string()});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("subclusters: 7") != std::string::npos);
}

TEST_CASE("failures and exit codes") {
  TempDir dir("cli_err");
  GridMap map(8, 8, 0.1, {0.0, 0.0});
  std::ostringstream bytes;
  write_map(bytes, map);
  {
    std::ofstream f(dir / "cut.tgm", std::ios::binary);
    f << bytes.str().substr(0, 40 + 2 + layer::color_r.size() + 17);
  }
  const Result corrupt = cli({"inspect", (dir / "cut.tgm").string()});
  CHECK(corrupt.code == 2);
  CHECK(corrupt.err.find("color_r") != std::string::npos);

  CHECK(cli({"bogus"}).code == 1);
  CHECK(cli({}).code == 1);
  CHECK(cli({"run", "--world", "/nonexistent.tws"}).code == 1);
  CHECK(cli({"gen-world", "--preset", "nope", "--out", (dir / "x").string()}).code == 1);
  CHECK(cli({"--help"}).code == 0);
}
