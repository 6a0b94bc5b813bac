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

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "xptrav/eval.hpp"
#include "xptrav/scenarios.hpp"
#include "xptrav/service.hpp"

using namespace xptrav;
using namespace xptrav::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

double sq_dist(const FeatureVector& a, const FeatureVector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

// ─── A1 ─────────────────────────────────────────────────────────────────────

Outcome cf_tree_correctness() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const double threshold = 0.3;
  CfTree tree(threshold);
  std::map<std::uint32_t, std::vector<FeatureVector>> shadow;
  std::vector<FeatureVector> blobs;
  for (int b = 0; b < 40; ++b) blobs.push_back(random_vector(rng, -2, 2));
  std::normal_distribution<double> noise(0.0, 0.04);
  for (int k = 0; k < 1000; ++k) {
    FeatureVector v = k % 5 == 0 ? random_vector(rng, -2, 2) : blobs[static_cast<std::size_t>(uniform_int(rng, 0, 39))];
    if (k % 5 != 0) {
      for (auto& x : v.values) x += noise(rng);
    }
    shadow[tree.insert(v).id].push_back(v);
  }
  double worst = 0.0;
  bool radius_ok = true;
  std::uint64_t total = 0;
  for (const SubclusterInfo& s : tree.centers()) {
    const auto& pts = shadow.at(s.id);
    FeatureVector mean;
    for (const auto& p : pts) {
      for (std::size_t i = 0; i < kFeatureDim; ++i) mean[i] += p[i];
    }
    for (auto& x : mean.values) x /= static_cast<double>(pts.size());
    double ss = 0.0;
    for (const auto& p : pts) ss += sq_dist(p, mean);
    const double radius = std::sqrt(ss / static_cast<double>(pts.size()));
    for (std::size_t i = 0; i < kFeatureDim; ++i) worst = std::max(worst, std::abs(mean[i] - s.centroid[i]));
    worst = std::max(worst, std::abs(radius - s.radius));
    radius_ok = radius_ok && s.radius <= threshold + 1e-12 && s.count == pts.size();
    total += s.count;
  }
  const double secs = seconds_since(t0);
  const bool pass = worst <= 1e-9 && radius_ok && total == 1000 && tree.total_count() == 1000 &&
                    tree.audit().empty() && secs < 5.0;
  return {pass, fmt("subclusters %.0f, max deviation %.2e, sum N %.0f, %.3f s", static_cast<double>(tree.subcluster_count()),
                    worst, static_cast<double>(total), secs)};
}

// ─── A2 ─────────────────────────────────────────────────────────────────────

Outcome predict_oracle() {
  Rng rng(202);
  int mismatches = 0;
  int ties = 0;
  for (int c = 0; c < 200; ++c) {
    CfTree tree(uniform(rng, 0.02, 0.3), uniform_int(rng, 2, 12));
    const bool tie_case = c % 4 == 0;
    if (tie_case) {
      FeatureVector a;
      FeatureVector b;
      const std::size_t axis = static_cast<std::size_t>(uniform_int(rng, 0, kFeatureDim - 1));
      a[axis] = 1.0;
      b[axis] = -1.0;
      tree.insert(a);
      tree.insert(b);
    }
    const int extra = uniform_int(rng, 1, 98);
    for (int k = 0; k < extra; ++k) {
      FeatureVector v = random_vector(rng, -3, 3);
      if (tie_case) {
        // Keep the tie pair strictly nearest to the origin query.
        double n2 = sq_dist(v, FeatureVector{});
        if (n2 < 4.0) {
          for (auto& x : v.values) x *= 2.0 / std::sqrt(n2);
        }
      }
      tree.insert(v);
    }
    const auto centers = tree.centers();
    for (int q = 0; q < 5; ++q) {
      const FeatureVector v = tie_case && q == 0 ? FeatureVector{} : random_vector(rng, -3, 3);
      const Prediction got = tree.predict(v);
      const Prediction want = nearest_oracle(centers, v);
      if (got.id != want.id || got.distance != want.distance || !(got.center == want.center)) ++mismatches;
      if (tie_case && q == 0) {
        ++ties;
        if (got.id != 0) ++mismatches;
      }
    }
  }
  return {mismatches == 0, fmt("1000 queries over 200 trees, %.0f pinned ties, %.0f mismatches", ties, mismatches)};
}

// ─── A3 ─────────────────────────────────────────────────────────────────────

Outcome fusion_exact() {
  const auto t0 = Clock::now();
  Rng rng(303);
  const Encoder enc;
  int unequal = 0;
  for (int trial = 0; trial < 20; ++trial) {
    GridMap map = random_map(rng, 64, 64, uniform(rng, 0.0, 0.1));
    CfTree tree(uniform(rng, 0.1, 0.5));
    for (int k = 0; k < uniform_int(rng, 1, 12); ++k) {
      FeatureVector v = enc.encode(map.extract_patch({uniform_int(rng, 0, 48), uniform_int(rng, 0, 48)}, 16));
      for (auto& x : v.values) x += uniform(rng, -0.05, 0.05);
      tree.insert(v);
    }
    TraverseConfig cfg;
    cfg.window = 16;
    cfg.stride = 4;
    evaluate_map(map, tree, enc, cfg);
    if (!layers_equal(map.layer(layer::trav), fusion_oracle(map, tree, enc, cfg))) ++unequal;
  }
  const double secs = seconds_since(t0);
  return {unequal == 0 && secs < 30.0, fmt("20 maps, %.0f differing, %.2f s", unequal, secs)};
}

// ─── A4 ─────────────────────────────────────────────────────────────────────

Outcome kernel_and_score() {
  bool ok = score_from_distance(0.0, 0.3) == 1.0;
  double worst = 0.0;
  for (int n : {4, 7, 8, 15, 16, 24, 31, 32}) {
    for (double floor : {0.0, 0.2, 0.5}) {
      for (double d : {0.0, 0.05, 0.2, 0.7}) {
        TraverseConfig cfg;
        cfg.window = n;
        cfg.kernel_floor = floor;
        const double sigma = 0.3;
        const auto h = center_weighted_kernel(d, cfg, sigma);
        const double centre = (n - 1) / 2.0;
        const double rho2_min = n % 2 == 0 ? 0.5 : 0.0;
        const double score = std::exp(-d * d / (2.0 * sigma * sigma));
        const int mid = (n - 1) / 2;
        const double peak = h[static_cast<std::size_t>(mid * n + mid)];
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const double rho2 = (i - centre) * (i - centre) + (j - centre) * (j - centre);
            const double g = floor + (1.0 - floor) * std::exp(-(rho2 - rho2_min) / (2.0 * (n / 4.0) * (n / 4.0)));
            const double v = h[static_cast<std::size_t>(i * n + j)];
            worst = std::max(worst, std::abs(v - score * g));
            ok = ok && v <= peak;
          }
        }
      }
    }
  }
  ok = ok && worst <= 1e-12;
  return {ok, fmt("score(0) = %.1f, centre is the maximum, max deviation from reference %.2e",
                  score_from_distance(0.0, 0.3), worst)};
}

// ─── A5 ─────────────────────────────────────────────────────────────────────

Outcome f05_arithmetic() {
  double worst = 0.0;
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      const double p = i / 100.0;
      const double r = j / 100.0;
      const double want = (p + r == 0.0) ? 0.0 : (1.0 + 0.25) * p * r / (0.25 * p + r);
      worst = std::max(worst, std::abs(f05(p, r) - want));
    }
  }
  const double example = f05(1.0, 0.5);
  return {worst <= 1e-12 && std::abs(example - 5.0 / 6.0) <= 1e-12,
          fmt("max deviation %.2e over 101 x 101, f05(1, 0.5) = %.6f", worst, example)};
}

// ─── A6 ─────────────────────────────────────────────────────────────────────

Outcome encoder_discrimination() {
  Rng rng(606);
  const Encoder enc;
  std::vector<std::vector<FeatureVector>> groups;
  for (const std::string& name : discrimination_textures()) {
    const TexturePreset t = texture_preset(name);
    WorldSpec spec;
    spec.seed = 66;
    spec.width = 12.0;
    spec.height = 12.0;
    spec.classes = {{1, name}};
    spec.background = {name, 1, {}, t.texture, t.elevation};
    const GridMap truth = generate_world(spec).truth_map();
    std::vector<FeatureVector> feats;
    for (int k = 0; k < 200; ++k) {
      feats.push_back(enc.encode(truth.extract_patch(
          {uniform_int(rng, 0, truth.rows() - 16), uniform_int(rng, 0, truth.cols() - 16)}, 16)));
    }
    groups.push_back(std::move(feats));
  }
  double intra = 0.0;
  double inter = 0.0;
  std::size_t n_intra = 0;
  std::size_t n_inter = 0;
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = a; b < groups.size(); ++b) {
      for (std::size_t i = 0; i < groups[a].size(); ++i) {
        for (std::size_t j = a == b ? i + 1 : 0; j < groups[b].size(); ++j) {
          const double d = euclidean_distance(groups[a][i], groups[b][j]);
          if (a == b) {
            intra += d;
            ++n_intra;
          } else {
            inter += d;
            ++n_inter;
          }
        }
      }
    }
  }
  intra /= static_cast<double>(n_intra);
  inter /= static_cast<double>(n_inter);

  double conv_worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const ConvWeights w = random_weights(rng);
    const Patch p = random_patch(rng, 16);
    const FeatureVector got = encode_conv(p, w, EncoderConfig{});
    const FeatureVector want = conv_forward_oracle(normalize_patch(p, EncoderConfig{}), w);
    for (std::size_t i = 0; i < kFeatureDim; ++i) conv_worst = std::max(conv_worst, std::abs(got[i] - want[i]));
  }
  return {intra < 0.5 * inter && conv_worst <= 1e-5,
          fmt("intra %.4f, inter %.4f (ratio %.3f), conv max deviation %.2e", intra, inter, intra / inter, conv_worst)};
}

// ─── Scenarios ──────────────────────────────────────────────────────────────

struct ScenarioRun {
  Scenario scenario;
  World world;
  RunResult run;
  PipelineConfig cfg;

  explicit ScenarioRun(const std::string& name)
      : scenario(preset_scenario(name)), world(generate_world(scenario.world)), run(drive(scenario, world)) {}

  static RunResult drive(const Scenario& s, const World& w) {
    RunHooks hooks;
    for (const PhaseDef& p : s.phases) hooks.snapshot_ticks.push_back(p.tick);
    return run_script(w, s.script, PipelineConfig{}, hooks);
  }

  /// Binarized fresh sweep of the snapshot at `tick`.
  std::vector<std::uint8_t> prediction(std::uint64_t tick) const {
    GridMap map = run.snapshots.at(tick).map;
    evaluate_map(map, run.snapshots.at(tick).memory, Encoder(cfg.encoder), cfg.traverse);
    return binarize(map.layer(layer::trav), cfg.traverse.epsilon);
  }

  /// Share of observed, obstacle-free cells of `class_id` whose prediction equals `want`.
  double class_rate(std::uint64_t tick, int class_id, bool want) const {
    const auto pred = prediction(tick);
    const auto valid = valid_mask(run.snapshots.at(tick).map, EvalCells::observed);
    std::size_t hit = 0;
    std::size_t total = 0;
    for (int r = 0; r < world.rows(); ++r) {
      for (int c = 0; c < world.cols(); ++c) {
        const std::size_t i = static_cast<std::size_t>(r * world.cols() + c);
        if (!valid[i] || world.obstacle_touches({r, c}) || world.class_at({r, c}) != class_id) continue;
        ++total;
        if ((pred[i] != 0) == want) ++hit;
      }
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
  }
};

Outcome scenario_s1() {
  const auto t0 = Clock::now();
  const ScenarioRun s("s1_path_grass");
  const auto& phases = s.scenario.phases;
  const auto reports = evaluate_phases(s.run, s.world, phases, s.cfg);
  const PhaseDef narrow{phases[1].tick, phases[0].classes, "pathway only"};
  const EvalReport narrow_report = evaluate_snapshot(s.run.snapshots.at(phases[1].tick), s.world, narrow, s.cfg);
  const double secs = seconds_since(t0);
  const bool pass = reports[0].f05 >= 0.8 && reports[1].f05 >= 0.8 && narrow_report.f05 < reports[1].f05 &&
                    secs < 60.0;
  return {pass, fmt("phase 1 f0.5 %.3f, phase 2 f0.5 %.3f, phase 2 vs pathway only %.3f, %.1f s", reports[0].f05,
                    reports[1].f05, narrow_report.f05, secs)};
}

Outcome scenario_s2() {
  const ScenarioRun s("s2_sidewalk_crossing");
  const std::uint64_t p1 = s.scenario.phases[0].tick;
  const std::uint64_t p2 = s.scenario.phases[1].tick;
  const double sidewalk = s.class_rate(p1, 1, true);
  const double grass = s.class_rate(p1, 4, false);
  const double road1 = s.class_rate(p1, 2, false);
  const double crosswalk = s.class_rate(p2, 3, true);
  const double road2 = s.class_rate(p2, 2, false);
  const double crosswalk_before = s.class_rate(p1, 3, true);
  const bool pass = sidewalk >= 0.8 && grass >= 0.8 && road1 >= 0.8 && crosswalk >= 0.8 && road2 >= 0.8;
  std::string detail = fmt("phase 1: sidewalk trav %.3f, grass non-trav %.3f, road non-trav %.3f; ", sidewalk, grass,
                           road1);
  detail += fmt("phase 2: crosswalk trav %.3f (was %.3f), road non-trav %.3f", crosswalk, crosswalk_before, road2);
  return {pass, detail};
}

// ─── A9 ─────────────────────────────────────────────────────────────────────

Outcome ablation_table() {
  std::vector<Scenario> scenarios;
  for (const std::string& name : preset_names()) scenarios.push_back(preset_scenario(name));
  const auto rows = ablation(scenarios, {0.05, 0.1, 0.2}, PipelineConfig{});
  bool ok = rows.size() == 3;
  std::string detail;
  for (const AblationRow& r : rows) {
    ok = ok && r.runs == scenarios.size() && r.mean_f05 >= 0.0 && r.mean_f05 <= 1.0;
    detail += fmt("%.2f m: %.2f; ", r.size_m, r.mean_f05);
  }
  const std::string table = render_ablation(rows);
  ok = ok && table.find("size_m") != std::string::npos && table.find("mean_f05") != std::string::npos;
  std::printf("%s", table.c_str());
  return {ok, detail + "(informative)"};
}

// ─── A10 ────────────────────────────────────────────────────────────────────

Outcome sweep_performance() {
  Rng rng(1010);
  GridMap map = random_map(rng, 512, 512, 0.05);
  const Encoder enc;
  CfTree tree(0.3);
  while (tree.subcluster_count() < 50) {
    tree.insert(enc.encode(map.extract_patch({uniform_int(rng, 0, 496), uniform_int(rng, 0, 496)}, 16)));
    if (tree.subcluster_count() < 50) tree.insert(random_vector(rng, -2, 2));
  }
  TraverseConfig cfg;
  cfg.threads = 1;
  GridMap single = map;
  const SweepStats s1 = evaluate_map(single, tree, enc, cfg);
  cfg.threads = 4;
  GridMap parallel = map;
  const SweepStats s4 = evaluate_map(parallel, tree, enc, cfg);
  const bool same = layers_equal(single.layer(layer::trav), parallel.layer(layer::trav));
  return {s1.elapsed_seconds < 5.0 && same && tree.subcluster_count() <= 50,
          fmt("%.0f centres, single thread %.3f s, 4 threads %.3f s, bit-identical %.0f",
              static_cast<double>(tree.subcluster_count()), s1.elapsed_seconds, s4.elapsed_seconds, same ? 1.0 : 0.0)};
}

// ─── A11 ────────────────────────────────────────────────────────────────────

Outcome online_offline() {
  bool all_same = true;
  std::string detail;
  for (const std::string& name : preset_names()) {
    const Scenario s = preset_scenario(name);
    const World world = generate_world(s.world);
    PipelineConfig cfg;
    cfg.sweep_period = 10;
    const RunResult scripted = run_script(world, s.script, cfg);

    TempDir dir("acceptance");
    TeleopCore core(world, cfg, dir.path());
    const std::uint64_t ticks = script_ticks(s.script, cfg.dt);
    for (std::uint64_t k = 1; k <= ticks; ++k) {
      const DriveCommand cmd = script_command(s.script, k, cfg.dt);
      char frame[128];
      std::snprintf(frame, sizeof frame, R"({"type":"drive","v":%.17g,"w":%.17g})", cmd.v, cmd.w);
      core.on_message(1, frame);
      core.tick();
    }
    const std::filesystem::path live = core.snapshot();
    const RunDir offline{dir.path() / "offline"};
    save_run(offline, s.world, &s.script, cfg, scripted);
    const auto bytes = [](const std::filesystem::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::stringstream buf;
      buf << in.rdbuf();
      return buf.str();
    };
    const bool map_same = bytes(RunDir{live}.map()) == bytes(offline.map());
    const bool mem_same = bytes(RunDir{live}.memory()) == bytes(offline.memory());
    all_same = all_same && map_same && mem_same;
    detail += name + (map_same && mem_same ? ": .tgm and .tmm identical; " : ": differs; ");
  }
  return {all_same, detail.substr(0, detail.size() - 2)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1 cf-tree correctness", cf_tree_correctness},
      {"A2 predict oracle", predict_oracle},
      {"A3 fusion oracle", fusion_exact},
      {"A4 kernel and score", kernel_and_score},
      {"A5 f0.5 arithmetic", f05_arithmetic},
      {"A6 encoder discrimination", encoder_discrimination},
      {"A7 scenario s1", scenario_s1},
      {"A8 scenario s2", scenario_s2},
      {"A9 ablation harness", ablation_table},
      {"A10 sweep performance", sweep_performance},
      {"A11 online/offline equivalence", online_offline},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
