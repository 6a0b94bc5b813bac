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

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "xptrav/binary_io.hpp"
#include "xptrav/eval.hpp"
#include "xptrav/scenarios.hpp"
#include "xptrav/service.hpp"

namespace xptrav {

namespace {

using Json = nlohmann::ordered_json;

/// Options shared by every subcommand that builds a pipeline.
struct PipelineFlags {
  std::optional<std::uint64_t> seed;
  int sweep_period = 0;
  std::optional<double> threshold;
  std::optional<int> branching;
  std::string encoder = "analytic";
  std::string weights;
  bool no_learning = false;
  int threads = 1;
  std::string config;

  void add(CLI::App& cmd, bool with_sweep) {
    cmd.add_option("--seed", seed, "Sensor noise seed (default: the world seed)");
    if (with_sweep) cmd.add_option("--sweep-period", sweep_period, "Ticks between sweeps (0 = none)");
    cmd.add_option("--threshold", threshold, "Memory threshold T");
    cmd.add_option("--branching", branching, "Memory branching factor B");
    cmd.add_option("--encoder", encoder, "analytic or conv")->check(CLI::IsMember({"analytic", "conv"}));
    cmd.add_option("--weights", weights, "Conv encoder weights (.tcw)")->check(CLI::ExistingFile);
    cmd.add_flag("--no-learning", no_learning, "Do not ingest experience");
    cmd.add_option("--threads", threads, "Sweep worker threads")->check(CLI::PositiveNumber);
    cmd.add_option("--config", config, "Base pipeline config (run.json)")->check(CLI::ExistingFile);
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    if (!config.empty()) {
      std::ifstream in(config);
      std::stringstream buf;
      buf << in.rdbuf();
      cfg = PipelineConfig::from_json(buf.str());
    }
    if (seed) cfg.seed = seed;
    if (sweep_period != 0) cfg.sweep_period = sweep_period;
    if (threshold) cfg.threshold = *threshold;
    if (branching) cfg.branching = *branching;
    if (encoder == "conv") {
      cfg.encoder.kind = EncoderKind::conv;
      if (weights.empty() && !cfg.encoder.weights_path) {
        throw CLI::ValidationError("--weights", "the conv encoder needs --weights");
      }
    }
    if (!weights.empty()) cfg.encoder.weights_path = weights;
    if (no_learning) cfg.learning = false;
    cfg.traverse.threads = threads;
    cfg.validate();
    return cfg;
  }
};

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

void print_reports(std::ostream& out, const std::vector<EvalReport>& reports, bool pretty) {
  if (pretty) {
    out << render_reports(reports);
    return;
  }
  for (const EvalReport& r : reports) out << r.to_json() << '\n';
}

// ─── inspect ────────────────────────────────────────────────────────────────

void inspect_map(std::ostream& out, const GridMap& map) {
  out << "map: " << map.rows() << " x " << map.cols() << " cells, resolution " << map.resolution()
      << " m, origin (" << map.origin().x << ", " << map.origin().y << ")\n";
  std::size_t known = 0;
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) known += map.observed(r, c) ? 1 : 0;
  }
  out << "known cells: " << known << " / " << map.cell_count() << '\n';
  out << "layers: " << map.layer_names().size() << '\n';
  for (const std::string& name : map.layer_names()) {
    const auto values = map.layer(name).values();
    std::size_t n = 0;
    double lo = 0.0, hi = 0.0, sum = 0.0;
    for (float v : values) {
      if (!is_known(v)) continue;
      lo = n == 0 ? v : std::min<double>(lo, v);
      hi = n == 0 ? v : std::max<double>(hi, v);
      sum += v;
      ++n;
    }
    out << "  " << name << ": known " << n;
    if (n > 0) {
      out << ", min " << fixed(lo, 4) << ", max " << fixed(hi, 4) << ", mean " << fixed(sum / n, 4);
    }
    out << '\n';
  }
}

void inspect_memory(std::ostream& out, const CfTree& tree) {
  out << "memory: threshold " << tree.threshold() << ", branching " << tree.branching_factor() << ", dim "
      << kFeatureDim << '\n';
  out << "subclusters: " << tree.subcluster_count() << '\n';
  out << "points: " << tree.total_count() << '\n';
  out << "depth: " << tree.depth() << '\n';
  constexpr int kBins = 5;
  std::array<std::size_t, kBins> hist{};
  for (const SubclusterInfo& s : tree.centers()) {
    const int bin = std::clamp(static_cast<int>(s.radius / tree.threshold() * kBins), 0, kBins - 1);
    ++hist[static_cast<std::size_t>(bin)];
  }
  out << "radius histogram:\n";
  for (int b = 0; b < kBins; ++b) {
    const double lo = tree.threshold() * b / kBins;
    const double hi = tree.threshold() * (b + 1) / kBins;
    out << "  [" << fixed(lo, 3) << ", " << fixed(hi, 3) << (b + 1 == kBins ? "]" : ")") << ": " << hist[b] << '\n';
  }
}

void inspect_weights(std::ostream& out, const ConvWeights& w) {
  out << "conv weights: 3 stages + projection\n";
  for (std::size_t i = 0; i < w.stages.size(); ++i) {
    const ConvStage& s = w.stages[i];
    out << "  conv" << i + 1 << ".w: (" << s.out_channels << ", " << s.in_channels << ", 3, 3)\n";
    out << "  conv" << i + 1 << ".b: (" << s.bias.size() << ")\n";
  }
  out << "  proj.w: (" << kFeatureDim << ", " << kFeatureDim << ")\n";
  out << "  proj.b: (" << w.proj_bias.size() << ")\n";
}

int inspect(std::ostream& out, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  const std::string m(magic, static_cast<std::size_t>(in.gcount()));
  if (m == "TGM1") {
    inspect_map(out, load_map(path));
  } else if (m == "TMM1") {
    inspect_memory(out, load_memory(path));
  } else if (m == "TCW1") {
    inspect_weights(out, load_weights(path));
  } else {
    throw FormatError("unknown file type: " + path);
  }
  return 0;
}

// ─── evaluate ───────────────────────────────────────────────────────────────

std::vector<EvalReport> evaluate_run(const std::string& run_path, const std::string& phases_path, EvalCells cells) {
  const RunDir dir{run_path};
  LoadedRun run = load_run(dir);
  const World world = generate_world(run.world);
  const auto phases = load_phases(phases_path, &run.world);
  const std::uint64_t last = run.result.log.empty() ? 0 : run.result.log.back().tick;
  RunHooks hooks;
  for (const PhaseDef& p : phases) {
    if (p.tick <= last && !run.result.snapshots.contains(p.tick)) hooks.snapshot_ticks.push_back(p.tick);
  }
  if (!hooks.snapshot_ticks.empty()) {
    if (!run.script) {
      throw std::invalid_argument("run has no snapshot at tick " + std::to_string(hooks.snapshot_ticks.front()) +
                                  " and no script to replay");
    }
    RunResult replay = run_script(world, *run.script, run.config, hooks);
    if (replay.log != run.result.log) throw std::runtime_error("replay diverged from the recorded session log");
    for (auto& [tick, snap] : replay.snapshots) run.result.snapshots.emplace(tick, std::move(snap));
  }
  return evaluate_phases(run.result, world, phases, run.config, cells);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Experience-driven traversability mapping toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // gen-world
  auto* gen = app.add_subcommand("gen-world", "Write a scenario preset's world spec");
  std::string gen_preset, gen_out, gen_script, gen_phases;
  double gen_resolution = 0.1;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--preset", gen_preset, "Scenario preset")->required()->check(CLI::IsMember(preset_names()));
  gen->add_option("--out", gen_out, "Output .tws path")->required();
  gen->add_option("--resolution", gen_resolution, "Cell size in meters")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "World seed");
  gen->add_option("--script-out", gen_script, "Also write the preset's drive script");
  gen->add_option("--phases-out", gen_phases, "Also write the preset's phases");

  // run
  auto* run = app.add_subcommand("run", "Drive a scripted session and save a run directory");
  std::string run_world, run_script_path, run_out, run_phases;
  std::vector<std::uint64_t> run_snapshots;
  PipelineFlags run_flags;
  run->add_option("--world", run_world, "World spec (.tws)")->required()->check(CLI::ExistingFile);
  run->add_option("--script", run_script_path, "Drive script (.cmds)")->required()->check(CLI::ExistingFile);
  run->add_option("--out-dir", run_out, "Run directory to write")->required();
  run->add_option("--snapshot-ticks", run_snapshots, "Ticks to snapshot")->delimiter(',');
  run->add_option("--phases", run_phases, "Snapshot at these phase ticks")->check(CLI::ExistingFile);
  run_flags.add(*run, true);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a run's phases against ground truth");
  std::string eval_run, eval_phases;
  bool eval_all = false, eval_pretty = false;
  evaluate->add_option("--run", eval_run, "Run directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--phases", eval_phases, "Phases file")->required()->check(CLI::ExistingFile);
  evaluate->add_flag("--all-cells", eval_all, "Score every cell, observed or not");
  evaluate->add_flag("--pretty", eval_pretty, "Aligned table instead of JSON lines");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Mean f0.5 per cell size over scenarios");
  std::vector<std::string> abl_presets;
  std::vector<double> abl_sizes{0.05, 0.1, 0.2};
  std::string abl_world, abl_script, abl_phases;
  std::optional<std::uint64_t> abl_seed;
  bool abl_all = false, abl_pretty = false;
  ablate->add_option("--preset", abl_presets, "Scenario presets (default: all)")
      ->delimiter(',')
      ->check(CLI::IsMember(preset_names()));
  ablate->add_option("--sizes", abl_sizes, "Cell sizes in meters")->delimiter(',')->check(CLI::PositiveNumber);
  auto* abl_world_opt = ablate->add_option("--world", abl_world, "Custom scenario world")->check(CLI::ExistingFile);
  auto* abl_script_opt = ablate->add_option("--script", abl_script, "Custom scenario script")->check(CLI::ExistingFile);
  auto* abl_phases_opt = ablate->add_option("--phases", abl_phases, "Custom scenario phases")->check(CLI::ExistingFile);
  abl_world_opt->needs(abl_script_opt, abl_phases_opt);
  abl_script_opt->needs(abl_world_opt);
  abl_phases_opt->needs(abl_world_opt);
  ablate->add_option("--seed", abl_seed, "Override every scenario's world seed");
  ablate->add_flag("--all-cells", abl_all, "Score every cell, observed or not");
  ablate->add_flag("--pretty", abl_pretty, "Aligned table instead of JSON lines");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Live teleoperation websocket service");
  ServiceConfig scfg;
  std::string serve_world, serve_snapshots = "snapshots";
  serve_cmd->add_option("--world", serve_world, "World spec (.tws)")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", scfg.port, "TCP port (0 = any free port)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--seed", scfg.seed, "Sensor noise seed");
  serve_cmd->add_option("--sweep-period", scfg.sweep_period, "Ticks between sweeps")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--dt", scfg.dt, "Tick length in seconds")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--snapshot-dir", serve_snapshots, "Where snapshot frames write run directories");
  bool serve_no_learning = false;
  serve_cmd->add_flag("--no-learning", serve_no_learning, "Start with learning off");

  // encode
  auto* encode = app.add_subcommand("encode", "Encode one map window");
  std::string enc_map, enc_encoder = "analytic", enc_weights;
  std::vector<int> enc_anchor;
  int enc_n = 16;
  double enc_hscale = 0.5;
  encode->add_option("--map", enc_map, "Gridmap (.tgm)")->required()->check(CLI::ExistingFile);
  encode->add_option("--anchor", enc_anchor, "Top-left cell as row,col")->required()->delimiter(',')->expected(2);
  encode->add_option("--n", enc_n, "Window size in cells")->check(CLI::PositiveNumber);
  encode->add_option("--encoder", enc_encoder, "analytic or conv")->check(CLI::IsMember({"analytic", "conv"}));
  encode->add_option("--weights", enc_weights, "Conv encoder weights (.tcw)")->check(CLI::ExistingFile);
  encode->add_option("--elevation-scale", enc_hscale, "Meters of relief that saturate")->check(CLI::PositiveNumber);

  // inspect
  auto* inspect_cmd = app.add_subcommand("inspect", "Summarise a .tgm, .tmm or .tcw file");
  std::string inspect_path;
  inspect_cmd->add_option("file", inspect_path, "File to inspect")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      Scenario s = preset_scenario(gen_preset, gen_resolution);
      if (gen_seed) s.world.seed = *gen_seed;
      save_world_spec(s.world, gen_out);
      if (!gen_script.empty()) save_script(s.script, gen_script);
      if (!gen_phases.empty()) save_phases(s.phases, gen_phases);
      Json j{{"type", "world"}, {"preset", gen_preset}, {"path", gen_out}, {"rows", s.world.rows()},
             {"cols", s.world.cols()}, {"resolution", s.world.resolution}, {"seed", s.world.seed}};
      out << j.dump() << '\n';
    } else if (run->parsed()) {
      const PipelineConfig cfg = run_flags.resolve();
      const WorldSpec spec = load_world_spec(run_world);
      const Script script = load_script(run_script_path);
      RunHooks hooks;
      hooks.snapshot_ticks = run_snapshots;
      if (!run_phases.empty()) {
        for (const PhaseDef& p : load_phases(run_phases, &spec)) hooks.snapshot_ticks.push_back(p.tick);
      }
      const RunResult result = run_script(generate_world(spec), script, cfg, hooks);
      save_run(RunDir{run_out}, spec, &script, cfg, result);
      const LogRecord& last = result.log.back();
      Json j{{"type", "run"}, {"out_dir", run_out}, {"ticks", last.tick}, {"inserts", last.inserts},
             {"centers", last.centers}, {"snapshots", result.snapshots.size()}};
      out << j.dump() << '\n';
    } else if (evaluate->parsed()) {
      print_reports(out, evaluate_run(eval_run, eval_phases, eval_all ? EvalCells::all : EvalCells::observed),
                    eval_pretty);
    } else if (ablate->parsed()) {
      std::vector<Scenario> scenarios;
      if (!abl_world.empty()) {
        Scenario s;
        s.name = abl_world;
        s.world = load_world_spec(abl_world);
        s.script = load_script(abl_script);
        s.phases = load_phases(abl_phases, &s.world);
        scenarios.push_back(std::move(s));
      }
      if (abl_presets.empty() && scenarios.empty()) abl_presets = preset_names();
      for (const std::string& name : abl_presets) scenarios.push_back(preset_scenario(name));
      if (abl_seed) {
        for (Scenario& s : scenarios) s.world.seed = *abl_seed;
      }
      const auto rows = ablation(scenarios, abl_sizes, PipelineConfig{}, abl_all ? EvalCells::all : EvalCells::observed);
      if (abl_pretty) {
        out << render_ablation(rows);
      } else {
        for (const AblationRow& r : rows) out << r.to_json() << '\n';
      }
    } else if (serve_cmd->parsed()) {
      scfg.world_path = serve_world;
      scfg.snapshot_dir = serve_snapshots;
      scfg.learning = !serve_no_learning;
      serve(scfg, nullptr, [&out](int port) {
        out << Json{{"type", "listening"}, {"port", port}}.dump() << std::endl;
      });
    } else if (encode->parsed()) {
      EncoderConfig ecfg;
      ecfg.elevation_scale = enc_hscale;
      if (enc_encoder == "conv") {
        if (enc_weights.empty()) throw CLI::ValidationError("--weights", "the conv encoder needs --weights");
        ecfg.kind = EncoderKind::conv;
        ecfg.weights_path = enc_weights;
      }
      const GridMap map = load_map(enc_map);
      const Patch patch = map.extract_patch({enc_anchor[0], enc_anchor[1]}, enc_n);
      const FeatureVector v = Encoder(ecfg).encode(patch);
      Json j{{"type", "encode"}, {"anchor", enc_anchor}, {"n", enc_n}, {"coverage", patch.coverage()}};
      j["features"] = std::vector<double>(v.values.begin(), v.values.end());
      out << j.dump() << '\n';
    } else if (inspect_cmd->parsed()) {
      return inspect(out, inspect_path);
    }
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace xptrav
