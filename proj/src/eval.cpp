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

#include "xptrav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace xptrav {

namespace {

double round4(double v) { return std::round(v * 1e4) / 1e4; }

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool left_align) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return left_align ? s + fill : fill + s;
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  const auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out += "  ";
      out += pad(cells[c], width[c], c == 0);
    }
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

}  // namespace

double f05(double precision, double recall) {
  if (precision == 0.0 && recall == 0.0) return 0.0;
  return 1.25 * precision * recall / (0.25 * precision + recall);
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["type"] = "eval";
  j["label"] = label;
  j["tick"] = tick;
  j["tp"] = tp;
  j["fp"] = fp;
  j["fn"] = fn;
  j["tn"] = tn;
  j["precision"] = round4(precision);
  j["recall"] = round4(recall);
  j["f05"] = round4(f05);
  return j.dump();
}

EvalReport compare(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                   std::span<const std::uint8_t> valid) {
  if (pred.size() != gt.size() || pred.size() != valid.size()) {
    throw std::invalid_argument("mask shapes differ: pred " + std::to_string(pred.size()) + ", gt " +
                                std::to_string(gt.size()) + ", valid " + std::to_string(valid.size()));
  }
  EvalReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!valid[i]) continue;
    const bool p = pred[i] != 0;
    const bool g = gt[i] != 0;
    if (p && g) {
      ++r.tp;
    } else if (p) {
      ++r.fp;
    } else if (g) {
      ++r.fn;
    } else {
      ++r.tn;
    }
  }
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.recall = ratio(r.tp, r.tp + r.fn);
  r.f05 = f05(r.precision, r.recall);
  return r;
}

std::vector<std::uint8_t> valid_mask(const GridMap& map, EvalCells cells) {
  std::vector<std::uint8_t> mask(map.cell_count(), 1);
  if (cells == EvalCells::all) return mask;
  const auto counts = map.layer(layer::obs_count).values();
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = counts[i] > 0.0f ? 1 : 0;
  return mask;
}

EvalReport evaluate_snapshot(const Snapshot& snapshot, const World& world, const PhaseDef& phase,
                             const PipelineConfig& cfg, EvalCells cells) {
  if (snapshot.map.rows() != world.rows() || snapshot.map.cols() != world.cols()) {
    throw std::invalid_argument("map and world grids differ");
  }
  GridMap map = snapshot.map;
  const Encoder encoder(cfg.encoder);
  evaluate_map(map, snapshot.memory, encoder, cfg.traverse);
  const auto pred = binarize(map.layer(layer::trav), cfg.traverse.epsilon);
  const auto gt = ground_truth_map(world, phase.classes);
  EvalReport r = compare(pred, gt, valid_mask(map, cells));
  r.label = phase.label;
  r.tick = phase.tick;
  return r;
}

std::vector<EvalReport> evaluate_phases(const RunResult& run, const World& world,
                                        const std::vector<PhaseDef>& phases, const PipelineConfig& cfg,
                                        EvalCells cells) {
  const std::uint64_t last = run.log.empty() ? 0 : run.log.back().tick;
  std::vector<EvalReport> reports;
  for (const PhaseDef& phase : phases) {
    if (phase.tick > last) {
      throw std::invalid_argument("phase tick " + std::to_string(phase.tick) +
                                  " is beyond the end of the session (last tick " + std::to_string(last) + ")");
    }
    const auto it = run.snapshots.find(phase.tick);
    if (it == run.snapshots.end()) {
      throw std::invalid_argument("no snapshot at phase tick " + std::to_string(phase.tick));
    }
    reports.push_back(evaluate_snapshot(it->second, world, phase, cfg, cells));
  }
  return reports;
}

std::vector<EvalReport> run_scenario(const Scenario& scenario, const PipelineConfig& cfg, EvalCells cells) {
  const World world = generate_world(scenario.world);
  RunHooks hooks;
  for (const PhaseDef& p : scenario.phases) hooks.snapshot_ticks.push_back(p.tick);
  const RunResult run = run_script(world, scenario.script, cfg, hooks);
  return evaluate_phases(run, world, scenario.phases, cfg, cells);
}

std::string render_reports(const std::vector<EvalReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  for (const EvalReport& r : reports) {
    rows.push_back({r.label, std::to_string(r.tick), std::to_string(r.tp), std::to_string(r.fp),
                    std::to_string(r.fn), std::to_string(r.tn), fixed(r.precision, 3), fixed(r.recall, 3),
                    fixed(r.f05, 3)});
  }
  return render_table({"phase", "tick", "tp", "fp", "fn", "tn", "precision", "recall", "f0.5"}, rows);
}

std::string AblationRow::to_json() const {
  nlohmann::ordered_json j;
  j["type"] = "ablation";
  j["size_m"] = size_m;
  j["mean_f05"] = round4(mean_f05);
  j["runs"] = runs;
  return j.dump();
}

std::vector<AblationRow> ablation(const std::vector<Scenario>& scenarios, std::vector<double> sizes,
                                  const PipelineConfig& cfg, EvalCells cells) {
  for (double s : sizes) {
    if (!(s > 0.0)) throw std::invalid_argument("cell sizes must be positive");
  }
  std::sort(sizes.begin(), sizes.end());
  std::vector<AblationRow> rows;
  for (double size : sizes) {
    AblationRow row;
    row.size_m = size;
    double sum = 0.0;
    for (const Scenario& base : scenarios) {
      Scenario s = base;
      s.world.resolution = size;
      const auto reports = run_scenario(s, cfg, cells);
      if (reports.empty()) throw std::invalid_argument("scenario '" + s.name + "' has no phases");
      sum += reports.back().f05;
      ++row.runs;
    }
    row.mean_f05 = row.runs > 0 ? sum / static_cast<double>(row.runs) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::string render_ablation(const std::vector<AblationRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const AblationRow& r : rows) cells.push_back({fixed(r.size_m, 2), fixed(r.mean_f05, 2)});
  return render_table({"size_m", "mean_f05"}, cells);
}

}  // namespace xptrav
