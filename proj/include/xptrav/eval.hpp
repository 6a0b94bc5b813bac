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

#ifndef XPTRAV_EVAL_HPP
#define XPTRAV_EVAL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xptrav/scenarios.hpp"
#include "xptrav/session.hpp"
#include "xptrav/worldsim.hpp"

namespace xptrav {

/// (1 + 0.5^2) P R / (0.5^2 P + R); 0 when both are 0.
double f05(double precision, double recall);

struct EvalReport {
  std::string label;
  std::uint64_t tick = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f05 = 0.0;

  std::size_t total() const { return tp + fp + fn + tn; }
  /// One line; ratios rounded to 4 decimals.
  std::string to_json() const;
};

/// Confusion counts over cells where `valid` is set. Masks are row-major
/// 0/1 bytes of equal length; throws std::invalid_argument otherwise.
EvalReport compare(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                   std::span<const std::uint8_t> valid);

enum class EvalCells { observed, all };

/// observed: cells with at least one fused point.
std::vector<std::uint8_t> valid_mask(const GridMap& map, EvalCells cells);

/// Fresh sweep of the snapshot, binarized and scored against the phase's
/// ground truth.
EvalReport evaluate_snapshot(const Snapshot& snapshot, const World& world, const PhaseDef& phase,
                             const PipelineConfig& cfg, EvalCells cells = EvalCells::observed);

/// One report per phase, from the snapshot taken at each phase tick.
/// Throws std::invalid_argument for a tick beyond the log or without a snapshot.
std::vector<EvalReport> evaluate_phases(const RunResult& run, const World& world,
                                        const std::vector<PhaseDef>& phases, const PipelineConfig& cfg,
                                        EvalCells cells = EvalCells::observed);

/// Runs a scenario end to end with snapshots at its phase ticks and scores them.
std::vector<EvalReport> run_scenario(const Scenario& scenario, const PipelineConfig& cfg,
                                     EvalCells cells = EvalCells::observed);

std::string render_reports(const std::vector<EvalReport>& reports);

struct AblationRow {
  double size_m = 0.0;
  double mean_f05 = 0.0;
  std::size_t runs = 0;

  std::string to_json() const;
};

/// Reruns each scenario at each cell size (window kept at cfg.traverse.window
/// cells) and averages the final phase's f0.5. Rows in ascending size order.
std::vector<AblationRow> ablation(const std::vector<Scenario>& scenarios, std::vector<double> sizes,
                                  const PipelineConfig& cfg, EvalCells cells = EvalCells::observed);

std::string render_ablation(const std::vector<AblationRow>& rows);

}  // namespace xptrav

#endif  // XPTRAV_EVAL_HPP
