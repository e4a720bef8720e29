/*
Copyright 2026 The mmpipe Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#pragma once

// Stable score: mean over tasks of (accuracy - chance baseline), in percent
// points. Values are carried as doubles; reports print two decimals.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmpipe/error.hpp"

namespace mmpipe {

struct TaskResult {
  std::string task;
  double accuracy = 0.0;  // percent points, [0, 100]
  double baseline = 0.0;  // percent points, [0, 100]
};

/// 100 / n_choices. Throws InvalidArgument for n_choices < 2.
double chance_baseline(unsigned n_choices);

/// Throws InvalidArgument for an empty list or values outside [0, 100].
double stable_score(std::span<const TaskResult> results);

class BaselineTable {
 public:
  BaselineTable() = default;
  explicit BaselineTable(std::map<std::string, double> entries);

  /// Text tasks from their answer-choice counts.
  static BaselineTable text_defaults();
  /// Vision tasks: POPE 50, RefCOCO 50, VQAv2 0, GQA 0, TextVQA 0, OCID 0.
  static BaselineTable vision_defaults();
  /// Union of the text and vision defaults.
  static BaselineTable defaults();

  /// JSON object mapping task -> baseline percent, or task -> {"choices": n}.
  static BaselineTable from_json(std::string_view text);
  static BaselineTable load(const std::string& path);

  std::optional<double> find(std::string_view task) const;
  const std::map<std::string, double>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, double> entries_;
};

/// One line of a results file: {"task": str, "accuracy": float, "baseline": optional float}.
struct ScoreInput {
  std::string task;
  double accuracy = 0.0;
  std::optional<double> baseline;
};

std::vector<ScoreInput> parse_score_inputs(std::string_view ndjson);
std::vector<ScoreInput> load_score_inputs(const std::string& path);

struct ScoreReport {
  std::vector<TaskResult> rows;
  double stable_score = 0.0;

  std::string to_text() const;
  std::string to_ndjson() const;
};

/// Joins inputs with `table`; an explicit baseline in the input wins. Tasks
/// with neither are rejected with InvalidArgument naming the task.
ScoreReport score_report(std::span<const ScoreInput> inputs, const BaselineTable& table);

}  // namespace mmpipe
