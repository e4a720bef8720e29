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
#include "mmpipe/evalagg.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mmpipe {

using nlohmann::json;

namespace {

bool is_percent(double x) { return std::isfinite(x) && x >= 0.0 && x <= 100.0; }

std::string two_decimals(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace

double chance_baseline(unsigned n_choices) {
  if (n_choices < 2) throw InvalidArgument("chance_baseline: need at least 2 choices");
  return 100.0 / static_cast<double>(n_choices);
}

double stable_score(std::span<const TaskResult> results) {
  if (results.empty()) throw InvalidArgument("stable_score: no task results");
  double sum = 0.0;
  for (const auto& r : results) {
    if (!is_percent(r.accuracy) || !is_percent(r.baseline))
      throw InvalidArgument("stable_score: task '" + r.task +
                            "' has accuracy or baseline outside [0, 100]");
    sum += r.accuracy - r.baseline;
  }
  return sum / static_cast<double>(results.size());
}

BaselineTable::BaselineTable(std::map<std::string, double> entries) : entries_(std::move(entries)) {
  for (const auto& [task, b] : entries_)
    if (!is_percent(b)) throw InvalidArgument("baseline for '" + task + "' outside [0, 100]");
}

BaselineTable BaselineTable::text_defaults() {
  return BaselineTable({
      {"AGIEval-LSAT", chance_baseline(5)},
      {"ARC-easy", chance_baseline(4)},
      {"BigBench-CC", chance_baseline(4)},
      {"BigBench-CS", chance_baseline(4)},
      {"COPA", chance_baseline(2)},
      {"HellaSwag", chance_baseline(4)},
      {"MathQA", chance_baseline(5)},
      {"PIQA", chance_baseline(2)},
      {"PubMedQA", chance_baseline(3)},
  });
}

BaselineTable BaselineTable::vision_defaults() {
  return BaselineTable({
      {"POPE", 50.0},
      {"RefCOCO", 50.0},
      {"VQAv2", 0.0},
      {"GQA", 0.0},
      {"TextVQA", 0.0},
      {"OCID", 0.0},
  });
}

BaselineTable BaselineTable::defaults() {
  auto all = text_defaults().entries_;
  for (const auto& [k, v] : vision_defaults().entries_) all.emplace(k, v);
  return BaselineTable(std::move(all));
}

BaselineTable BaselineTable::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("baseline table: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("baseline table: expected an object");
  std::map<std::string, double> entries;
  for (const auto& [task, v] : j.items()) {
    if (v.is_number()) {
      entries[task] = v.get<double>();
    } else if (v.is_object() && v.size() == 1 && v.contains("choices") &&
               v["choices"].is_number_unsigned()) {
      entries[task] = chance_baseline(v["choices"].get<unsigned>());
    } else {
      throw InvalidArgument("baseline table: entry '" + task +
                            "' must be a number or {\"choices\": n}");
    }
  }
  return BaselineTable(std::move(entries));
}

BaselineTable BaselineTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open baseline table '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::optional<double> BaselineTable::find(std::string_view task) const {
  auto it = entries_.find(std::string(task));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<ScoreInput> parse_score_inputs(std::string_view ndjson) {
  std::vector<ScoreInput> out;
  std::istringstream in{std::string(ndjson)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "results line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InvalidArgument(where + ": not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw InvalidArgument(where + ": expected an object");
    for (const auto& [key, _] : j.items())
      if (key != "task" && key != "accuracy" && key != "baseline")
        throw InvalidArgument(where + ": unknown key '" + key + "'");
    if (!j.contains("task") || !j["task"].is_string())
      throw InvalidArgument(where + ": 'task' must be a string");
    if (!j.contains("accuracy") || !j["accuracy"].is_number())
      throw InvalidArgument(where + ": 'accuracy' must be a number");
    ScoreInput s{j["task"].get<std::string>(), j["accuracy"].get<double>(), std::nullopt};
    if (j.contains("baseline") && !j["baseline"].is_null()) {
      if (!j["baseline"].is_number()) throw InvalidArgument(where + ": 'baseline' must be a number");
      s.baseline = j["baseline"].get<double>();
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ScoreInput> load_score_inputs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open results file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_score_inputs(buf.str());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

ScoreReport score_report(std::span<const ScoreInput> inputs, const BaselineTable& table) {
  ScoreReport report;
  for (const auto& in : inputs) {
    auto baseline = in.baseline ? in.baseline : table.find(in.task);
    if (!baseline)
      throw InvalidArgument("unknown task '" + in.task +
                            "': no baseline in the input or the baseline table");
    report.rows.push_back({in.task, in.accuracy, *baseline});
  }
  report.stable_score = stable_score(report.rows);
  return report;
}

std::string ScoreReport::to_text() const {
  std::size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.task.size());
  std::ostringstream os;
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  os << pad("task") << "  accuracy  baseline     delta\n";
  for (const auto& r : rows) {
    char line[128];
    std::snprintf(line, sizeof line, "  %8.2f  %8.2f  %8.2f\n", r.accuracy, r.baseline,
                  r.accuracy - r.baseline);
    os << pad(r.task) << line;
  }
  os << "stable_score: " << two_decimals(stable_score) << "\n";
  return os.str();
}

std::string ScoreReport::to_ndjson() const {
  std::ostringstream os;
  for (const auto& r : rows)
    os << json{{"task", r.task},
               {"accuracy", r.accuracy},
               {"baseline", r.baseline},
               {"delta", r.accuracy - r.baseline}}
              .dump()
       << "\n";
  os << json{{"stable_score", stable_score}, {"tasks", rows.size()}}.dump() << "\n";
  return os.str();
}

}  // namespace mmpipe
