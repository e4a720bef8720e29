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
#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mmpipe/evalagg.hpp"

namespace mmpipe {
namespace {

std::vector<TaskResult> with_baselines(const std::vector<std::pair<std::string, double>>& acc,
                                       const BaselineTable& table) {
  std::vector<TaskResult> out;
  for (const auto& [task, a] : acc) out.push_back({task, a, *table.find(task)});
  return out;
}

const std::vector<std::string> kTextTasks = {"AGIEval-LSAT", "ARC-easy", "BigBench-CC",
                                             "BigBench-CS",  "COPA",     "HellaSwag",
                                             "MathQA",       "PIQA",     "PubMedQA"};

std::vector<std::pair<std::string, double>> text_column(std::vector<double> v) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(kTextTasks[i], v[i]);
  return out;
}

TEST(ChanceBaseline, Values) {
  EXPECT_EQ(chance_baseline(4), 25.0);
  EXPECT_EQ(chance_baseline(2), 50.0);
  EXPECT_EQ(chance_baseline(3), 100.0 / 3.0);
  EXPECT_THROW(chance_baseline(1), InvalidArgument);
  EXPECT_THROW(chance_baseline(0), InvalidArgument);
}

TEST(BaselineTable, TextDefaultsFromChoiceCounts) {
  const auto t = BaselineTable::text_defaults();
  EXPECT_EQ(*t.find("AGIEval-LSAT"), 20.0);
  EXPECT_EQ(*t.find("ARC-easy"), 25.0);
  EXPECT_EQ(*t.find("COPA"), 50.0);
  EXPECT_EQ(*t.find("MathQA"), 20.0);
  EXPECT_EQ(*t.find("PubMedQA"), 100.0 / 3.0);
  EXPECT_EQ(t.size(), 9u);
  EXPECT_FALSE(t.find("BoolQ"));
}

TEST(BaselineTable, VisionSumConstraint) {
  const auto v = BaselineTable::vision_defaults();
  double five = 0.0;
  for (const char* t : {"POPE", "RefCOCO", "VQAv2", "GQA", "TextVQA"}) five += *v.find(t);
  EXPECT_EQ(five, 100.0);
  EXPECT_EQ(five + *v.find("OCID"), 100.0);
  EXPECT_EQ(*v.find("POPE"), 50.0);
}

TEST(BaselineTable, FromJson) {
  const auto t = BaselineTable::from_json(R"({"A": 12.5, "B": {"choices": 4}})");
  EXPECT_EQ(*t.find("A"), 12.5);
  EXPECT_EQ(*t.find("B"), 25.0);
  EXPECT_THROW(BaselineTable::from_json(R"({"A": "x"})"), InvalidArgument);
  EXPECT_THROW(BaselineTable::from_json(R"({"A": 120})"), InvalidArgument);
  EXPECT_THROW(BaselineTable::from_json(R"([1])"), InvalidArgument);
  EXPECT_THROW(BaselineTable::from_json(R"({"A": {"choices": 1}})"), InvalidArgument);
  EXPECT_THROW(BaselineTable::load("/nonexistent.json"), IoError);
}

TEST(BaselineTable, ShippedFileEqualsDefaults) {
  const auto file = BaselineTable::load(MMPIPE_SOURCE_DIR "/data/baselines/default.json");
  EXPECT_EQ(file.entries(), BaselineTable::defaults().entries());
}

TEST(StableScore, TextColumns) {
  const auto t = BaselineTable::text_defaults();
  struct Column {
    std::vector<double> acc;
    double expected;
  };
  const std::vector<Column> columns = {
      {{32.5, 59.3, 27.2, 35.8, 71.0, 58.2, 22.9, 70.5, 35.0}, 15.44},
      {{27.7, 72.3, 30.1, 46.2, 83.0, 66.5, 25.9, 74.4, 38.6}, 21.26},
      {{28.2, 77.1, 47.6, 46.7, 92.0, 72.8, 27.3, 79.1, 69.6}, 29.67},
      {{21.4, 69.5, 27.2, 46.5, 83.0, 65.1, 30.52, 76.0, 65.8}, 23.52},
      {{63.6, 80.6, 57.3, 56.5, 85.0, 67.78, 40.84, 76.22, 66.6}, 35.68},
  };
  for (const auto& c : columns)
    EXPECT_NEAR(stable_score(with_baselines(text_column(c.acc), t)), c.expected, 0.10);
  // The Qwen and LLaMA columns pin the table within rounding of the inputs.
  EXPECT_NEAR(stable_score(with_baselines(text_column(columns[3].acc), t)), 23.52, 0.005);
  EXPECT_NEAR(stable_score(with_baselines(text_column(columns[4].acc), t)), 35.68, 0.005);
}

TEST(StableScore, VisionColumns) {
  const auto v = BaselineTable::vision_defaults();
  const std::vector<std::pair<std::string, double>> ours = {
      {"TextVQA", 49.05}, {"RefCOCO", 61.29}, {"POPE", 87.33}, {"GQA", 61.11}, {"VQAv2", 76.82}};
  auto ours_ocid = ours;
  ours_ocid.emplace_back("OCID", 40.80);
  EXPECT_NEAR(stable_score(with_baselines(ours, v)), 47.13, 0.05);
  EXPECT_NEAR(stable_score(with_baselines(ours_ocid, v)), 46.08, 0.05);

  const std::vector<std::pair<std::string, double>> prismatic = {
      {"TextVQA", 51.78}, {"RefCOCO", 73.62}, {"POPE", 88.28}, {"GQA", 64.16}, {"VQAv2", 79.05}};
  auto prismatic_ocid = prismatic;
  prismatic_ocid.emplace_back("OCID", 50.56);
  EXPECT_NEAR(stable_score(with_baselines(prismatic, v)), 51.38, 0.05);
  EXPECT_NEAR(stable_score(with_baselines(prismatic_ocid, v)), 51.25, 0.05);

  const std::vector<std::pair<std::string, double>> paligemma = {
      {"TextVQA", 73.2}, {"RefCOCO", 77.9}, {"POPE", 87.0}, {"GQA", 67.0}, {"VQAv2", 85.6}};
  EXPECT_NEAR(stable_score(with_baselines(paligemma, v)), 58.14, 0.05);
}

TEST(StableScore, EqualToBaselinesIsZero) {
  std::vector<TaskResult> r = {{"a", 25, 25}, {"b", 50, 50}, {"c", 20, 20}};
  EXPECT_EQ(stable_score(r), 0.0);
}

TEST(StableScore, MayBeNegative) {
  std::vector<TaskResult> r = {{"a", 10, 25}};
  EXPECT_EQ(stable_score(r), -15.0);
}

TEST(StableScore, ShiftAndPermutation) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> acc(0.0, 90.0), base(0.0, 50.0), shift(0.0, 10.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<TaskResult> r;
    for (int k = 0; k < 1 + i % 12; ++k) r.push_back({"t" + std::to_string(k), acc(rng), base(rng)});
    const double s = stable_score(r);
    const double c = shift(rng);
    auto shifted = r;
    for (auto& t : shifted) t.accuracy += c;
    EXPECT_NEAR(stable_score(shifted), s + c, 1e-9);
    auto perm = r;
    std::shuffle(perm.begin(), perm.end(), rng);
    EXPECT_NEAR(stable_score(perm), s, 1e-12);
  }
}

TEST(StableScore, RejectsBadInput) {
  EXPECT_THROW(stable_score({}), InvalidArgument);
  std::vector<TaskResult> r = {{"a", 101, 25}};
  EXPECT_THROW(stable_score(r), InvalidArgument);
}

TEST(ScoreReport, JoinsBaselines) {
  const auto inputs = parse_score_inputs(
      R"({"task":"ARC-easy","accuracy":75.0}
{"task":"Custom","accuracy":40.0,"baseline":10}
)");
  const auto rep = score_report(inputs, BaselineTable::defaults());
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[1].baseline, 10.0);
  EXPECT_EQ(rep.stable_score, 40.0);
  EXPECT_NE(rep.to_text().find("stable_score: 40.00"), std::string::npos);
  EXPECT_NE(rep.to_ndjson().find("\"stable_score\":40.0"), std::string::npos);
}

TEST(ScoreReport, ExplicitBaselineWins) {
  const auto inputs = parse_score_inputs(R"({"task":"COPA","accuracy":60.0,"baseline":0})");
  EXPECT_EQ(score_report(inputs, BaselineTable::defaults()).stable_score, 60.0);
}

TEST(ScoreReport, UnknownTaskRejectedByName) {
  const auto inputs = parse_score_inputs(R"({"task":"Mystery","accuracy":60.0})");
  try {
    score_report(inputs, BaselineTable::defaults());
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("Mystery"), std::string::npos);
  }
}

TEST(ScoreReport, ParseErrors) {
  EXPECT_THROW(parse_score_inputs(R"({"task":"a"})"), InvalidArgument);
  EXPECT_THROW(parse_score_inputs(R"({"task":"a","accuracy":1,"n":3})"), InvalidArgument);
  EXPECT_THROW(parse_score_inputs("{bad"), InvalidArgument);
  EXPECT_TRUE(parse_score_inputs("\n\n").empty());
}

}  // namespace
}  // namespace mmpipe
