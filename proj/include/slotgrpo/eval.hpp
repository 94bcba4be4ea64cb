// Copyright 2026 The slotgrpo Authors.
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

#pragma once

// Accuracy metric, train x test generalization matrices, Overall aggregates
// and method comparison tables.

#include <Eigen/Core>

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slotgrpo/trainer.hpp"

namespace slotgrpo {

struct EvalResult {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

/// Greedy-decoded answer letter per item.
std::vector<char> predict(const Policy& policy, std::span<const VqaItem> items);

/// (1/N) sum 1[prediction == answer]. Throws on an empty test list or when the
/// policy's feature/option dimensions differ from the items'.
EvalResult evaluate_accuracy(const Policy& policy, std::span<const VqaItem> items);

/// Per-domain results in first-appearance order.
std::vector<std::pair<std::string, EvalResult>> evaluate_per_domain(
    const Policy& policy, std::span<const VqaItem> items);

struct OverallAggregates {
  Eigen::VectorXd row;  // mean over test columns, per train row
  Eigen::VectorXd col;  // mean over train rows, per test column
  double grand = 0.0;   // mean of the row overalls
};

OverallAggregates overall_aggregates(const Eigen::MatrixXd& cells);

struct GeneralizationMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd cells;  // percent, [train][test]
  OverallAggregates overall;
};

using LabeledSplits = std::vector<std::pair<std::string, SplitDataset>>;

/// One policy per train label, evaluated on every label's test split.
/// `jobs` > 1 trains rows concurrently; results do not depend on it.
GeneralizationMatrix cross_matrix(const LabeledSplits& suite, const GrpoConfig& cfg,
                                  TrainerKind trainer, int jobs = 1,
                                  std::vector<TrainLog>* logs = nullptr);

/// Per-row training seed used by cross_matrix.
std::uint64_t row_seed(std::uint64_t seed, const std::string& label);

/// CSV with header row of test labels plus Overall, one row per train label,
/// then the Overall row. Two decimals.
std::string matrix_csv(const GeneralizationMatrix& m);

struct MethodScores {
  std::string method;
  std::vector<double> values;
};

struct ComparisonReport {
  std::string text;
  std::string csv;
};

/// Marks the best value per column with '*' and the runner-up with '+'.
/// Ties go to the earlier method.
ComparisonReport comparison_report(const std::vector<std::string>& columns,
                                   const std::vector<MethodScores>& methods);

/// Column overalls plus the grand overall: the per-method row of a comparison.
MethodScores overall_scores(const std::string& method, const GeneralizationMatrix& m);

}  // namespace slotgrpo
