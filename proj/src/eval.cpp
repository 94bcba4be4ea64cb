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

#include "slotgrpo/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <numeric>
#include <sstream>

namespace slotgrpo {
namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void check_dims(const Policy& policy, const VqaItem& item) {
  if (item.features.size() != policy.features())
    throw ValidationError("feature dimension mismatch: checkpoint F=" +
                          std::to_string(policy.features()) + ", dataset F=" +
                          std::to_string(item.features.size()));
  if (item.num_options() != policy.schema().num_answers)
    throw ValidationError("option count mismatch: checkpoint K=" +
                          std::to_string(policy.schema().num_answers) +
                          ", dataset K=" + std::to_string(item.num_options()));
}

}  // namespace

std::vector<char> predict(const Policy& policy, std::span<const VqaItem> items) {
  std::vector<char> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    check_dims(policy, item);
    out.push_back(greedy_decode(policy, item).answer_letter());
  }
  return out;
}

EvalResult evaluate_accuracy(const Policy& policy, std::span<const VqaItem> items) {
  if (items.empty()) throw ValidationError("evaluate_accuracy: empty test list");
  const auto predictions = predict(policy, items);
  EvalResult r;
  r.n = items.size();
  for (std::size_t i = 0; i < items.size(); ++i)
    if (predictions[i] == items[i].answer) ++r.correct;
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.n);
  return r;
}

std::vector<std::pair<std::string, EvalResult>> evaluate_per_domain(
    const Policy& policy, std::span<const VqaItem> items) {
  std::vector<std::string> order;
  for (const auto& item : items)
    if (std::find(order.begin(), order.end(), item.domain) == order.end())
      order.push_back(item.domain);
  std::vector<std::pair<std::string, EvalResult>> out;
  for (const auto& domain : order) {
    std::vector<VqaItem> subset;
    std::copy_if(items.begin(), items.end(), std::back_inserter(subset),
                 [&](const VqaItem& it) { return it.domain == domain; });
    out.emplace_back(domain, evaluate_accuracy(policy, subset));
  }
  return out;
}

OverallAggregates overall_aggregates(const Eigen::MatrixXd& cells) {
  if (cells.rows() == 0 || cells.cols() == 0)
    throw ValidationError("overall_aggregates: empty matrix");
  OverallAggregates a;
  a.row = cells.rowwise().mean();
  a.col = cells.colwise().mean().transpose();
  a.grand = a.row.mean();
  return a;
}

std::uint64_t row_seed(std::uint64_t seed, const std::string& label) {
  return derive_seed(seed, "train-row", label);
}

GeneralizationMatrix cross_matrix(const LabeledSplits& suite, const GrpoConfig& cfg,
                                  TrainerKind trainer, int jobs,
                                  std::vector<TrainLog>* logs) {
  if (suite.size() < 2)
    throw ValidationError("cross_matrix: need at least 2 domains, got " +
                          std::to_string(suite.size()));
  const auto n = static_cast<Eigen::Index>(suite.size());
  GeneralizationMatrix m;
  m.cells.resize(n, n);
  for (const auto& [label, split] : suite) m.labels.push_back(label);

  auto run_row = [&](Eigen::Index row) {
    GrpoConfig row_cfg = cfg;
    row_cfg.seed = row_seed(cfg.seed, suite[static_cast<std::size_t>(row)].first);
    auto result = train(trainer, suite[static_cast<std::size_t>(row)].second, row_cfg);
    Eigen::VectorXd cells(n);
    for (Eigen::Index col = 0; col < n; ++col)
      cells[col] =
          100.0 * evaluate_accuracy(result.policy, suite[static_cast<std::size_t>(col)].second.test)
                      .accuracy;
    return std::make_pair(cells, std::move(result.log));
  };

  std::vector<TrainLog> row_logs(static_cast<std::size_t>(n));
  const int workers = std::max(1, jobs);
  for (Eigen::Index start = 0; start < n; start += workers) {
    const Eigen::Index end = std::min<Eigen::Index>(n, start + workers);
    std::vector<std::future<std::pair<Eigen::VectorXd, TrainLog>>> pending;
    for (Eigen::Index row = start; row < end; ++row)
      pending.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred,
                                   run_row, row));
    for (Eigen::Index row = start; row < end; ++row) {
      auto [cells, log] = pending[static_cast<std::size_t>(row - start)].get();
      m.cells.row(row) = cells.transpose();
      row_logs[static_cast<std::size_t>(row)] = std::move(log);
    }
  }
  m.overall = overall_aggregates(m.cells);
  if (logs) *logs = std::move(row_logs);
  return m;
}

std::string matrix_csv(const GeneralizationMatrix& m) {
  std::ostringstream out;
  out << "train\\test";
  for (const auto& label : m.labels) out << ',' << csv_field(label);
  out << ",Overall\n";
  for (Eigen::Index r = 0; r < m.cells.rows(); ++r) {
    out << csv_field(m.labels[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < m.cells.cols(); ++c) out << ',' << fixed2(m.cells(r, c));
    out << ',' << fixed2(m.overall.row[r]) << '\n';
  }
  out << "Overall";
  for (Eigen::Index c = 0; c < m.cells.cols(); ++c) out << ',' << fixed2(m.overall.col[c]);
  out << ',' << fixed2(m.overall.grand) << '\n';
  return out.str();
}

MethodScores overall_scores(const std::string& method, const GeneralizationMatrix& m) {
  MethodScores s{method, {}};
  for (Eigen::Index c = 0; c < m.overall.col.size(); ++c)
    s.values.push_back(m.overall.col[c]);
  s.values.push_back(m.overall.grand);
  return s;
}

ComparisonReport comparison_report(const std::vector<std::string>& columns,
                                   const std::vector<MethodScores>& methods) {
  if (methods.empty()) throw ValidationError("comparison_report: no methods");
  for (const auto& m : methods)
    if (m.values.size() != columns.size())
      throw ValidationError("comparison_report: method '" + m.method +
                            "' has the wrong number of values");

  // marks[method][column]
  std::vector<std::vector<char>> marks(methods.size(),
                                       std::vector<char>(columns.size(), ' '));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    std::vector<std::size_t> order(methods.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return methods[a].values[c] > methods[b].values[c];
    });
    marks[order[0]][c] = '*';
    if (order.size() > 1) marks[order[1]][c] = '+';
  }

  std::size_t name_width = 6;
  for (const auto& m : methods) name_width = std::max(name_width, m.method.size());
  std::size_t cell_width = 8;
  for (const auto& c : columns) cell_width = std::max(cell_width, c.size() + 1);

  auto pad = [](std::string s, std::size_t w, bool left) {
    if (s.size() < w) {
      if (left) s.append(w - s.size(), ' ');
      else s.insert(0, w - s.size(), ' ');
    }
    return s;
  };

  std::ostringstream text, csv;
  text << pad("Method", name_width, true);
  csv << "method";
  for (const auto& c : columns) {
    text << " | " << pad(c, cell_width, false);
    csv << ',' << csv_field(c);
  }
  text << '\n' << std::string(name_width, '-');
  for (std::size_t c = 0; c < columns.size(); ++c)
    text << "-+-" << std::string(cell_width, '-');
  text << '\n';
  csv << '\n';
  for (std::size_t i = 0; i < methods.size(); ++i) {
    text << pad(methods[i].method, name_width, true);
    csv << csv_field(methods[i].method);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string cell = fixed2(methods[i].values[c]) + marks[i][c];
      text << " | " << pad(cell, cell_width, false);
      csv << ',' << (marks[i][c] == ' ' ? fixed2(methods[i].values[c]) : cell);
    }
    text << '\n';
    csv << '\n';
  }
  text << "* best, + second best\n";
  return {text.str(), csv.str()};
}

}  // namespace slotgrpo
