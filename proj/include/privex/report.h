//
// Copyright 2026 The Privex Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef PRIVEX_REPORT_H_
#define PRIVEX_REPORT_H_

#include <optional>
#include <string>
#include <vector>

namespace privex {

struct EvaluationRow {
  std::string experiment;
  std::string dataset;
  double identity_acc = 0.0;
  std::optional<double> replacement_acc;
  std::optional<double> source_leakage_acc;
  double task_acc = 0.0;
  double task_f1 = 0.0;

  bool operator==(const EvaluationRow&) const = default;
};

struct EvaluationReport {
  std::vector<EvaluationRow> rows;
  std::string csv;
};

inline constexpr const char* kReportHeader =
    "experiment,dataset,identity_acc,replacement_acc,source_leakage_acc,task_acc,"
    "task_f1";

// Rows in input order; metrics with four decimals, absent optionals empty.
// Throws std::invalid_argument when a present metric lies outside [0, 1].
EvaluationReport BuildReport(std::vector<EvaluationRow> rows);
std::string EmitReportCsv(const std::vector<EvaluationRow>& rows);
// Inverse of EmitReportCsv (values rounded to four decimals).
std::vector<EvaluationRow> ParseReportCsv(const std::string& text);

}  // namespace privex

#endif  // PRIVEX_REPORT_H_
