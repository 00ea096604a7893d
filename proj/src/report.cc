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

#include "privex/report.h"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "privex/error.h"

namespace privex {

namespace {

std::string Quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string Fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string Optional(const std::optional<double>& v) { return v ? Fixed(*v) : ""; }

void CheckUnit(double v, const EvaluationRow& row, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument("report row '" + row.experiment + "': " + name +
                                " = " + std::to_string(v) + " outside [0, 1]");
  }
}

// Splits one CSV record starting at `pos`; advances past the line break.
std::vector<std::string> ReadRecord(const std::string& text, size_t& pos) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          fields.back() += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) throw LoadError("report CSV: unterminated quoted field");
  return fields;
}

double ParseMetric(const std::string& s, int line) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw LoadError("report CSV line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::string EmitReportCsv(const std::vector<EvaluationRow>& rows) {
  std::ostringstream out;
  out << kReportHeader << "\n";
  for (const EvaluationRow& r : rows) {
    out << Quote(r.experiment) << ',' << Quote(r.dataset) << ',' << Fixed(r.identity_acc)
        << ',' << Optional(r.replacement_acc) << ',' << Optional(r.source_leakage_acc)
        << ',' << Fixed(r.task_acc) << ',' << Fixed(r.task_f1) << "\n";
  }
  return out.str();
}

EvaluationReport BuildReport(std::vector<EvaluationRow> rows) {
  for (const EvaluationRow& r : rows) {
    CheckUnit(r.identity_acc, r, "identity_acc");
    if (r.replacement_acc) CheckUnit(*r.replacement_acc, r, "replacement_acc");
    if (r.source_leakage_acc) CheckUnit(*r.source_leakage_acc, r, "source_leakage_acc");
    CheckUnit(r.task_acc, r, "task_acc");
    CheckUnit(r.task_f1, r, "task_f1");
  }
  EvaluationReport report;
  report.csv = EmitReportCsv(rows);
  report.rows = std::move(rows);
  return report;
}

std::vector<EvaluationRow> ParseReportCsv(const std::string& text) {
  size_t pos = 0;
  const auto header = ReadRecord(text, pos);
  std::string joined;
  for (size_t i = 0; i < header.size(); ++i) joined += (i ? "," : "") + header[i];
  if (joined != kReportHeader) throw LoadError("report CSV: unexpected header '" + joined + "'");
  std::vector<EvaluationRow> rows;
  int line = 1;
  while (pos < text.size()) {
    ++line;
    const auto f = ReadRecord(text, pos);
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 7) {
      throw LoadError("report CSV line " + std::to_string(line) + ": expected 7 fields, got " +
                      std::to_string(f.size()));
    }
    EvaluationRow r;
    r.experiment = f[0];
    r.dataset = f[1];
    r.identity_acc = ParseMetric(f[2], line);
    if (!f[3].empty()) r.replacement_acc = ParseMetric(f[3], line);
    if (!f[4].empty()) r.source_leakage_acc = ParseMetric(f[4], line);
    r.task_acc = ParseMetric(f[5], line);
    r.task_f1 = ParseMetric(f[6], line);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace privex
