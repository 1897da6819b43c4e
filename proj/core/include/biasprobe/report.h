// Copyright 2026 The BiasProbe Authors
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

// Aggregation of classification records into per-experiment tables, and
// their CSV and JSON emission.

#ifndef BIASPROBE_REPORT_H_
#define BIASPROBE_REPORT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "biasprobe/classify.h"
#include "biasprobe/transforms.h"

namespace biasprobe {

struct Metric {
  size_t numerator = 0;
  size_t denominator = 0;
  // Percentage at full precision; absent for an empty denominator.
  std::optional<double> percent() const;
};

// Percentage rounded half-up to one decimal, computed exactly in integers.
// Empty for an empty denominator.
std::string FormatPercent(size_t numerator, size_t denominator);

struct ReportRow {
  std::vector<std::string> keys;
  size_t count = 0;
  std::vector<Metric> metrics;  // parallel to ReportTable::metric_columns
};

struct ReportTable {
  std::string name;  // file stem, e.g. "anchoring_print_var"
  std::vector<std::string> key_columns;
  std::vector<std::string> metric_columns;
  std::vector<ReportRow> rows;

  const ReportRow* FindRow(std::span<const std::string> keys) const;
  std::optional<Metric> Get(std::span<const std::string> keys,
                            const std::string& metric) const;
};

// Tables for one experiment. Fails when `classifications` has no record for
// the experiment or lacks a record for any of its probes.
absl::StatusOr<std::vector<ReportTable>> Aggregate(
    std::span<const TransformedPrompt> probes,
    std::span<const Classification> classifications, Experiment experiment,
    const std::string& model_label);

// Wide form: key columns, n, then one rounded rate column per metric.
std::string ToCsv(const ReportTable& table);
// Long form: key columns, metric, numerator, denominator, percent.
std::string ToLongCsv(const ReportTable& table);
// Full-precision structured form of several tables.
std::string ToJson(std::span<const ReportTable> tables);

struct RunSummary {
  std::string corpus_sha256;
  uint64_t seed = 0;
  std::string backend_id;
  std::map<std::string, size_t> cardinalities;  // probes per experiment
  std::map<std::string, size_t> filter_counts;  // problems kept per n_lines
};

std::string SerializeSummary(const RunSummary& summary);

// Writes <name>.csv and <name>_long.csv per table, report.json and
// summary.json into `dir`.
absl::Status EmitReports(const std::filesystem::path& dir,
                         std::span<const ReportTable> tables,
                         const RunSummary& summary);

}  // namespace biasprobe

#endif  // BIASPROBE_REPORT_H_
