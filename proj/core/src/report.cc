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

#include "biasprobe/report.h"

#include <algorithm>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "biasprobe/io.h"
#include "json.hpp"

namespace biasprobe {
namespace {

using ordered_json = nlohmann::ordered_json;

struct Joined {
  const TransformedPrompt* probe;
  const Classification* c;
};

bool Passed(const Classification& c) { return c.functional_pass.value_or(false); }

// Counts records satisfying a predicate within a selection.
class Tally {
 public:
  template <typename Select, typename Hit>
  static Metric Of(std::span<const Joined> rows, Select select, Hit hit) {
    Metric m;
    for (const Joined& j : rows) {
      if (!select(j)) continue;
      ++m.denominator;
      if (hit(j)) ++m.numerator;
    }
    return m;
  }
};

size_t CountOf(std::span<const Joined> rows,
               const std::function<bool(const Joined&)>& select) {
  return static_cast<size_t>(std::count_if(rows.begin(), rows.end(), select));
}

std::string Csv(absl::string_view field) {
  if (field.find_first_of(",\"\n") == absl::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

auto CategoryIs(absl::string_view name) {
  return [name](const Joined& j) { return j.c->category == name; };
}

std::vector<ReportTable> FramingTables(std::span<const Joined> rows,
                                       const std::string& model) {
  ReportTable t;
  t.name = "framing";
  t.key_columns = {"model", "framing_line"};
  t.metric_columns = {"original_accuracy", "framed_accuracy",
                      "original_line_rate", "framed_line_rate"};
  auto is_original = [](const Joined& j) {
    return !std::get<FramingCondition>(j.probe->condition).line.has_value();
  };
  for (FramingLine line : kAllFramingLines) {
    auto framed = [line](const Joined& j) {
      return std::get<FramingCondition>(j.probe->condition).line == line;
    };
    const std::string original_flag = absl::StrCat("framing_line.", Key(line));
    ReportRow row;
    row.keys = {model, std::string(Key(line))};
    row.count = CountOf(rows, framed);
    if (row.count == 0) continue;
    auto pass = [](const Joined& j) { return Passed(*j.c); };
    row.metrics = {
        Tally::Of(rows, is_original, pass),
        Tally::Of(rows, framed, pass),
        Tally::Of(rows, is_original,
                  [&](const Joined& j) { return j.c->Flag(original_flag); }),
        Tally::Of(rows, framed,
                  [](const Joined& j) { return j.c->Flag(flag::kFramingLine); }),
    };
    t.rows.push_back(std::move(row));
  }
  return {t};
}

std::vector<ReportTable> AnchoringTables(std::span<const Joined> rows) {
  std::vector<ReportTable> tables;
  for (AnchorKind kind : {AnchorKind::kPrintVar, AnchorKind::kAddVar}) {
    for (bool renamed : {false, true}) {
      auto anchored = [=](const Joined& j) {
        const auto& c = std::get<AnchoringCondition>(j.probe->condition);
        return c.kind == kind && c.renamed == renamed;
      };
      if (CountOf(rows, anchored) == 0) continue;
      ReportTable t;
      t.name = absl::StrCat("anchoring_", Name(kind), renamed ? "_renamed" : "");
      t.key_columns = {"n_lines"};
      const bool print = kind == AnchorKind::kPrintVar;
      t.metric_columns =
          print ? std::vector<std::string>{"anc_acc", "prints", "prints_and_pass",
                                           "for_var", "for_var_and_pass", "copy",
                                           "no_anc_acc"}
                : std::vector<std::string>{"anc_acc", "returns_tmp",
                                           "returns_tmp_and_pass", "copy",
                                           "no_anc_acc"};
      for (size_t n = 0; n <= kMaxAnchorLines; ++n) {
        auto at_n = [&](const Joined& j) {
          return anchored(j) &&
                 std::get<AnchoringCondition>(j.probe->condition).n_lines == n;
        };
        auto baseline_at_n = [&](const Joined& j) {
          const auto& c = std::get<AnchoringCondition>(j.probe->condition);
          return c.kind == AnchorKind::kNone && c.n_lines == n;
        };
        ReportRow row;
        row.keys = {absl::StrCat(n)};
        row.count = CountOf(rows, at_n);
        if (row.count == 0) continue;
        auto pass = [](const Joined& j) { return Passed(*j.c); };
        auto flag_and_pass = [](const char* f) {
          return [f](const Joined& j) { return j.c->Flag(f) && Passed(*j.c); };
        };
        auto has_flag = [](const char* f) {
          return [f](const Joined& j) { return j.c->Flag(f); };
        };
        row.metrics.push_back(Tally::Of(rows, at_n, pass));
        if (print) {
          row.metrics.push_back(Tally::Of(rows, at_n, has_flag(flag::kPrintVar)));
          row.metrics.push_back(
              Tally::Of(rows, at_n, flag_and_pass(flag::kPrintVar)));
          row.metrics.push_back(Tally::Of(rows, at_n, has_flag(flag::kForVar)));
          row.metrics.push_back(
              Tally::Of(rows, at_n, flag_and_pass(flag::kForVar)));
        } else {
          row.metrics.push_back(
              Tally::Of(rows, at_n, has_flag(flag::kReturnsTmp)));
          row.metrics.push_back(
              Tally::Of(rows, at_n, flag_and_pass(flag::kReturnsTmp)));
        }
        row.metrics.push_back(Tally::Of(rows, at_n, has_flag(flag::kExactCopy)));
        row.metrics.push_back(Tally::Of(rows, baseline_at_n, pass));
        t.rows.push_back(std::move(row));
      }
      tables.push_back(std::move(t));
    }
  }
  return tables;
}

std::vector<ReportTable> MathEqTables(std::span<const Joined> rows) {
  ReportTable t;
  t.name = "matheq";
  t.key_columns = {"style", "order"};
  t.metric_columns = {"accuracy", "swapped_order", "other",
                      "swapped_share_of_errors"};
  for (PromptStyle style :
       {PromptStyle::kInstructional, PromptStyle::kNonInstructional}) {
    for (OperationOrder order :
         {OperationOrder::kUnaryFirst, OperationOrder::kBinaryFirst}) {
      auto sel = [=](const Joined& j) {
        const auto& c = std::get<MathEqCondition>(j.probe->condition);
        return c.style == style && c.order == order;
      };
      ReportRow row;
      row.keys = {std::string(Name(style)), std::string(Name(order))};
      row.count = CountOf(rows, sel);
      if (row.count == 0) continue;
      auto error = [&](const Joined& j) {
        return sel(j) && j.c->category != Name(MathEqCategory::kCorrect);
      };
      row.metrics = {
          Tally::Of(rows, sel, CategoryIs(Name(MathEqCategory::kCorrect))),
          Tally::Of(rows, sel, CategoryIs(Name(MathEqCategory::kSwappedOrder))),
          Tally::Of(rows, sel, CategoryIs(Name(MathEqCategory::kOther))),
          Tally::Of(rows, error,
                    CategoryIs(Name(MathEqCategory::kSwappedOrder))),
      };
      t.rows.push_back(std::move(row));
    }
  }
  return {t};
}

std::vector<ReportTable> AttributeTables(std::span<const Joined> rows) {
  std::vector<ReportTable> tables;
  for (bool conflicting_only : {false, true}) {
    ReportTable t;
    t.name = conflicting_only ? "attribute_conflicting" : "attribute";
    t.key_columns = {"placement"};
    t.metric_columns = {"correct", "matches_function_name", "other"};
    for (NamePlacement placement : kAllPlacements) {
      auto sel = [=](const Joined& j) {
        const auto& c = std::get<AttributeCondition>(j.probe->condition);
        return c.placement == placement && (!conflicting_only || c.conflicting());
      };
      ReportRow row;
      row.keys = {std::string(Name(placement))};
      row.count = CountOf(rows, sel);
      if (row.count == 0) continue;
      row.metrics = {
          Tally::Of(rows, sel, CategoryIs(Name(AttributeCategory::kCorrect))),
          Tally::Of(rows, sel,
                    CategoryIs(Name(AttributeCategory::kMatchesFunctionName))),
          Tally::Of(rows, sel, CategoryIs(Name(AttributeCategory::kOther))),
      };
      t.rows.push_back(std::move(row));
    }
    tables.push_back(std::move(t));
  }
  return tables;
}

std::vector<ReportTable> DeletionTables(std::span<const Joined> rows) {
  ReportTable t;
  t.name = "deletion";
  t.key_columns = {"style", "package_count"};
  const DeletionCategory cats[] = {
      DeletionCategory::kCorrect, DeletionCategory::kFirstPackageOnly,
      DeletionCategory::kAnyPackage, DeletionCategory::kNoAction,
      DeletionCategory::kOtherError};
  for (DeletionCategory c : cats) t.metric_columns.emplace_back(Name(c));
  for (DeletionStyle style :
       {DeletionStyle::kInstructional, DeletionStyle::kDocstring}) {
    for (size_t k = 1; k <= kMaxDeletionPackages; ++k) {
      auto sel = [=](const Joined& j) {
        const auto& c = std::get<DeletionCondition>(j.probe->condition);
        return c.style == style && c.packages.size() == k;
      };
      ReportRow row;
      row.keys = {std::string(Name(style)), absl::StrCat(k)};
      row.count = CountOf(rows, sel);
      if (row.count == 0) continue;
      for (DeletionCategory c : cats) {
        row.metrics.push_back(Tally::Of(rows, sel, CategoryIs(Name(c))));
      }
      t.rows.push_back(std::move(row));
    }
  }
  return {t};
}

std::vector<ReportTable> Gpt3AnchoringTables(std::span<const Joined> rows) {
  ReportTable t;
  t.name = "gpt3_anchoring";
  t.key_columns = {"percent"};
  const AnchoringShift shifts[] = {
      AnchoringShift::kNoChange, AnchoringShift::kTowardAnchor,
      AnchoringShift::kAwayFromAnchor, AnchoringShift::kGibberish};
  for (AnchoringShift s : shifts) t.metric_columns.emplace_back(Name(s));
  t.metric_columns.push_back("matches_anchor_of_toward");
  t.metric_columns.push_back("baseline_gibberish");
  std::vector<int> percents;
  for (const Joined& j : rows) {
    percents.push_back(std::get<Gpt3AnchoringCondition>(j.probe->condition).percent);
  }
  std::sort(percents.begin(), percents.end());
  percents.erase(std::unique(percents.begin(), percents.end()), percents.end());
  for (int p : percents) {
    auto at_p = [p](const Joined& j) {
      return std::get<Gpt3AnchoringCondition>(j.probe->condition).percent == p;
    };
    auto anchored = [&](const Joined& j) {
      return at_p(j) && std::get<Gpt3AnchoringCondition>(j.probe->condition)
                                .direction != AnchorDirection::kBaseline;
    };
    auto baseline = [&](const Joined& j) {
      return at_p(j) && !anchored(j);
    };
    auto toward = [&](const Joined& j) {
      return anchored(j) && j.c->category == Name(AnchoringShift::kTowardAnchor);
    };
    ReportRow row;
    row.keys = {absl::StrCat(p)};
    row.count = CountOf(rows, anchored);
    for (AnchoringShift s : shifts) {
      row.metrics.push_back(Tally::Of(rows, anchored, CategoryIs(Name(s))));
    }
    row.metrics.push_back(Tally::Of(
        rows, toward, [](const Joined& j) { return j.c->Flag(flag::kMatchesAnchor); }));
    row.metrics.push_back(
        Tally::Of(rows, baseline, CategoryIs(category::kGibberish)));
    t.rows.push_back(std::move(row));
  }
  return {t};
}

std::vector<ReportTable> Gpt3FramingTables(std::span<const Joined> rows) {
  ReportTable ranges;
  ranges.name = "gpt3_framing";
  ranges.key_columns = {"framing", "save_probability"};
  ranges.metric_columns = {"risky", "safe", "gibberish"};
  ReportTable by_fraction;
  by_fraction.name = "gpt3_framing_by_fraction";
  by_fraction.key_columns = {"framing", "save_fraction"};
  by_fraction.metric_columns = ranges.metric_columns;

  std::vector<Fraction> fractions(std::begin(kSaveFractions),
                                  std::end(kSaveFractions));
  std::stable_sort(fractions.begin(), fractions.end(),
                   [](const Fraction& a, const Fraction& b) {
                     return a.numerator * b.denominator <
                            b.numerator * a.denominator;
                   });
  auto add_row = [&](ReportTable& t, std::vector<std::string> keys,
                     const std::function<bool(const Joined&)>& sel) {
    ReportRow row;
    row.keys = std::move(keys);
    row.count = CountOf(rows, sel);
    if (row.count == 0) return;
    row.metrics = {Tally::Of(rows, sel, CategoryIs(category::kRisky)),
                   Tally::Of(rows, sel, CategoryIs(category::kSafe)),
                   Tally::Of(rows, sel, CategoryIs(category::kGibberish))};
    t.rows.push_back(std::move(row));
  };
  for (ScenarioFraming framing : {ScenarioFraming::kSave, ScenarioFraming::kDie}) {
    auto scenario = [](const Joined& j) -> const FramingScenario& {
      return std::get<FramingScenario>(j.probe->condition);
    };
    // Sign of (fraction - 1/2) without floating point.
    auto side = [&](const Joined& j) {
      const Fraction& f = scenario(j).save_fraction;
      const int diff = 2 * f.numerator - f.denominator;
      return diff < 0 ? -1 : (diff > 0 ? 1 : 0);
    };
    const std::string fname(Name(framing));
    const std::pair<const char*, int> bands[] = {
        {"lt_half", -1}, {"half", 0}, {"gt_half", 1}};
    for (const auto& [label, sign] : bands) {
      add_row(ranges, {fname, label}, [&, sign = sign](const Joined& j) {
        return scenario(j).framing == framing && side(j) == sign;
      });
    }
    add_row(ranges, {fname, "all"},
            [&](const Joined& j) { return scenario(j).framing == framing; });
    for (const Fraction& f : fractions) {
      add_row(by_fraction, {fname, f.ToString()}, [&](const Joined& j) {
        return scenario(j).framing == framing && scenario(j).save_fraction == f;
      });
    }
  }
  return {ranges, by_fraction};
}

}  // namespace

std::optional<double> Metric::percent() const {
  if (denominator == 0) return std::nullopt;
  return 100.0 * static_cast<double>(numerator) /
         static_cast<double>(denominator);
}

std::string FormatPercent(size_t numerator, size_t denominator) {
  if (denominator == 0) return "";
  const uint64_t tenths =
      (2000 * static_cast<uint64_t>(numerator) + denominator) /
      (2 * static_cast<uint64_t>(denominator));
  return absl::StrCat(tenths / 10, ".", tenths % 10);
}

const ReportRow* ReportTable::FindRow(std::span<const std::string> keys) const {
  for (const ReportRow& row : rows) {
    if (std::equal(row.keys.begin(), row.keys.end(), keys.begin(), keys.end())) {
      return &row;
    }
  }
  return nullptr;
}

std::optional<Metric> ReportTable::Get(std::span<const std::string> keys,
                                       const std::string& metric) const {
  const ReportRow* row = FindRow(keys);
  if (row == nullptr) return std::nullopt;
  for (size_t i = 0; i < metric_columns.size(); ++i) {
    if (metric_columns[i] == metric) return row->metrics[i];
  }
  return std::nullopt;
}

absl::StatusOr<std::vector<ReportTable>> Aggregate(
    std::span<const TransformedPrompt> probes,
    std::span<const Classification> classifications, Experiment experiment,
    const std::string& model_label) {
  std::map<absl::string_view, const Classification*> by_id;
  for (const Classification& c : classifications) {
    if (c.experiment == experiment) by_id.emplace(c.probe_id, &c);
  }
  if (by_id.empty()) {
    return absl::FailedPreconditionError(absl::StrCat(
        "no classifications for experiment ", Name(experiment)));
  }
  std::vector<Joined> rows;
  std::vector<std::string> missing;
  for (const TransformedPrompt& p : probes) {
    if (p.experiment != experiment) continue;
    auto it = by_id.find(p.probe_id);
    if (it == by_id.end()) {
      missing.push_back(p.probe_id);
    } else {
      rows.push_back({&p, it->second});
    }
  }
  if (!missing.empty()) {
    const size_t shown = std::min<size_t>(missing.size(), 10);
    return absl::FailedPreconditionError(absl::StrCat(
        missing.size(), " probes lack classifications: ",
        absl::StrJoin(missing.begin(), missing.begin() + shown, ", "),
        missing.size() > shown ? ", ..." : ""));
  }
  switch (experiment) {
    case Experiment::kFraming:
      return FramingTables(rows, model_label);
    case Experiment::kAnchoring:
      return AnchoringTables(rows);
    case Experiment::kMathEq:
      return MathEqTables(rows);
    case Experiment::kAttribute:
      return AttributeTables(rows);
    case Experiment::kDeletion:
      return DeletionTables(rows);
    case Experiment::kGpt3Anchoring:
      return Gpt3AnchoringTables(rows);
    case Experiment::kGpt3Framing:
      return Gpt3FramingTables(rows);
  }
  return absl::InvalidArgumentError("unknown experiment");
}

std::string ToCsv(const ReportTable& table) {
  std::vector<std::string> header = table.key_columns;
  header.push_back("n");
  header.insert(header.end(), table.metric_columns.begin(),
                table.metric_columns.end());
  std::string out = absl::StrCat(absl::StrJoin(header, ","), "\n");
  for (const ReportRow& row : table.rows) {
    std::vector<std::string> cells;
    for (const std::string& k : row.keys) cells.push_back(Csv(k));
    cells.push_back(absl::StrCat(row.count));
    for (const Metric& m : row.metrics) {
      cells.push_back(FormatPercent(m.numerator, m.denominator));
    }
    absl::StrAppend(&out, absl::StrJoin(cells, ","), "\n");
  }
  return out;
}

std::string ToLongCsv(const ReportTable& table) {
  std::vector<std::string> header = table.key_columns;
  for (const char* c : {"metric", "numerator", "denominator", "percent"}) {
    header.push_back(c);
  }
  std::string out = absl::StrCat(absl::StrJoin(header, ","), "\n");
  for (const ReportRow& row : table.rows) {
    for (size_t i = 0; i < row.metrics.size(); ++i) {
      std::vector<std::string> cells;
      for (const std::string& k : row.keys) cells.push_back(Csv(k));
      const Metric& m = row.metrics[i];
      cells.push_back(table.metric_columns[i]);
      cells.push_back(absl::StrCat(m.numerator));
      cells.push_back(absl::StrCat(m.denominator));
      cells.push_back(m.percent().has_value()
                          ? absl::StrFormat("%.6f", *m.percent())
                          : "");
      absl::StrAppend(&out, absl::StrJoin(cells, ","), "\n");
    }
  }
  return out;
}

std::string ToJson(std::span<const ReportTable> tables) {
  ordered_json out = ordered_json::array();
  for (const ReportTable& t : tables) {
    ordered_json jt;
    jt["table"] = t.name;
    jt["key_columns"] = t.key_columns;
    ordered_json rows = ordered_json::array();
    for (const ReportRow& row : t.rows) {
      ordered_json jr;
      ordered_json keys = ordered_json::object();
      for (size_t i = 0; i < t.key_columns.size(); ++i) {
        keys[t.key_columns[i]] = row.keys[i];
      }
      jr["keys"] = std::move(keys);
      jr["n"] = row.count;
      ordered_json metrics = ordered_json::object();
      for (size_t i = 0; i < row.metrics.size(); ++i) {
        const Metric& m = row.metrics[i];
        metrics[t.metric_columns[i]] = {
            {"numerator", m.numerator},
            {"denominator", m.denominator},
            {"percent", m.percent().has_value() ? ordered_json(*m.percent())
                                                : ordered_json(nullptr)}};
      }
      jr["metrics"] = std::move(metrics);
      rows.push_back(std::move(jr));
    }
    jt["rows"] = std::move(rows);
    out.push_back(std::move(jt));
  }
  return out.dump(2) + "\n";
}

std::string SerializeSummary(const RunSummary& summary) {
  ordered_json j;
  j["corpus_sha256"] = summary.corpus_sha256;
  j["seed"] = summary.seed;
  j["backend_id"] = summary.backend_id;
  j["cardinalities"] = summary.cardinalities;
  if (!summary.filter_counts.empty()) {
    j["anchoring_filter_counts"] = summary.filter_counts;
  }
  return j.dump(2) + "\n";
}

absl::Status EmitReports(const std::filesystem::path& dir,
                         std::span<const ReportTable> tables,
                         const RunSummary& summary) {
  if (tables.empty()) {
    return absl::FailedPreconditionError("refusing to emit an empty report");
  }
  for (const ReportTable& t : tables) {
    absl::Status s = WriteFileAtomic(dir / (t.name + ".csv"), ToCsv(t));
    if (!s.ok()) return s;
    s = WriteFileAtomic(dir / (t.name + "_long.csv"), ToLongCsv(t));
    if (!s.ok()) return s;
  }
  absl::Status s = WriteFileAtomic(dir / "report.json", ToJson(tables));
  if (!s.ok()) return s;
  return WriteFileAtomic(dir / "summary.json", SerializeSummary(summary));
}

}  // namespace biasprobe
